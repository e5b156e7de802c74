use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use distsync::bounds::{crlb_cfo_variance, crlb_sto_variance};
use distsync::dbfsim::{sweep_requirements, write_sweep_csv};
use distsync::harness::campaign::sync_config;
use distsync::harness::{run_trial_campaign, CampaignReport, Config};
use distsync::iq::{read_iq, write_iq};
use distsync::preamble::build_preamble;
use distsync::receiver::{correlation_trace, synchronize, write_trace_csv, SyncEstimate};
use distsync::{ComplexSignal, Error, Result};

#[derive(Parser)]
#[command(
    name = "distsync",
    version,
    about = "Preamble-based CFO and timing synchronization simulator"
)]
struct Cli {
    /// Config file of key=value lines, or `defaults`.
    #[arg(long, global = true, default_value = "defaults")]
    config: String,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a frame-level campaign and report residual statistics.
    Campaign,
    /// Print the CFO and STO bounds for the configured preamble and SNR.
    Crlb,
    /// Sweep beamforming SINR over group sizes and error levels (CSV).
    DbfSweep,
    /// Synchronize against a raw IQ file.
    Detect {
        input: PathBuf,
        /// Noise power for the gamma-mode threshold.
        #[arg(long, default_value_t = 0.0)]
        noise_power: f64,
        /// Dump the correlation trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write the configured preamble as a raw IQ file (requires --out).
    GenPreamble {
        /// Zero samples appended after the preamble; defaults to one
        /// preamble length.
        #[arg(long)]
        pad: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_rows(rows: &[(&str, String)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

/// `<dir>/<stem>_<suffix>.csv` next to `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Campaign => {
            if cfg.ekf.enabled {
                eprintln!("frames run sequentially (EKF tracking carries state between frames)");
            } else {
                eprintln!("frames run in parallel (tracking disabled)");
            }
            let result = run_trial_campaign(&cfg)?;
            let report = &result.report;
            match cli.format {
                Format::Text => emit(out, &report.text()),
                Format::Csv => {
                    emit(out, &report.summary_csv()?)?;
                    if let Some(p) = out {
                        for (suffix, stats) in
                            [("cfo_hist", &report.cfo), ("sto_hist", &report.sto)]
                        {
                            let path = sibling(p, suffix);
                            fs::write(&path, CampaignReport::histogram_csv(stats)?)
                                .map_err(|e| io_error(&path, e))?;
                        }
                    }
                    Ok(())
                }
            }
        }
        Command::Crlb => {
            let inputs = cfg.crlb_inputs()?;
            let ts = inputs.ts();
            let cfo_var = crlb_cfo_variance(&inputs);
            let sto_var = crlb_sto_variance(&inputs);
            let text = match cli.format {
                Format::Text => format!(
                    "T_est {:.3} ms, SNR {:.1} dB, Ts {} us\n\
                     CFO std. dev. [Hz]   {:.1}\n\
                     STO std. dev. [Ts]   {:.4}\n",
                    inputs.t_est() * 1e3,
                    10.0 * inputs.snr_sync().log10(),
                    ts * 1e6,
                    cfo_var.sqrt(),
                    sto_var.sqrt() / ts
                ),
                Format::Csv => csv_rows(&[
                    ("t_est_s", inputs.t_est().to_string()),
                    ("snr_linear", inputs.snr_sync().to_string()),
                    ("ts_s", ts.to_string()),
                    ("cfo_variance_hz2", cfo_var.to_string()),
                    ("cfo_std_hz", cfo_var.sqrt().to_string()),
                    ("sto_variance_s2", sto_var.to_string()),
                    ("sto_std_ts", (sto_var.sqrt() / ts).to_string()),
                ]),
            };
            emit(out, &text)
        }
        Command::DbfSweep => {
            let d = &cfg.dbf;
            let rows = sweep_requirements(
                &d.scenario,
                &d.group_sizes,
                &d.error_levels,
                d.kind,
                cfg.seed,
            )?;
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).map_err(|e| Error::Report(e.to_string()))?;
            emit(out, &String::from_utf8(buf).expect("csv output is utf-8"))
        }
        Command::Detect {
            input,
            noise_power,
            trace,
        } => {
            let r = read_iq(&input)?;
            if (r.sample_duration() - cfg.channel.sample_duration()).abs()
                > 1e-9 * r.sample_duration()
            {
                eprintln!(
                    "note: file sample rate {} Hz differs from config {} Hz; using the file's",
                    r.sample_rate(),
                    cfg.channel.sample_rate_hz
                );
            }
            if let Some(path) = trace {
                let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
                write_trace_csv(&correlation_trace(r.samples(), &cfg.preamble), file)
                    .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
            }
            let sync = sync_config(&cfg)?;
            let outcome = synchronize(&r, &sync, None, noise_power)?;
            let rows: Vec<(&str, String)> = match outcome.estimate {
                SyncEstimate::Missed { peak_value } => {
                    vec![
                        ("detected", "false".into()),
                        ("peak_value", peak_value.to_string()),
                    ]
                }
                SyncEstimate::Locked(s) => {
                    let cfo_hz = s.eps_f_hat / (2.0 * std::f64::consts::PI * r.sample_duration());
                    vec![
                        ("detected", "true".into()),
                        ("d_hat", s.d_hat.to_string()),
                        ("zeta_hat_ts", s.zeta_hat.to_string()),
                        ("delay_ts", (s.d_hat as f64 + s.zeta_hat).to_string()),
                        ("eps_f_hat_rad", s.eps_f_hat.to_string()),
                        ("cfo_hz", cfo_hz.to_string()),
                        ("phi_hat_rad", s.phi_hat.to_string()),
                        ("peak_value", s.peak_value.to_string()),
                    ]
                }
            };
            let text = match cli.format {
                Format::Csv => csv_rows(&rows),
                Format::Text => rows.iter().map(|(k, v)| format!("{k:<14}{v}\n")).collect(),
            };
            emit(out, &text)
        }
        Command::GenPreamble { pad } => {
            let path = out
                .ok_or_else(|| Error::InvalidParameter("gen-preamble needs --out <path>".into()))?;
            let mut samples = build_preamble(&cfg.preamble);
            let pad = pad.unwrap_or(samples.len());
            samples.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), pad));
            let signal = ComplexSignal::new(samples, cfg.channel.sample_duration())?;
            let spec = &cfg.preamble;
            write_iq(
                path,
                &signal,
                &format!(
                    "ZC preamble n_zc={} root={} m_reps={} pad={pad}",
                    spec.n_zc(),
                    spec.root(),
                    spec.m_reps()
                ),
            )
        }
    }
}
