use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

/// Residual thresholds for the CFO table, Hz.
pub const CFO_THRESHOLDS_HZ: [f64; 3] = [5.0, 10.0, 15.0];
pub const CFO_BIN_WIDTH_HZ: f64 = 2.5;
/// Residual thresholds for the STO table, units of Ts.
pub const STO_THRESHOLDS_TS: [f64; 6] = [1.0 / 16.0, 0.125, 0.25, 0.5, 1.0, 2.0];
pub const STO_BIN_WIDTH_TS: f64 = 0.125;

/// Summary of a residual-error sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    /// Population standard deviation (divides by `n`).
    pub std_dev: f64,
    /// `(threshold, P(|x| > threshold))`, thresholds ascending.
    pub tail_probs: Vec<(f64, f64)>,
    pub n_samples: usize,
    /// `(bin_center, count)` with centers at multiples of `bin_width`,
    /// contiguous from the lowest to the highest occupied bin.
    pub histogram: Vec<(f64, usize)>,
    pub bin_width: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64], thresholds: &[f64], bin_width: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyStats);
        }
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite residual {x}")));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_dev = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();

        let mut thresholds = thresholds.to_vec();
        thresholds.sort_by(f64::total_cmp);
        let tail_probs = thresholds
            .iter()
            .map(|&t| (t, samples.iter().filter(|x| x.abs() > t).count() as f64 / n))
            .collect();

        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for x in samples {
            *counts.entry((x / bin_width).round() as i64).or_default() += 1;
        }
        let lo = *counts.keys().next().expect("non-empty");
        let hi = *counts.keys().next_back().expect("non-empty");
        let histogram = (lo..=hi)
            .map(|k| (k as f64 * bin_width, counts.get(&k).copied().unwrap_or(0)))
            .collect();

        Ok(Self {
            mean,
            std_dev,
            tail_probs,
            n_samples: samples.len(),
            histogram,
            bin_width,
        })
    }

    /// `metric,value` rows, each metric name prefixed with `prefix`.
    fn summary_rows(&self, prefix: &str) -> Vec<(String, String)> {
        let mut rows = vec![
            (format!("{prefix}mean"), self.mean.to_string()),
            (format!("{prefix}std_dev"), self.std_dev.to_string()),
            (format!("{prefix}n_samples"), self.n_samples.to_string()),
            (format!("{prefix}bin_width"), self.bin_width.to_string()),
        ];
        for (t, p) in &self.tail_probs {
            rows.push((format!("{prefix}tail_prob@{t}"), p.to_string()));
        }
        rows
    }

    /// Rebuilds stats from `metric,value` pairs carrying `prefix` and a
    /// histogram.
    pub fn from_rows(
        rows: &[(String, String)],
        prefix: &str,
        histogram: Vec<(f64, usize)>,
    ) -> Result<Self> {
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Report(format!("bad number {s:?}")))
        };
        let (mut mean, mut std_dev, mut n_samples, mut bin_width) = (None, None, None, None);
        let mut tail_probs = Vec::new();
        for (k, v) in rows {
            let Some(name) = k.strip_prefix(prefix) else {
                continue;
            };
            match name {
                "mean" => mean = Some(num(v)?),
                "std_dev" => std_dev = Some(num(v)?),
                "n_samples" => {
                    n_samples = Some(
                        v.parse::<usize>()
                            .map_err(|_| Error::Report(format!("bad count {v:?}")))?,
                    )
                }
                "bin_width" => bin_width = Some(num(v)?),
                other => match other.strip_prefix("tail_prob@") {
                    Some(t) => tail_probs.push((num(t)?, num(v)?)),
                    None => return Err(Error::Report(format!("unknown metric {k:?}"))),
                },
            }
        }
        let missing = |m: &str| Error::Report(format!("missing metric {prefix}{m}"));
        let stats = Self {
            mean: mean.ok_or_else(|| missing("mean"))?,
            std_dev: std_dev.ok_or_else(|| missing("std_dev"))?,
            tail_probs,
            n_samples: n_samples.ok_or_else(|| missing("n_samples"))?,
            histogram,
            bin_width: bin_width.ok_or_else(|| missing("bin_width"))?,
        };
        if stats.histogram.iter().map(|(_, c)| c).sum::<usize>() != stats.n_samples {
            return Err(Error::Report(
                "histogram counts do not sum to n_samples".into(),
            ));
        }
        Ok(stats)
    }

    pub fn write_histogram_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_center", "count"])?;
        for (c, n) in &self.histogram {
            w.write_record(&[c.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_histogram_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, usize)>> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| Error::Report(e.to_string()))?;
        if headers != vec!["bin_center", "count"] {
            return Err(Error::Report(format!(
                "unexpected histogram header {headers:?}"
            )));
        }
        r.records()
            .map(|rec| {
                let rec = rec.map_err(|e| Error::Report(e.to_string()))?;
                let c = rec[0]
                    .parse()
                    .map_err(|_| Error::Report(format!("bad bin center {:?}", &rec[0])))?;
                let n = rec[1]
                    .parse()
                    .map_err(|_| Error::Report(format!("bad count {:?}", &rec[1])))?;
                Ok((c, n))
            })
            .collect()
    }
}

/// Residual statistics for one campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    /// Residual CFO, Hz.
    pub cfo: ErrorStats,
    /// Residual STO, units of Ts.
    pub sto: ErrorStats,
    pub frames: usize,
    pub missed: usize,
}

pub const CFO_PREFIX: &str = "residual_cfo_hz.";
pub const STO_PREFIX: &str = "residual_sto_ts.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl CampaignReport {
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut rows = vec![
            ("frames".to_string(), self.frames.to_string()),
            ("missed_detections".to_string(), self.missed.to_string()),
        ];
        rows.extend(self.cfo.summary_rows(CFO_PREFIX));
        rows.extend(self.sto.summary_rows(STO_PREFIX));
        let io = |e: csv::Error| Error::Report(e.to_string());
        w.write_record(["metric", "value"]).map_err(io)?;
        for (k, v) in &rows {
            w.write_record([k, v]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses a summary CSV and the two histogram CSVs back into a report.
    pub fn from_csv(summary: &str, cfo_hist: &str, sto_hist: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(summary.as_bytes());
        let headers = r.headers().map_err(|e| Error::Report(e.to_string()))?;
        if headers != vec!["metric", "value"] {
            return Err(Error::Report(format!(
                "unexpected summary header {headers:?}"
            )));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Report(e.to_string()))?;
            rows.push((rec[0].to_string(), rec[1].to_string()));
        }
        let count = |name: &str| -> Result<usize> {
            rows.iter()
                .find(|(k, _)| k == name)
                .ok_or_else(|| Error::Report(format!("missing metric {name}")))?
                .1
                .parse()
                .map_err(|_| Error::Report(format!("bad value for {name}")))
        };
        let frames = count("frames")?;
        let missed = count("missed_detections")?;
        let scoped: Vec<_> = rows
            .iter()
            .filter(|(k, _)| k != "frames" && k != "missed_detections")
            .cloned()
            .collect();
        if let Some((k, _)) = scoped
            .iter()
            .find(|(k, _)| !k.starts_with(CFO_PREFIX) && !k.starts_with(STO_PREFIX))
        {
            return Err(Error::Report(format!("unknown metric {k:?}")));
        }
        Ok(Self {
            cfo: ErrorStats::from_rows(
                &scoped,
                CFO_PREFIX,
                ErrorStats::read_histogram_csv(cfo_hist.as_bytes())?,
            )?,
            sto: ErrorStats::from_rows(
                &scoped,
                STO_PREFIX,
                ErrorStats::read_histogram_csv(sto_hist.as_bytes())?,
            )?,
            frames,
            missed,
        })
    }

    pub fn histogram_csv(stats: &ErrorStats) -> Result<String> {
        let mut buf = Vec::new();
        stats
            .write_histogram_csv(&mut buf)
            .map_err(|e| Error::Report(e.to_string()))?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Two tables with the row labels of the hardware report.
    pub fn text(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, label: &str, v: f64| {
            writeln!(out, "{label:<26}{v:>10.3}").unwrap();
        };
        writeln!(out, "Residual CFO").unwrap();
        row(&mut out, "Mean [Hz]", self.cfo.mean);
        row(&mut out, "Std. Dev. [Hz]", self.cfo.std_dev);
        for (t, p) in &self.cfo.tail_probs {
            row(&mut out, &format!("Tail prob. at {t} Hz"), *p);
        }
        writeln!(out).unwrap();
        writeln!(out, "Residual STO").unwrap();
        row(&mut out, "Mean [Ts]", self.sto.mean);
        row(&mut out, "Std. Dev. [Ts]", self.sto.std_dev);
        for (t, p) in &self.sto.tail_probs {
            row(&mut out, &format!("Tail prob. at {}", ts_label(*t)), *p);
        }
        writeln!(out).unwrap();
        writeln!(
            out,
            "{} frames, {} detected, {} missed detections (excluded). Std. Dev. is the population value.",
            self.frames,
            self.frames - self.missed,
            self.missed
        )
        .unwrap();
        out
    }
}

/// `Ts/16`, `Ts`, `2Ts`, or a decimal multiple.
fn ts_label(t: f64) -> String {
    if t == 1.0 {
        return "Ts".into();
    }
    if t > 1.0 && t.fract() == 0.0 {
        return format!("{t}Ts");
    }
    let inv = 1.0 / t;
    if inv.fract() == 0.0 {
        return format!("Ts/{inv}");
    }
    format!("{t}Ts")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_stats() {
        let s = ErrorStats::from_samples(&[-1.0, 0.0, 1.0], &[0.5], 1.0).unwrap();
        assert_eq!(s.mean, 0.0);
        assert!((s.std_dev - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.tail_probs[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.histogram, vec![(-1.0, 1), (0.0, 1), (1.0, 1)]);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(
            ErrorStats::from_samples(&[], &[1.0], 1.0),
            Err(Error::EmptyStats)
        ));
    }

    #[test]
    fn tails_non_increasing_and_histogram_conserves() {
        let xs: Vec<f64> = (0..500)
            .map(|i| ((i * 37) % 101) as f64 / 7.0 - 7.0)
            .collect();
        let s = ErrorStats::from_samples(&xs, &[10.0, 1.0, 5.0, 2.5], 2.5).unwrap();
        for w in s.tail_probs.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 >= w[1].1);
        }
        assert_eq!(s.histogram.iter().map(|h| h.1).sum::<usize>(), 500);
        for (c, _) in &s.histogram {
            assert_eq!((c / 2.5).fract(), 0.0);
        }
    }

    #[test]
    fn centre_bin_spans_half_width() {
        let s =
            ErrorStats::from_samples(&[0.06, -0.06, 0.07], &STO_THRESHOLDS_TS, STO_BIN_WIDTH_TS)
                .unwrap();
        assert_eq!(s.histogram, vec![(0.0, 2), (0.125, 1)]);
    }

    fn report() -> CampaignReport {
        let cfo: Vec<f64> = (0..100)
            .map(|i| (i as f64 * 0.731).sin() * 9.0 + 0.1)
            .collect();
        let sto: Vec<f64> = (0..100).map(|i| (i as f64 * 1.37).cos() * 0.3).collect();
        CampaignReport {
            cfo: ErrorStats::from_samples(&cfo, &CFO_THRESHOLDS_HZ, CFO_BIN_WIDTH_HZ).unwrap(),
            sto: ErrorStats::from_samples(&sto, &STO_THRESHOLDS_TS, STO_BIN_WIDTH_TS).unwrap(),
            frames: 103,
            missed: 3,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rep = report();
        let back = CampaignReport::from_csv(
            &rep.summary_csv().unwrap(),
            &CampaignReport::histogram_csv(&rep.cfo).unwrap(),
            &CampaignReport::histogram_csv(&rep.sto).unwrap(),
        )
        .unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn csv_rejects_unknown_metric() {
        let rep = report();
        let summary = rep.summary_csv().unwrap() + "bogus,1\n";
        let h = CampaignReport::histogram_csv(&rep.cfo).unwrap();
        assert!(CampaignReport::from_csv(&summary, &h, &h).is_err());
    }

    #[test]
    fn text_uses_table_labels() {
        let text = report().text();
        for label in [
            "Mean [Hz]",
            "Std. Dev. [Hz]",
            "Tail prob. at 5 Hz",
            "Tail prob. at 10 Hz",
            "Tail prob. at 15 Hz",
            "Mean [Ts]",
            "Std. Dev. [Ts]",
            "Tail prob. at Ts/16",
            "Tail prob. at Ts/8",
            "Tail prob. at Ts/4",
            "Tail prob. at Ts/2",
            "Tail prob. at Ts\u{20}",
            "Tail prob. at 2Ts",
            "3 missed",
            "population",
        ] {
            assert!(text.contains(label), "missing {label:?} in\n{text}");
        }
    }
}
