//! Campaign driver, configuration, frame schedule and report emission.

pub mod campaign;
pub mod config;
pub mod schedule;
pub mod stats;

pub use campaign::{run_trial_campaign, CampaignResult, FrameRecord, FrameTruth};
pub use config::Config;
pub use schedule::FrameSchedule;
pub use stats::{CampaignReport, ErrorStats, ReportFormat};
