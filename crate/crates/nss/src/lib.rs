//! Wall-clock training, evaluation, factorial campaigns, effects analysis and
//! the file formats around them, on top of `nss-core`.

pub mod analysis;
pub mod campaign;
pub mod checkpoint;
mod error;
pub mod evaluate;
pub mod io;
pub mod plot;
pub mod report;
pub mod synth;
pub mod train;

pub use campaign::{replicate, run_campaign, CampaignData, CampaignFile, RunRecord, RunStatus};
pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use evaluate::{evaluate_model, FitReport, InitPolicy};
pub use io::{load_csv, write_csv, Columns};
pub use train::{train, LogRow, TrainOutcome};

pub use nss_core;
