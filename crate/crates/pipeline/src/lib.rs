//! Annotation pipeline: configuration, frame I/O, target preparation, the
//! novel-object bank, run reports, synthetic scenes and the search benchmark.

pub mod annotate;
pub mod bank;
pub mod bench;
pub mod config;
pub mod error;
pub mod frame;
pub mod prepare;
pub mod report;
pub mod synth;

pub use annotate::{run_annotate, RunReport};
pub use bank::{read_bank, write_bank, NovelObjectBank, NovelObjectTarget};
pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
pub use prepare::{nms, prepare_targets};
