//! Config files, Monte-Carlo campaigns and CSV export on top of `netvar-core`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;

pub use config::{parse_network, ExperimentConfig, SetupConfig, Sweep};
pub use error::{Error, Result};
pub use experiment::{
    reproduce_case_study, run_analytic, run_montecarlo, CaseStudy, Overrides, ResultBundle, SetupSummary, SweepPoint,
};
pub use export::{export_plotdata, PlotData};
