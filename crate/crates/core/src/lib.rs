//! Simulation and statistical verification of multifractional Brownian
//! motion and its local times.
//!
//! The crate root re-exports the types shared by the CLI, benches and tests;
//! the algorithms live in the modules.

pub mod ensemble;
pub mod error;
pub mod harness;
pub mod hurst;
pub mod lass;
pub mod localtime;
pub mod numeric;
pub mod path;
pub mod regularity;
pub mod stats;
pub mod synth;

pub use ensemble::{run_replicas, split_seed, Ensemble};
pub use error::{Error, Result, Violation};
pub use harness::{parse_config, run_experiment, ExperimentConfig, Report, Statistic, Verdict};
pub use hurst::{HurstFunction, HurstKind};
pub use lass::{ScalingPair, TestFunction};
pub use localtime::{Level, LocalTimeField, XGrid};
pub use path::{PathMeta, Representation, SamplePath, TimeGrid};
pub use regularity::{Envelope, HolderEstimate, ModulusCurve, VGrouping};
pub use synth::{FbmMethod, SynthSettings, Synthesizer};
