//! Projected-least-squares state tomography with node-local 2-design
//! measurements on distributed quantum registers.

pub mod analysis;
pub mod designs;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod matcore;
pub mod measurement;
pub mod netharness;
pub mod partition;
pub mod states;

pub use analysis::{BoundParams, FitResult, ScalingRecord};
pub use designs::{NodePovm, ProjectiveDesign};
pub use error::{Error, Result};
pub use estimator::{LsEstimate, PlsEstimate};
pub use experiment::{Ensemble, ExperimentConfig, ExperimentRow};
pub use matcore::{ComplexMatrix, DensityMatrix, PureState, C64};
pub use measurement::{FrequencyTable, OutcomeKey, TableMode};
pub use netharness::{OutcomeRecord, SessionConfig, Transport};
pub use partition::NodePartition;
pub use states::{NoiseModel, RngSeed};
