//! Certified Gaussian-approximation bounds for random Gaussian neural
//! networks, output localization, and a Monte-Carlo simulator for checking
//! every bound against the actual network law.

pub mod activations;
pub mod bounds;
pub mod error;
pub mod gaussmath;
pub mod localize;
pub mod numeric;
pub mod recursion;
pub mod report;
pub mod simulate;

pub use activations::{ActivationKind, ActivationSpec, GrowthEnvelope, Polynomial};
pub use bounds::{BoundReport, Metric};
pub use error::{Error, Result};
pub use gaussmath::QuadratureScheme;
pub use localize::{LocalizationMode, LocalizationReport, Rect};
pub use recursion::{Architecture, LayerStats, Network};
pub use report::{Preset, TableSpec, ValidationReport};
pub use simulate::{EmpiricalEstimate, SampleBatch, SimulationSettings};
