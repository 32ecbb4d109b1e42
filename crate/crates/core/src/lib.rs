//! Conformal selection of test candidates whose unobserved responses land in a
//! multi-condition target: unions of open intervals for scalar responses, and
//! shells or unions of balls for vector responses. Selection controls the
//! false discovery rate in finite samples through a global Benjamini–Hochberg
//! pass over one conformal p-value per (candidate, condition) pair.
//!
//! The crate also carries the baselines used for comparison, the synthetic
//! data generators and a seeded Monte Carlo harness that estimates FDR and
//! power over many replications.
//!
//! ```
//! use mccs_core::predictor::PredictorConfig;
//! use mccs_core::pvalue::PValueOptions;
//! use mccs_core::rng::TieBreakStream;
//! use mccs_core::select::mccs;
//! use mccs_core::simgen::{gen_univariate, split_8_1_1, SettingSpec};
//! use mccs_core::{FeatureSet, Interval, TargetSpec};
//!
//! let data = gen_univariate(&SettingSpec::new(1), 600, 7, 0)?;
//! let (train, cal, test) = split_8_1_1(&data, 7, 0)?;
//! let test = FeatureSet::new(test.features().clone())?;
//! // y < -2 or y > 2
//! let target = TargetSpec::new(vec![Interval::below(-2.0)?, Interval::above(2.0)?])?;
//! let sel = mccs(
//!     &train,
//!     &cal,
//!     &test,
//!     &target,
//!     0.2,
//!     &PredictorConfig::default(),
//!     &PValueOptions::default(),
//!     &TieBreakStream::new(7, 0),
//! )?;
//! for &j in &sel.result.samples {
//!     assert!(j < test.len());
//! }
//! # Ok::<(), mccs_core::Error>(())
//! ```

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod pvalue;
pub mod region;
pub mod rng;
pub mod score;
pub mod select;
pub mod simgen;
pub mod target;

pub use data::{FeatureSet, LabeledSet, Matrix};
pub use error::{Error, Result};
pub use region::{Ball, Boundary, RegionSpec};
pub use select::{Condition, SelectionResult, Target};
pub use target::{Interval, TargetSpec};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
