//! Random-effects meta-analysis of the log response ratio (LRR).
//!
//! The crate covers the whole path from two-arm study summaries to pooled
//! estimates:
//!
//! * [`effects`]: study-level LRR and its delta-method variance, optionally
//!   with the small-sample bias correction;
//! * [`heterogeneity`]: DerSimonian–Laird, REML, Mandel–Paule and Jackson
//!   estimators of the between-study variance τ²;
//! * [`tau_intervals`]: Q-profile, Biggerstaff–Jackson, Jackson and profile
//!   likelihood intervals for τ², built on the exact law of quadratic forms
//!   in [`quadform`];
//! * [`pooling`]: inverse-variance and sample-size-weighted overall effects
//!   with normal, HKSJ and t intervals;
//! * [`analysis`]: all of the above on one data set;
//! * [`simgrid`] and [`report`]: a deterministic, parallel Monte Carlo
//!   harness for bias and coverage, with CSV and SVG output.
//!
//! ```
//! use metaratio::analysis::analyze;
//! use metaratio::effects::VarianceSign;
//! use metaratio::model::{ArmSummary, Pipeline, StudySummary, Tau2Method};
//!
//! let studies = vec![
//!     StudySummary::new("a", ArmSummary::new(12, 3.1, 1.2), ArmSummary::new(12, 2.2, 0.9)),
//!     StudySummary::new("b", ArmSummary::new(20, 2.4, 1.0), ArmSummary::new(18, 2.0, 1.1)),
//!     StudySummary::new("c", ArmSummary::new(8, 4.0, 2.2), ArmSummary::new(9, 2.1, 1.0)),
//! ];
//! let a = analyze(&studies, Pipeline::Usual, VarianceSign::AsPrinted, 0.95).unwrap();
//! let tau2 = a.tau2(Tau2Method::Reml).as_ref().unwrap();
//! assert!(tau2.value >= 0.0);
//! ```

pub mod analysis;
pub mod cli;
pub mod distributions;
pub mod effects;
pub mod error;
pub mod heterogeneity;
pub mod model;
pub mod pooling;
pub mod quadform;
pub mod report;
mod roots;
pub mod simgrid;
pub mod tau_intervals;

pub use error::{MetaError, Result};
