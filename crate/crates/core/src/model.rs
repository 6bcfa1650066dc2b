//! Domain types shared by the estimators, the simulation engine and the
//! reporting layer. Everything here is an immutable value type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};

/// One arm of a two-arm study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub n: u32,
    pub mean: f64,
    pub sd: f64,
}

impl ArmSummary {
    pub fn new(n: u32, mean: f64, sd: f64) -> Self {
        Self { n, mean, sd }
    }

    /// Squared coefficient of variation divided by the arm size, `s² / (n X̄²)`.
    pub fn cv2_over_n(&self) -> f64 {
        (self.sd * self.sd) / (self.n as f64 * self.mean * self.mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    Treatment,
    Control,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treatment => "treatment",
            Arm::Control => "control",
        })
    }
}

/// Per-study two-arm summary: the unit of both real and simulated input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub id: String,
    pub treatment: ArmSummary,
    pub control: ArmSummary,
}

impl StudySummary {
    pub fn new(id: impl Into<String>, treatment: ArmSummary, control: ArmSummary) -> Self {
        Self {
            id: id.into(),
            treatment,
            control,
        }
    }

    pub fn total_size(&self) -> u32 {
        self.treatment.n + self.control.n
    }

    /// Effective sample size `n_T n_C / (n_T + n_C)`.
    pub fn effective_size(&self) -> f64 {
        let (t, c) = (self.treatment.n as f64, self.control.n as f64);
        t * c / (t + c)
    }
}

/// Checks every invariant a study must satisfy before an LRR can be formed.
pub fn validate_study(study: StudySummary) -> Result<StudySummary> {
    for (arm, summary) in [
        (Arm::Treatment, &study.treatment),
        (Arm::Control, &study.control),
    ] {
        if !summary.mean.is_finite() || !summary.sd.is_finite() {
            return Err(MetaError::NonFinite {
                study: study.id.clone(),
                arm,
            });
        }
        if summary.n < 2 {
            return Err(MetaError::ArmTooSmall {
                study: study.id.clone(),
                arm,
                n: summary.n,
            });
        }
        if summary.sd < 0.0 {
            return Err(MetaError::NegativeSd {
                study: study.id.clone(),
                arm,
                sd: summary.sd,
            });
        }
        if summary.mean <= 0.0 {
            return Err(MetaError::NonPositiveMean {
                study: study.id.clone(),
                arm,
                mean: summary.mean,
            });
        }
    }
    Ok(study)
}

/// A study's log response ratio and its within-study variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub estimate: f64,
    pub variance: f64,
    pub corrected: bool,
    pub variance_floored: bool,
}

impl EffectRow {
    /// An uncorrected row built directly from an estimate and its variance.
    pub fn new(estimate: f64, variance: f64) -> Self {
        Self {
            estimate,
            variance,
            corrected: false,
            variance_floored: false,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Builds uncorrected rows from parallel slices; handy in tests and examples.
pub fn effects_from(estimates: &[f64], variances: &[f64]) -> Vec<EffectRow> {
    estimates
        .iter()
        .zip(variances)
        .map(|(&y, &v)| EffectRow::new(y, v))
        .collect()
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(self.label())
            }
        }

        impl FromStr for $name {
            type Err = MetaError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(MetaError::InvalidArgument(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum! {
    /// Point estimators of the between-study variance.
    Tau2Method { Dl => "DL", Reml => "REML", Mp => "MP", J => "J" }
}

named_enum! {
    /// Interval estimators of the between-study variance.
    Tau2IntervalMethod { Qp => "QP", Bj => "BJ", J => "J", Pl => "PL" }
}

named_enum! {
    /// Point estimators of the overall effect.
    PointMethod { Dl => "DL", Reml => "REML", Mp => "MP", J => "J", Ssw => "SSW" }
}

named_enum! {
    /// Interval estimators of the overall effect.
    CiMethod {
        IvDl => "IV-DL",
        IvReml => "IV-REML",
        IvMp => "IV-MP",
        IvJ => "IV-J",
        Hksj => "HKSJ",
        HksjMp => "HKSJ-MP",
        SswMp => "SSW-MP",
    }
}

named_enum! {
    /// Which study-level effect pipeline produced a set of effects.
    Pipeline { Usual => "usual", Corrected => "corrected" }
}

impl CiMethod {
    pub fn iv(method: Tau2Method) -> Self {
        match method {
            Tau2Method::Dl => CiMethod::IvDl,
            Tau2Method::Reml => CiMethod::IvReml,
            Tau2Method::Mp => CiMethod::IvMp,
            Tau2Method::J => CiMethod::IvJ,
        }
    }
}

impl PointMethod {
    pub fn iv(method: Tau2Method) -> Self {
        match method {
            Tau2Method::Dl => PointMethod::Dl,
            Tau2Method::Reml => PointMethod::Reml,
            Tau2Method::Mp => PointMethod::Mp,
            Tau2Method::J => PointMethod::J,
        }
    }
}

/// Point estimate of τ² with solver metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau2Estimate {
    pub value: f64,
    pub method: Tau2Method,
    /// The estimator hit the zero boundary.
    pub truncated: bool,
    pub iterations: u32,
    pub converged: bool,
}

impl Tau2Estimate {
    /// A closed-form estimate; truncation happens when `raw` is negative.
    pub(crate) fn closed_form(method: Tau2Method, raw: f64) -> Self {
        Self {
            value: raw.max(0.0),
            method,
            truncated: raw <= 0.0,
            iterations: 0,
            converged: true,
        }
    }

    /// A user-supplied τ² (for example a fixed-effect analysis with `0`).
    pub fn fixed(method: Tau2Method, value: f64) -> Self {
        Self {
            value,
            method,
            truncated: value == 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

/// Upper endpoint of a τ² interval; the search may stop at a cap without
/// meeting its defining equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UpperBound {
    Finite(f64),
    Unbounded,
}

impl UpperBound {
    pub fn value(self) -> f64 {
        match self {
            UpperBound::Finite(v) => v,
            UpperBound::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, UpperBound::Unbounded)
    }
}

impl fmt::Display for UpperBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpperBound::Finite(v) => fmt::Display::fmt(v, f),
            UpperBound::Unbounded => f.pad("inf"),
        }
    }
}

/// Confidence interval for τ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau2Interval {
    pub lo: f64,
    pub hi: UpperBound,
    pub method: Tau2IntervalMethod,
    pub level: f64,
    /// Lower endpoint truncated at 0.
    pub lo_truncated: bool,
    /// Upper endpoint truncated at 0.
    pub hi_truncated: bool,
}

impl Tau2Interval {
    /// Endpoints included; an unbounded upper end covers everything above `lo`.
    pub fn contains(&self, tau2: f64) -> bool {
        self.lo <= tau2 && tau2 <= self.hi.value()
    }
}

/// Confidence interval for the overall effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectInterval {
    pub lo: f64,
    pub hi: f64,
    pub method: CiMethod,
    pub level: f64,
}

impl EffectInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Pooled overall effect with its weights and (optionally) an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub estimate: f64,
    pub variance: f64,
    /// Normalized weights, summing to one.
    pub weights: Vec<f64>,
    pub tau2_used: Tau2Estimate,
    pub interval: Option<EffectInterval>,
}

impl PooledResult {
    pub fn with_interval(mut self, interval: EffectInterval) -> Self {
        self.interval = Some(interval);
        self
    }
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// True overall log response ratio.
    pub lambda: f64,
    pub tau2: f64,
    /// Number of studies.
    pub k: usize,
    /// Total size of every study, split equally between the arms.
    pub n_total: usize,
    pub mu_control: f64,
    pub sigma2_t: f64,
    pub sigma2_c: f64,
}

impl Scenario {
    /// A cell with the control mean and both arm variances fixed at 1.
    pub fn new(lambda: f64, tau2: f64, k: usize, n_total: usize) -> Self {
        Self {
            lambda,
            tau2,
            k,
            n_total,
            mu_control: 1.0,
            sigma2_t: 1.0,
            sigma2_c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MetaError::Config(msg));
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite (got {})", self.lambda));
        }
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return bad(format!(
                "tau2 must be finite and nonnegative (got {})",
                self.tau2
            ));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2 (got {})", self.k));
        }
        if self.n_total < 4 || !self.n_total.is_multiple_of(2) {
            return bad(format!(
                "n must be even and at least 4 (got {})",
                self.n_total
            ));
        }
        for (name, v) in [
            ("mu_control", self.mu_control),
            ("sigma2_t", self.sigma2_t),
            ("sigma2_c", self.sigma2_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive (got {v})"));
            }
        }
        Ok(())
    }

    pub fn arm_size(&self) -> u32 {
        (self.n_total / 2) as u32
    }
}
