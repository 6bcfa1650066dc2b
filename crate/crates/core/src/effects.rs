//! Study-level log response ratios and their delta-method variances, with
//! the small-sample bias correction as an alternative pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};
use crate::model::{validate_study, EffectRow, Pipeline, StudySummary};

/// Sign of the second-order term in the corrected variance.
///
/// `AsPrinted` subtracts the control-arm term, `Plus` adds it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSign {
    #[default]
    AsPrinted,
    Plus,
}

impl std::str::FromStr for VarianceSign {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(VarianceSign::AsPrinted),
            "plus" => Ok(VarianceSign::Plus),
            other => Err(MetaError::InvalidArgument(format!(
                "variance sign must be `as_printed` or `plus` (got `{other}`)"
            ))),
        }
    }
}

/// Delta-method variance `s_T²/(n_T X̄_T²) + s_C²/(n_C X̄_C²)`.
pub fn delta_variance(study: &StudySummary) -> f64 {
    study.treatment.cv2_over_n() + study.control.cv2_over_n()
}

/// Log response ratio `ln(X̄_T / X̄_C)` with its delta-method variance.
pub fn lrr(study: &StudySummary) -> Result<EffectRow> {
    let study = validate_study(study.clone())?;
    let variance = delta_variance(&study);
    if variance <= 0.0 {
        return Err(MetaError::ZeroVariance { study: study.id });
    }
    Ok(EffectRow {
        estimate: (study.treatment.mean / study.control.mean).ln(),
        variance,
        corrected: false,
        variance_floored: false,
    })
}

/// Bias-corrected log response ratio.
///
/// The estimate adds half the difference of the arms' `CV²/n` terms. The
/// variance adds half the difference of their squares (or half their sum with
/// [`VarianceSign::Plus`]). A nonpositive corrected variance falls back to the
/// delta-method variance and sets `variance_floored`.
pub fn lrr_bias_corrected(study: &StudySummary, sign: VarianceSign) -> Result<EffectRow> {
    let study = validate_study(study.clone())?;
    let ct = study.treatment.cv2_over_n();
    let cc = study.control.cv2_over_n();
    let base = ct + cc;
    if base <= 0.0 {
        return Err(MetaError::ZeroVariance { study: study.id });
    }
    let estimate = (study.treatment.mean / study.control.mean).ln() + 0.5 * (ct - cc);
    let second_order = match sign {
        VarianceSign::AsPrinted => ct * ct - cc * cc,
        VarianceSign::Plus => ct * ct + cc * cc,
    };
    let corrected = base + 0.5 * second_order;
    let (variance, variance_floored) = if corrected > 0.0 {
        (corrected, false)
    } else {
        (base, true)
    };
    Ok(EffectRow {
        estimate,
        variance,
        corrected: true,
        variance_floored,
    })
}

/// Effects for a whole meta-analysis through the chosen pipeline.
pub fn compute_effects(
    studies: &[StudySummary],
    pipeline: Pipeline,
    sign: VarianceSign,
) -> Result<Vec<EffectRow>> {
    studies
        .iter()
        .map(|s| match pipeline {
            Pipeline::Usual => lrr(s),
            Pipeline::Corrected => lrr_bias_corrected(s, sign),
        })
        .collect()
}
