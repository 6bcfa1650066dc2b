//! Overall-effect estimators: inverse-variance (IV) weighted means for any τ²
//! estimate, the sample-size-weighted (SSW) mean, and their intervals.

use crate::distributions::{normal_quantile, t_quantile};
use crate::effects::delta_variance;
use crate::error::{MetaError, Result};
use crate::heterogeneity::ensure_k;
use crate::model::{
    CiMethod, EffectInterval, EffectRow, PooledResult, StudySummary, Tau2Estimate, Tau2Method,
};

fn two_sided(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(0.5 + 0.5 * level)
    } else {
        Err(MetaError::Domain(format!(
            "confidence level must lie in (0, 1) (got {level})"
        )))
    }
}

fn normalize(raw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(MetaError::DegenerateWeights(
            "weights must have a positive finite sum",
        ));
    }
    Ok((raw.iter().map(|w| w / total).collect(), total))
}

fn weighted_mean(effects: &[EffectRow], weights: &[f64]) -> f64 {
    effects
        .iter()
        .zip(weights)
        .map(|(e, w)| w * e.estimate)
        .sum()
}

/// IV random-effects mean with weights `1/(v_i² + τ̂²)` and variance `1/Σw`.
pub fn pool_iv(effects: &[EffectRow], tau2: Tau2Estimate) -> Result<PooledResult> {
    ensure_k(effects, 1)?;
    let raw: Vec<f64> = effects
        .iter()
        .map(|e| 1.0 / (e.variance + tau2.value))
        .collect();
    let (weights, total) = normalize(&raw)?;
    Ok(PooledResult {
        estimate: weighted_mean(effects, &weights),
        variance: 1.0 / total,
        weights,
        tau2_used: tau2,
        interval: None,
    })
}

/// SSW mean, weighting by effective sizes `ñ = n_T n_C / (n_T + n_C)`.
///
/// Its variance is `Σñ²(v² + τ̂²)/(Σñ)²`, where `v²` is always the
/// delta-method variance recomputed from the study summaries.
pub fn pool_ssw(
    effects: &[EffectRow],
    studies: &[StudySummary],
    tau2_mp: Tau2Estimate,
) -> Result<PooledResult> {
    ensure_k(effects, 1)?;
    if effects.len() != studies.len() {
        return Err(MetaError::DimensionMismatch {
            left: effects.len(),
            right: studies.len(),
        });
    }
    let sizes: Vec<f64> = studies.iter().map(StudySummary::effective_size).collect();
    let (weights, _) = normalize(&sizes)?;
    let variance = weights
        .iter()
        .zip(studies)
        .map(|(w, s)| w * w * (delta_variance(s) + tau2_mp.value))
        .sum();
    Ok(PooledResult {
        estimate: weighted_mean(effects, &weights),
        variance,
        weights,
        tau2_used: tau2_mp,
        interval: None,
    })
}

/// Normal-theory interval `estimate ± z·√variance`; labelled by the τ² method
/// behind the weights.
pub fn ci_iv_normal(pooled: &PooledResult, level: f64) -> Result<EffectInterval> {
    let half = normal_quantile(two_sided(level)?)? * pooled.variance.sqrt();
    Ok(EffectInterval {
        lo: pooled.estimate - half,
        hi: pooled.estimate + half,
        method: CiMethod::iv(pooled.tau2_used.method),
        level,
    })
}

/// HKSJ interval: weighted residual variance with `t_{K-1}` critical values.
/// Defined for DL (HKSJ) and MP (HKSJ-MP) estimates of τ².
pub fn ci_hksj(effects: &[EffectRow], tau2: Tau2Estimate, level: f64) -> Result<EffectInterval> {
    ensure_k(effects, 2)?;
    let method = match tau2.method {
        Tau2Method::Dl => CiMethod::Hksj,
        Tau2Method::Mp => CiMethod::HksjMp,
        other => {
            return Err(MetaError::InvalidArgument(format!(
                "HKSJ intervals use DL or MP estimates of tau2 (got {other})"
            )))
        }
    };
    let p = two_sided(level)?;
    let pooled = pool_iv(effects, tau2)?;
    let k = effects.len() as f64;
    // normalized weights: Σŵ(y-θ)²/((K-1)Σŵ) = Σp(y-θ)²/(K-1)
    let q: f64 = effects
        .iter()
        .zip(&pooled.weights)
        .map(|(e, w)| w * (e.estimate - pooled.estimate).powi(2))
        .sum::<f64>()
        / (k - 1.0);
    let half = t_quantile(k - 1.0, p)? * q.sqrt();
    Ok(EffectInterval {
        lo: pooled.estimate - half,
        hi: pooled.estimate + half,
        method,
        level,
    })
}

/// SSW-MP interval: `estimate ± t_{K-1}·√variance`.
pub fn ci_ssw_t(pooled_ssw: &PooledResult, k: usize, level: f64) -> Result<EffectInterval> {
    if k < 2 {
        return Err(MetaError::TooFewStudies { needed: 2, got: k });
    }
    let half = t_quantile(k as f64 - 1.0, two_sided(level)?)? * pooled_ssw.variance.sqrt();
    Ok(EffectInterval {
        lo: pooled_ssw.estimate - half,
        hi: pooled_ssw.estimate + half,
        method: CiMethod::SswMp,
        level,
    })
}
