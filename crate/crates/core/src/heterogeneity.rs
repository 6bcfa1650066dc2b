//! Point estimators of the between-study variance τ² and the Q statistics
//! they are built from.
//!
//! All four estimators work on a slice of [`EffectRow`]s and return a
//! [`Tau2Estimate`] that is `0` with `truncated = true` whenever the
//! estimator lands on (or below) the boundary.
//!
//! * DL: moment estimator with weights `1/v_i²`.
//! * MP: root of `Q(τ²) = K - 1`, with `Q(τ²)` using weights `1/(v_i² + τ²)`.
//! * REML: maximizer of the restricted log-likelihood over `τ² ≥ 0`.
//! * J: generalized moment estimator with fixed constants `a_i = 1/v_i`.

use std::convert::Infallible;

use crate::error::{MetaError, Result};
use crate::model::{EffectRow, Tau2Estimate, Tau2Method};
use crate::roots::{brent, golden_max, Tolerance};

pub(crate) fn ensure_k(effects: &[EffectRow], needed: usize) -> Result<()> {
    if effects.len() < needed {
        Err(MetaError::TooFewStudies {
            needed,
            got: effects.len(),
        })
    } else {
        Ok(())
    }
}

/// Upper end of every τ² search: `10 (max λ̂ - min λ̂)² + 10 max v²`.
pub fn tau2_cap(effects: &[EffectRow]) -> f64 {
    let (mut lo, mut hi, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for e in effects {
        lo = lo.min(e.estimate);
        hi = hi.max(e.estimate);
        vmax = vmax.max(e.variance);
    }
    10.0 * (hi - lo).powi(2) + 10.0 * vmax
}

/// Weighted mean and `Σ w (y - ȳ_w)²` for arbitrary positive weights.
pub fn weighted_q<I>(pairs: I) -> (f64, f64)
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    let (mut sw, mut swy) = (0.0, 0.0);
    for (y, w) in pairs.clone() {
        sw += w;
        swy += w * y;
    }
    let mean = swy / sw;
    let q = pairs.into_iter().map(|(y, w)| w * (y - mean).powi(2)).sum();
    (mean, q)
}

/// Cochran's Q with inverse-variance weights `1/v_i²`.
pub fn cochran_q(effects: &[EffectRow]) -> Result<f64> {
    generalized_q(effects, 0.0)
}

/// `Q(τ²)` with weights `1/(v_i² + τ²)`; `Q(0)` is Cochran's Q.
pub fn generalized_q(effects: &[EffectRow], tau2: f64) -> Result<f64> {
    ensure_k(effects, 2)?;
    Ok(q_at(effects, tau2))
}

fn q_at(effects: &[EffectRow], tau2: f64) -> f64 {
    weighted_q(
        effects
            .iter()
            .map(|e| (e.estimate, 1.0 / (e.variance + tau2))),
    )
    .1
}

pub fn tau2_dl(effects: &[EffectRow]) -> Result<Tau2Estimate> {
    ensure_k(effects, 2)?;
    let (mut s1, mut s2) = (0.0, 0.0);
    for e in effects {
        let w = 1.0 / e.variance;
        s1 += w;
        s2 += w * w;
    }
    let denom = s1 - s2 / s1;
    if denom.is_nan() || denom <= 0.0 {
        return Err(MetaError::DegenerateWeights("S1 - S2/S1 is not positive"));
    }
    let q = q_at(effects, 0.0);
    let raw = (q - (effects.len() as f64 - 1.0)) / denom;
    Ok(Tau2Estimate::closed_form(Tau2Method::Dl, raw))
}

/// Generalized method-of-moments estimate for fixed constants `a`:
/// returns the untruncated value.
pub fn moment_estimate_with_constants(effects: &[EffectRow], a: &[f64]) -> Result<f64> {
    if a.len() != effects.len() {
        return Err(MetaError::DimensionMismatch {
            left: effects.len(),
            right: a.len(),
        });
    }
    let a_sum: f64 = a.iter().sum();
    let a2_sum: f64 = a.iter().map(|x| x * x).sum();
    let denom = a_sum - a2_sum / a_sum;
    if denom.is_nan() || denom <= 0.0 {
        return Err(MetaError::DegenerateWeights("a+ - Σa²/a+ is not positive"));
    }
    let (_, qa) = weighted_q(effects.iter().zip(a).map(|(e, &ai)| (e.estimate, ai)));
    let within: f64 = effects
        .iter()
        .zip(a)
        .map(|(e, &ai)| ai * e.variance - ai * ai * e.variance / a_sum)
        .sum();
    Ok((qa - within) / denom)
}

pub fn tau2_j(effects: &[EffectRow]) -> Result<Tau2Estimate> {
    ensure_k(effects, 2)?;
    let a: Vec<f64> = effects.iter().map(|e| 1.0 / e.variance.sqrt()).collect();
    let raw = moment_estimate_with_constants(effects, &a)?;
    Ok(Tau2Estimate::closed_form(Tau2Method::J, raw))
}

pub fn tau2_mp(effects: &[EffectRow]) -> Result<Tau2Estimate> {
    ensure_k(effects, 2)?;
    let target = effects.len() as f64 - 1.0;
    let f = |t: f64| q_at(effects, t) - target;
    let f0 = f(0.0);
    if f0 <= 0.0 {
        return Ok(Tau2Estimate {
            value: 0.0,
            method: Tau2Method::Mp,
            truncated: true,
            iterations: 0,
            converged: true,
        });
    }
    let cap = tau2_cap(effects);
    let start = effects
        .iter()
        .map(|e| e.variance)
        .fold(0.0, f64::max)
        .min(cap);
    let (lo, flo, hi, fhi, probes) =
        bracket_downward(f, 0.0, f0, start, cap).ok_or(MetaError::NoBracket { cap })?;
    let root = brent(
        |t| Ok::<_, Infallible>(f(t)),
        lo,
        hi,
        flo,
        fhi,
        Tolerance {
            xtol: 1e-15,
            ftol: 0.0,
            max_iter: 200,
        },
    )
    .unwrap_or_else(|e| match e {});
    Ok(Tau2Estimate {
        value: root.x.max(0.0),
        method: Tau2Method::Mp,
        truncated: false,
        iterations: probes + root.iterations,
        converged: root.converged,
    })
}

/// Doubles `hi` from `start` until `f(hi) <= 0` or the cap is reached.
/// Requires `f(lo) > 0`. Returns the bracket and the number of probes.
pub(crate) fn bracket_downward(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut flo: f64,
    start: f64,
    cap: f64,
) -> Option<(f64, f64, f64, f64, u32)> {
    let mut hi = if start > lo {
        start
    } else {
        cap.min(lo.max(1e-8) * 2.0)
    };
    let mut probes = 0;
    loop {
        probes += 1;
        let fhi = f(hi);
        if fhi <= 0.0 {
            return Some((lo, flo, hi, fhi, probes));
        }
        if hi >= cap {
            return None;
        }
        lo = hi;
        flo = fhi;
        hi = (hi * 2.0).min(cap);
    }
}

/// Restricted log-likelihood of τ² (additive constants dropped).
pub fn restricted_loglik(effects: &[EffectRow], tau2: f64) -> f64 {
    let (mut sw, mut log_det) = (0.0, 0.0);
    for e in effects {
        let m = e.variance + tau2;
        log_det += m.ln();
        sw += 1.0 / m;
    }
    let q = q_at(effects, tau2);
    -0.5 * (log_det + q + sw.ln())
}

/// Derivative of [`restricted_loglik`] with respect to τ².
pub fn reml_score(effects: &[EffectRow], tau2: f64) -> f64 {
    let (mean, _) = weighted_q(
        effects
            .iter()
            .map(|e| (e.estimate, 1.0 / (e.variance + tau2))),
    );
    let (mut sw, mut sw2, mut sw2r2) = (0.0, 0.0, 0.0);
    for e in effects {
        let w = 1.0 / (e.variance + tau2);
        sw += w;
        sw2 += w * w;
        sw2r2 += w * w * (e.estimate - mean).powi(2);
    }
    0.5 * (sw2r2 - sw + sw2 / sw)
}

const REML_GRID: usize = 96;
const REML_GRID_DECADES: f64 = 12.0;

/// REML estimate: a geometric grid scan over `[0, cap]` locates the best
/// basin, then the score equation is solved inside it (golden section when
/// the score does not change sign there).
pub fn tau2_reml(effects: &[EffectRow]) -> Result<Tau2Estimate> {
    ensure_k(effects, 2)?;
    let cap = tau2_cap(effects);
    let loglik = |t: f64| restricted_loglik(effects, t);
    let boundary = |iterations| Tau2Estimate {
        value: 0.0,
        method: Tau2Method::Reml,
        truncated: true,
        iterations,
        converged: true,
    };
    if cap.is_nan() || cap <= 0.0 {
        return Ok(boundary(0));
    }

    let mut grid = Vec::with_capacity(REML_GRID + 2);
    grid.push(0.0);
    for j in 0..=REML_GRID {
        let decades = REML_GRID_DECADES * (REML_GRID - j) as f64 / REML_GRID as f64;
        grid.push(cap * 10f64.powf(-decades));
    }
    let values: Vec<f64> = grid.iter().map(|&t| loglik(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });
    let mut iterations = grid.len() as u32;

    let last = grid.len() - 1;
    let (a, b) = if best == 0 {
        if reml_score(effects, 0.0) <= 0.0 {
            return Ok(boundary(iterations));
        }
        (0.0, grid[1])
    } else if best == last {
        if reml_score(effects, cap) > 0.0 {
            return Err(MetaError::NonConvergence {
                what: "REML (optimum beyond the tau2 cap)",
                iterations,
            });
        }
        (grid[last - 1], cap)
    } else {
        (grid[best - 1], grid[best + 1])
    };

    let (sa, sb) = (reml_score(effects, a), reml_score(effects, b));
    let (mut value, converged) = if sa > 0.0 && sb < 0.0 {
        let root = brent(
            |t| Ok::<_, Infallible>(reml_score(effects, t)),
            a,
            b,
            sa,
            sb,
            Tolerance {
                xtol: 1e-15,
                ftol: 0.0,
                max_iter: 200,
            },
        )
        .unwrap_or_else(|e| match e {});
        iterations += root.iterations;
        (root.x, root.converged)
    } else {
        let (x, _, it) = golden_max(loglik, a, b, 1e-12 * (1.0 + b));
        iterations += it;
        (x, true)
    };
    if loglik(0.0) >= loglik(value) {
        value = 0.0;
    }
    if value <= 0.0 {
        return Ok(boundary(iterations));
    }
    Ok(Tau2Estimate {
        value,
        method: Tau2Method::Reml,
        truncated: false,
        iterations,
        converged,
    })
}

/// Dispatch to one of the four point estimators.
pub fn estimate_tau2(effects: &[EffectRow], method: Tau2Method) -> Result<Tau2Estimate> {
    match method {
        Tau2Method::Dl => tau2_dl(effects),
        Tau2Method::Reml => tau2_reml(effects),
        Tau2Method::Mp => tau2_mp(effects),
        Tau2Method::J => tau2_j(effects),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effects_from;

    #[test]
    fn q_of_two_unit_variance_studies() {
        let e = effects_from(&[0.0, 1.0], &[1.0, 1.0]);
        assert!((cochran_q(&e).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(generalized_q(&e, 0.0).unwrap(), cochran_q(&e).unwrap());
    }

    #[test]
    fn q_vanishes_for_equal_effects_and_large_tau2() {
        let e = effects_from(&[0.3, 0.3, 0.3], &[0.1, 0.5, 2.0]);
        assert!(cochran_q(&e).unwrap().abs() < 1e-28);
        let f = effects_from(&[0.0, 1.0, 3.0], &[0.1, 0.5, 2.0]);
        assert!(generalized_q(&f, 1e12).unwrap() < 1e-10);
    }

    #[test]
    fn dl_hand_examples() {
        let e = effects_from(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        let dl = tau2_dl(&e).unwrap();
        assert_eq!(dl.value, 0.0);
        let e = effects_from(&[0.0, 2.0, 4.0], &[1.0, 1.0, 1.0]);
        assert!((tau2_dl(&e).unwrap().value - 3.0).abs() < 1e-14);
    }

    #[test]
    fn mp_equal_variance_closed_form() {
        let e = effects_from(&[0.0, 2.0, 4.0], &[1.0, 1.0, 1.0]);
        let mp = tau2_mp(&e).unwrap();
        assert!((mp.value - 3.0).abs() < 1e-12, "{mp:?}");
        assert!(!mp.truncated && mp.converged);
    }

    #[test]
    fn j_equal_variance_matches_dl() {
        let e = effects_from(&[0.0, 2.0, 4.0], &[1.0, 1.0, 1.0]);
        assert!((tau2_j(&e).unwrap().value - 3.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_effects_truncate_everywhere() {
        let e = effects_from(&[0.5, 0.5, 0.5, 0.5], &[0.2, 0.1, 0.4, 0.3]);
        for m in Tau2Method::ALL {
            let est = estimate_tau2(&e, *m).unwrap();
            assert_eq!(est.value, 0.0, "{m}");
            assert!(est.truncated, "{m}");
        }
    }

    #[test]
    fn reml_interior_optimum_satisfies_first_order_condition() {
        let e = effects_from(&[0.1, 0.9, -0.4, 1.6, 0.3], &[0.05, 0.2, 0.1, 0.3, 0.07]);
        let r = tau2_reml(&e).unwrap();
        assert!(r.value > 0.0);
        let h = 1e-5 * (1.0 + r.value);
        let fd =
            (restricted_loglik(&e, r.value + h) - restricted_loglik(&e, r.value - h)) / (2.0 * h);
        assert!(fd.abs() < 1e-4, "fd = {fd}");
    }

    #[test]
    fn one_study_is_too_few() {
        let e = effects_from(&[0.1], &[0.1]);
        for m in Tau2Method::ALL {
            assert!(matches!(
                estimate_tau2(&e, *m),
                Err(MetaError::TooFewStudies { .. })
            ));
        }
    }

    #[test]
    fn two_studies_are_enough() {
        let e = effects_from(&[0.0, 2.0], &[0.1, 0.2]);
        for m in Tau2Method::ALL {
            assert!(estimate_tau2(&e, *m).unwrap().value > 0.0, "{m}");
        }
    }
}
