//! Confidence intervals for τ²: Q-profile (QP), the generalized Q-profile
//! intervals with exact weighted-χ² pivots (BJ with `a_i = 1/v_i²`, J with
//! `a_i = 1/v_i`), and profile restricted likelihood (PL).
//!
//! Every interval is a test inversion. Endpoints that would fall below zero
//! are truncated to `0` with a flag; an upper endpoint whose defining
//! equation is not met below the search cap is reported as
//! [`UpperBound::Unbounded`].

use crate::distributions::chi2_quantile;
use crate::error::{MetaError, Result};
use crate::heterogeneity::{
    ensure_k, generalized_q, restricted_loglik, tau2_cap, tau2_reml, weighted_q,
};
use crate::model::{EffectRow, Tau2Estimate, Tau2Interval, Tau2IntervalMethod, UpperBound};
use crate::quadform::cdf_q_constants;
use crate::roots::{brent, Tolerance};

/// Nominal level used throughout.
pub const DEFAULT_LEVEL: f64 = 0.95;

const ROOT_TOL: Tolerance = Tolerance {
    xtol: 1e-13,
    ftol: 0.0,
    max_iter: 200,
};

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(MetaError::Domain(format!(
            "confidence level must lie in (0, 1) (got {level})"
        )))
    }
}

/// Endpoints of `{t ≥ 0 : hi_target ≤ g(t) ≤ lo_target}` for a nonincreasing `g`.
struct ProfileBounds {
    lo: f64,
    lo_truncated: bool,
    hi: UpperBound,
    hi_truncated: bool,
}

fn decreasing_profile(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo_target: f64,
    hi_target: f64,
    start: f64,
    cap: f64,
) -> Result<ProfileBounds> {
    debug_assert!(lo_target >= hi_target);
    let g0 = g(0.0)?;
    if g0 < hi_target {
        return Ok(ProfileBounds {
            lo: 0.0,
            lo_truncated: true,
            hi: UpperBound::Finite(0.0),
            hi_truncated: true,
        });
    }
    let start = if start > 0.0 && start < cap {
        start
    } else {
        cap * 1e-3
    };

    // lower endpoint: g(t) = lo_target; the search may run past the cap
    let (lo, lo_truncated, mut from, mut g_from) = if g0 <= lo_target {
        (0.0, true, 0.0, g0)
    } else {
        let (a, ga, b, gb) = bracket(&mut g, 0.0, g0, lo_target, start, f64::MAX / 4.0)?
            .ok_or(MetaError::NoBracket { cap })?;
        let root = brent(
            |t| Ok::<_, MetaError>(g(t)? - lo_target),
            a,
            b,
            ga - lo_target,
            gb - lo_target,
            ROOT_TOL,
        )?;
        (root.x, false, root.x, root.fx + lo_target)
    };

    // upper endpoint: g(t) = hi_target, searched no further than the cap
    if from >= cap {
        return Ok(ProfileBounds {
            lo,
            lo_truncated,
            hi: UpperBound::Unbounded,
            hi_truncated: false,
        });
    }
    if g_from < hi_target {
        from = 0.0;
        g_from = g0;
    }
    let hi = match bracket(&mut g, from, g_from, hi_target, start.max(from * 2.0), cap)? {
        None => UpperBound::Unbounded,
        Some((a, ga, b, gb)) => {
            let root = brent(
                |t| Ok::<_, MetaError>(g(t)? - hi_target),
                a,
                b,
                ga - hi_target,
                gb - hi_target,
                ROOT_TOL,
            )?;
            UpperBound::Finite(root.x.max(lo))
        }
    };
    Ok(ProfileBounds {
        lo,
        lo_truncated,
        hi,
        hi_truncated: false,
    })
}

/// Doubling search for `b` with `g(b) <= target`, starting from `start`, with
/// `g(a) > target` at `a = from`. `None` when `g(limit)` is still above target.
fn bracket(
    g: &mut impl FnMut(f64) -> Result<f64>,
    from: f64,
    g_from: f64,
    target: f64,
    start: f64,
    limit: f64,
) -> Result<Option<(f64, f64, f64, f64)>> {
    let (mut a, mut ga) = (from, g_from);
    let mut b = start.max(from).min(limit);
    if b <= a {
        b = (a * 2.0).max(1e-12).min(limit);
    }
    loop {
        let gb = g(b)?;
        if gb <= target {
            return Ok(Some((a, ga, b, gb)));
        }
        if b >= limit {
            return Ok(None);
        }
        a = b;
        ga = gb;
        b = (b * 2.0).min(limit);
    }
}

fn natural_scale(effects: &[EffectRow]) -> f64 {
    effects.iter().map(|e| e.variance).fold(0.0, f64::max)
}

/// Q-profile interval: inverts `Q(τ²)` against the χ²_{K-1} quantiles.
pub fn qp_interval(effects: &[EffectRow], level: f64) -> Result<Tau2Interval> {
    ensure_k(effects, 2)?;
    check_level(level)?;
    let df = effects.len() as f64 - 1.0;
    let alpha = 1.0 - level;
    let upper_q = chi2_quantile(df, 1.0 - alpha / 2.0)?;
    let lower_q = chi2_quantile(df, alpha / 2.0)?;
    let bounds = decreasing_profile(
        |t| generalized_q(effects, t),
        upper_q,
        lower_q,
        natural_scale(effects),
        tau2_cap(effects),
    )?;
    Ok(finish(bounds, Tau2IntervalMethod::Qp, level))
}

fn finish(b: ProfileBounds, method: Tau2IntervalMethod, level: f64) -> Tau2Interval {
    Tau2Interval {
        lo: b.lo,
        hi: b.hi,
        method,
        level,
        lo_truncated: b.lo_truncated,
        hi_truncated: b.hi_truncated,
    }
}

/// Generalized Q-profile interval for fixed constants `a`: the observed
/// `Q_a` is located in its exact weighted-χ² distribution at each τ².
pub fn generalized_qp_interval(
    effects: &[EffectRow],
    a: &[f64],
    method: Tau2IntervalMethod,
    level: f64,
) -> Result<Tau2Interval> {
    ensure_k(effects, 2)?;
    check_level(level)?;
    if a.len() != effects.len() {
        return Err(MetaError::DimensionMismatch {
            left: effects.len(),
            right: a.len(),
        });
    }
    let alpha = 1.0 - level;
    let (_, q_obs) = weighted_q(effects.iter().zip(a).map(|(e, &ai)| (e.estimate, ai)));
    let mut marginal = vec![0.0; effects.len()];
    let mut cdf = |t: f64| -> Result<f64> {
        for (m, e) in marginal.iter_mut().zip(effects) {
            *m = e.variance + t;
        }
        cdf_q_constants(a, &marginal, q_obs)
    };
    let cap = tau2_cap(effects);
    let f0 = cdf(0.0)?;
    let f_cap = cdf(cap)?;
    let bounds = if f_cap <= f0 {
        decreasing_profile(
            &mut cdf,
            1.0 - alpha / 2.0,
            alpha / 2.0,
            natural_scale(effects),
            cap,
        )?
    } else {
        // increasing orientation: profile the mirrored function
        decreasing_profile(
            |t| cdf(t).map(|p| -p),
            -alpha / 2.0,
            -(1.0 - alpha / 2.0),
            natural_scale(effects),
            cap,
        )?
    };
    Ok(finish(bounds, method, level))
}

/// Biggerstaff–Jackson interval, `a_i = 1/v_i²`.
pub fn bj_interval(effects: &[EffectRow], level: f64) -> Result<Tau2Interval> {
    let a: Vec<f64> = effects.iter().map(|e| 1.0 / e.variance).collect();
    generalized_qp_interval(effects, &a, Tau2IntervalMethod::Bj, level)
}

/// Jackson interval, `a_i = 1/v_i`.
pub fn j_interval(effects: &[EffectRow], level: f64) -> Result<Tau2Interval> {
    let a: Vec<f64> = effects.iter().map(|e| 1.0 / e.variance.sqrt()).collect();
    generalized_qp_interval(effects, &a, Tau2IntervalMethod::J, level)
}

/// Profile restricted-likelihood interval around the REML estimate, using the
/// plain χ²₁ cutoff.
pub fn pl_interval(effects: &[EffectRow], level: f64) -> Result<Tau2Interval> {
    ensure_k(effects, 2)?;
    let reml = tau2_reml(effects)?;
    pl_interval_at(effects, &reml, level)
}

/// [`pl_interval`] around an already computed REML estimate.
pub fn pl_interval_at(
    effects: &[EffectRow],
    reml: &Tau2Estimate,
    level: f64,
) -> Result<Tau2Interval> {
    ensure_k(effects, 2)?;
    check_level(level)?;
    let crit = chi2_quantile(1.0, level)?;
    let peak = restricted_loglik(effects, reml.value);
    let deviance = |t: f64| 2.0 * (peak - restricted_loglik(effects, t));
    let cap = tau2_cap(effects);

    let (lo, lo_truncated) = if reml.value == 0.0 || deviance(0.0) <= crit {
        (0.0, true)
    } else {
        let f = |t: f64| Ok::<_, MetaError>(deviance(t) - crit);
        let root = brent(
            f,
            0.0,
            reml.value,
            deviance(0.0) - crit,
            deviance(reml.value) - crit,
            ROOT_TOL,
        )?;
        (root.x, false)
    };

    let start = reml.value.max(natural_scale(effects)).max(1e-12);
    let mut a = reml.value;
    let mut b = (2.0 * start).min(cap.max(reml.value));
    let hi = loop {
        let db = deviance(b);
        if db >= crit {
            let root = brent(
                |t| Ok::<_, MetaError>(deviance(t) - crit),
                a,
                b,
                deviance(a) - crit,
                db - crit,
                ROOT_TOL,
            )?;
            break UpperBound::Finite(root.x);
        }
        if b >= cap {
            break UpperBound::Unbounded;
        }
        a = b;
        b = (b * 2.0).min(cap);
    };
    Ok(Tau2Interval {
        lo,
        hi,
        method: Tau2IntervalMethod::Pl,
        level,
        lo_truncated,
        hi_truncated: false,
    })
}

/// Dispatch to one of the four interval estimators.
pub fn tau2_interval(
    effects: &[EffectRow],
    method: Tau2IntervalMethod,
    level: f64,
) -> Result<Tau2Interval> {
    match method {
        Tau2IntervalMethod::Qp => qp_interval(effects, level),
        Tau2IntervalMethod::Bj => bj_interval(effects, level),
        Tau2IntervalMethod::J => j_interval(effects, level),
        Tau2IntervalMethod::Pl => pl_interval(effects, level),
    }
}
