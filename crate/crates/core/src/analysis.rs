//! The complete estimator battery on one meta-analysis: every τ² estimator and
//! interval, every pooled estimator and every interval for the overall effect.
//!
//! Individual methods may fail without taking the others down; each slot holds
//! its own `Result`.

use crate::effects::{compute_effects, VarianceSign};
use crate::error::{MetaError, Result};
use crate::heterogeneity::estimate_tau2;
use crate::model::{
    CiMethod, EffectInterval, EffectRow, Pipeline, PointMethod, PooledResult, StudySummary,
    Tau2Estimate, Tau2Interval, Tau2IntervalMethod, Tau2Method,
};
use crate::pooling::{ci_hksj, ci_iv_normal, ci_ssw_t, pool_iv, pool_ssw};
use crate::tau_intervals::{bj_interval, j_interval, pl_interval_at, qp_interval};

#[derive(Debug)]
pub struct Analysis {
    pub pipeline: Pipeline,
    pub level: f64,
    pub effects: Vec<EffectRow>,
    pub tau2: Vec<(Tau2Method, Result<Tau2Estimate>)>,
    pub tau2_intervals: Vec<(Tau2IntervalMethod, Result<Tau2Interval>)>,
    /// IV means carry their normal-theory interval, SSW carries SSW-MP.
    pub pooled: Vec<(PointMethod, Result<PooledResult>)>,
    pub intervals: Vec<(CiMethod, Result<EffectInterval>)>,
}

fn lookup<K: PartialEq, V>(slots: &[(K, V)], key: K) -> &V {
    &slots
        .iter()
        .find(|(k, _)| *k == key)
        .expect("every method has a slot")
        .1
}

impl Analysis {
    pub fn tau2(&self, method: Tau2Method) -> &Result<Tau2Estimate> {
        lookup(&self.tau2, method)
    }

    pub fn tau2_interval(&self, method: Tau2IntervalMethod) -> &Result<Tau2Interval> {
        lookup(&self.tau2_intervals, method)
    }

    pub fn pooled(&self, method: PointMethod) -> &Result<PooledResult> {
        lookup(&self.pooled, method)
    }

    pub fn interval(&self, method: CiMethod) -> &Result<EffectInterval> {
        lookup(&self.intervals, method)
    }

    /// Studies whose corrected variance fell back to the delta-method value.
    pub fn floored(&self) -> usize {
        self.effects.iter().filter(|e| e.variance_floored).count()
    }
}

fn upstream<T>(what: impl Into<String>, e: &MetaError) -> Result<T> {
    Err(MetaError::Upstream {
        what: what.into(),
        kind: e.failure_kind(),
    })
}

/// Run the battery on study summaries through one effect pipeline.
pub fn analyze(
    studies: &[StudySummary],
    pipeline: Pipeline,
    sign: VarianceSign,
    level: f64,
) -> Result<Analysis> {
    let effects = compute_effects(studies, pipeline, sign)?;
    Ok(analyze_effects(effects, studies, pipeline, level))
}

/// Run the battery on precomputed effects; `studies` supply the SSW sizes.
pub fn analyze_effects(
    effects: Vec<EffectRow>,
    studies: &[StudySummary],
    pipeline: Pipeline,
    level: f64,
) -> Analysis {
    let tau2: Vec<_> = Tau2Method::ALL
        .iter()
        .map(|&m| (m, estimate_tau2(&effects, m)))
        .collect();
    let reml = lookup(&tau2, Tau2Method::Reml);
    let mp = lookup(&tau2, Tau2Method::Mp);

    let tau2_intervals = Tau2IntervalMethod::ALL
        .iter()
        .map(|&m| {
            let iv = match m {
                Tau2IntervalMethod::Qp => qp_interval(&effects, level),
                Tau2IntervalMethod::Bj => bj_interval(&effects, level),
                Tau2IntervalMethod::J => j_interval(&effects, level),
                Tau2IntervalMethod::Pl => match reml {
                    Ok(r) => pl_interval_at(&effects, r, level),
                    Err(e) => upstream("PL interval", e),
                },
            };
            (m, iv)
        })
        .collect();

    let mut pooled = Vec::with_capacity(PointMethod::ALL.len());
    let mut intervals = Vec::with_capacity(CiMethod::ALL.len());
    for (m, est) in &tau2 {
        let p = match est {
            Ok(t) => pool_iv(&effects, *t).and_then(|p| {
                let ci = ci_iv_normal(&p, level)?;
                Ok(p.with_interval(ci))
            }),
            Err(e) => upstream(format!("IV-{m} estimate"), e),
        };
        let ci = match &p {
            Ok(p) => Ok(p.interval.expect("attached above")),
            Err(e) => upstream(format!("IV-{m} interval"), e),
        };
        pooled.push((PointMethod::iv(*m), p));
        intervals.push((CiMethod::iv(*m), ci));
    }
    for (ci_method, tau_method) in [
        (CiMethod::Hksj, Tau2Method::Dl),
        (CiMethod::HksjMp, Tau2Method::Mp),
    ] {
        let ci = match lookup(&tau2, tau_method) {
            Ok(t) => ci_hksj(&effects, *t, level),
            Err(e) => upstream(format!("{ci_method} interval"), e),
        };
        intervals.push((ci_method, ci));
    }
    let ssw = match mp {
        Ok(t) => pool_ssw(&effects, studies, *t).and_then(|p| {
            let ci = ci_ssw_t(&p, effects.len(), level)?;
            Ok(p.with_interval(ci))
        }),
        Err(e) => upstream("SSW estimate", e),
    };
    let ssw_ci = match &ssw {
        Ok(p) => Ok(p.interval.expect("attached above")),
        Err(e) => upstream("SSW-MP interval", e),
    };
    pooled.push((PointMethod::Ssw, ssw));
    intervals.push((CiMethod::SswMp, ssw_ci));

    Analysis {
        pipeline,
        level,
        effects,
        tau2,
        tau2_intervals,
        pooled,
        intervals,
    }
}
