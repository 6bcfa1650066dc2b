//! Monte Carlo harness: lognormal meta-analysis samples, the full estimator
//! battery per replication, and bias/coverage aggregation over a grid of
//! scenarios.
//!
//! Every replication draws from its own RNG stream, addressed by
//! `(seed, scenario key, replication index)`, and aggregation walks the
//! records in replication order. Results therefore do not depend on thread
//! count or on how replications are split into chunks.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, Analysis};
use crate::distributions::{lognormal_params_from_moments, sample_normal, splitmix64, RngStream};
use crate::effects::VarianceSign;
use crate::error::{FailureKind, MetaError, Result};
use crate::model::{
    ArmSummary, CiMethod, EffectInterval, Pipeline, PointMethod, Scenario, StudySummary,
    Tau2Estimate, Tau2Interval, Tau2IntervalMethod, Tau2Method,
};

/// Which effect pipelines a run evaluates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineSelection {
    Usual,
    Corrected,
    #[default]
    Both,
}

impl PipelineSelection {
    pub fn pipelines(self) -> Vec<Pipeline> {
        match self {
            PipelineSelection::Usual => vec![Pipeline::Usual],
            PipelineSelection::Corrected => vec![Pipeline::Corrected],
            PipelineSelection::Both => vec![Pipeline::Usual, Pipeline::Corrected],
        }
    }
}

/// Per-replication analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub pipelines: Vec<Pipeline>,
    pub variance_sign: VarianceSign,
    pub level: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            pipelines: PipelineSelection::Both.pipelines(),
            variance_sign: VarianceSign::AsPrinted,
            level: 0.95,
        }
    }
}

fn default_reps() -> usize {
    1000
}

fn default_level() -> f64 {
    0.95
}

fn one() -> f64 {
    1.0
}

/// Grid specification, read from TOML:
///
/// ```toml
/// lambda = [0.0, 1.0]
/// tau2 = [0.0, 0.5, 1.0]
/// k = [5, 30]
/// n = [4, 40, 1000]
/// reps = 1000
/// seed = 42
/// pipelines = "both"        # usual | corrected | both
/// eq3_sign = "as_printed"   # as_printed | plus
/// output = "results.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lambda: Vec<f64>,
    pub tau2: Vec<f64>,
    pub k: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipelines: PipelineSelection,
    #[serde(default, rename = "eq3_sign")]
    pub variance_sign: VarianceSign,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "one")]
    pub mu_control: f64,
    #[serde(default = "one")]
    pub sigma2_t: f64,
    #[serde(default = "one")]
    pub sigma2_c: f64,
}

impl GridConfig {
    /// The 36-cell desk grid.
    pub fn desk() -> Self {
        Self::with_axes(
            vec![0.0, 1.0],
            vec![0.0, 0.5, 1.0],
            vec![5, 30],
            vec![4, 40, 1000],
        )
    }

    /// The full design: 5 × 11 × 6 × 8 = 2640 cells.
    pub fn full() -> Self {
        let mut g = Self::with_axes(
            vec![0.0, 0.2, 0.5, 1.0, 2.0],
            (0..=10).map(|i| i as f64 / 10.0).collect(),
            vec![5, 10, 30, 50, 100, 125],
            vec![4, 10, 20, 40, 100, 250, 640, 1000],
        );
        g.reps = 10_000;
        g
    }

    pub fn with_axes(lambda: Vec<f64>, tau2: Vec<f64>, k: Vec<usize>, n: Vec<usize>) -> Self {
        Self {
            lambda,
            tau2,
            k,
            n,
            reps: default_reps(),
            seed: 0,
            pipelines: PipelineSelection::Both,
            variance_sign: VarianceSign::AsPrinted,
            level: default_level(),
            output: None,
            mu_control: 1.0,
            sigma2_t: 1.0,
            sigma2_c: 1.0,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GridConfig = toml::from_str(text).map_err(|e| MetaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetaError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(MetaError::Config("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MetaError::Config(format!(
                "level must lie in (0, 1) (got {})",
                self.level
            )));
        }
        self.scenarios().iter().try_for_each(Scenario::validate)
    }

    /// Cells in lexicographic (λ, τ², K, n) order.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out =
            Vec::with_capacity(self.lambda.len() * self.tau2.len() * self.k.len() * self.n.len());
        for &lambda in &self.lambda {
            for &tau2 in &self.tau2 {
                for &k in &self.k {
                    for &n in &self.n {
                        out.push(Scenario {
                            mu_control: self.mu_control,
                            sigma2_t: self.sigma2_t,
                            sigma2_c: self.sigma2_c,
                            ..Scenario::new(lambda, tau2, k, n)
                        });
                    }
                }
            }
        }
        out
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            pipelines: self.pipelines.pipelines(),
            variance_sign: self.variance_sign,
            level: self.level,
        }
    }
}

/// Stable 64-bit key of a scenario's parameters. Cells keep their random
/// streams when the surrounding grid changes.
pub fn scenario_key(s: &Scenario) -> u64 {
    let mut h = 0x5ce9_a21f_0b7d_3c41u64;
    for word in [
        s.lambda.to_bits(),
        s.tau2.to_bits(),
        s.k as u64,
        s.n_total as u64,
        s.mu_control.to_bits(),
        s.sigma2_t.to_bits(),
        s.sigma2_c.to_bits(),
    ] {
        h ^= word;
        h = splitmix64(&mut h);
    }
    h
}

fn arm_from_draws<R: Rng + ?Sized>(n: u32, meanlog: f64, sdlog: f64, rng: &mut R) -> ArmSummary {
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=n {
        let x = sample_normal(meanlog, sdlog, rng).exp();
        let d = x - mean;
        mean += d / i as f64;
        m2 += d * (x - mean);
    }
    ArmSummary::new(n, mean, (m2 / (n - 1) as f64).sqrt())
}

/// One simulated meta-analysis: `λ_i ~ N(λ, τ²)`, `μ_T = exp(λ_i) μ_C`, and
/// `n/2` lognormal draws per arm with the scenario's variances.
pub fn generate_meta_sample<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<Vec<StudySummary>> {
    scenario.validate()?;
    let arm_n = scenario.arm_size();
    let (c_meanlog, c_sdlog) =
        lognormal_params_from_moments(scenario.mu_control, scenario.sigma2_c)?;
    (0..scenario.k)
        .map(|i| {
            let lambda_i = sample_normal(scenario.lambda, scenario.tau2.sqrt(), rng);
            let mu_t = lambda_i.exp() * scenario.mu_control;
            let (t_meanlog, t_sdlog) = lognormal_params_from_moments(mu_t, scenario.sigma2_t)?;
            let treatment = arm_from_draws(arm_n, t_meanlog, t_sdlog, rng);
            let control = arm_from_draws(arm_n, c_meanlog, c_sdlog, rng);
            Ok(StudySummary::new(format!("{}", i + 1), treatment, control))
        })
        .collect()
}

/// Per-method result in a replication: the value or why it is missing.
pub type Outcome<T> = std::result::Result<T, FailureKind>;

fn outcome<T: Clone>(r: &Result<T>) -> Outcome<T> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(e.failure_kind()),
    }
}

/// Everything one pipeline produced in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRecord {
    pub pipeline: Pipeline,
    pub floored: u32,
    pub tau2: Vec<(Tau2Method, Outcome<Tau2Estimate>)>,
    pub tau2_intervals: Vec<(Tau2IntervalMethod, Outcome<Tau2Interval>)>,
    pub pooled: Vec<(PointMethod, Outcome<f64>)>,
    pub intervals: Vec<(CiMethod, Outcome<EffectInterval>)>,
}

impl PipelineRecord {
    fn from_analysis(a: &Analysis) -> Self {
        Self {
            pipeline: a.pipeline,
            floored: a.floored() as u32,
            tau2: a.tau2.iter().map(|(m, r)| (*m, outcome(r))).collect(),
            tau2_intervals: a
                .tau2_intervals
                .iter()
                .map(|(m, r)| (*m, outcome(r)))
                .collect(),
            pooled: a
                .pooled
                .iter()
                .map(|(m, r)| {
                    (
                        *m,
                        r.as_ref()
                            .map(|p| p.estimate)
                            .map_err(MetaError::failure_kind),
                    )
                })
                .collect(),
            intervals: a.intervals.iter().map(|(m, r)| (*m, outcome(r))).collect(),
        }
    }

    fn failed(pipeline: Pipeline, kind: FailureKind) -> Self {
        Self {
            pipeline,
            floored: 0,
            tau2: Tau2Method::ALL.iter().map(|&m| (m, Err(kind))).collect(),
            tau2_intervals: Tau2IntervalMethod::ALL
                .iter()
                .map(|&m| (m, Err(kind)))
                .collect(),
            pooled: PointMethod::ALL.iter().map(|&m| (m, Err(kind))).collect(),
            intervals: CiMethod::ALL.iter().map(|&m| (m, Err(kind))).collect(),
        }
    }
}

/// Both (or the selected) pipelines applied to the same generated data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub pipelines: Vec<PipelineRecord>,
}

/// Generate one meta-analysis and run every method on every selected pipeline.
/// Method failures are recorded, never propagated.
pub fn run_replication<R: Rng + ?Sized>(
    scenario: &Scenario,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<ReplicationRecord> {
    let studies = generate_meta_sample(scenario, rng)?;
    let pipelines = opts
        .pipelines
        .iter()
        .map(
            |&p| match analyze(&studies, p, opts.variance_sign, opts.level) {
                Ok(a) => PipelineRecord::from_analysis(&a),
                Err(e) => PipelineRecord::failed(p, e.failure_kind()),
            },
        )
        .collect();
    Ok(ReplicationRecord { pipelines })
}

/// Replications `range` of a scenario, in index order.
pub fn run_chunk(
    scenario: &Scenario,
    seed: u64,
    range: Range<u64>,
    opts: &SimOptions,
) -> Result<Vec<ReplicationRecord>> {
    scenario.validate()?;
    let key = scenario_key(scenario);
    range
        .into_par_iter()
        .map(|r| run_replication(scenario, opts, &mut RngStream::new(seed, key, r).rng()))
        .collect()
}

/// `√(p(1-p)/reps)`.
pub fn coverage_mc_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// What is being summarized about a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BiasTau2,
    BiasLambda,
    CoverageTau2,
    CoverageLambda,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::BiasTau2,
        Metric::BiasLambda,
        Metric::CoverageTau2,
        Metric::CoverageLambda,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::BiasTau2 => "bias_tau2",
            Metric::BiasLambda => "bias_lambda",
            Metric::CoverageTau2 => "coverage_tau2",
            Metric::CoverageLambda => "coverage_lambda",
        }
    }

    pub fn is_coverage(self) -> bool {
        matches!(self, Metric::CoverageTau2 | Metric::CoverageLambda)
    }

    /// Method labels reported under this metric, in display order.
    pub fn methods(self) -> Vec<&'static str> {
        match self {
            Metric::BiasTau2 => Tau2Method::ALL.iter().map(|m| m.label()).collect(),
            Metric::BiasLambda => PointMethod::ALL.iter().map(|m| m.label()).collect(),
            Metric::CoverageTau2 => Tau2IntervalMethod::ALL.iter().map(|m| m.label()).collect(),
            Metric::CoverageLambda => CiMethod::ALL.iter().map(|m| m.label()).collect(),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Metric {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Metric::ALL.iter().map(|m| m.label()).collect();
                MetaError::InvalidArgument(format!(
                    "unknown metric `{s}`; valid metrics: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// Summary of one method under one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStat {
    /// Mean bias, or coverage proportion.
    pub value: f64,
    pub mc_se: f64,
    /// Replications that entered the tally.
    pub count: usize,
    /// Replications in which the method failed (tallied or not).
    pub failures: usize,
}

/// Aggregates for one pipeline of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub pipeline: Pipeline,
    /// Keyed by (metric, method label).
    pub stats: BTreeMap<(Metric, String), MethodStat>,
    /// Studies whose corrected variance was floored, over all replications.
    pub floored_studies: u64,
    /// τ² estimates truncated at zero, per method.
    pub tau2_truncated: BTreeMap<String, usize>,
    /// τ² intervals with an unbounded upper end, per method.
    pub unbounded: BTreeMap<String, usize>,
}

impl PipelineSummary {
    pub fn stat(&self, metric: Metric, method: &str) -> Option<&MethodStat> {
        self.stats.get(&(metric, method.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    pub pipelines: Vec<PipelineSummary>,
}

impl ScenarioResult {
    pub fn pipeline(&self, p: Pipeline) -> Option<&PipelineSummary> {
        self.pipelines.iter().find(|s| s.pipeline == p)
    }

    /// Shorthand for `pipeline(p).stat(metric, method)`.
    pub fn stat(&self, p: Pipeline, metric: Metric, method: &str) -> Option<&MethodStat> {
        self.pipeline(p)?.stat(metric, method)
    }
}

#[derive(Default)]
struct Tally {
    n: usize,
    sum: f64,
    failures: usize,
}

impl Tally {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
    }

    fn bias(values: &[f64], failures: usize) -> MethodStat {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let mc_se = if count > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64 / count as f64).sqrt()
        } else {
            f64::NAN
        };
        MethodStat {
            value: mean,
            mc_se,
            count,
            failures,
        }
    }

    fn coverage(self) -> MethodStat {
        let p = self.sum / self.n as f64;
        MethodStat {
            value: p,
            mc_se: coverage_mc_se(p, self.n),
            count: self.n,
            failures: self.failures,
        }
    }
}

/// Interval outcome → coverage indicator. Tolerance failures count as
/// misses; other failures are excluded.
fn cover_indicator<T>(o: &Outcome<T>, covers: impl Fn(&T) -> bool) -> Option<f64> {
    match o {
        Ok(iv) => Some(if covers(iv) { 1.0 } else { 0.0 }),
        Err(FailureKind::Tolerance) => Some(0.0),
        Err(_) => None,
    }
}

/// Collapse replication records (in order) into per-method statistics.
pub fn aggregate(
    scenario: &Scenario,
    seed: u64,
    records: &[ReplicationRecord],
    opts: &SimOptions,
) -> ScenarioResult {
    let pipelines = opts
        .pipelines
        .iter()
        .enumerate()
        .map(|(slot, &pipeline)| {
            let rows: Vec<&PipelineRecord> = records.iter().map(|r| &r.pipelines[slot]).collect();
            summarize_pipeline(scenario, pipeline, &rows)
        })
        .collect();
    ScenarioResult {
        scenario: *scenario,
        reps: records.len(),
        seed,
        pipelines,
    }
}

fn summarize_pipeline(
    scenario: &Scenario,
    pipeline: Pipeline,
    rows: &[&PipelineRecord],
) -> PipelineSummary {
    let mut stats = BTreeMap::new();
    let mut tau2_truncated = BTreeMap::new();
    let mut unbounded = BTreeMap::new();

    for (i, &m) in Tau2Method::ALL.iter().enumerate() {
        let mut values = Vec::with_capacity(rows.len());
        let mut failures = 0;
        let mut truncated = 0;
        for r in rows {
            match &r.tau2[i].1 {
                Ok(t) => {
                    values.push(t.value - scenario.tau2);
                    truncated += t.truncated as usize;
                }
                Err(_) => failures += 1,
            }
        }
        stats.insert(
            (Metric::BiasTau2, m.label().to_string()),
            Tally::bias(&values, failures),
        );
        tau2_truncated.insert(m.label().to_string(), truncated);
    }
    for (i, &m) in PointMethod::ALL.iter().enumerate() {
        let mut values = Vec::with_capacity(rows.len());
        let mut failures = 0;
        for r in rows {
            match &r.pooled[i].1 {
                Ok(v) => values.push(v - scenario.lambda),
                Err(_) => failures += 1,
            }
        }
        stats.insert(
            (Metric::BiasLambda, m.label().to_string()),
            Tally::bias(&values, failures),
        );
    }
    for (i, &m) in Tau2IntervalMethod::ALL.iter().enumerate() {
        let mut t = Tally::default();
        let mut open = 0;
        for r in rows {
            let o = &r.tau2_intervals[i].1;
            t.failures += o.is_err() as usize;
            if let Ok(iv) = o {
                open += iv.hi.is_unbounded() as usize;
            }
            if let Some(x) = cover_indicator(o, |iv| iv.contains(scenario.tau2)) {
                t.push(x);
            }
        }
        stats.insert((Metric::CoverageTau2, m.label().to_string()), t.coverage());
        unbounded.insert(m.label().to_string(), open);
    }
    for (i, &m) in CiMethod::ALL.iter().enumerate() {
        let mut t = Tally::default();
        for r in rows {
            let o = &r.intervals[i].1;
            t.failures += o.is_err() as usize;
            if let Some(x) = cover_indicator(o, |iv| iv.contains(scenario.lambda)) {
                t.push(x);
            }
        }
        stats.insert(
            (Metric::CoverageLambda, m.label().to_string()),
            t.coverage(),
        );
    }
    PipelineSummary {
        pipeline,
        stats,
        floored_studies: rows.iter().map(|r| r.floored as u64).sum(),
        tau2_truncated,
        unbounded,
    }
}

/// `reps` replications of one scenario.
pub fn run_scenario(
    scenario: &Scenario,
    reps: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<ScenarioResult> {
    if reps == 0 {
        return Err(MetaError::Config("reps must be at least 1".into()));
    }
    let records = run_chunk(scenario, seed, 0..reps as u64, opts)?;
    Ok(aggregate(scenario, seed, &records, opts))
}

/// Every cell of the grid, in [`GridConfig::scenarios`] order. `on_done` is
/// called once per finished cell (from worker threads).
pub fn run_grid_with(
    config: &GridConfig,
    on_done: impl Fn(&ScenarioResult) + Sync,
) -> Result<Vec<ScenarioResult>> {
    config.validate()?;
    let opts = config.options();
    config
        .scenarios()
        .par_iter()
        .map(|s| {
            let r = run_scenario(s, config.reps, config.seed, &opts)?;
            on_done(&r);
            Ok(r)
        })
        .collect()
}

pub fn run_grid(config: &GridConfig) -> Result<Vec<ScenarioResult>> {
    run_grid_with(config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SimOptions {
        SimOptions::default()
    }

    #[test]
    fn grid_cardinalities() {
        assert_eq!(GridConfig::full().scenarios().len(), 2640);
        assert_eq!(GridConfig::desk().scenarios().len(), 36);
        let empty = GridConfig::with_axes(vec![], vec![0.0], vec![5], vec![4]);
        assert!(run_grid(&empty).unwrap().is_empty());
    }

    #[test]
    fn mc_se_at_nominal() {
        assert!((coverage_mc_se(0.95, 10_000) - 0.00218).abs() < 5e-6);
    }

    #[test]
    fn zero_tau2_keeps_lambda_fixed() {
        // with τ² = 0 all studies share λ; data differ only through sampling
        let s = Scenario::new(0.5, 0.0, 4, 10_000);
        let mut rng = RngStream::new(1, 2, 3).rng();
        let studies = generate_meta_sample(&s, &mut rng).unwrap();
        for st in &studies {
            assert!(((st.treatment.mean / st.control.mean).ln() - 0.5).abs() < 0.15);
            assert_eq!(st.treatment.n, 5000);
        }
    }

    #[test]
    fn record_cardinality_and_sign() {
        let s = Scenario::new(0.0, 0.3, 5, 40);
        let mut rng = RngStream::new(9, scenario_key(&s), 0).rng();
        let rec = run_replication(&s, &quick(), &mut rng).unwrap();
        let count = |f: fn(&PipelineRecord) -> usize| rec.pipelines.iter().map(f).sum::<usize>();
        assert_eq!(count(|p| p.tau2.len()), 8);
        assert_eq!(count(|p| p.tau2_intervals.len()), 8);
        assert_eq!(count(|p| p.pooled.len()), 10);
        assert_eq!(count(|p| p.intervals.len()), 14);
        for p in &rec.pipelines {
            for (_, t) in &p.tau2 {
                assert!(t.as_ref().unwrap().value >= 0.0);
            }
        }
    }

    #[test]
    fn chunking_does_not_change_results() {
        let s = Scenario::new(0.2, 0.5, 5, 10);
        let opts = quick();
        let whole = run_scenario(&s, 40, 7, &opts).unwrap();
        let mut records = Vec::new();
        for c in 0..4u64 {
            records.extend(run_chunk(&s, 7, c * 10..(c + 1) * 10, &opts).unwrap());
        }
        assert_eq!(aggregate(&s, 7, &records, &opts), whole);
    }

    #[test]
    fn single_rep_coverage_is_binary() {
        let s = Scenario::new(0.0, 0.5, 5, 20);
        let r = run_scenario(&s, 1, 3, &quick()).unwrap();
        for p in &r.pipelines {
            for ((metric, _), st) in &p.stats {
                if metric.is_coverage() && st.count == 1 {
                    assert!(st.value == 0.0 || st.value == 1.0);
                }
            }
        }
    }

    #[test]
    fn config_parsing() {
        let cfg = GridConfig::from_toml_str(
            "lambda = [0.0]\ntau2 = [0.5]\nk = [5]\nn = [40]\nreps = 10\nseed = 3\npipelines = \"usual\"\neq3_sign = \"plus\"\n",
        )
        .unwrap();
        assert_eq!(cfg.pipelines, PipelineSelection::Usual);
        assert_eq!(cfg.variance_sign, VarianceSign::Plus);
        assert!(
            GridConfig::from_toml_str("lambda = [0.0]\ntau2=[0.0]\nk=[5]\nn=[4]\nbogus=1\n")
                .is_err()
        );
        assert!(GridConfig::from_toml_str("lambda = [0.0]\ntau2=[0.0]\nk=[1]\nn=[4]\n").is_err());
        assert!(GridConfig::from_toml_str("lambda = [0.0]\ntau2=[0.0]\nk=[5]\nn=[5]\n").is_err());
    }

    #[test]
    fn scenario_key_ignores_grid_position() {
        let a = Scenario::new(0.0, 0.5, 5, 40);
        let b = Scenario::new(0.0, 0.5, 5, 40);
        assert_eq!(scenario_key(&a), scenario_key(&b));
        assert_ne!(
            scenario_key(&a),
            scenario_key(&Scenario::new(0.0, 0.5, 5, 42))
        );
    }
}
