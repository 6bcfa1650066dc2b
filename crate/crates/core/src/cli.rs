//! Command-line front end: `analyze`, `simulate` and `plot`.
//!
//! Data goes to stdout or files, diagnostics to stderr. The exit status is 0
//! only when nothing failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::analysis::{analyze, Analysis};
use crate::effects::VarianceSign;
use crate::error::{MetaError, Result};
use crate::model::{validate_study, ArmSummary, Pipeline, StudySummary};
use crate::report::{figure_name, read_results_csv, render_rows_panel_grid, write_results_csv};
use crate::simgrid::{run_grid_with, GridConfig, Metric};

/// Environment variable consulted for the worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "METARATIO_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "metaratio",
    version,
    about = "Random-effects meta-analysis of log response ratios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a CSV of study summaries
    /// (header: study_id,n_t,mean_t,sd_t,n_c,mean_c,sd_c).
    Analyze {
        input: PathBuf,
        /// Use the bias-corrected study-level estimates.
        #[arg(long)]
        bias_correction: bool,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Sign of the second-order term in the corrected variance.
        #[arg(long = "eq3-sign", value_name = "SIGN", default_value = "as_printed", value_parser = ["as_printed", "plus"])]
        variance_sign: String,
        /// Also write the results as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation grid described by a TOML file and write results CSV.
    Simulate {
        config: PathBuf,
        /// Worker threads (default: METARATIO_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Output CSV (default: `output` from the config, else results.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG panel grids from a results CSV.
    Plot {
        results: PathBuf,
        /// bias_tau2, bias_lambda, coverage_tau2 or coverage_lambda.
        #[arg(long)]
        metric: String,
        /// Only this λ (default: every λ in the file).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Entry point used by the binary.
pub fn main_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Analyze {
            input,
            bias_correction,
            level,
            variance_sign,
            out,
        } => cmd_analyze(
            &input,
            bias_correction,
            level,
            &variance_sign,
            out.as_deref(),
        ),
        Command::Simulate {
            config,
            threads,
            seed,
            reps,
            out,
        } => cmd_simulate(&config, threads, seed, reps, out.as_deref()),
        Command::Plot {
            results,
            metric,
            lambda,
            out_dir,
        } => cmd_plot(&results, &metric, lambda, &out_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[derive(Debug, Deserialize)]
struct StudyRecord {
    study_id: String,
    n_t: u32,
    mean_t: f64,
    sd_t: f64,
    n_c: u32,
    mean_c: f64,
    sd_c: f64,
}

/// Read and validate study summaries.
pub fn read_studies(path: &Path) -> Result<Vec<StudySummary>> {
    let file = std::fs::File::open(path)?;
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for rec in rd.deserialize::<StudyRecord>() {
        let rec = rec.map_err(|e| MetaError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        out.push(validate_study(StudySummary::new(
            rec.study_id,
            ArmSummary::new(rec.n_t, rec.mean_t, rec.sd_t),
            ArmSummary::new(rec.n_c, rec.mean_c, rec.sd_c),
        ))?);
    }
    Ok(out)
}

fn print_analysis(
    out: &mut impl Write,
    studies: &[StudySummary],
    a: &Analysis,
) -> std::io::Result<usize> {
    let mut failures = 0;
    writeln!(
        out,
        "pipeline: {}   level: {}   studies: {}",
        a.pipeline,
        a.level,
        studies.len()
    )?;
    writeln!(out, "\nstudy effects")?;
    writeln!(
        out,
        "  {:<16} {:>12} {:>12} {:>12}",
        "study", "estimate", "variance", "floored"
    )?;
    for (s, e) in studies.iter().zip(&a.effects) {
        writeln!(
            out,
            "  {:<16} {:>12.6} {:>12.6} {:>12}",
            s.id, e.estimate, e.variance, e.variance_floored
        )?;
    }
    writeln!(out, "\nbetween-study variance")?;
    for (m, r) in &a.tau2 {
        match r {
            Ok(t) => writeln!(
                out,
                "  {:<8} {:>12.6}{}",
                m.label(),
                t.value,
                if t.truncated { "  (truncated)" } else { "" }
            )?,
            Err(e) => {
                failures += 1;
                writeln!(out, "  {:<8} failed: {e}", m.label())?
            }
        }
    }
    writeln!(out, "\nbetween-study variance intervals")?;
    for (m, r) in &a.tau2_intervals {
        match r {
            Ok(iv) => {
                let hi = if iv.hi.is_unbounded() {
                    "inf".to_string()
                } else {
                    format!("{:.6}", iv.hi.value())
                };
                writeln!(out, "  {:<8} [{:.6}, {hi}]", m.label(), iv.lo)?
            }
            Err(e) => {
                failures += 1;
                writeln!(out, "  {:<8} failed: {e}", m.label())?
            }
        }
    }
    writeln!(out, "\noverall effect")?;
    for (m, r) in &a.pooled {
        match r {
            Ok(p) => writeln!(
                out,
                "  {:<8} {:>12.6}  (variance {:.6})",
                m.label(),
                p.estimate,
                p.variance
            )?,
            Err(e) => {
                failures += 1;
                writeln!(out, "  {:<8} failed: {e}", m.label())?
            }
        }
    }
    writeln!(out, "\noverall effect intervals")?;
    for (m, r) in &a.intervals {
        match r {
            Ok(iv) => writeln!(out, "  {:<8} [{:.6}, {:.6}]", m.label(), iv.lo, iv.hi)?,
            Err(e) => {
                failures += 1;
                writeln!(out, "  {:<8} failed: {e}", m.label())?
            }
        }
    }
    Ok(failures)
}

/// Long-format CSV of one analysis: `quantity,method,estimate,variance,lo,hi,level`.
pub fn write_analysis_csv(path: &Path, studies: &[StudySummary], a: &Analysis) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| MetaError::Io(std::io::Error::other(e)))?;
    let mut rows: Vec<[String; 7]> = Vec::new();
    let f = |x: f64| {
        if x.is_finite() {
            format!("{x:.16e}")
        } else if x.is_nan() {
            "nan".into()
        } else {
            "inf".into()
        }
    };
    let blank = String::new;
    for (s, e) in studies.iter().zip(&a.effects) {
        rows.push([
            "effect".into(),
            s.id.clone(),
            f(e.estimate),
            f(e.variance),
            blank(),
            blank(),
            blank(),
        ]);
    }
    for (m, r) in &a.tau2 {
        if let Ok(t) = r {
            rows.push([
                "tau2".into(),
                m.label().into(),
                f(t.value),
                blank(),
                blank(),
                blank(),
                blank(),
            ]);
        }
    }
    for (m, r) in &a.tau2_intervals {
        if let Ok(iv) = r {
            rows.push([
                "tau2_interval".into(),
                m.label().into(),
                blank(),
                blank(),
                f(iv.lo),
                f(iv.hi.value()),
                a.level.to_string(),
            ]);
        }
    }
    for (m, r) in &a.pooled {
        if let Ok(p) = r {
            rows.push([
                "pooled".into(),
                m.label().into(),
                f(p.estimate),
                f(p.variance),
                blank(),
                blank(),
                blank(),
            ]);
        }
    }
    for (m, r) in &a.intervals {
        if let Ok(iv) = r {
            rows.push([
                "interval".into(),
                m.label().into(),
                blank(),
                blank(),
                f(iv.lo),
                f(iv.hi),
                a.level.to_string(),
            ]);
        }
    }
    let csv_err = |e: csv::Error| MetaError::Io(std::io::Error::other(e));
    w.write_record([
        "quantity", "method", "estimate", "variance", "lo", "hi", "level",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_analyze(
    input: &Path,
    bias_correction: bool,
    level: f64,
    variance_sign: &str,
    out: Option<&Path>,
) -> Result<()> {
    let sign: VarianceSign = variance_sign.parse()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(MetaError::InvalidArgument(format!(
            "--level must lie in (0, 1) (got {level})"
        )));
    }
    let studies = read_studies(input)?;
    let pipeline = if bias_correction {
        Pipeline::Corrected
    } else {
        Pipeline::Usual
    };
    let a = analyze(&studies, pipeline, sign, level)?;
    let failures = print_analysis(&mut std::io::stdout().lock(), &studies, &a)?;
    if let Some(path) = out {
        write_analysis_csv(path, &studies, &a)?;
    }
    if failures > 0 {
        return Err(MetaError::InvalidArgument(format!(
            "{failures} method(s) failed; see the report above"
        )));
    }
    Ok(())
}

/// Worker count: the flag wins, then the environment variable, then rayon's default.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return if t == 0 {
            Err(MetaError::InvalidArgument(
                "--threads must be at least 1".into(),
            ))
        } else {
            Ok(Some(t))
        };
    }
    match env {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(MetaError::InvalidArgument(format!(
                "{THREADS_ENV} must be a positive integer (got `{s}`)"
            ))),
        },
    }
}

fn cmd_simulate(
    config: &Path,
    threads: Option<usize>,
    seed: Option<u64>,
    reps: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let mut cfg = GridConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = reps {
        cfg.reps = r;
    }
    cfg.validate()?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let env = std::env::var(THREADS_ENV).ok();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = resolve_threads(threads, env.as_deref())? {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| MetaError::Config(e.to_string()))?;
    let cells = cfg.scenarios().len();
    eprintln!(
        "running {cells} cells x {} replications on {} threads",
        cfg.reps,
        pool.current_num_threads()
    );
    let results = pool.install(|| {
        run_grid_with(&cfg, |r| {
            let s = &r.scenario;
            eprintln!(
                "done: lambda={} tau2={} k={} n={}",
                s.lambda, s.tau2, s.k, s.n_total
            );
        })
    })?;
    write_results_csv(&results, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_plot(results: &Path, metric: &str, lambda: Option<f64>, out_dir: &Path) -> Result<()> {
    let metric: Metric = metric.parse()?;
    let rows = read_results_csv(results)?;
    let mut combos: Vec<(f64, Pipeline)> = Vec::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        if lambda.is_some_and(|l| (l - r.lambda).abs() > 1e-12) {
            continue;
        }
        if !combos
            .iter()
            .any(|&(l, p)| l == r.lambda && p == r.pipeline)
        {
            combos.push((r.lambda, r.pipeline));
        }
    }
    if combos.is_empty() {
        return Err(MetaError::Schema(format!(
            "no {metric} rows match the request"
        )));
    }
    combos.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.label().cmp(b.1.label())));
    std::fs::create_dir_all(out_dir)?;
    for (l, p) in combos {
        let svg = render_rows_panel_grid(&rows, metric, l, p)?;
        let path = out_dir.join(figure_name(metric, l, p));
        std::fs::write(&path, svg)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_precedence() {
        assert_eq!(resolve_threads(Some(3), Some("8")).unwrap(), Some(3));
        assert_eq!(resolve_threads(None, Some("8")).unwrap(), Some(8));
        assert_eq!(resolve_threads(None, None).unwrap(), None);
        assert!(resolve_threads(None, Some("zero")).is_err());
        assert!(resolve_threads(Some(0), None).is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
