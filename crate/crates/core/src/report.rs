//! Long-format result tables (CSV) and small-multiple SVG figures: one panel
//! per (K, n) cell, τ² on the x-axis, one line per method.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{MetaError, Result};
use crate::model::Pipeline;
use crate::simgrid::{Metric, ScenarioResult};

pub const CSV_HEADER: [&str; 11] = [
    "lambda", "tau2", "k", "n", "pipeline", "method", "metric", "value", "mc_se", "reps",
    "failures",
];

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub lambda: f64,
    pub tau2: f64,
    pub k: usize,
    pub n: usize,
    pub pipeline: Pipeline,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
    pub mc_se: f64,
    pub reps: usize,
    pub failures: usize,
}

impl ResultRow {
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.lambda
            .total_cmp(&other.lambda)
            .then(self.tau2.total_cmp(&other.tau2))
            .then(self.k.cmp(&other.k))
            .then(self.n.cmp(&other.n))
            .then(self.pipeline.label().cmp(other.pipeline.label()))
            .then(self.method.cmp(&other.method))
            .then(self.metric.label().cmp(other.metric.label()))
    }
}

/// Flatten scenario results into sorted rows.
pub fn results_to_rows(results: &[ScenarioResult]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for r in results {
        for p in &r.pipelines {
            for ((metric, method), stat) in &p.stats {
                rows.push(ResultRow {
                    lambda: r.scenario.lambda,
                    tau2: r.scenario.tau2,
                    k: r.scenario.k,
                    n: r.scenario.n_total,
                    pipeline: p.pipeline,
                    method: method.clone(),
                    metric: *metric,
                    value: stat.value,
                    mc_se: stat.mc_se,
                    reps: r.reps,
                    failures: stat.failures,
                });
            }
        }
    }
    rows.sort_by(ResultRow::sort_key_cmp);
    rows
}

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_value(s: &str) -> std::result::Result<f64, std::num::ParseFloatError> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse(),
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| MetaError::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.tau2.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.pipeline.label().to_string(),
            r.method.clone(),
            r.metric.label().to_string(),
            fmt_value(r.value),
            fmt_value(r.mc_se),
            r.reps.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the long-format results table.
pub fn write_results_csv(results: &[ScenarioResult], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(&results_to_rows(results), std::io::BufWriter::new(file))
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| MetaError::Schema(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(MetaError::Schema(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| MetaError::Schema(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |field: &str, e: &dyn std::fmt::Display| MetaError::Parse {
            line,
            message: format!("column `{field}`: {e}"),
        };
        macro_rules! num {
            ($i:expr, $parse:expr) => {
                $parse(&rec[$i]).map_err(|e| bad(CSV_HEADER[$i], &e))?
            };
        }
        rows.push(ResultRow {
            lambda: num!(0, parse_value),
            tau2: num!(1, parse_value),
            k: num!(2, str::parse::<usize>),
            n: num!(3, str::parse::<usize>),
            pipeline: num!(4, str::parse::<Pipeline>),
            method: rec[5].to_string(),
            metric: num!(6, str::parse::<Metric>),
            value: num!(7, parse_value),
            mc_se: num!(8, parse_value),
            reps: num!(9, str::parse::<usize>),
            failures: num!(10, str::parse::<usize>),
        });
    }
    Ok(rows)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(std::fs::File::open(path)?)
}

/// Fixed colors so that figures stay comparable across runs.
pub const PALETTE: [(&str, &str); 15] = [
    ("DL", "#1f77b4"),
    ("REML", "#d62728"),
    ("MP", "#2ca02c"),
    ("J", "#9467bd"),
    ("SSW", "#ff7f0e"),
    ("QP", "#1f77b4"),
    ("BJ", "#d62728"),
    ("PL", "#2ca02c"),
    ("IV-DL", "#1f77b4"),
    ("IV-REML", "#d62728"),
    ("IV-MP", "#2ca02c"),
    ("IV-J", "#9467bd"),
    ("HKSJ", "#8c564b"),
    ("HKSJ-MP", "#e377c2"),
    ("SSW-MP", "#ff7f0e"),
];

fn color(method: &str) -> &'static str {
    PALETTE
        .iter()
        .find(|(m, _)| *m == method)
        .map_or("#7f7f7f", |(_, c)| c)
}

fn title(metric: Metric) -> &'static str {
    match metric {
        Metric::BiasTau2 => "Bias of estimators of between-studies variance",
        Metric::BiasLambda => "Bias of estimators of the overall log response ratio",
        Metric::CoverageTau2 => "Coverage of 95% intervals for between-studies variance",
        Metric::CoverageLambda => "Coverage of 95% intervals for the overall log response ratio",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 170.0;
const PAD_L: f64 = 48.0;
const PAD_B: f64 = 32.0;
const PAD_T: f64 = 22.0;
const PAD_R: f64 = 10.0;
const HEAD: f64 = 64.0;

/// Points `(τ², value)` keyed by `(k, n, method)`.
type Traces<'a> = BTreeMap<(usize, usize, &'a str), Vec<(f64, f64)>>;

/// Render one figure from rows at fixed metric, λ and pipeline. Rows are
/// K values and columns n values.
pub fn render_rows_panel_grid(
    rows: &[ResultRow],
    metric: Metric,
    lambda: f64,
    pipeline: Pipeline,
) -> Result<String> {
    let sel: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| {
            r.metric == metric && r.pipeline == pipeline && (r.lambda - lambda).abs() <= 1e-12
        })
        .collect();
    if sel.is_empty() {
        return Err(MetaError::NonRectangularGrid(format!(
            "no {metric} rows for lambda = {lambda}, pipeline {pipeline}"
        )));
    }
    let ks: BTreeSet<usize> = sel.iter().map(|r| r.k).collect();
    let ns: BTreeSet<usize> = sel.iter().map(|r| r.n).collect();
    let cells: BTreeSet<(usize, usize)> = sel.iter().map(|r| (r.k, r.n)).collect();
    if cells.len() != ks.len() * ns.len() {
        let missing: Vec<String> = ks
            .iter()
            .flat_map(|&k| ns.iter().map(move |&n| (k, n)))
            .filter(|c| !cells.contains(c))
            .map(|(k, n)| format!("(K={k}, n={n})"))
            .collect();
        return Err(MetaError::NonRectangularGrid(format!(
            "missing cells {}",
            missing.join(", ")
        )));
    }
    let methods: Vec<&str> = {
        let present: BTreeSet<&str> = sel.iter().map(|r| r.method.as_str()).collect();
        let mut ordered: Vec<&str> = metric
            .methods()
            .into_iter()
            .filter(|m| present.contains(m))
            .collect();
        ordered.extend(present.iter().filter(|m| !metric.methods().contains(m)));
        ordered
    };

    let finite = |v: f64| v.is_finite();
    let (mut x_lo, mut x_hi) = sel
        .iter()
        .map(|r| r.tau2)
        .fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.05;
        x_hi += 0.05;
    }
    let reference: f64 = if metric.is_coverage() { 0.95 } else { 0.0 };
    let (mut y_lo, mut y_hi) = sel
        .iter()
        .map(|r| r.value)
        .filter(|v| finite(*v))
        .fold((reference, reference), |(a, b), y| (a.min(y), b.max(y)));
    if metric.is_coverage() {
        y_lo = y_lo.max(0.0);
        y_hi = y_hi.min(1.0).max(reference);
    }
    let pad = ((y_hi - y_lo) * 0.06).max(1e-3);
    y_lo -= pad;
    y_hi += pad;

    let cols = ns.len() as f64;
    let width = cols * PANEL_W;
    let height = HEAD + ks.len() as f64 * PANEL_H;
    let mut svg = String::new();
    let w = &mut svg;
    // writes into a String cannot fail
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        w,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="18" font-size="14" text-anchor="middle">{} (λ = {lambda}, {pipeline})</text>"#,
        width / 2.0,
        escape(title(metric))
    );
    // legend
    let mut lx = 12.0;
    for m in &methods {
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.1}" y1="38" x2="{:.1}" y2="38" stroke="{}" stroke-width="2"/><text x="{:.1}" y="42" font-size="11">{}</text>"#,
            lx + 18.0,
            color(m),
            lx + 22.0,
            escape(m)
        );
        lx += 30.0 + 7.0 * m.len() as f64;
    }

    let by_cell: Traces = sel.iter().fold(BTreeMap::new(), |mut acc, r| {
        acc.entry((r.k, r.n, r.method.as_str()))
            .or_insert_with(Vec::new)
            .push((r.tau2, r.value));
        acc
    });

    for (row, &k) in ks.iter().enumerate() {
        for (col, &n) in ns.iter().enumerate() {
            let ox = col as f64 * PANEL_W;
            let oy = HEAD + row as f64 * PANEL_H;
            let (px0, px1) = (ox + PAD_L, ox + PANEL_W - PAD_R);
            let (py0, py1) = (oy + PAD_T, oy + PANEL_H - PAD_B);
            let sx = |x: f64| px0 + (x - x_lo) / (x_hi - x_lo) * (px1 - px0);
            let sy = |y: f64| py1 - (y - y_lo) / (y_hi - y_lo) * (py1 - py0);
            let _ = writeln!(w, r#"<g>"#);
            let _ = writeln!(
                w,
                r##"<rect x="{px0:.1}" y="{py0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
                px1 - px0,
                py1 - py0
            );
            let _ = writeln!(
                w,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">K = {k}, n = {n}</text>"#,
                (px0 + px1) / 2.0,
                py0 - 6.0
            );
            let _ = writeln!(
                w,
                r##"<line x1="{px0:.1}" y1="{y:.1}" x2="{px1:.1}" y2="{y:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
                y = sy(reference)
            );
            for (tick, anchor) in [(x_lo, "start"), (x_hi, "end")] {
                let _ = writeln!(
                    w,
                    r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="{anchor}">{:.2}</text>"#,
                    sx(tick),
                    py1 + 11.0,
                    tick
                );
            }
            for tick in [y_lo + pad, y_hi - pad] {
                let _ = writeln!(
                    w,
                    r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end">{:.3}</text>"#,
                    px0 - 3.0,
                    sy(tick) + 3.0,
                    tick
                );
            }
            let _ = writeln!(
                w,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">τ²</text>"#,
                (px0 + px1) / 2.0,
                py1 + 24.0
            );
            let _ = writeln!(
                w,
                r#"<text x="{x:.1}" y="{y:.1}" font-size="10" text-anchor="middle" transform="rotate(-90 {x:.1} {y:.1})">{}</text>"#,
                metric.label(),
                x = ox + 12.0,
                y = (py0 + py1) / 2.0
            );
            for m in &methods {
                let Some(points) = by_cell.get(&(k, n, *m)) else {
                    continue;
                };
                let mut pts: Vec<(f64, f64)> =
                    points.iter().copied().filter(|(_, y)| finite(*y)).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let coords: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                if coords.len() > 1 {
                    let _ = writeln!(
                        w,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                        color(m),
                        coords.join(" ")
                    );
                }
                for &(x, y) in &pts {
                    let _ = writeln!(
                        w,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                        sx(x),
                        sy(y),
                        color(m)
                    );
                }
            }
            let _ = writeln!(w, "</g>");
        }
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

/// Render scenario results to an SVG file.
pub fn render_panel_grid(
    results: &[ScenarioResult],
    metric: Metric,
    lambda: f64,
    pipeline: Pipeline,
    path: &Path,
) -> Result<()> {
    let svg = render_rows_panel_grid(&results_to_rows(results), metric, lambda, pipeline)?;
    std::fs::write(path, svg)?;
    Ok(())
}

/// File name used for a (metric, λ, pipeline) figure.
pub fn figure_name(metric: Metric, lambda: f64, pipeline: Pipeline) -> String {
    format!(
        "{}_lambda{}_{}.svg",
        metric.label(),
        lambda,
        pipeline.label()
    )
}
