//! Render SVG panel grids for every metric from a results CSV.
//!
//! cargo run --example plot_results -- results.csv [out_dir]

use metaratio::model::Pipeline;
use metaratio::report::{figure_name, read_results_csv, render_rows_panel_grid};
use metaratio::simgrid::Metric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let input = args
        .next()
        .ok_or("usage: plot_results <results.csv> [out_dir]")?;
    let out_dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let rows = read_results_csv(input.as_ref())?;
    let mut lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    std::fs::create_dir_all(&out_dir)?;
    for metric in Metric::ALL {
        for &lambda in &lambdas {
            for &pipeline in Pipeline::ALL {
                if !rows
                    .iter()
                    .any(|r| r.metric == metric && r.lambda == lambda && r.pipeline == pipeline)
                {
                    continue;
                }
                let path = out_dir.join(figure_name(metric, lambda, pipeline));
                std::fs::write(
                    &path,
                    render_rows_panel_grid(&rows, metric, lambda, pipeline)?,
                )?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
