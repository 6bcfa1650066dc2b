//! Run a small grid in parallel and write the results CSV.
//!
//! cargo run --release --example desk_grid -- [out.csv]

use metaratio::report::write_results_csv;
use metaratio::simgrid::{run_grid_with, GridConfig};

fn main() -> Result<(), metaratio::MetaError> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "small_grid.csv".into());
    let mut config = GridConfig::with_axes(vec![0.0], vec![0.0, 0.5, 1.0], vec![5, 10], vec![20]);
    config.reps = 200;
    config.seed = 7;
    let results = run_grid_with(&config, |r| eprintln!("done {:?}", r.scenario))?;
    write_results_csv(&results, out.as_ref())?;
    println!("{} cells written to {out}", results.len());
    Ok(())
}
