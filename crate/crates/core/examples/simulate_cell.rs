//! Run one simulation cell and print bias and coverage for every method.
//!
//! cargo run --release --example simulate_cell -- [lambda tau2 k n reps seed]

use std::time::Instant;

use metaratio::model::Scenario;
use metaratio::simgrid::{run_scenario, Metric, SimOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, default: f64| args.get(i).map_or(Ok(default), |s| s.parse::<f64>());
    let scenario = Scenario::new(
        num(0, 0.0)?,
        num(1, 0.5)?,
        num(2, 10.0)? as usize,
        num(3, 40.0)? as usize,
    );
    let reps = num(4, 1000.0)? as usize;
    let seed = num(5, 1.0)? as u64;

    let start = Instant::now();
    let result = run_scenario(&scenario, reps, seed, &SimOptions::default())?;
    eprintln!("{reps} replications in {:.2?}", start.elapsed());

    for summary in &result.pipelines {
        println!("pipeline {}", summary.pipeline);
        for metric in Metric::ALL {
            for method in metric.methods() {
                let s = summary
                    .stat(metric, method)
                    .expect("every method is tallied");
                println!(
                    "  {:<16} {:<8} {:>9.4} (se {:.4}, n {}, failed {})",
                    metric, method, s.value, s.mc_se, s.count, s.failures
                );
            }
        }
        println!("  floored studies: {}", summary.floored_studies);
    }
    Ok(())
}
