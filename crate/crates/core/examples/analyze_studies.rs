//! Full analysis of a CSV of study summaries.
//!
//! cargo run --example analyze_studies -- [crates/core/data/example_studies.csv]

use metaratio::analysis::analyze;
use metaratio::cli::read_studies;
use metaratio::effects::VarianceSign;
use metaratio::model::{CiMethod, Pipeline, PointMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/example_studies.csv").to_string()
    });
    let studies = read_studies(path.as_ref())?;
    for pipeline in [Pipeline::Usual, Pipeline::Corrected] {
        let a = analyze(&studies, pipeline, VarianceSign::AsPrinted, 0.95)?;
        println!("{pipeline}: {} floored variances", a.floored());
        for &m in PointMethod::ALL {
            if let Ok(p) = a.pooled(m) {
                println!("  {m:<5} {:.5}", p.estimate);
            }
        }
        for &m in CiMethod::ALL {
            if let Ok(iv) = a.interval(m) {
                println!("  {m:<8} [{:.5}, {:.5}]", iv.lo, iv.hi);
            }
        }
    }
    Ok(())
}
