//! Study-level log response ratios, with and without the small-sample
//! correction.

use metaratio::effects::{lrr, lrr_bias_corrected, VarianceSign};
use metaratio::model::{ArmSummary, StudySummary};

fn main() -> Result<(), metaratio::MetaError> {
    let studies = [
        StudySummary::new(
            "small",
            ArmSummary::new(5, 3.0, 2.5),
            ArmSummary::new(5, 2.0, 1.8),
        ),
        StudySummary::new(
            "medium",
            ArmSummary::new(30, 3.0, 2.5),
            ArmSummary::new(30, 2.0, 1.8),
        ),
        StudySummary::new(
            "large",
            ArmSummary::new(500, 3.0, 2.5),
            ArmSummary::new(500, 2.0, 1.8),
        ),
    ];
    println!(
        "{:<8} {:>10} {:>10} {:>10} {:>10}",
        "study", "lrr", "var", "corrected", "var"
    );
    for s in &studies {
        let u = lrr(s)?;
        let c = lrr_bias_corrected(s, VarianceSign::AsPrinted)?;
        println!(
            "{:<8} {:>10.5} {:>10.5} {:>10.5} {:>10.5}{}",
            s.id,
            u.estimate,
            u.variance,
            c.estimate,
            c.variance,
            if c.variance_floored {
                "  (floored)"
            } else {
                ""
            }
        );
    }
    Ok(())
}
