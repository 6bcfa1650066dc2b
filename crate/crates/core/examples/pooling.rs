//! Overall effect: IV means under each τ² estimate, HKSJ, and the
//! sample-size-weighted mean.

use metaratio::effects::{compute_effects, VarianceSign};
use metaratio::heterogeneity::{tau2_dl, tau2_mp};
use metaratio::model::{ArmSummary, Pipeline, StudySummary};
use metaratio::pooling::{ci_hksj, ci_iv_normal, ci_ssw_t, pool_iv, pool_ssw};

fn main() -> Result<(), metaratio::MetaError> {
    let studies: Vec<StudySummary> = [
        (10, 2.4, 1.1, 2.0, 0.9),
        (25, 3.0, 1.5, 2.1, 1.0),
        (14, 1.9, 0.8, 1.8, 0.8),
        (40, 2.8, 1.2, 2.2, 1.1),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(n, mt, st, mc, sc))| {
        StudySummary::new(
            format!("s{i}"),
            ArmSummary::new(n, mt, st),
            ArmSummary::new(n, mc, sc),
        )
    })
    .collect();
    let effects = compute_effects(&studies, Pipeline::Usual, VarianceSign::AsPrinted)?;

    let dl = tau2_dl(&effects)?;
    let mp = tau2_mp(&effects)?;
    let iv = pool_iv(&effects, dl)?;
    let ci = ci_iv_normal(&iv, 0.95)?;
    println!("IV-DL   {:.5}  [{:.5}, {:.5}]", iv.estimate, ci.lo, ci.hi);
    let h = ci_hksj(&effects, dl, 0.95)?;
    println!("HKSJ            [{:.5}, {:.5}]", h.lo, h.hi);
    let ssw = pool_ssw(&effects, &studies, mp)?;
    let s = ci_ssw_t(&ssw, studies.len(), 0.95)?;
    println!("SSW-MP  {:.5}  [{:.5}, {:.5}]", ssw.estimate, s.lo, s.hi);
    Ok(())
}
