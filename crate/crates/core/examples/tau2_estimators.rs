//! The four between-study variance estimators on one set of effects.

use metaratio::heterogeneity::{cochran_q, estimate_tau2};
use metaratio::model::{effects_from, Tau2Method};

fn main() -> Result<(), metaratio::MetaError> {
    let effects = effects_from(
        &[0.12, 0.45, -0.08, 0.61, 0.30, 0.22, 0.95],
        &[0.020, 0.045, 0.015, 0.080, 0.030, 0.010, 0.120],
    );
    println!(
        "Cochran's Q = {:.4} on {} df",
        cochran_q(&effects)?,
        effects.len() - 1
    );
    for &m in Tau2Method::ALL {
        let t = estimate_tau2(&effects, m)?;
        println!(
            "{m:<5} tau2 = {:.6}  iterations {:>3}  converged {}",
            t.value, t.iterations, t.converged
        );
    }
    Ok(())
}
