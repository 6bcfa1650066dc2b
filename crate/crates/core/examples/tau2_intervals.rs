//! Q-profile, Biggerstaff–Jackson, Jackson and profile-likelihood intervals
//! for τ².

use metaratio::model::{effects_from, Tau2IntervalMethod};
use metaratio::tau_intervals::tau2_interval;

fn main() -> Result<(), metaratio::MetaError> {
    let effects = effects_from(
        &[0.12, 0.45, -0.08, 0.61, 0.30, 0.22, 0.95],
        &[0.020, 0.045, 0.015, 0.080, 0.030, 0.010, 0.120],
    );
    for level in [0.90, 0.95] {
        println!("level {level}");
        for &m in Tau2IntervalMethod::ALL {
            let iv = tau2_interval(&effects, m, level)?;
            println!("  {m:<3} [{:.5}, {:.5}]", iv.lo, iv.hi);
        }
    }
    Ok(())
}
