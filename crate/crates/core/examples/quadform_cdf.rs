//! Distribution of a weighted sum of χ²₁ variables, and of the generalized
//! Q statistic with fixed weights.

use metaratio::quadform::{cdf_q_constants, cdf_weighted_chisq, WeightedChiSq};

fn main() -> Result<(), metaratio::MetaError> {
    let w = WeightedChiSq::new(vec![3.0, 1.5, 0.6, 0.2])?;
    for x in [0.5, 2.0, 5.0, 10.0, 20.0] {
        println!("P(Q <= {x:>4}) = {:.8}", cdf_weighted_chisq(&w, x)?);
    }

    // Q with a_i = 1/v_i when true variances are v_i² + τ²
    let v2 = [0.02, 0.05, 0.1, 0.3];
    let tau2 = 0.1;
    let a: Vec<f64> = v2.iter().map(|v: &f64| 1.0 / v.sqrt()).collect();
    let marginal: Vec<f64> = v2.iter().map(|v| v + tau2).collect();
    println!("P(Q_a <= 3) = {:.8}", cdf_q_constants(&a, &marginal, 3.0)?);
    Ok(())
}
