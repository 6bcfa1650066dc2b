//! Distribution of `Q_a = Σ a_i (y_i - ȳ_a)²` for fixed positive constants
//! `a_i` when `y ~ N(θ 1, Σ)` with diagonal `Σ`.
//!
//! With `B = diag(a) - a aᵀ / a₊`, `Q_a = yᵀ B y` and `B 1 = 0`, so the mean
//! drops out and `Q_a` is distributed as `Σ_j λ_j Z_j²` where the `λ_j` are the
//! nonzero eigenvalues of `Σ^{1/2} B Σ^{1/2}`.
//!
//! Two representations of that law are provided:
//!
//! * [`WeightedChiSq`] holds the eigenvalues explicitly.
//! * [`RankOneForm`] keeps `Σ^{1/2} B Σ^{1/2} = D - u uᵀ` (diagonal minus rank
//!   one) and evaluates the Laplace transform through the matrix determinant
//!   lemma in `O(K)` without an eigendecomposition. The interval estimators
//!   evaluate the law many times per data set and use this form.
//!
//! CDFs are computed by numerical inversion of the Laplace transform of the
//! CDF along a fixed Talbot contour. Near-equal eigenvalues take a chi-squared
//! mixture series instead (exact when all eigenvalues coincide), and the
//! Imhof integral is available as an independent route and fallback.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::distributions::{chi2_cdf, reg_gamma};
use crate::error::{MetaError, Result};

/// Absolute accuracy contract of every CDF routine in this module.
pub const CDF_TOLERANCE: f64 = 1e-6;

const ZERO_EIGEN_RELATIVE: f64 = 1e-12;
/// Contour resolutions tried in turn; successive values must agree.
const TALBOT_LADDER: [usize; 3] = [32, 48, 64];
const TALBOT_AGREEMENT: f64 = 1e-7;
const SERIES_MAX_RATIO: f64 = 4.0;
const SERIES_MAX_TERMS: usize = 5000;

/// Law of a quadratic form in normal variables, described by its Laplace
/// transform `E[exp(-s Q)]`.
pub trait QuadFormLaw {
    /// `ln E[exp(-s Q)]` on the branch that is real for real `s > 0`.
    fn log_laplace(&self, s: Complex64) -> Complex64;

    /// `E[Q]`.
    fn mean(&self) -> f64;
}

/// Positive linear combination of independent χ²₁ variables.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedChiSq {
    lambdas: Vec<f64>,
}

impl WeightedChiSq {
    /// Drops numerically-zero coefficients (below `1e-12 · max`) and sorts the
    /// rest in descending order.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(MetaError::Domain("eigenvalues must be finite".into()));
        }
        let max = lambdas.iter().cloned().fold(0.0, f64::max);
        lambdas.retain(|&l| l > ZERO_EIGEN_RELATIVE * max && l > 0.0);
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn dof(&self) -> usize {
        self.lambdas.len()
    }
}

impl QuadFormLaw for WeightedChiSq {
    fn log_laplace(&self, s: Complex64) -> Complex64 {
        if s.im < 0.0 {
            return self.log_laplace(s.conj()).conj();
        }
        -0.5 * sum_ln(self.lambdas.iter().map(|&l| 1.0 + 2.0 * l * s))
    }

    fn mean(&self) -> f64 {
        self.lambdas.iter().sum()
    }
}

/// `Σ ln f_i` continued from the real axis, for factors in the closed upper
/// half-plane. Multiplies the factors and counts crossings of the negative
/// real axis instead of taking one complex log per factor.
fn sum_ln(factors: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    let mut log_scale = 0.0;
    let mut wraps = 0.0;
    for f in factors {
        debug_assert!(f.im >= 0.0);
        let upper = prod.im >= 0.0;
        prod *= f;
        // each factor turns the product counterclockwise by less than π
        if upper && prod.im < 0.0 {
            wraps += 1.0;
        }
        let m = prod.re.abs().max(prod.im.abs());
        if !(1e-100..=1e100).contains(&m) {
            log_scale += m.ln();
            prod /= m;
        }
    }
    Complex64::new(
        prod.norm().ln() + log_scale,
        prod.arg() + std::f64::consts::TAU * wraps,
    )
}

fn check_constants(a: &[f64], marginal_vars: &[f64]) -> Result<()> {
    if a.len() != marginal_vars.len() {
        return Err(MetaError::DimensionMismatch {
            left: a.len(),
            right: marginal_vars.len(),
        });
    }
    if a.len() < 2 {
        return Err(MetaError::TooFewStudies {
            needed: 2,
            got: a.len(),
        });
    }
    if a.iter()
        .chain(marginal_vars)
        .any(|&x| !(x > 0.0 && x.is_finite()))
    {
        return Err(MetaError::Domain(
            "constants and variances must be positive".into(),
        ));
    }
    Ok(())
}

/// Eigenvalues of `Σ^{1/2} B Σ^{1/2}` with `B = diag(a) - a aᵀ/a₊` and
/// `Σ = diag(marginal_vars)`.
pub fn q_eigenvalues(a: &[f64], marginal_vars: &[f64]) -> Result<WeightedChiSq> {
    check_constants(a, marginal_vars)?;
    let k = a.len();
    let a_sum: f64 = a.iter().sum();
    let root: Vec<f64> = marginal_vars.iter().map(|v| v.sqrt()).collect();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let b = if i == j { a[i] } else { 0.0 } - a[i] * a[j] / a_sum;
        root[i] * b * root[j]
    });
    let eig = SymmetricEigen::new(m);
    WeightedChiSq::new(eig.eigenvalues.iter().cloned().collect())
}

/// `Σ^{1/2} B Σ^{1/2}` kept as `D - u uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneForm {
    /// `a_i σ_i²`.
    d: Vec<f64>,
    /// `a_i / a₊`; equals `u_i² / d_i`.
    share: Vec<f64>,
}

impl RankOneForm {
    pub fn new(a: &[f64], marginal_vars: &[f64]) -> Result<Self> {
        check_constants(a, marginal_vars)?;
        let a_sum: f64 = a.iter().sum();
        Ok(Self {
            d: a.iter().zip(marginal_vars).map(|(a, v)| a * v).collect(),
            share: a.iter().map(|a| a / a_sum).collect(),
        })
    }
}

impl QuadFormLaw for RankOneForm {
    fn log_laplace(&self, s: Complex64) -> Complex64 {
        // det(I + 2s(D - uuᵀ)) = Π(1 + 2s d_i) · Σ_i p_i / (1 + 2s d_i), using
        // Σ_i u_i²/d_i = 1. The secular factor's argument stays in (-π, 0] by
        // eigenvalue interlacing, so its principal log continues the branch.
        if s.im < 0.0 {
            return self.log_laplace(s.conj()).conj();
        }
        let mut secular = Complex64::new(0.0, 0.0);
        let log_diag = sum_ln(self.d.iter().zip(&self.share).map(|(&d, &p)| {
            let f = 1.0 + 2.0 * d * s;
            secular += p * f.inv();
            f
        }));
        -0.5 * (log_diag + secular.ln())
    }

    fn mean(&self) -> f64 {
        self.d
            .iter()
            .zip(&self.share)
            .map(|(d, p)| d * (1.0 - p))
            .sum()
    }
}

/// Fixed-Talbot inversion of `L[F](s) = E[exp(-sQ)] / s` at `x > 0`.
fn talbot_cdf<L: QuadFormLaw + ?Sized>(law: &L, x: f64, nodes: usize) -> f64 {
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * x);
    let s0 = Complex64::new(r, 0.0);
    let mut sum = 0.5 * (x * r + law.log_laplace(s0).re).exp() / r;
    for k in 1..nodes {
        let theta = k as f64 * std::f64::consts::PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (x * s + law.log_laplace(s)).exp() / s * Complex64::new(1.0, sigma);
        sum += term.re;
    }
    r / m * sum
}

/// CDF of any [`QuadFormLaw`] by Laplace inversion, accepted once two
/// successive contour resolutions agree.
pub fn cdf_by_inversion<L: QuadFormLaw + ?Sized>(law: &L, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(MetaError::Domain("x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    // concentrated laws (many similar coefficients) need finer contours
    let mut previous = talbot_cdf(law, x, TALBOT_LADDER[0]);
    for &nodes in &TALBOT_LADDER[1..] {
        let next = talbot_cdf(law, x, nodes);
        if next.is_finite() && (next - previous).abs() <= TALBOT_AGREEMENT {
            return Ok(next.clamp(0.0, 1.0));
        }
        previous = next;
    }
    Err(MetaError::ToleranceNotMet {
        what: "Talbot inversion",
        tolerance: TALBOT_AGREEMENT,
    })
}

/// Chi-squared mixture series with `β = min λ`; converges geometrically at rate
/// `max (1 - β/λ_j)`.
fn mixture_series_cdf(w: &WeightedChiSq, x: f64) -> Result<f64> {
    let beta = *w.lambdas.last().expect("nonempty");
    let m = w.dof() as f64;
    let gammas: Vec<f64> = w.lambdas.iter().map(|l| 1.0 - beta / l).collect();
    let c0 = w
        .lambdas
        .iter()
        .map(|l| 0.5 * (beta / l).ln())
        .sum::<f64>()
        .exp();
    let mut coefs = vec![c0];
    let mut g = Vec::new();
    let mut powers = vec![1.0; gammas.len()];
    let mut mass = c0;
    let mut cdf = c0 * reg_gamma(0.5 * m, 0.5 * x / beta).0;
    for k in 1..SERIES_MAX_TERMS {
        if 1.0 - mass <= 1e-14 {
            return Ok(cdf.clamp(0.0, 1.0));
        }
        let mut gk = 0.0;
        for (p, gamma) in powers.iter_mut().zip(&gammas) {
            *p *= gamma;
            gk += *p;
        }
        g.push(0.5 * gk);
        let ck = (0..k).map(|r| g[k - r - 1] * coefs[r]).sum::<f64>() / k as f64;
        coefs.push(ck);
        mass += ck;
        cdf += ck * reg_gamma(0.5 * m + k as f64, 0.5 * x / beta).0;
    }
    if 1.0 - mass <= CDF_TOLERANCE * 1e-2 {
        Ok(cdf.clamp(0.0, 1.0))
    } else {
        Err(MetaError::ToleranceNotMet {
            what: "chi-squared mixture series",
            tolerance: CDF_TOLERANCE,
        })
    }
}

/// `P(Σ λ_j Z_j² ≤ x)` by Imhof's integral.
pub fn imhof_cdf(w: &WeightedChiSq, x: f64) -> Result<f64> {
    const TOL: f64 = 1e-9;
    const MAX_PANELS: f64 = 4e6;
    const NODES: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    if x <= 0.0 {
        return Ok(0.0);
    }
    if w.dof() == 0 {
        return Ok(1.0);
    }
    let half_m = 0.5 * w.dof() as f64;
    let sum_log = w.lambdas.iter().map(|l| l.ln()).sum::<f64>();
    // truncation error bound: 1 / (π k U^k Π λ_j^{1/2}) with k = m/2
    let log_u = -((std::f64::consts::PI * half_m * TOL).ln() + 0.5 * sum_log) / half_m;
    let upper = log_u.exp();
    // panels narrow enough to resolve both the x·u phase and the atan(λ_max u) knee
    let width = 0.25 * std::f64::consts::PI / (w.mean() + x).max(w.lambdas[0] * 4.0);
    let panels = (upper / width).ceil();
    if !panels.is_finite() || panels > MAX_PANELS {
        return Err(MetaError::ToleranceNotMet {
            what: "Imhof integral",
            tolerance: TOL,
        });
    }
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.5 * (w.mean() - x);
        }
        let mut theta = -0.5 * x * u;
        let mut log_rho = 0.0;
        for &l in &w.lambdas {
            theta += 0.5 * (l * u).atan();
            log_rho += 0.25 * (l * l * u * u).ln_1p();
        }
        theta.sin() / (u * log_rho.exp())
    };
    let mut integral = 0.0;
    for p in 0..panels as usize {
        let a = p as f64 * width;
        let mid = a + 0.5 * width;
        integral += 0.5
            * width
            * NODES
                .iter()
                .zip(&WEIGHTS)
                .map(|(n, wt)| wt * integrand(mid + 0.5 * width * n))
                .sum::<f64>();
    }
    Ok((0.5 - integral / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// `P(Σ λ_j Z_j² ≤ x)` to absolute accuracy [`CDF_TOLERANCE`].
pub fn cdf_weighted_chisq(w: &WeightedChiSq, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(MetaError::Domain(format!(
            "x must be nonnegative (got {x})"
        )));
    }
    match w.dof() {
        0 => return Ok(1.0),
        1 => return chi2_cdf(1.0, x / w.lambdas[0]),
        _ => {}
    }
    let ratio = w.lambdas[0] / w.lambdas[w.dof() - 1];
    if ratio <= SERIES_MAX_RATIO {
        if let Ok(p) = mixture_series_cdf(w, x) {
            return Ok(p);
        }
    }
    cdf_by_inversion(w, x).or_else(|_| imhof_cdf(w, x))
}

/// CDF of the law of `Q_a` given constants and marginal variances, using the
/// rank-one form and falling back to eigenvalues when inversion cannot
/// certify its accuracy.
pub fn cdf_q_constants(a: &[f64], marginal_vars: &[f64], x: f64) -> Result<f64> {
    let form = RankOneForm::new(a, marginal_vars)?;
    // equal a_i σ_i²: the nonzero eigenvalues all equal that common value
    let d0 = form.d[0];
    if form.d.iter().all(|d| (d - d0).abs() <= 1e-12 * d0) {
        if x.is_nan() {
            return Err(MetaError::Domain("x is NaN".into()));
        }
        return match form.d.len() {
            1 => Ok(1.0),
            k => chi2_cdf((k - 1) as f64, x.max(0.0) / d0),
        };
    }
    match cdf_by_inversion(&form, x) {
        Ok(p) => Ok(p),
        Err(MetaError::ToleranceNotMet { .. }) => {
            cdf_weighted_chisq(&q_eigenvalues(a, marginal_vars)?, x)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_case_has_unit_eigenvalues() {
        let sigma2 = 0.37;
        let a = vec![1.0 / sigma2; 6];
        let v = vec![sigma2; 6];
        let w = q_eigenvalues(&a, &v).unwrap();
        assert_eq!(w.dof(), 5);
        for l in w.lambdas() {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_study_eigenvalue_closed_form() {
        let (a1, a2, s1, s2) = (2.0, 0.5, 0.3, 1.7);
        let w = q_eigenvalues(&[a1, a2], &[s1, s2]).unwrap();
        assert_eq!(w.dof(), 1);
        let expected = a1 * a2 / (a1 + a2) * (s1 + s2);
        assert!((w.lambdas()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn talbot_matches_closed_form_for_two_dof() {
        let w = WeightedChiSq::new(vec![1.0, 1.0]).unwrap();
        for &x in &[1e-4, 0.05, 0.5, 1.0, 2.0, 5.99, 12.0, 40.0] {
            let exact = -(-x / 2.0f64).exp_m1();
            let got = cdf_by_inversion(&w, x).unwrap();
            assert!((got - exact).abs() < 1e-8, "x={x} got={got} exact={exact}");
        }
    }

    #[test]
    fn single_coefficient_is_scaled_chi2() {
        let w = WeightedChiSq::new(vec![2.5]).unwrap();
        for &x in &[0.1, 1.0, 4.0, 20.0] {
            let exact = chi2_cdf(1.0, x / 2.5).unwrap();
            assert!((cdf_weighted_chisq(&w, x).unwrap() - exact).abs() < 1e-12);
            assert!((cdf_by_inversion(&w, x).unwrap() - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_one_form_matches_eigenvalues() {
        let a = [3.0, 0.7, 1.1, 9.0, 0.2];
        let v = [0.4, 1.5, 0.9, 0.12, 3.0];
        let w = q_eigenvalues(&a, &v).unwrap();
        let form = RankOneForm::new(&a, &v).unwrap();
        assert!((w.mean() - form.mean()).abs() < 1e-12 * w.mean());
        for &s in &[
            Complex64::new(0.3, 0.0),
            Complex64::new(-0.02, 4.0),
            Complex64::new(-30.0, 2.0),
        ] {
            let (p, q) = (w.log_laplace(s), form.log_laplace(s));
            assert!((p - q).norm() < 1e-10 * (1.0 + p.norm()), "{p} vs {q}");
        }
        for &x in &[0.5, 2.0, 5.0, 11.0] {
            let p = cdf_by_inversion(&form, x).unwrap();
            let q = cdf_weighted_chisq(&w, x).unwrap();
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn running_product_log_matches_termwise_logs() {
        let lambdas: Vec<f64> = (0..150)
            .map(|i| 0.01 + (i as f64 * 0.37).sin().abs() * 40.0)
            .collect();
        let w = WeightedChiSq::new(lambdas.clone()).unwrap();
        for s in [
            Complex64::new(0.3, 0.0),
            Complex64::new(-5.0, 2.0),
            Complex64::new(0.1, 40.0),
            Complex64::new(-200.0, 0.01),
        ] {
            let direct = -0.5
                * lambdas
                    .iter()
                    .map(|&l| (1.0 + 2.0 * l * s).ln())
                    .sum::<Complex64>();
            let fast = w.log_laplace(s);
            assert!(
                (direct - fast).norm() < 1e-9 * (1.0 + direct.norm()),
                "{s}: {direct} vs {fast}"
            );
            let conj = w.log_laplace(s.conj());
            assert!((conj - direct.conj()).norm() < 1e-9 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn imhof_agrees_with_inversion() {
        let w = WeightedChiSq::new(vec![5.0, 2.0, 1.0, 0.5, 0.1]).unwrap();
        for &x in &[0.5, 3.0, 8.6, 20.0] {
            let a = imhof_cdf(&w, x).unwrap();
            let b = cdf_by_inversion(&w, x).unwrap();
            assert!((a - b).abs() < 1e-7, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn series_and_inversion_agree_for_close_eigenvalues() {
        let w = WeightedChiSq::new(vec![1.9, 1.4, 1.0, 0.8]).unwrap();
        for &x in &[0.3, 2.0, 5.0, 15.0] {
            let a = mixture_series_cdf(&w, x).unwrap();
            let b = cdf_by_inversion(&w, x).unwrap();
            assert!((a - b).abs() < 1e-9, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            q_eigenvalues(&[1.0, 2.0], &[1.0]),
            Err(MetaError::DimensionMismatch { .. })
        ));
        assert!(RankOneForm::new(&[1.0], &[1.0]).is_err());
        let w = WeightedChiSq::new(vec![1.0, 2.0]).unwrap();
        assert!(cdf_weighted_chisq(&w, -1.0).is_err());
        assert_eq!(cdf_weighted_chisq(&w, 0.0).unwrap(), 0.0);
    }
}
