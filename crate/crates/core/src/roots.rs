//! Bracketed one-dimensional solvers shared by the estimators.

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Stopping rule for [`brent`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    /// Absolute width of the final bracket.
    pub xtol: f64,
    /// Stop as soon as `|f(x)| <= ftol`.
    pub ftol: f64,
    pub max_iter: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            xtol: 1e-14,
            ftol: 0.0,
            max_iter: 200,
        }
    }
}

/// Brent's method on `[a, b]`; `fa` and `fb` must have opposite signs (or one
/// of them be zero). The closure may fail, in which case the error is passed
/// through untouched.
pub(crate) fn brent<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: Tolerance,
) -> Result<Root, E> {
    debug_assert!(
        fa * fb <= 0.0,
        "root is not bracketed: f({a})={fa}, f({b})={fb}"
    );
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: fa,
            iterations: 0,
            converged: true,
        });
    }
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: fb,
            iterations: 0,
            converged: true,
        });
    }
    let mut c = b;
    let mut fc = fb;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=tol.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.ftol {
            return Ok(Root {
                x: b,
                fx: fb,
                iterations: iter,
                converged: true,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Ok(Root {
        x: b,
        fx: fb,
        iterations: tol.max_iter,
        converged: false,
    })
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub(crate) fn golden_max(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    xtol: f64,
) -> (f64, f64, u32) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while (b - a).abs() > xtol && iterations < 500 {
        iterations += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1, iterations)
    } else {
        (x2, f2, iterations)
    }
}
