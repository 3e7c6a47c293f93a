//! Reference implementations that share no code path with the solver.
//!
//! These back the self-test command and the test suites. They are plain,
//! slow and deliberately simple.

use num_complex::Complex64;

use crate::function::CMatrix;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.125 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * Complex64::new(scale, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &x * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `Σ_k alphas[k] (-A)^k`.
pub fn taylor_boundary_matrix(alphas: &[CMatrix], a: &CMatrix) -> CMatrix {
    let m = a.nrows();
    let r = alphas.first().map_or(0, |x| x.nrows());
    let mut power = CMatrix::identity(m, m);
    let mut out = CMatrix::zeros(r, m);
    for alpha in alphas {
        out += alpha * &power;
        power = &power * (-a);
    }
    out
}

/// Right-sided Riemann-Liouville derivative of a constant `c` at distance
/// `dist = b - t` from the right end, `0 < α < 1`.
pub fn rl_of_constant(c: f64, alpha: f64, dist: f64) -> f64 {
    c * dist.powf(-alpha) / statrs::function::gamma::gamma(1.0 - alpha)
}

/// Adaptive Simpson quadrature of a real function.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Right-sided RL derivative, `0 < α < 1`, by direct quadrature of the
/// defining integral `D^α y (t) = -1/Γ(1-α) d/dt ∫_t^b (τ-t)^(-α) y(τ) dτ`.
/// The outer derivative is a symmetric difference of the quadrature.
pub fn rl_by_quadrature(y: &dyn Fn(f64) -> f64, alpha: f64, t: f64, b: f64) -> f64 {
    let beta = 1.0 - alpha;
    let integral = |x: f64| {
        // u = (τ - x)^β removes the endpoint singularity
        let upper = (b - x).powf(beta);
        adaptive_simpson(
            &|u: f64| y(x + u.powf(1.0 / beta)) / beta,
            0.0,
            upper,
            1e-14,
        )
    };
    let h = 1e-4 * (b - t);
    let d = (integral(t + h) - integral(t - h)) / (2.0 * h);
    -d / statrs::function::gamma::gamma(beta)
}
