//! Fundamental matrix and particular solutions of `y' + A(t) y = f(t)`.
//!
//! Integration is classical RK4 with the grid step; the coefficient is
//! evaluated at half steps by five-point interpolation of its nodal samples.
//! Higher derivatives of solutions are never differenced numerically: they
//! come from the Leibniz recurrence
//! `y^(k+1) = f^(k) - Σ_{i ≤ k} C(k,i) A^(i) y^(k-i)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::function::{CMatrix, CVector, Grid, GridMatrixFunction, GridVectorFunction, Interval};

/// Largest supported smoothness order `s`.
pub const MAX_SMOOTHNESS: usize = 5;

/// Relative factor in the determinant floor `1e-12 · exp(-(b-a) max ‖A‖)`.
pub const DET_FLOOR_FACTOR: f64 = 1e-12;

/// Solution of `Y' + A Y = 0`, `Y(a) = I`, with derivatives up to `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    y: GridMatrixFunction,
    interval: Interval,
}

impl FundamentalMatrix {
    pub fn matrix(&self) -> &GridMatrixFunction {
        &self.y
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn dim(&self) -> usize {
        self.y.rows()
    }

    /// `Y(b)`.
    pub fn at_end(&self) -> &CMatrix {
        self.y.level(0).last().expect("grid has nodes")
    }

    /// Homogeneous solution `t ↦ Y(t) q`.
    pub fn apply(&self, q: &CVector) -> Result<GridVectorFunction> {
        self.y.mul_vector(q)
    }
}

/// Solution of `y' + A y = f`, `y(a) = 0`, with derivatives up to `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticularSolution {
    y_p: GridVectorFunction,
}

impl ParticularSolution {
    pub fn function(&self) -> &GridVectorFunction {
        &self.y_p
    }

    pub fn into_function(self) -> GridVectorFunction {
        self.y_p
    }
}

fn check_smoothness(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidProblem(
            "smoothness order s must be at least 1".into(),
        ));
    }
    if s > MAX_SMOOTHNESS {
        return Err(Error::UnsupportedDerivativeOrder {
            requested: s,
            available: MAX_SMOOTHNESS,
        });
    }
    Ok(())
}

fn check_coefficient(a: &GridMatrixFunction, s: usize) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch {
            context: "coefficient A".into(),
            expected_rows: a.rows(),
            expected_cols: a.rows(),
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if a.d_max() + 1 < s {
        return Err(Error::UnsupportedDerivativeOrder {
            requested: s - 1,
            available: a.d_max(),
        });
    }
    Ok(())
}

fn midpoints(grid: &Grid) -> Vec<f64> {
    grid.nodes()
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

fn matrix_midpoints(a: &GridMatrixFunction) -> Result<Vec<CMatrix>> {
    midpoints(a.grid())
        .into_iter()
        .map(|t| a.interpolate(t, 0))
        .collect()
}

fn vector_midpoints(f: &GridVectorFunction) -> Result<Vec<CVector>> {
    midpoints(f.grid())
        .into_iter()
        .map(|t| f.interpolate(t, 0))
        .collect()
}

/// RK4 for `y' = -A(t) y + g(t)` over the whole grid.
fn rk4_linear(
    grid: &Grid,
    a_nodes: &[CMatrix],
    a_mid: &[CMatrix],
    forcing: Option<(&[CVector], &[CVector])>,
    y0: CVector,
) -> Vec<CVector> {
    let h = grid.step();
    let hc = Complex64::new(h, 0.0);
    let half = Complex64::new(0.5 * h, 0.0);
    let rhs = |a: &CMatrix, g: Option<&CVector>, y: &CVector| -> CVector {
        let mut out = -(a * y);
        if let Some(g) = g {
            out += g;
        }
        out
    };
    let mut ys = Vec::with_capacity(grid.n_nodes());
    ys.push(y0);
    for i in 0..grid.n_steps() {
        let y = &ys[i];
        let (g0, gm, g1) = match forcing {
            Some((nodes, mid)) => (Some(&nodes[i]), Some(&mid[i]), Some(&nodes[i + 1])),
            None => (None, None, None),
        };
        let k1 = rhs(&a_nodes[i], g0, y);
        let k2 = rhs(&a_mid[i], gm, &(y + &k1 * half));
        let k3 = rhs(&a_mid[i], gm, &(y + &k2 * half));
        let k4 = rhs(&a_nodes[i + 1], g1, &(y + &k3 * hc));
        let next =
            y + (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
        ys.push(next);
    }
    ys
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Fills derivative levels `1..=s` from level 0 via the Leibniz recurrence.
fn leibniz_levels(
    a: &GridMatrixFunction,
    base: Vec<CMatrix>,
    forcing: Option<&GridMatrixFunction>,
    s: usize,
) -> Vec<Vec<CMatrix>> {
    let n = base.len();
    let mut levels = vec![base];
    for k in 0..s {
        let level: Vec<CMatrix> = (0..n)
            .map(|node| {
                let mut acc = match forcing {
                    Some(f) => f.level(k)[node].clone(),
                    None => {
                        let y = &levels[0][node];
                        CMatrix::zeros(a.rows(), y.ncols())
                    }
                };
                for i in 0..=k {
                    let term = &a.level(i)[node] * &levels[k - i][node];
                    acc -= term * Complex64::new(binomial(k, i), 0.0);
                }
                acc
            })
            .collect();
        levels.push(level);
    }
    levels
}

/// Derivative stack `Y^(k)`, `k = 0..=s`, of a solution of `Y' = -A Y`
/// given its samples (level 0 of `y` is used; higher levels are recomputed).
pub fn derivative_stack(
    a: &GridMatrixFunction,
    y: &GridMatrixFunction,
    s: usize,
) -> Result<GridMatrixFunction> {
    if !a.grid().same_as(y.grid()) {
        return Err(Error::GridMismatch);
    }
    if a.d_max() + 1 < s {
        return Err(Error::UnsupportedDerivativeOrder {
            requested: s - 1,
            available: a.d_max(),
        });
    }
    if a.cols() != y.rows() {
        return Err(Error::ShapeMismatch {
            context: "derivative stack".into(),
            expected_rows: a.cols(),
            expected_cols: y.cols(),
            rows: y.rows(),
            cols: y.cols(),
        });
    }
    let levels = leibniz_levels(a, y.level(0).to_vec(), None, s);
    GridMatrixFunction::new(y.grid().clone(), y.rows(), y.cols(), levels)
}

/// Entrywise ℓ1 norm; bounds `|tr A|`, so it keeps the Liouville bound valid.
fn entrywise_l1(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

/// Determinant floor used for the nonsingularity check of `Y(t)`.
pub fn determinant_floor(a: &GridMatrixFunction) -> f64 {
    let max_norm = a.level(0).iter().map(entrywise_l1).fold(0.0, f64::max);
    DET_FLOOR_FACTOR * (-a.grid().interval().length() * max_norm).exp()
}

/// Integrates `Y' + A(t) Y = 0`, `Y(a) = I`, and attaches `Y^(k)` for `k ≤ s`.
pub fn solve_fundamental(a: &GridMatrixFunction, s: usize) -> Result<FundamentalMatrix> {
    check_smoothness(s)?;
    check_coefficient(a, s)?;
    let grid = a.grid();
    let m = a.rows();
    let a_mid = matrix_midpoints(a)?;
    let columns: Vec<Vec<CVector>> = (0..m)
        .map(|j| {
            let mut e = CVector::zeros(m);
            e[j] = Complex64::new(1.0, 0.0);
            rk4_linear(grid, a.level(0), &a_mid, None, e)
        })
        .collect();
    let mut base: Vec<CMatrix> = (0..grid.n_nodes())
        .map(|i| CMatrix::from_fn(m, m, |r, c| columns[c][i][r]))
        .collect();
    base[0] = CMatrix::identity(m, m);

    let floor = determinant_floor(a);
    for (t, y) in grid.nodes().iter().zip(&base) {
        let det = y.determinant().norm();
        if det.is_nan() || det <= floor || !det.is_finite() {
            return Err(Error::SingularFundamentalMatrix { t: *t, det, floor });
        }
    }

    let levels = leibniz_levels(a, base, None, s);
    Ok(FundamentalMatrix {
        y: GridMatrixFunction::new(grid.clone(), m, m, levels)?,
        interval: grid.interval(),
    })
}

/// Solves `y' + A y = f`, `y(a) = q` directly by RK4, with derivatives up to `s`.
pub fn solve_initial_value(
    a: &GridMatrixFunction,
    f: Option<&GridVectorFunction>,
    q: &CVector,
    s: usize,
) -> Result<GridVectorFunction> {
    check_smoothness(s)?;
    check_coefficient(a, s)?;
    let grid = a.grid();
    let m = a.rows();
    if q.len() != m {
        return Err(Error::ShapeMismatch {
            context: "initial value".into(),
            expected_rows: m,
            expected_cols: 1,
            rows: q.len(),
            cols: 1,
        });
    }
    let forcing_matrix = match f {
        Some(f) => {
            if !f.grid().same_as(grid) {
                return Err(Error::GridMismatch);
            }
            if f.dim() != m {
                return Err(Error::ShapeMismatch {
                    context: "right-hand side".into(),
                    expected_rows: m,
                    expected_cols: 1,
                    rows: f.dim(),
                    cols: 1,
                });
            }
            if f.d_max() + 1 < s {
                return Err(Error::UnsupportedDerivativeOrder {
                    requested: s - 1,
                    available: f.d_max(),
                });
            }
            let levels = f
                .levels()
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|v| CMatrix::from_column_slice(m, 1, v.as_slice()))
                        .collect()
                })
                .collect();
            Some(GridMatrixFunction::new(grid.clone(), m, 1, levels)?)
        }
        None => None,
    };
    let a_mid = matrix_midpoints(a)?;
    let f_mid = f.map(vector_midpoints).transpose()?;
    let forcing = f
        .zip(f_mid.as_ref())
        .map(|(f, mid)| (f.level(0), mid.as_slice()));
    let mut ys = rk4_linear(grid, a.level(0), &a_mid, forcing, q.clone());
    ys[0] = q.clone();
    let base: Vec<CMatrix> = ys
        .into_iter()
        .map(|v| CMatrix::from_column_slice(m, 1, v.as_slice()))
        .collect();
    let levels = leibniz_levels(a, base, forcing_matrix.as_ref(), s);
    GridMatrixFunction::new(grid.clone(), m, 1, levels)?.into_vector_function()
}

/// Particular solution normalized by `y_p(a) = 0`.
pub fn solve_particular(
    a: &GridMatrixFunction,
    f: &GridVectorFunction,
    s: usize,
) -> Result<ParticularSolution> {
    if !a.grid().same_as(f.grid()) {
        return Err(Error::GridMismatch);
    }
    let y_p = solve_initial_value(a, Some(f), &CVector::zeros(a.rows()), s)?;
    Ok(ParticularSolution { y_p })
}

/// Largest node residual `‖y'(t_i) + A(t_i) y(t_i) - f(t_i)‖`, with `y'`
/// taken by five-point differences of the level-0 samples (independent of
/// the stored derivative levels).
pub fn ode_residual(
    a: &GridMatrixFunction,
    f: Option<&GridVectorFunction>,
    y: &GridVectorFunction,
) -> Result<f64> {
    if !a.grid().same_as(y.grid()) || f.is_some_and(|f| !f.grid().same_as(y.grid())) {
        return Err(Error::GridMismatch);
    }
    let grid = y.grid();
    let samples = y.level(0);
    let mut worst = 0.0_f64;
    for i in 0..grid.n_nodes() {
        let (start, w) = grid.derivative_stencil(i, 1);
        let mut r = &a.level(0)[i] * &samples[i];
        for (j, wj) in w.iter().enumerate() {
            r += &samples[start + j] * Complex64::new(*wj, 0.0);
        }
        if let Some(f) = f {
            r -= &f.level(0)[i];
        }
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
