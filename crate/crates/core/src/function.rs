//! Grid representations of scalar, vector and matrix functions on a finite
//! interval, together with the interpolation, differentiation and quadrature
//! primitives the rest of the crate is built on.
//!
//! Every function is stored as a stack of derivative levels: level `d` holds
//! the samples of the `d`-th derivative at the grid nodes. All values are
//! complex, even when the inputs are real.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default number of grid steps.
pub const DEFAULT_N_STEPS: usize = 2048;

/// Highest derivative order available from finite-difference stencils.
pub const MAX_SAMPLED_ORDER: usize = 2;

/// Five-point stencils and interpolation windows need at least this many steps.
pub const MIN_STEPS: usize = 4;

/// Relative distance (in grid steps) under which a point is identified with a node.
pub const NODE_SNAP_TOL: f64 = 1e-9;

/// A finite interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }
}

/// Uniform grid over an [`Interval`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    interval: Interval,
    n_steps: usize,
    nodes: Vec<f64>,
}

/// How a point is evaluated from nodal samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    /// The point is a grid node; use the stored sample.
    Node(usize),
    /// Five-point Lagrange weights applied to nodes `start..start + 5`.
    Lagrange { start: usize, weights: [f64; 5] },
}

impl Grid {
    pub fn new(interval: Interval, n_steps: usize) -> Result<Self> {
        if n_steps < MIN_STEPS {
            return Err(Error::TooFewSteps {
                n_steps,
                min: MIN_STEPS,
            });
        }
        let h = interval.length() / n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps).map(|i| interval.a + i as f64 * h).collect();
        nodes[0] = interval.a;
        nodes[n_steps] = interval.b;
        Ok(Self {
            interval,
            n_steps,
            nodes,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn step(&self) -> f64 {
        self.interval.length() / self.n_steps as f64
    }

    /// Two grids are compatible when they describe the same nodes.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_steps == other.n_steps && self.interval == other.interval
    }

    fn check_inside(&self, t: f64) -> Result<f64> {
        let Interval { a, b } = self.interval;
        let slack = 1e-12 * (b - a);
        if !t.is_finite() || t < a - slack || t > b + slack {
            return Err(Error::PointOutsideInterval { t, a, b });
        }
        Ok(t.clamp(a, b))
    }

    /// Index of the node within `NODE_SNAP_TOL` grid steps of `t`, if any.
    pub fn node_index(&self, t: f64) -> Result<Option<usize>> {
        let t = self.check_inside(t)?;
        let u = (t - self.interval.a) / self.step();
        let k = (u.round() as usize).min(self.n_steps);
        if t == self.nodes[k] || (u - k as f64).abs() <= NODE_SNAP_TOL {
            Ok(Some(k))
        } else {
            Ok(None)
        }
    }

    /// Stencil for evaluating a nodal function at `t`.
    pub fn stencil(&self, t: f64) -> Result<Stencil> {
        let t = self.check_inside(t)?;
        let u = (t - self.interval.a) / self.step();
        let k = (u.round() as usize).min(self.n_steps);
        if t == self.nodes[k] {
            return Ok(Stencil::Node(k));
        }
        let start = k.saturating_sub(2).min(self.n_steps - 4);
        let x = (t - self.nodes[start]) / self.step();
        Ok(Stencil::Lagrange {
            start,
            weights: lagrange5(x),
        })
    }

    /// Composite Simpson pattern `1, 4, 2, ..., 4, 1`; the rule is
    /// `h/3 · Σ pattern[i] f(t_i)`.
    pub fn simpson_pattern(&self) -> Result<Vec<f64>> {
        if !self.n_steps.is_multiple_of(2) {
            return Err(Error::OddStepCount(self.n_steps));
        }
        Ok((0..=self.n_steps)
            .map(|i| {
                if i == 0 || i == self.n_steps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
            })
            .collect())
    }

    /// Finite-difference weights (already scaled by `h^-order`) for the
    /// `order`-th derivative at node `i`, using five nodes: centered where
    /// possible, one-sided near the ends. Returns `(first_node, weights)`.
    pub fn derivative_stencil(&self, i: usize, order: usize) -> (usize, [f64; 5]) {
        let start = i.saturating_sub(2).min(self.n_steps - 4);
        let offsets: Vec<f64> = (0..5).map(|j| (start + j) as f64 - i as f64).collect();
        let table = fd_weights(0.0, &offsets, order);
        let scale = self.step().powi(order as i32);
        let mut w = [0.0; 5];
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = table[order][j] / scale;
        }
        (start, w)
    }
}

/// Lagrange basis on the integer nodes 0..=4 evaluated at `x`.
fn lagrange5(x: f64) -> [f64; 5] {
    let mut w = [0.0; 5];
    for (j, wj) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for i in 0..5 {
            if i != j {
                p *= (x - i as f64) / (j as f64 - i as f64);
            }
        }
        *wj = p;
    }
    w
}

/// Fornberg's recursion: weights `c[k][j]` such that
/// `f^(k)(z) ≈ Σ_j c[k][j] f(x_j)` for `k = 0..=max_order`.
pub fn fd_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn combine_vectors(samples: &[CVector], stencil: Stencil) -> CVector {
    match stencil {
        Stencil::Node(k) => samples[k].clone(),
        Stencil::Lagrange { start, weights } => {
            let mut out = samples[start].scale(weights[0]);
            for (j, w) in weights.iter().enumerate().skip(1) {
                out.axpy(
                    Complex64::new(*w, 0.0),
                    &samples[start + j],
                    Complex64::new(1.0, 0.0),
                );
            }
            out
        }
    }
}

fn combine_matrices(samples: &[CMatrix], stencil: Stencil) -> CMatrix {
    match stencil {
        Stencil::Node(k) => samples[k].clone(),
        Stencil::Lagrange { start, weights } => {
            let mut out = samples[start].scale(weights[0]);
            for (j, w) in weights.iter().enumerate().skip(1) {
                out += samples[start + j].scale(*w);
            }
            out
        }
    }
}

/// Samples of a complex `dim`-vector function and its derivatives on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorFunction {
    grid: Grid,
    dim: usize,
    levels: Vec<Vec<CVector>>,
}

impl GridVectorFunction {
    /// Builds a function from derivative levels; `levels[d][i]` is the `d`-th
    /// derivative at node `i`.
    pub fn new(grid: Grid, dim: usize, levels: Vec<Vec<CVector>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidProblem(
                "function needs at least one level".into(),
            ));
        }
        for level in &levels {
            if level.len() != grid.n_nodes() {
                return Err(Error::GridMismatch);
            }
            if let Some(v) = level.iter().find(|v| v.len() != dim) {
                return Err(Error::ShapeMismatch {
                    context: "vector function sample".into(),
                    expected_rows: dim,
                    expected_cols: 1,
                    rows: v.len(),
                    cols: 1,
                });
            }
        }
        Ok(Self { grid, dim, levels })
    }

    pub fn zeros(grid: Grid, dim: usize, d_max: usize) -> Self {
        let n = grid.n_nodes();
        Self {
            grid,
            dim,
            levels: vec![vec![CVector::zeros(dim); n]; d_max + 1],
        }
    }

    /// Samples `f(d, t)` for every level `d` and node `t`.
    pub fn from_fn(
        grid: Grid,
        dim: usize,
        d_max: usize,
        f: impl Fn(usize, f64) -> CVector,
    ) -> Result<Self> {
        let levels = (0..=d_max)
            .map(|d| grid.nodes().iter().map(|&t| f(d, t)).collect())
            .collect();
        Self::new(grid, dim, levels)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, d: usize) -> &[CVector] {
        &self.levels[d]
    }

    pub fn levels(&self) -> &[Vec<CVector>] {
        &self.levels
    }

    /// Value of the `deriv`-th derivative at `t`, by five-point Lagrange
    /// interpolation of the stored samples. Exact at nodes.
    pub fn interpolate(&self, t: f64, deriv: usize) -> Result<CVector> {
        if deriv > self.d_max() {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: deriv,
                available: self.d_max(),
            });
        }
        let stencil = self.grid.stencil(t)?;
        Ok(combine_vectors(&self.levels[deriv], stencil))
    }

    /// `self + alpha * other`, level by level over the common levels.
    pub fn add_scaled(&self, alpha: Complex64, other: &GridVectorFunction) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                context: "vector function sum".into(),
                expected_rows: self.dim,
                expected_cols: 1,
                rows: other.dim,
                cols: 1,
            });
        }
        let depth = self.levels.len().min(other.levels.len());
        let levels = (0..depth)
            .map(|d| {
                self.levels[d]
                    .iter()
                    .zip(&other.levels[d])
                    .map(|(x, y)| x + y * alpha)
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            dim: self.dim,
            levels,
        })
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            dim: self.dim,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|v| v * alpha).collect())
                .collect(),
        }
    }

    /// Keeps only derivative levels `0..=d_max`.
    pub fn truncated(&self, d_max: usize) -> Self {
        let mut out = self.clone();
        out.levels.truncate(d_max + 1);
        out
    }

    /// Grid realization of `Σ_{d ≤ order} max_i |x^(d)(t_i)|`.
    pub fn norm_up_to(&self, order: usize) -> f64 {
        self.levels
            .iter()
            .take(order + 1)
            .map(|l| l.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .sum()
    }
}

/// Samples of a complex `rows × cols` matrix function and its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMatrixFunction {
    grid: Grid,
    rows: usize,
    cols: usize,
    levels: Vec<Vec<CMatrix>>,
}

impl GridMatrixFunction {
    pub fn new(grid: Grid, rows: usize, cols: usize, levels: Vec<Vec<CMatrix>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidProblem(
                "function needs at least one level".into(),
            ));
        }
        for level in &levels {
            if level.len() != grid.n_nodes() {
                return Err(Error::GridMismatch);
            }
            if let Some(v) = level.iter().find(|v| v.shape() != (rows, cols)) {
                return Err(Error::ShapeMismatch {
                    context: "matrix function sample".into(),
                    expected_rows: rows,
                    expected_cols: cols,
                    rows: v.nrows(),
                    cols: v.ncols(),
                });
            }
        }
        Ok(Self {
            grid,
            rows,
            cols,
            levels,
        })
    }

    /// Constant matrix with vanishing derivatives up to `d_max`.
    pub fn constant(grid: Grid, value: &CMatrix, d_max: usize) -> Self {
        let n = grid.n_nodes();
        let (rows, cols) = value.shape();
        let mut levels = vec![vec![value.clone(); n]];
        for _ in 0..d_max {
            levels.push(vec![CMatrix::zeros(rows, cols); n]);
        }
        Self {
            grid,
            rows,
            cols,
            levels,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn d_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, d: usize) -> &[CMatrix] {
        &self.levels[d]
    }

    pub fn levels(&self) -> &[Vec<CMatrix>] {
        &self.levels
    }

    pub fn interpolate(&self, t: f64, deriv: usize) -> Result<CMatrix> {
        if deriv > self.d_max() {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: deriv,
                available: self.d_max(),
            });
        }
        let stencil = self.grid.stencil(t)?;
        Ok(combine_matrices(&self.levels[deriv], stencil))
    }

    /// Column `j` as a vector function, all levels.
    pub fn column(&self, j: usize) -> GridVectorFunction {
        GridVectorFunction {
            grid: self.grid.clone(),
            dim: self.rows,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|mat| mat.column(j).into_owned()).collect())
                .collect(),
        }
    }

    /// The vector function `t ↦ F(t) d` with all derivative levels.
    pub fn mul_vector(&self, d: &CVector) -> Result<GridVectorFunction> {
        if d.len() != self.cols {
            return Err(Error::ShapeMismatch {
                context: "matrix function times vector".into(),
                expected_rows: self.cols,
                expected_cols: 1,
                rows: d.len(),
                cols: 1,
            });
        }
        Ok(GridVectorFunction {
            grid: self.grid.clone(),
            dim: self.rows,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|mat| mat * d).collect())
                .collect(),
        })
    }

    pub fn add_scaled(&self, alpha: Complex64, other: &GridMatrixFunction) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch {
                context: "matrix function sum".into(),
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        let depth = self.levels.len().min(other.levels.len());
        let levels = (0..depth)
            .map(|d| {
                self.levels[d]
                    .iter()
                    .zip(&other.levels[d])
                    .map(|(x, y)| x + y * alpha)
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            rows: self.rows,
            cols: self.cols,
            levels,
        })
    }

    /// Largest node-wise Frobenius distance over levels `0..=order`.
    pub fn max_level_distance(&self, other: &GridMatrixFunction, order: usize) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let available = self.d_max().min(other.d_max());
        if order > available {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: order,
                available,
            });
        }
        let mut worst = 0.0_f64;
        for d in 0..=order {
            for (x, y) in self.levels[d].iter().zip(&other.levels[d]) {
                worst = worst.max((x - y).norm());
            }
        }
        Ok(worst)
    }

    /// Grid realization of `Σ_{d ≤ order} max_i ‖X^(d)(t_i)‖`.
    pub fn norm_up_to(&self, order: usize) -> f64 {
        self.levels
            .iter()
            .take(order + 1)
            .map(|l| l.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .sum()
    }

    /// Reinterprets a single-column function as a vector function.
    pub fn into_vector_function(self) -> Result<GridVectorFunction> {
        if self.cols != 1 {
            return Err(Error::ShapeMismatch {
                context: "vector-valued coefficient".into(),
                expected_rows: self.rows,
                expected_cols: 1,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(GridVectorFunction {
            grid: self.grid,
            dim: self.rows,
            levels: self
                .levels
                .into_iter()
                .map(|l| {
                    l.into_iter()
                        .map(|mat| mat.column(0).into_owned())
                        .collect()
                })
                .collect(),
        })
    }
}

/// Pointwise-evaluable matrix function whose derivatives are obtained by
/// five-point finite differences on the grid.
#[derive(Clone)]
pub struct SampledCoefficient {
    rows: usize,
    cols: usize,
    max_order: usize,
    func: Arc<dyn Fn(f64) -> CMatrix + Send + Sync>,
}

impl SampledCoefficient {
    /// `max_order` is the highest derivative the caller will request; it
    /// cannot exceed [`MAX_SAMPLED_ORDER`].
    pub fn new(
        rows: usize,
        cols: usize,
        max_order: usize,
        func: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        if max_order > MAX_SAMPLED_ORDER {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: max_order,
                available: MAX_SAMPLED_ORDER,
            });
        }
        Ok(Self {
            rows,
            cols,
            max_order,
            func: Arc::new(func),
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        (self.func)(t)
    }
}

impl fmt::Debug for SampledCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledCoefficient")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("max_order", &self.max_order)
            .finish_non_exhaustive()
    }
}

/// Concrete encodings of a matrix coefficient `A(t)` (or, with one column,
/// of a right-hand side `f(t)`).
#[derive(Debug, Clone)]
pub enum CoefficientSpec {
    Constant(CMatrix),
    /// `Σ_k coeffs[k] t^k`.
    Polynomial(Vec<CMatrix>),
    Sampled(SampledCoefficient),
}

impl CoefficientSpec {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::Constant(CMatrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Constant(c) => c.shape(),
            Self::Polynomial(cs) => cs.first().map_or((0, 0), |c| c.shape()),
            Self::Sampled(s) => (s.rows, s.cols),
        }
    }

    /// Highest derivative order this encoding can deliver.
    pub fn max_order(&self) -> usize {
        match self {
            Self::Constant(_) | Self::Polynomial(_) => usize::MAX,
            Self::Sampled(s) => s.max_order,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::Polynomial(cs) = self {
            let Some(first) = cs.first() else {
                return Err(Error::InvalidProblem(
                    "polynomial coefficient has no terms".into(),
                ));
            };
            if let Some(c) = cs.iter().find(|c| c.shape() != first.shape()) {
                return Err(Error::ShapeMismatch {
                    context: "polynomial coefficient".into(),
                    expected_rows: first.nrows(),
                    expected_cols: first.ncols(),
                    rows: c.nrows(),
                    cols: c.ncols(),
                });
            }
        }
        Ok(())
    }

    /// Value at `t`.
    pub fn eval(&self, t: f64) -> CMatrix {
        match self {
            Self::Constant(c) => c.clone(),
            Self::Polynomial(cs) => poly_derivative(cs, 0, t),
            Self::Sampled(s) => s.eval(t),
        }
    }

    /// Derivative stack up to `d_max` on `grid`.
    pub fn materialize(&self, grid: &Grid, d_max: usize) -> Result<GridMatrixFunction> {
        self.validate()?;
        if d_max > self.max_order() {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: d_max,
                available: self.max_order(),
            });
        }
        let (rows, cols) = self.shape();
        match self {
            Self::Constant(c) => Ok(GridMatrixFunction::constant(grid.clone(), c, d_max)),
            Self::Polynomial(cs) => {
                let levels = (0..=d_max)
                    .map(|d| {
                        grid.nodes()
                            .iter()
                            .map(|&t| poly_derivative(cs, d, t))
                            .collect()
                    })
                    .collect();
                GridMatrixFunction::new(grid.clone(), rows, cols, levels)
            }
            Self::Sampled(s) => {
                let values: Vec<CMatrix> = grid.nodes().iter().map(|&t| s.eval(t)).collect();
                if let Some(v) = values.iter().find(|v| v.shape() != (rows, cols)) {
                    return Err(Error::ShapeMismatch {
                        context: "sampled coefficient".into(),
                        expected_rows: rows,
                        expected_cols: cols,
                        rows: v.nrows(),
                        cols: v.ncols(),
                    });
                }
                let mut levels = Vec::with_capacity(d_max + 1);
                for d in 1..=d_max {
                    levels.push(finite_difference_level(grid, &values, d));
                }
                levels.insert(0, values);
                GridMatrixFunction::new(grid.clone(), rows, cols, levels)
            }
        }
    }
}

impl CoefficientSpec {
    /// `self + eps · direction`, staying analytic when both operands are.
    pub fn perturbed(&self, eps: f64, direction: &CoefficientSpec) -> Result<CoefficientSpec> {
        if self.shape() != direction.shape() {
            let (rows, cols) = self.shape();
            let (r, c) = direction.shape();
            return Err(Error::ShapeMismatch {
                context: "perturbation direction".into(),
                expected_rows: rows,
                expected_cols: cols,
                rows: r,
                cols: c,
            });
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let e = Complex64::new(eps, 0.0);
        let as_poly = |spec: &CoefficientSpec| match spec {
            Self::Constant(c) => Some(vec![c.clone()]),
            Self::Polynomial(cs) => Some(cs.clone()),
            Self::Sampled(_) => None,
        };
        match (self, direction) {
            (Self::Constant(x), Self::Constant(y)) => Ok(Self::Constant(x + y * e)),
            _ => match (as_poly(self), as_poly(direction)) {
                (Some(mut xs), Some(ys)) => {
                    let (rows, cols) = self.shape();
                    if xs.len() < ys.len() {
                        xs.resize(ys.len(), CMatrix::zeros(rows, cols));
                    }
                    for (x, y) in xs.iter_mut().zip(&ys) {
                        *x += y * e;
                    }
                    Ok(Self::Polynomial(xs))
                }
                _ => {
                    let (rows, cols) = self.shape();
                    let order = self
                        .max_order()
                        .min(direction.max_order())
                        .min(MAX_SAMPLED_ORDER);
                    let (base, dir) = (self.clone(), direction.clone());
                    Ok(Self::Sampled(SampledCoefficient::new(
                        rows,
                        cols,
                        order,
                        move |t| base.eval(t) + dir.eval(t) * e,
                    )?))
                }
            },
        }
    }
}

/// Order-`d` derivative of `Σ_k cs[k] t^k` at `t`, via Horner on the
/// differentiated coefficients.
fn poly_derivative(cs: &[CMatrix], d: usize, t: f64) -> CMatrix {
    let (rows, cols) = cs[0].shape();
    let mut acc = CMatrix::zeros(rows, cols);
    for k in (d..cs.len()).rev() {
        let falling: f64 = ((k - d + 1)..=k).map(|j| j as f64).product();
        acc = acc * Complex64::new(t, 0.0) + cs[k].scale(falling);
    }
    acc
}

fn finite_difference_level(grid: &Grid, values: &[CMatrix], order: usize) -> Vec<CMatrix> {
    (0..grid.n_nodes())
        .map(|i| {
            let (start, w) = grid.derivative_stencil(i, order);
            combine_matrices(values, Stencil::Lagrange { start, weights: w })
        })
        .collect()
}

/// Shorthand for [`CoefficientSpec::materialize`].
pub fn materialize(
    spec: &CoefficientSpec,
    grid: &Grid,
    d_max: usize,
) -> Result<GridMatrixFunction> {
    spec.materialize(grid, d_max)
}

/// Composite-Simpson approximation of `∫_a^b K(t) y(t) dt`.
pub fn integrate_product(kernel: &GridMatrixFunction, fun: &GridVectorFunction) -> Result<CVector> {
    if !kernel.grid().same_as(fun.grid()) {
        return Err(Error::GridMismatch);
    }
    if kernel.cols() != fun.dim() {
        return Err(Error::ShapeMismatch {
            context: "integral kernel".into(),
            expected_rows: kernel.rows(),
            expected_cols: fun.dim(),
            rows: kernel.rows(),
            cols: kernel.cols(),
        });
    }
    let pattern = kernel.grid().simpson_pattern()?;
    let mut acc = CVector::zeros(kernel.rows());
    for ((w, k), y) in pattern.iter().zip(kernel.level(0)).zip(fun.level(0)) {
        acc += (k * y) * Complex64::new(*w, 0.0);
    }
    Ok(acc * Complex64::new(kernel.grid().step(), 0.0) / Complex64::new(3.0, 0.0))
}
