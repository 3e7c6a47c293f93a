//! The characteristic matrix `M(L,B) = [BY]` and the Fredholm numbers read
//! off from it.
//!
//! `M` is stored `r × m`: rows are the `r` boundary functionals, columns
//! the `m` columns of the fundamental matrix. Ranks are decided by a
//! singular-value threshold relative to `σ_max`.

use serde::Serialize;

use crate::boundary::BoundaryOperator;
use crate::error::{Error, Result};
use crate::function::{CMatrix, CVector, CoefficientSpec, Grid};
use crate::ode::{solve_fundamental, FundamentalMatrix};

/// Relative factor in the default rank tolerance `max(r,m) · σ_max · 1e-10`.
pub const RANK_TOL_FACTOR: f64 = 1e-10;

/// Spectral gaps below this value raise [`Warning::RankUnstable`].
pub const MIN_SPECTRAL_GAP: f64 = 10.0;

/// Singular values (non-increasing) and the numeric rank they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

pub fn default_rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * RANK_TOL_FACTOR
}

struct SortedSvd {
    u: CMatrix,
    sigma: Vec<f64>,
    v: CMatrix,
}

/// Thin SVD `M = U Σ V^H` with singular values sorted non-increasingly.
fn sorted_svd(m: &CMatrix) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    SortedSvd {
        u: CMatrix::from_columns(
            &order
                .iter()
                .map(|&i| u.column(i).into_owned())
                .collect::<Vec<_>>(),
        ),
        sigma: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v: CMatrix::from_columns(
            &order
                .iter()
                .map(|&i| v_t.row(i).adjoint())
                .collect::<Vec<_>>(),
        ),
    }
}

/// Rank of `m` at tolerance `tol` (default: [`default_rank_tolerance`]).
pub fn numeric_rank(m: &CMatrix, tol: Option<f64>) -> RankInfo {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RankInfo {
            rank: 0,
            singular_values: Vec::new(),
            tolerance: tol.unwrap_or(0.0),
        };
    }
    let sigma = sorted_svd(m).sigma;
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let tolerance = tol.unwrap_or_else(|| default_rank_tolerance(rows, cols, sigma_max));
    let rank = sigma.iter().filter(|&&s| s > tolerance).count();
    RankInfo {
        rank,
        singular_values: sigma,
        tolerance,
    }
}

/// Orthonormal basis of `ker M` (right singular vectors with `σ ≤ tol`,
/// including the directions beyond `min(r,m)`).
pub fn kernel_basis(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let (rows, cols) = m.shape();
    // zero rows complete V to a full m × m unitary
    let mut padded = CMatrix::zeros(rows.max(cols), cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = sorted_svd(&padded);
    (0..cols)
        .filter(|&i| svd.sigma[i] <= tol)
        .map(|i| svd.v.column(i).into_owned())
        .collect()
}

/// Orthonormal basis of `coker M = ker M^H`.
pub fn cokernel_basis(m: &CMatrix, tol: f64) -> Vec<CVector> {
    kernel_basis(&m.adjoint(), tol)
}

/// Minimum-norm least-squares solution of `M q = rhs`, discarding singular
/// values `≤ tol`.
pub fn min_norm_solve(m: &CMatrix, rhs: &CVector, tol: f64) -> CVector {
    let svd = sorted_svd(m);
    let mut q = CVector::zeros(m.ncols());
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s > tol {
            let coef = svd.u.column(i).dotc(rhs) / s;
            q += svd.v.column(i) * coef;
        }
    }
    q
}

/// `M(L,B)` together with its rank analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicMatrix {
    pub matrix: CMatrix,
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    pub rank: usize,
}

impl CharacteristicMatrix {
    pub fn new(matrix: CMatrix, tol: Option<f64>) -> Self {
        let info = numeric_rank(&matrix, tol);
        Self {
            matrix,
            singular_values: info.singular_values,
            rank_tolerance: info.tolerance,
            rank: info.rank,
        }
    }

    /// `[BY]` for an already integrated fundamental matrix.
    pub fn from_fundamental(
        b: &BoundaryOperator,
        y: &FundamentalMatrix,
        tol: Option<f64>,
    ) -> Result<Self> {
        if b.m() != y.dim() {
            return Err(Error::ShapeMismatch {
                context: "boundary operator vs fundamental matrix".into(),
                expected_rows: b.r(),
                expected_cols: y.dim(),
                rows: b.r(),
                cols: b.m(),
            });
        }
        Ok(Self::new(b.apply_to_matrix(y.matrix())?, tol))
    }

    pub fn r(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    /// `σ_rank-1 / σ_rank`, with the tolerance standing in for a missing
    /// discarded value. `None` when the gap is unbounded (nothing kept, or
    /// the largest discarded value is exactly zero).
    pub fn spectral_gap(&self) -> Option<f64> {
        if self.rank == 0 {
            return None;
        }
        let kept = self.singular_values[self.rank - 1];
        let discarded = self
            .singular_values
            .get(self.rank)
            .copied()
            .unwrap_or(self.rank_tolerance);
        (discarded > 0.0).then(|| kept / discarded)
    }

    pub fn kernel(&self) -> Vec<CVector> {
        kernel_basis(&self.matrix, self.rank_tolerance)
    }

    pub fn cokernel(&self) -> Vec<CVector> {
        cokernel_basis(&self.matrix, self.rank_tolerance)
    }
}

/// `M(L,B)` for coefficient `a` and operator `b`, integrating `Y` on `grid`.
pub fn characteristic_matrix(
    a: &CoefficientSpec,
    b: &BoundaryOperator,
    grid: &Grid,
    s: usize,
) -> Result<CharacteristicMatrix> {
    if s < b.s() {
        return Err(Error::InvalidProblem(format!(
            "boundary operator needs smoothness {} but s = {s}",
            b.s()
        )));
    }
    b.check_points(&grid.interval())?;
    let a_grid = a.materialize(grid, s - 1)?;
    let y = solve_fundamental(&a_grid, s)?;
    CharacteristicMatrix::from_fundamental(b, &y, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Warning {
    /// The singular values around the rank cut are not well separated.
    RankUnstable { spectral_gap: f64 },
}

/// Fredholm numbers of `(L,B)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmReport {
    pub m: usize,
    pub r: usize,
    pub rank: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub invertible: bool,
    pub spectral_gap: Option<f64>,
    pub warnings: Vec<Warning>,
}

pub fn fredholm_report(cm: &CharacteristicMatrix) -> FredholmReport {
    let (m, r, rank) = (cm.m(), cm.r(), cm.rank);
    let dim_ker = m - rank;
    let dim_coker = r - rank;
    let spectral_gap = cm.spectral_gap();
    let mut warnings = Vec::new();
    if let Some(gap) = spectral_gap {
        if gap < MIN_SPECTRAL_GAP {
            warnings.push(Warning::RankUnstable { spectral_gap: gap });
        }
    }
    FredholmReport {
        m,
        r,
        rank,
        dim_ker,
        dim_coker,
        index: m as i64 - r as i64,
        invertible: r == m && dim_ker == 0,
        spectral_gap,
        warnings,
    }
}
