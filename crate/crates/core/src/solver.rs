//! Solution of the inhomogeneous problem `y' + A y = f`, `B y = c`.
//!
//! Every solution has the form `y = Y q + y_p`, where `y_p(a) = 0`. Since
//! `B(Y q) = [BY] q`, the boundary condition reduces to the finite system
//! `M q = c - B y_p`, which is solved in the minimum-norm least-squares
//! sense through the SVD of `M`.

use serde::Serialize;

use crate::boundary::BoundaryOperator;
use crate::characteristic::{
    fredholm_report, min_norm_solve, CharacteristicMatrix, FredholmReport,
};
use crate::error::{Error, Result};
use crate::function::{
    CVector, CoefficientSpec, Grid, GridMatrixFunction, GridVectorFunction, Interval,
};
use crate::ode::{self, solve_fundamental, solve_particular, FundamentalMatrix, MAX_SMOOTHNESS};

/// Relative factor in the solvability tolerance `1e-6 · (1 + ‖c‖)`.
pub const SOLVABILITY_TOL_FACTOR: f64 = 1e-6;

/// The boundary-value problem `y' + A(t) y = f(t)` on `interval`, `B y = c`.
#[derive(Debug, Clone)]
pub struct BvpProblem {
    interval: Interval,
    m: usize,
    s: usize,
    a: CoefficientSpec,
    f: CoefficientSpec,
    boundary: BoundaryOperator,
    c: CVector,
}

impl BvpProblem {
    pub fn new(
        interval: Interval,
        s: usize,
        a: CoefficientSpec,
        f: CoefficientSpec,
        boundary: BoundaryOperator,
        c: CVector,
    ) -> Result<Self> {
        let m = boundary.m();
        let shape_err =
            |context: &str, expected: (usize, usize), got: (usize, usize)| Error::ShapeMismatch {
                context: context.into(),
                expected_rows: expected.0,
                expected_cols: expected.1,
                rows: got.0,
                cols: got.1,
            };
        if a.shape() != (m, m) {
            return Err(shape_err("coefficient A", (m, m), a.shape()));
        }
        if f.shape() != (m, 1) {
            return Err(shape_err("right-hand side f", (m, 1), f.shape()));
        }
        if c.len() != boundary.r() {
            return Err(shape_err(
                "boundary data c",
                (boundary.r(), 1),
                (c.len(), 1),
            ));
        }
        if s == 0 || s > MAX_SMOOTHNESS {
            return Err(Error::InvalidProblem(format!(
                "smoothness order s = {s} outside 1..={MAX_SMOOTHNESS}"
            )));
        }
        if boundary.s() > s {
            return Err(Error::InvalidProblem(format!(
                "boundary operator is declared on C^({}) but s = {s}",
                boundary.s()
            )));
        }
        if boundary.required_order() > s {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: boundary.required_order(),
                available: s,
            });
        }
        for (name, spec) in [("A", &a), ("f", &f)] {
            if spec.max_order() < s - 1 {
                return Err(Error::InvalidProblem(format!(
                    "{name} delivers derivatives up to order {} but s - 1 = {}",
                    spec.max_order(),
                    s - 1
                )));
            }
        }
        boundary.check_points(&interval)?;
        Ok(Self {
            interval,
            m,
            s,
            a,
            f,
            boundary,
            c,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.boundary.r()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn coefficient(&self) -> &CoefficientSpec {
        &self.a
    }

    pub fn rhs(&self) -> &CoefficientSpec {
        &self.f
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    pub fn data(&self) -> &CVector {
        &self.c
    }

    pub fn with_coefficient(&self, a: CoefficientSpec) -> Result<Self> {
        Self::new(
            self.interval,
            self.s,
            a,
            self.f.clone(),
            self.boundary.clone(),
            self.c.clone(),
        )
    }

    pub fn with_boundary(&self, boundary: BoundaryOperator) -> Result<Self> {
        Self::new(
            self.interval,
            self.s,
            self.a.clone(),
            self.f.clone(),
            boundary,
            self.c.clone(),
        )
    }

    pub fn with_data(&self, f: CoefficientSpec, c: CVector) -> Result<Self> {
        Self::new(
            self.interval,
            self.s,
            self.a.clone(),
            f,
            self.boundary.clone(),
            c,
        )
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.interval() != self.interval {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `A` on `grid` with derivatives up to `s - 1`.
    pub fn coefficient_on(&self, grid: &Grid) -> Result<GridMatrixFunction> {
        self.check_grid(grid)?;
        self.a.materialize(grid, self.s - 1)
    }

    /// `f` on `grid` with derivatives up to `s - 1`.
    pub fn rhs_on(&self, grid: &Grid) -> Result<GridVectorFunction> {
        self.check_grid(grid)?;
        self.f.materialize(grid, self.s - 1)?.into_vector_function()
    }

    pub fn fundamental_on(&self, grid: &Grid) -> Result<FundamentalMatrix> {
        solve_fundamental(&self.coefficient_on(grid)?, self.s)
    }

    /// `M(L,B)` on `grid`; `rank_tol` overrides the default rank tolerance.
    pub fn characteristic_on(
        &self,
        grid: &Grid,
        rank_tol: Option<f64>,
    ) -> Result<CharacteristicMatrix> {
        CharacteristicMatrix::from_fundamental(
            &self.boundary,
            &self.fundamental_on(grid)?,
            rank_tol,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Exactly one solution.
    Unique,
    /// Solutions exist and form an affine family of dimension `dim ker`.
    SolvableNonUnique,
    /// `c - B y_p` leaves the column space of `M`.
    Unsolvable,
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub classification: Classification,
    /// `r < m` with `M` of full row rank.
    pub underdetermined: bool,
    /// Minimum-norm solution; absent when unsolvable.
    pub particular: Option<GridVectorFunction>,
    /// `Y q_i` for an orthonormal basis `q_i` of `ker M`.
    pub kernel_basis: Vec<GridVectorFunction>,
    /// `‖M q + B y_p - c‖` at the least-squares `q`.
    pub residual_norm: f64,
    pub solvability_tolerance: f64,
    pub q: CVector,
    pub characteristic: CharacteristicMatrix,
    pub report: FredholmReport,
}

impl BvpSolution {
    /// Human-facing labels: the classification, plus `Underdetermined` when applicable.
    pub fn labels(&self) -> Vec<&'static str> {
        let mut labels = vec![match self.classification {
            Classification::Unique => "Unique",
            Classification::SolvableNonUnique => "SolvableNonUnique",
            Classification::Unsolvable => "Unsolvable",
        }];
        if self.underdetermined {
            labels.push("Underdetermined");
        }
        labels
    }
}

pub fn solvability_tolerance(c: &CVector) -> f64 {
    SOLVABILITY_TOL_FACTOR * (1.0 + c.norm())
}

pub fn solve(problem: &BvpProblem, grid: &Grid) -> Result<BvpSolution> {
    solve_with(problem, grid, None)
}

/// [`solve`] with an explicit rank tolerance for `M`.
pub fn solve_with(problem: &BvpProblem, grid: &Grid, rank_tol: Option<f64>) -> Result<BvpSolution> {
    let a = problem.coefficient_on(grid)?;
    let f = problem.rhs_on(grid)?;
    let y = solve_fundamental(&a, problem.s)?;
    let y_p = solve_particular(&a, &f, problem.s)?.into_function();
    let cm = CharacteristicMatrix::from_fundamental(&problem.boundary, &y, rank_tol)?;
    let report = fredholm_report(&cm);

    let rhs = &problem.c - problem.boundary.apply(&y_p)?;
    let q = min_norm_solve(&cm.matrix, &rhs, cm.rank_tolerance);
    let residual_norm = (&cm.matrix * &q - &rhs).norm();
    let tol = solvability_tolerance(&problem.c);

    let kernel_basis = cm
        .kernel()
        .iter()
        .map(|v| y.apply(v))
        .collect::<Result<Vec<_>>>()?;
    let classification = if residual_norm > tol {
        Classification::Unsolvable
    } else if kernel_basis.is_empty() {
        Classification::Unique
    } else {
        Classification::SolvableNonUnique
    };
    let particular = match classification {
        Classification::Unsolvable => None,
        _ => Some(
            y.apply(&q)?
                .add_scaled(num_complex::Complex64::new(1.0, 0.0), &y_p)?,
        ),
    };
    Ok(BvpSolution {
        classification,
        underdetermined: problem.r() < problem.m && cm.rank == problem.r(),
        particular,
        kernel_basis,
        residual_norm,
        solvability_tolerance: tol,
        q,
        characteristic: cm,
        report,
    })
}

/// ODE and boundary residuals of one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `max_i ‖y'(t_i) + A y(t_i) - f(t_i)‖` with `y'` by finite differences.
    pub ode: f64,
    /// `‖B y - c‖`.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub solution: Option<Residuals>,
    /// Homogeneous residuals (`f = 0`, `c = 0`) of each kernel element.
    pub kernel: Vec<Residuals>,
}

pub fn verify_solution(
    problem: &BvpProblem,
    solution: &BvpSolution,
    grid: &Grid,
) -> Result<Diagnostics> {
    let a = problem.coefficient_on(grid)?;
    let f = problem.rhs_on(grid)?;
    let solution_residuals = solution
        .particular
        .as_ref()
        .map(|y| -> Result<Residuals> {
            Ok(Residuals {
                ode: ode::ode_residual(&a, Some(&f), y)?,
                boundary: (problem.boundary.apply(y)? - &problem.c).norm(),
            })
        })
        .transpose()?;
    let kernel = solution
        .kernel_basis
        .iter()
        .map(|y| -> Result<Residuals> {
            Ok(Residuals {
                ode: ode::ode_residual(&a, None, y)?,
                boundary: problem.boundary.apply(y)?.norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics {
        solution: solution_residuals,
        kernel,
    })
}
