//! General boundary operators `B: (C^(s))^m → ℂ^r` built from point
//! derivatives, integral terms and right-sided fractional derivatives.
//!
//! `apply_to_matrix` realizes `[BY]`: column `j` of the result is `B`
//! applied to column `j` of `Y`.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::function::{
    CMatrix, CVector, CoefficientSpec, Grid, GridMatrixFunction, GridVectorFunction, Interval,
};

/// Fractional points closer than this many steps to `b` are rejected.
pub const FRACTIONAL_MIN_STEPS_FROM_B: usize = 5;

/// Right-sided fractional derivative convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionalKind {
    RiemannLiouvilleRight,
    CaputoRight,
}

#[derive(Debug, Clone)]
pub enum BoundaryTerm {
    /// `coeff · y^(order)(point)`.
    PointDerivative {
        order: usize,
        point: f64,
        coeff: CMatrix,
    },
    /// `∫_a^b kernel(t) y(t) dt`.
    Integral { kernel: CoefficientSpec },
    /// `coeff · (D_{b-}^alpha y)(point)`.
    FractionalPointDerivative {
        alpha: f64,
        kind: FractionalKind,
        point: f64,
        coeff: CMatrix,
    },
}

impl BoundaryTerm {
    /// Derivative levels of `y` the term reads.
    pub fn required_order(&self) -> usize {
        match self {
            Self::PointDerivative { order, .. } => *order,
            Self::Integral { .. } => 0,
            Self::FractionalPointDerivative { alpha, kind, .. } => match kind {
                FractionalKind::RiemannLiouvilleRight => 0,
                FractionalKind::CaputoRight => alpha.ceil() as usize - 1,
            },
        }
    }

    pub fn point(&self) -> Option<f64> {
        match self {
            Self::PointDerivative { point, .. } | Self::FractionalPointDerivative { point, .. } => {
                Some(*point)
            }
            Self::Integral { .. } => None,
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Self::PointDerivative { coeff, .. } | Self::FractionalPointDerivative { coeff, .. } => {
                coeff.shape()
            }
            Self::Integral { kernel } => kernel.shape(),
        }
    }
}

fn check_fractional_order(alpha: f64) -> Result<()> {
    let ok = alpha.is_finite() && ((alpha > 0.0 && alpha < 1.0) || (alpha > 1.0 && alpha < 2.0));
    if ok {
        Ok(())
    } else {
        Err(Error::UnsupportedFractionalOrder(alpha))
    }
}

/// A finite sum of [`BoundaryTerm`]s mapping `m`-vector functions to `ℂ^r`.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    r: usize,
    m: usize,
    s: usize,
    terms: Vec<BoundaryTerm>,
}

impl BoundaryOperator {
    pub fn new(r: usize, m: usize, s: usize, terms: Vec<BoundaryTerm>) -> Result<Self> {
        if r == 0 || m == 0 {
            return Err(Error::InvalidProblem(
                "boundary operator needs r, m >= 1".into(),
            ));
        }
        for term in &terms {
            let shape = term.shape();
            if shape != (r, m) {
                return Err(Error::ShapeMismatch {
                    context: "boundary term coefficient".into(),
                    expected_rows: r,
                    expected_cols: m,
                    rows: shape.0,
                    cols: shape.1,
                });
            }
            if let BoundaryTerm::FractionalPointDerivative { alpha, .. } = term {
                check_fractional_order(*alpha)?;
            }
            if term.required_order() > s {
                return Err(Error::UnsupportedDerivativeOrder {
                    requested: term.required_order(),
                    available: s,
                });
            }
            if let Some(t) = term.point() {
                if !t.is_finite() {
                    return Err(Error::InvalidProblem(format!(
                        "boundary point {t} is not finite"
                    )));
                }
            }
        }
        Ok(Self { r, m, s, terms })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn terms(&self) -> &[BoundaryTerm] {
        &self.terms
    }

    /// Highest derivative level any term reads.
    pub fn required_order(&self) -> usize {
        self.terms
            .iter()
            .map(BoundaryTerm::required_order)
            .max()
            .unwrap_or(0)
    }

    /// Checks every point against `interval`.
    pub fn check_points(&self, interval: &Interval) -> Result<()> {
        for term in &self.terms {
            if let Some(t) = term.point() {
                if !interval.contains(t) {
                    return Err(Error::PointOutsideInterval {
                        t,
                        a: interval.a(),
                        b: interval.b(),
                    });
                }
                if matches!(term, BoundaryTerm::FractionalPointDerivative { .. })
                    && t >= interval.b()
                {
                    return Err(Error::PointTooCloseToB {
                        t,
                        min_steps: FRACTIONAL_MIN_STEPS_FROM_B,
                    });
                }
            }
        }
        Ok(())
    }

    fn prepare(&self, grid: &Grid) -> Result<Vec<Option<GridMatrixFunction>>> {
        self.terms
            .iter()
            .map(|term| match term {
                BoundaryTerm::Integral { kernel } => kernel.materialize(grid, 0).map(Some),
                _ => Ok(None),
            })
            .collect()
    }

    fn apply_prepared(
        &self,
        kernels: &[Option<GridMatrixFunction>],
        y: &GridVectorFunction,
    ) -> Result<CVector> {
        if y.dim() != self.m {
            return Err(Error::ShapeMismatch {
                context: "boundary operator argument".into(),
                expected_rows: self.m,
                expected_cols: 1,
                rows: y.dim(),
                cols: 1,
            });
        }
        let mut acc = CVector::zeros(self.r);
        for (term, kernel) in self.terms.iter().zip(kernels) {
            acc += term_value(term, kernel.as_ref(), y)?;
        }
        Ok(acc)
    }

    /// `B y`.
    pub fn apply(&self, y: &GridVectorFunction) -> Result<CVector> {
        let kernels = self.prepare(y.grid())?;
        self.apply_prepared(&kernels, y)
    }

    /// `[BY]`, the `r × m'` matrix whose column `j` is `B` applied to column `j` of `Y`.
    pub fn apply_to_matrix(&self, y: &GridMatrixFunction) -> Result<CMatrix> {
        let kernels = self.prepare(y.grid())?;
        let columns = (0..y.cols())
            .map(|j| self.apply_prepared(&kernels, &y.column(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::from_columns(&columns))
    }

    /// Same operator with every coefficient replaced by `left · coeff`
    /// (integral kernels are multiplied pointwise).
    pub fn left_multiplied(&self, left: &CMatrix) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|term| -> Result<BoundaryTerm> {
                Ok(match term {
                    BoundaryTerm::PointDerivative {
                        order,
                        point,
                        coeff,
                    } => BoundaryTerm::PointDerivative {
                        order: *order,
                        point: *point,
                        coeff: left * coeff,
                    },
                    BoundaryTerm::FractionalPointDerivative {
                        alpha,
                        kind,
                        point,
                        coeff,
                    } => BoundaryTerm::FractionalPointDerivative {
                        alpha: *alpha,
                        kind: *kind,
                        point: *point,
                        coeff: left * coeff,
                    },
                    BoundaryTerm::Integral { kernel } => BoundaryTerm::Integral {
                        kernel: match kernel {
                            CoefficientSpec::Constant(k) => CoefficientSpec::Constant(left * k),
                            CoefficientSpec::Polynomial(ks) => {
                                CoefficientSpec::Polynomial(ks.iter().map(|k| left * k).collect())
                            }
                            CoefficientSpec::Sampled(_) => {
                                let inner = kernel.clone();
                                let left = left.clone();
                                let (r, m) = (left.nrows(), kernel.shape().1);
                                CoefficientSpec::Sampled(crate::function::SampledCoefficient::new(
                                    r,
                                    m,
                                    kernel.max_order(),
                                    move |t| &left * inner.eval(t),
                                )?)
                            }
                        },
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(left.nrows(), self.m, self.s, terms)
    }
}

fn term_value(
    term: &BoundaryTerm,
    kernel: Option<&GridMatrixFunction>,
    y: &GridVectorFunction,
) -> Result<CVector> {
    let needed = term.required_order();
    if needed > y.d_max() {
        return Err(Error::DerivativeStackTooShallow {
            required: needed,
            available: y.d_max(),
        });
    }
    match term {
        BoundaryTerm::PointDerivative {
            order,
            point,
            coeff,
        } => {
            let value = match y.grid().node_index(*point)? {
                Some(k) => y.level(*order)[k].clone(),
                None => y.interpolate(*point, *order)?,
            };
            Ok(coeff * value)
        }
        BoundaryTerm::Integral { .. } => {
            let kernel = kernel.expect("integral kernels are prepared");
            crate::function::integrate_product(kernel, y)
        }
        BoundaryTerm::FractionalPointDerivative {
            alpha,
            kind,
            point,
            coeff,
        } => Ok(coeff * fractional_derivative(y, *alpha, *kind, *point)?),
    }
}

/// Node weights `w` with `Σ_k w_k y(t_k) ≈ (-1)^n / Γ(n-α) · dⁿ/dtⁿ ∫_t^b
/// (τ-t)^(n-α-1) y(τ) dτ` at `t = t_j`, `n = ⌈α⌉`. The integral is
/// product-trapezoidal, the outer derivative a five-point stencil; both are
/// folded into one weight vector.
fn riemann_liouville_weights(grid: &Grid, alpha: f64, j: usize) -> Vec<f64> {
    let n = alpha.ceil() as usize;
    let beta = n as f64 - alpha;
    let n_steps = grid.n_steps();
    let hb = grid.step().powf(beta);
    let (start, stencil) = grid.derivative_stencil(j, n);
    let mut w = vec![0.0; n_steps + 1];
    for (offset, s) in stencil.iter().enumerate() {
        let i = start + offset;
        for k in 0..(n_steps - i) {
            let (kf, k1) = (k as f64, (k + 1) as f64);
            let p = hb * (k1.powf(beta) - kf.powf(beta)) / beta;
            let q = hb
                * ((k1.powf(beta + 1.0) - kf.powf(beta + 1.0)) / (beta + 1.0)
                    - kf * (k1.powf(beta) - kf.powf(beta)) / beta);
            w[i + k] += s * (p - q);
            w[i + k + 1] += s * q;
        }
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let scale = sign / gamma(beta);
    w.iter_mut().for_each(|x| *x *= scale);
    w
}

/// Right-sided fractional derivative `(D_{b-}^α y)(t)` at a grid node `t`,
/// for `α ∈ (0,1) ∪ (1,2)`.
///
/// The Caputo form applies the Riemann-Liouville operator to `y` minus its
/// Taylor polynomial of degree `n-1` at `b`.
pub fn fractional_derivative(
    y: &GridVectorFunction,
    alpha: f64,
    kind: FractionalKind,
    t: f64,
) -> Result<CVector> {
    check_fractional_order(alpha)?;
    let grid = y.grid();
    let j = grid.node_index(t)?.ok_or(Error::PointNotOnGrid { t })?;
    let n_steps = grid.n_steps();
    if n_steps - j <= FRACTIONAL_MIN_STEPS_FROM_B {
        return Err(Error::PointTooCloseToB {
            t,
            min_steps: FRACTIONAL_MIN_STEPS_FROM_B,
        });
    }
    let n = alpha.ceil() as usize;
    if kind == FractionalKind::CaputoRight && n - 1 > y.d_max() {
        return Err(Error::DerivativeStackTooShallow {
            required: n - 1,
            available: y.d_max(),
        });
    }
    let w = riemann_liouville_weights(grid, alpha, j);
    let caputo = kind == FractionalKind::CaputoRight;
    let b = grid.interval().b();
    let y_b = &y.level(0)[n_steps];
    let dy_b = (caputo && n == 2).then(|| &y.level(1)[n_steps]);
    let mut acc = CVector::zeros(y.dim());
    for (k, wk) in w.iter().enumerate() {
        if *wk == 0.0 {
            continue;
        }
        let yk = &y.level(0)[k];
        let term = if caputo {
            let mut d = yk - y_b;
            if let Some(dy) = dy_b {
                d -= dy * Complex64::new(grid.nodes()[k] - b, 0.0);
            }
            d
        } else {
            yk.clone()
        };
        acc += term * Complex64::new(*wk, 0.0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Interval;
    use crate::oracle;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(Interval::new(0.0, 1.0).unwrap(), n).unwrap()
    }

    fn scalar(g: &Grid, d_max: usize, f: impl Fn(usize, f64) -> f64) -> GridVectorFunction {
        GridVectorFunction::from_fn(g.clone(), 1, d_max, |d, t| {
            CVector::from_element(1, c(f(d, t)))
        })
        .unwrap()
    }

    fn point(order: usize, t: f64, coeff: CMatrix) -> BoundaryTerm {
        BoundaryTerm::PointDerivative {
            order,
            point: t,
            coeff,
        }
    }

    #[test]
    fn cauchy_evaluation() {
        let g = grid(32);
        let y = GridVectorFunction::from_fn(g, 2, 0, |_, t| {
            CVector::from_vec(vec![c(t + 0.3), c(t * t - 1.0)])
        })
        .unwrap();
        let b =
            BoundaryOperator::new(2, 2, 1, vec![point(0, 0.0, CMatrix::identity(2, 2))]).unwrap();
        assert_eq!(b.apply(&y).unwrap(), y.level(0)[0]);
    }

    #[test]
    fn two_endpoint_sum() {
        let g = grid(32);
        let y =
            GridVectorFunction::from_fn(g, 2, 0, |_, t| CVector::from_vec(vec![c(t), c(1.0 - t)]))
                .unwrap();
        let b = BoundaryOperator::new(
            2,
            2,
            1,
            vec![
                point(0, 0.0, CMatrix::identity(2, 2)),
                point(0, 1.0, CMatrix::identity(2, 2)),
            ],
        )
        .unwrap();
        assert_eq!(
            b.apply(&y).unwrap(),
            CVector::from_vec(vec![c(1.0), c(1.0)])
        );
    }

    #[test]
    fn off_grid_points_are_interpolated() {
        let g = grid(64);
        let y = scalar(&g, 1, |d, t| if d == 0 { t.powi(3) } else { 3.0 * t * t });
        let b = BoundaryOperator::new(1, 1, 1, vec![point(1, 0.3337, CMatrix::identity(1, 1))])
            .unwrap();
        let v = b.apply(&y).unwrap()[0];
        assert!((v - c(3.0 * 0.3337f64.powi(2))).norm() < 1e-13);
    }

    #[test]
    fn shallow_stack_and_outside_points_are_errors() {
        let g = grid(16);
        let y = scalar(&g, 0, |_, t| t);
        let b =
            BoundaryOperator::new(1, 1, 2, vec![point(2, 0.5, CMatrix::identity(1, 1))]).unwrap();
        assert_eq!(
            b.apply(&y).unwrap_err(),
            Error::DerivativeStackTooShallow {
                required: 2,
                available: 0
            }
        );
        let b =
            BoundaryOperator::new(1, 1, 1, vec![point(0, 1.5, CMatrix::identity(1, 1))]).unwrap();
        assert!(matches!(
            b.apply(&y),
            Err(Error::PointOutsideInterval { .. })
        ));
        assert!(b.check_points(&g.interval()).is_err());
    }

    #[test]
    fn operator_validation() {
        assert!(
            BoundaryOperator::new(1, 2, 1, vec![point(0, 0.0, CMatrix::identity(2, 2))]).is_err()
        );
        assert!(
            BoundaryOperator::new(1, 1, 1, vec![point(2, 0.0, CMatrix::identity(1, 1))]).is_err()
        );
        for alpha in [0.0, 1.0, 2.0, 2.5, -0.5] {
            let term = BoundaryTerm::FractionalPointDerivative {
                alpha,
                kind: FractionalKind::CaputoRight,
                point: 0.0,
                coeff: CMatrix::identity(1, 1),
            };
            assert_eq!(
                BoundaryOperator::new(1, 1, 3, vec![term]).unwrap_err(),
                Error::UnsupportedFractionalOrder(alpha)
            );
        }
    }

    #[test]
    fn integral_term_uses_simpson() {
        let g = grid(100);
        let y = scalar(&g, 0, |_, t| t.exp());
        let b = BoundaryOperator::new(
            1,
            1,
            1,
            vec![BoundaryTerm::Integral {
                kernel: CoefficientSpec::Constant(CMatrix::identity(1, 1)),
            }],
        )
        .unwrap();
        assert!((b.apply(&y).unwrap()[0] - c(std::f64::consts::E - 1.0)).norm() < 1e-9);
    }

    #[test]
    fn caputo_annihilates_constants() {
        let g = grid(2048);
        let y = scalar(&g, 1, |d, _| if d == 0 { 3.0 } else { 0.0 });
        for alpha in [0.3, 0.5, 1.5, 1.9] {
            let v = fractional_derivative(&y, alpha, FractionalKind::CaputoRight, 0.25).unwrap();
            assert!(v[0].norm() <= 1e-6, "{alpha}: {}", v[0]);
        }
    }

    #[test]
    fn riemann_liouville_of_constant() {
        let g = grid(2048);
        let y = scalar(&g, 0, |_, _| 2.0);
        for alpha in [0.25, 0.5, 0.75] {
            for t in [0.0, 0.5, 0.875] {
                let v = fractional_derivative(&y, alpha, FractionalKind::RiemannLiouvilleRight, t)
                    .unwrap()[0];
                let exact = oracle::rl_of_constant(2.0, alpha, 1.0 - t);
                assert!(
                    (v.re - exact).abs() <= 1e-3 * exact.abs(),
                    "{alpha} {t}: {v} vs {exact}"
                );
                assert!(v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn riemann_liouville_power_rule() {
        let g = grid(2048);
        for alpha in [0.3, 0.5, 0.8] {
            let y = scalar(&g, 0, |_, t| (1.0 - t).powf(alpha));
            for t in [0.0, 0.375] {
                let v = fractional_derivative(&y, alpha, FractionalKind::RiemannLiouvilleRight, t)
                    .unwrap()[0];
                let exact = gamma(alpha + 1.0);
                assert!(
                    (v.re - exact).abs() <= 1e-3 * exact,
                    "{alpha} {t}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn riemann_liouville_against_quadrature_oracle() {
        let g = grid(2048);
        let y = scalar(&g, 0, |_, t| (2.0 * t).sin() + 0.5);
        let alpha = 0.6;
        let t = 0.375;
        let v =
            fractional_derivative(&y, alpha, FractionalKind::RiemannLiouvilleRight, t).unwrap()[0];
        let reference = oracle::rl_by_quadrature(&|x| (2.0 * x).sin() + 0.5, alpha, t, 1.0);
        assert!(
            (v.re - reference).abs() <= 1e-4 * reference.abs(),
            "{v} vs {reference}"
        );
    }

    #[test]
    fn higher_order_caputo_of_quadratic() {
        // D_{b-}^α (b-t)^2 = Γ(3)/Γ(3-α) (b-t)^(2-α) for the Caputo form
        let g = grid(2048);
        let y = scalar(&g, 1, |d, t| {
            if d == 0 {
                (1.0 - t).powi(2)
            } else {
                -2.0 * (1.0 - t)
            }
        });
        let alpha = 1.5;
        let t = 0.5;
        let v = fractional_derivative(&y, alpha, FractionalKind::CaputoRight, t).unwrap()[0];
        let exact = 2.0 / gamma(3.0 - alpha) * (1.0 - t).powf(2.0 - alpha);
        assert!((v.re - exact).abs() <= 1e-3 * exact, "{v} vs {exact}");
    }

    #[test]
    fn fractional_point_restrictions() {
        let g = grid(64);
        let y = scalar(&g, 1, |_, _| 1.0);
        assert!(matches!(
            fractional_derivative(&y, 0.5, FractionalKind::CaputoRight, 0.0101),
            Err(Error::PointNotOnGrid { .. })
        ));
        assert!(matches!(
            fractional_derivative(&y, 0.5, FractionalKind::CaputoRight, 1.0 - 5.0 / 64.0),
            Err(Error::PointTooCloseToB { .. })
        ));
        assert!(
            fractional_derivative(&y, 0.5, FractionalKind::CaputoRight, 1.0 - 6.0 / 64.0).is_ok()
        );
        assert_eq!(
            fractional_derivative(&y, 1.0, FractionalKind::CaputoRight, 0.0).unwrap_err(),
            Error::UnsupportedFractionalOrder(1.0)
        );
    }

    #[test]
    fn example_one_column_rule() {
        let g = grid(2048);
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.0)]);
        let y = crate::ode::solve_fundamental(
            &CoefficientSpec::Constant(a.clone())
                .materialize(&g, 1)
                .unwrap(),
            2,
        )
        .unwrap();
        let alpha0 = CMatrix::identity(2, 2);
        let alpha1 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let b = BoundaryOperator::new(
            2,
            2,
            2,
            vec![point(0, 0.0, alpha0.clone()), point(1, 0.0, alpha1.clone())],
        )
        .unwrap();
        let expected = &alpha0 - &alpha1 * &a;
        for j in 0..2 {
            let v = b.apply(&y.matrix().column(j)).unwrap();
            assert!((v - expected.column(j)).norm() < 1e-12);
        }
    }

    #[test]
    fn matrix_application_of_cauchy_and_right_end() {
        let g = grid(64);
        let y = crate::ode::solve_fundamental(
            &CoefficientSpec::Constant(CMatrix::from_element(2, 2, c(0.4)))
                .materialize(&g, 0)
                .unwrap(),
            1,
        )
        .unwrap();
        let at_a =
            BoundaryOperator::new(2, 2, 1, vec![point(0, 0.0, CMatrix::identity(2, 2))]).unwrap();
        assert_eq!(
            at_a.apply_to_matrix(y.matrix()).unwrap(),
            CMatrix::identity(2, 2)
        );

        let zero = crate::ode::solve_fundamental(
            &CoefficientSpec::zeros(2, 2).materialize(&g, 0).unwrap(),
            1,
        )
        .unwrap();
        let at_b =
            BoundaryOperator::new(2, 2, 1, vec![point(0, 1.0, CMatrix::identity(2, 2))]).unwrap();
        assert_eq!(
            at_b.apply_to_matrix(zero.matrix()).unwrap(),
            CMatrix::identity(2, 2)
        );
    }

    #[test]
    fn single_term_additivity_is_exact() {
        let g = grid(64);
        let y = scalar(&g, 1, |d, t| if d == 0 { t.cos() } else { -t.sin() });
        let t1 = vec![
            point(0, 0.1, CMatrix::from_element(1, 1, c(2.0))),
            point(1, 0.77, CMatrix::from_element(1, 1, c(-1.0))),
        ];
        let t2 = BoundaryTerm::Integral {
            kernel: CoefficientSpec::Polynomial(vec![
                CMatrix::identity(1, 1),
                CMatrix::identity(1, 1),
            ]),
        };
        let b1 = BoundaryOperator::new(1, 1, 1, t1.clone()).unwrap();
        let b2 = BoundaryOperator::new(1, 1, 1, vec![t2.clone()]).unwrap();
        let mut all = t1;
        all.push(t2);
        let b = BoundaryOperator::new(1, 1, 1, all).unwrap();
        assert_eq!(
            b.apply(&y).unwrap(),
            b1.apply(&y).unwrap() + b2.apply(&y).unwrap()
        );
    }
}
