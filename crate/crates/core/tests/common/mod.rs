#![allow(dead_code)]

use fredholm_bvp::boundary::{BoundaryOperator, BoundaryTerm, FractionalKind};
use fredholm_bvp::function::{CMatrix, CVector, CoefficientSpec, Interval, SampledCoefficient};
use fredholm_bvp::solver::BvpProblem;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn cnum(rng: &mut StdRng, scale: f64) -> Complex64 {
    Complex64::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

pub fn cmat(rng: &mut StdRng, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cnum(rng, scale))
}

pub fn cvec(rng: &mut StdRng, n: usize, scale: f64) -> CVector {
    CVector::from_fn(n, |_, _| cnum(rng, scale))
}

pub fn rotation(omega: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(omega), c(-omega), c(0.0)])
}

/// Constant, polynomial or sampled `m × m` coefficient of moderate size.
pub fn random_coefficient(rng: &mut StdRng, m: usize) -> CoefficientSpec {
    let kind = rng.random_range(0..3);
    random_coefficient_of(rng, m, kind)
}

/// `kind`: 0 constant, 1 polynomial, 2 sampled.
pub fn random_coefficient_of(rng: &mut StdRng, m: usize, kind: u32) -> CoefficientSpec {
    match kind {
        0 => CoefficientSpec::Constant(cmat(rng, m, m, 1.0)),
        1 => CoefficientSpec::Polynomial(vec![
            cmat(rng, m, m, 1.0),
            cmat(rng, m, m, 0.5),
            cmat(rng, m, m, 0.25),
        ]),
        _ => {
            let base = cmat(rng, m, m, 1.0);
            let wave = cmat(rng, m, m, 0.5);
            let freq = rng.random_range(0.5..3.0);
            CoefficientSpec::Sampled(
                SampledCoefficient::new(m, m, 2, move |t| &base + &wave * c((freq * t).sin()))
                    .unwrap(),
            )
        }
    }
}

/// Node-aligned points (multiples of 1/8) usable by fractional terms on any
/// grid with at least 64 steps.
const FRACTIONAL_POINTS: [f64; 6] = [0.0, 0.125, 0.25, 0.375, 0.5, 0.75];

/// A random term; every coefficient is `left · γ` so that `M` has rank at
/// most `left.ncols()`.
pub fn random_term(rng: &mut StdRng, left: &CMatrix, m: usize, s: usize) -> BoundaryTerm {
    let k = left.ncols();
    match rng.random_range(0..4) {
        0 | 1 => {
            let order = rng.random_range(0..=s.min(2));
            let point = rng.random_range(0.0..=1.0);
            let coeff = left * cmat(rng, k, m, 1.0);
            BoundaryTerm::PointDerivative {
                order,
                point,
                coeff,
            }
        }
        2 => {
            let c0 = left * cmat(rng, k, m, 1.0);
            let c1 = left * cmat(rng, k, m, 1.0);
            BoundaryTerm::Integral {
                kernel: CoefficientSpec::Polynomial(vec![c0, c1]),
            }
        }
        _ => {
            let alphas: &[f64] = if s >= 2 {
                &[0.3, 0.5, 0.8, 1.5]
            } else {
                &[0.3, 0.5, 0.8]
            };
            let alpha = alphas[rng.random_range(0..alphas.len())];
            let kind = if rng.random_bool(0.5) {
                FractionalKind::CaputoRight
            } else {
                FractionalKind::RiemannLiouvilleRight
            };
            let point = FRACTIONAL_POINTS[rng.random_range(0..FRACTIONAL_POINTS.len())];
            let coeff = left * cmat(rng, k, m, 1.0);
            BoundaryTerm::FractionalPointDerivative {
                alpha,
                kind,
                point,
                coeff,
            }
        }
    }
}

/// Random boundary operator with `1..=3` mixed terms. With `rank_cap`
/// every coefficient factors through an `r × rank_cap` matrix.
pub fn random_boundary(
    rng: &mut StdRng,
    r: usize,
    m: usize,
    s: usize,
    rank_cap: Option<usize>,
) -> BoundaryOperator {
    let left = match rank_cap {
        Some(k) => cmat(rng, r, k, 1.0),
        None => CMatrix::identity(r, r),
    };
    let n_terms = rng.random_range(1..=3);
    let terms = (0..n_terms)
        .map(|_| random_term(rng, &left, m, s))
        .collect();
    BoundaryOperator::new(r, m, s, terms).unwrap()
}

pub fn random_rhs(rng: &mut StdRng, m: usize) -> CoefficientSpec {
    CoefficientSpec::Polynomial(vec![cmat(rng, m, 1, 1.0), cmat(rng, m, 1, 1.0)])
}

pub fn random_problem(
    rng: &mut StdRng,
    m: usize,
    r: usize,
    s: usize,
    rank_cap: Option<usize>,
) -> BvpProblem {
    let a = random_coefficient(rng, m);
    let f = random_rhs(rng, m);
    let b = random_boundary(rng, r, m, s, rank_cap);
    let c = cvec(rng, r, 1.0);
    BvpProblem::new(unit(), s, a, f, b, c).unwrap()
}

/// Point conditions `y(0)` and `y(1)` weighted by random `r × m` matrices.
pub fn two_point_problem(rng: &mut StdRng, m: usize, a: CoefficientSpec) -> BvpProblem {
    let b = BoundaryOperator::new(
        m,
        m,
        1,
        vec![
            BoundaryTerm::PointDerivative {
                order: 0,
                point: 0.0,
                coeff: cmat(rng, m, m, 1.0),
            },
            BoundaryTerm::PointDerivative {
                order: 0,
                point: 1.0,
                coeff: cmat(rng, m, m, 1.0),
            },
        ],
    )
    .unwrap();
    let f = random_rhs(rng, m);
    let c = cvec(rng, m, 1.0);
    BvpProblem::new(unit(), 1, a, f, b, c).unwrap()
}
