//! Sequences of problems `(L_k, B_k)` approaching a base problem `(L, B)`.
//!
//! For each member the harness records the distance of the coefficient data
//! from the base (the grid version of `‖A_k - A‖_(s-1)`), the distance of
//! the characteristic matrices and the Fredholm numbers. Coefficient-norm
//! convergence together with entrywise convergence of the boundary data is
//! the computable stand-in for strong convergence of the operators.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::{BoundaryOperator, BoundaryTerm};
use crate::characteristic::{fredholm_report, FredholmReport};
use crate::error::{Error, Result};
use crate::function::{
    CMatrix, CoefficientSpec, Grid, GridMatrixFunction, SampledCoefficient, MAX_SAMPLED_ORDER,
};
use crate::solver::BvpProblem;

/// Default member indices.
pub const DEFAULT_K_LIST: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

/// The hypothesis check accepts a trace whose final data distance is at most
/// this fraction of the first one.
pub const HYPOTHESIS_RATIO: f64 = 0.1;

/// Data distances below this are treated as zero.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// The rule `k ↦ ε_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EpsSchedule {
    /// `ε_k = 1/k`.
    Harmonic,
    /// `ε_k = k^(-p)`.
    Power(f64),
    /// `ε_k = 0`: every member equals the base problem.
    Zero,
}

impl EpsSchedule {
    pub fn eps(&self, k: u32) -> f64 {
        match self {
            Self::Harmonic => 1.0 / k as f64,
            Self::Power(p) => (k as f64).powf(-p),
            Self::Zero => 0.0,
        }
    }
}

/// How member `k` is derived from the base problem.
#[derive(Debug, Clone)]
pub enum PerturbationMode {
    /// `A_k = A + ε_k P`.
    CoefficientDecay { direction: CoefficientSpec },
    /// Coefficient of term `i` becomes `β_i + ε_k Q_i`; integral terms take `None`.
    BoundaryDecay { directions: Vec<Option<CMatrix>> },
    /// Point-derivative terms move to `t_j + ε_k δ`; fractional terms stay on their nodes.
    PointDrift { shift: f64 },
    /// `A_k = A + ε_k sin(t/ε_k) P`. With `ε_k = 1/k` the coefficients
    /// converge uniformly but their derivatives do not.
    OscillatoryCoefficient { direction: CoefficientSpec },
}

#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    base: BvpProblem,
    mode: PerturbationMode,
    schedule: EpsSchedule,
    k_list: Vec<u32>,
}

impl PerturbationFamily {
    pub fn new(
        base: BvpProblem,
        mode: PerturbationMode,
        schedule: EpsSchedule,
        k_list: Vec<u32>,
    ) -> Result<Self> {
        if k_list.is_empty() || k_list[0] == 0 || k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem(
                "k_list must be a non-empty strictly increasing list of positive integers".into(),
            ));
        }
        if let EpsSchedule::Power(p) = schedule {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "eps schedule exponent {p} must be positive"
                )));
            }
        }
        if let PerturbationMode::BoundaryDecay { directions } = &mode {
            if directions.len() != base.boundary().terms().len() {
                return Err(Error::InvalidProblem(format!(
                    "boundary-decay needs one direction per term ({}), got {}",
                    base.boundary().terms().len(),
                    directions.len()
                )));
            }
        }
        let family = Self {
            base,
            mode,
            schedule,
            k_list,
        };
        for &k in &family.k_list {
            family.member(k)?;
        }
        Ok(family)
    }

    pub fn base(&self) -> &BvpProblem {
        &self.base
    }

    pub fn k_list(&self) -> &[u32] {
        &self.k_list
    }

    pub fn schedule(&self) -> EpsSchedule {
        self.schedule
    }

    /// The perturbed problem for index `k`.
    pub fn member(&self, k: u32) -> Result<BvpProblem> {
        let eps = self.schedule.eps(k);
        if eps == 0.0 {
            return Ok(self.base.clone());
        }
        match &self.mode {
            PerturbationMode::CoefficientDecay { direction } => self
                .base
                .with_coefficient(self.base.coefficient().perturbed(eps, direction)?),
            PerturbationMode::OscillatoryCoefficient { direction } => {
                let base = self.base.coefficient().clone();
                let dir = direction.clone();
                let (rows, cols) = base.shape();
                if dir.shape() != (rows, cols) {
                    return Err(Error::InvalidProblem(
                        "oscillation direction has the wrong shape".into(),
                    ));
                }
                let order = base.max_order().min(dir.max_order()).min(MAX_SAMPLED_ORDER);
                let spec = SampledCoefficient::new(rows, cols, order, move |t| {
                    base.eval(t) + dir.eval(t) * Complex64::new(eps * (t / eps).sin(), 0.0)
                })?;
                self.base.with_coefficient(CoefficientSpec::Sampled(spec))
            }
            PerturbationMode::BoundaryDecay { directions } => {
                let b = self.base.boundary();
                let e = Complex64::new(eps, 0.0);
                let terms = b
                    .terms()
                    .iter()
                    .zip(directions)
                    .map(|(term, q)| match (term, q) {
                        (_, None) => Ok(term.clone()),
                        (
                            BoundaryTerm::PointDerivative {
                                order,
                                point,
                                coeff,
                            },
                            Some(q),
                        ) => Ok(BoundaryTerm::PointDerivative {
                            order: *order,
                            point: *point,
                            coeff: coeff + q * e,
                        }),
                        (
                            BoundaryTerm::FractionalPointDerivative {
                                alpha,
                                kind,
                                point,
                                coeff,
                            },
                            Some(q),
                        ) => Ok(BoundaryTerm::FractionalPointDerivative {
                            alpha: *alpha,
                            kind: *kind,
                            point: *point,
                            coeff: coeff + q * e,
                        }),
                        (BoundaryTerm::Integral { .. }, Some(_)) => Err(Error::InvalidProblem(
                            "boundary-decay directions cannot target integral terms".into(),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.base
                    .with_boundary(BoundaryOperator::new(b.r(), b.m(), b.s(), terms)?)
            }
            PerturbationMode::PointDrift { shift } => {
                let b = self.base.boundary();
                let terms = b
                    .terms()
                    .iter()
                    .map(|term| match term {
                        BoundaryTerm::PointDerivative {
                            order,
                            point,
                            coeff,
                        } => BoundaryTerm::PointDerivative {
                            order: *order,
                            point: point + eps * shift,
                            coeff: coeff.clone(),
                        },
                        other => other.clone(),
                    })
                    .collect();
                self.base
                    .with_boundary(BoundaryOperator::new(b.r(), b.m(), b.s(), terms)?)
            }
        }
    }
}

/// Grid realization of `‖A_k - A‖_(s-1)`: the largest node-wise Frobenius
/// distance over derivative levels `0..=s-1`.
pub fn coefficient_convergence_norm(
    a_k: &GridMatrixFunction,
    a: &GridMatrixFunction,
    s: usize,
) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidProblem(
            "smoothness order s must be at least 1".into(),
        ));
    }
    a_k.max_level_distance(a, s - 1)
}

/// Largest entrywise distance between the data of two operators with the
/// same term structure (coefficients, points and fractional orders).
pub fn boundary_data_distance(x: &BoundaryOperator, y: &BoundaryOperator) -> Result<f64> {
    if x.terms().len() != y.terms().len() || (x.r(), x.m()) != (y.r(), y.m()) {
        return Err(Error::InvalidProblem(
            "boundary operators have different structure".into(),
        ));
    }
    let coeff_dist =
        |p: &CMatrix, q: &CMatrix| (p - q).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for (s, t) in x.terms().iter().zip(y.terms()) {
        let d = match (s, t) {
            (
                BoundaryTerm::PointDerivative {
                    order: o1,
                    point: p1,
                    coeff: c1,
                },
                BoundaryTerm::PointDerivative {
                    order: o2,
                    point: p2,
                    coeff: c2,
                },
            ) if o1 == o2 => coeff_dist(c1, c2).max((p1 - p2).abs()),
            (
                BoundaryTerm::FractionalPointDerivative {
                    alpha: a1,
                    kind: k1,
                    point: p1,
                    coeff: c1,
                },
                BoundaryTerm::FractionalPointDerivative {
                    alpha: a2,
                    kind: k2,
                    point: p2,
                    coeff: c2,
                },
            ) if k1 == k2 => coeff_dist(c1, c2).max((p1 - p2).abs()).max((a1 - a2).abs()),
            // kernels are never perturbed by the families above
            (BoundaryTerm::Integral { .. }, BoundaryTerm::Integral { .. }) => 0.0,
            _ => {
                return Err(Error::InvalidProblem(
                    "boundary terms differ in kind".into(),
                ))
            }
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: u32,
    pub eps: f64,
    pub norm_a_diff: f64,
    pub norm_b_diff: f64,
    pub norm_m_diff: f64,
    pub rank: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub base_report: FredholmReport,
    pub records: Vec<TraceRecord>,
}

pub const TRACE_CSV_HEADER: &str = "k,eps,norm_A_diff,norm_M_diff,rank,dim_ker,dim_coker";

impl ConvergenceTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{},{},{}",
                r.k, r.eps, r.norm_a_diff, r.norm_m_diff, r.rank, r.dim_ker, r.dim_coker
            );
        }
        out
    }

    /// `‖M_k - M‖` of the last record over that of the first.
    pub fn matrix_ratio(&self) -> Option<f64> {
        let first = self.records.first()?.norm_m_diff;
        let last = self.records.last()?.norm_m_diff;
        (first > 0.0).then(|| last / first)
    }
}

/// Characteristic matrices and Fredholm numbers along the family.
pub fn run_family(family: &PerturbationFamily, grid: &Grid) -> Result<ConvergenceTrace> {
    run_family_with(family, grid, None)
}

pub fn run_family_with(
    family: &PerturbationFamily,
    grid: &Grid,
    rank_tol: Option<f64>,
) -> Result<ConvergenceTrace> {
    let base = family.base();
    let s = base.s();
    let a = base.coefficient_on(grid)?;
    let m = base.characteristic_on(grid, rank_tol)?;
    let base_report = fredholm_report(&m);
    let mut records = Vec::with_capacity(family.k_list.len());
    for &k in &family.k_list {
        let member = family.member(k)?;
        let a_k = member.coefficient_on(grid)?;
        let m_k = member.characteristic_on(grid, rank_tol)?;
        let report = fredholm_report(&m_k);
        records.push(TraceRecord {
            k,
            eps: family.schedule.eps(k),
            norm_a_diff: coefficient_convergence_norm(&a_k, &a, s)?,
            norm_b_diff: boundary_data_distance(member.boundary(), base.boundary())?,
            norm_m_diff: (&m_k.matrix - &m.matrix).norm(),
            rank: report.rank,
            dim_ker: report.dim_ker,
            dim_coker: report.dim_coker,
        });
    }
    Ok(ConvergenceTrace {
        base_report,
        records,
    })
}

/// Outcome of the upper-semicontinuity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemicontinuityVerdict {
    /// Smallest recorded `k` from which `dim ker_k ≤ dim ker` and
    /// `dim coker_k ≤ dim coker` hold for every later record.
    pub k_star: Option<u32>,
    /// `rank M_k ≥ rank M` for all records from `k_star` on.
    pub rank_monotone: bool,
    /// Base invertible and every record from `k_star` on invertible.
    pub invertibility_preserved: bool,
}

impl SemicontinuityVerdict {
    pub fn holds(&self) -> bool {
        self.k_star.is_some()
    }
}

pub fn check_semicontinuity(
    trace: &ConvergenceTrace,
    base_report: &FredholmReport,
) -> SemicontinuityVerdict {
    let ok =
        |r: &TraceRecord| r.dim_ker <= base_report.dim_ker && r.dim_coker <= base_report.dim_coker;
    let tail = trace.records.iter().rev().take_while(|r| ok(r)).count();
    let start = trace.records.len() - tail;
    let k_star = (tail > 0).then(|| trace.records[start].k);
    let kept = &trace.records[start..];
    SemicontinuityVerdict {
        k_star,
        rank_monotone: k_star.is_some() && kept.iter().all(|r| r.rank >= base_report.rank),
        invertibility_preserved: k_star.is_some()
            && base_report.invertible
            && kept
                .iter()
                .all(|r| r.dim_ker == 0 && r.dim_coker == 0 && base_report.m == base_report.r),
    }
}

/// Whether a trace supports the convergence hypothesis `‖A_k - A‖_(s-1) → 0`
/// together with convergence of the boundary data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    pub first_distance: f64,
    pub last_distance: f64,
}

pub fn check_hypothesis(trace: &ConvergenceTrace) -> HypothesisCheck {
    let dist = |r: &TraceRecord| r.norm_a_diff.max(r.norm_b_diff);
    let first = trace.records.first().map_or(0.0, dist);
    let last = trace.records.last().map_or(0.0, dist);
    HypothesisCheck {
        holds: last <= ZERO_DISTANCE
            || (last <= HYPOTHESIS_RATIO * first && trace.records.len() > 1),
        first_distance: first,
        last_distance: last,
    }
}
