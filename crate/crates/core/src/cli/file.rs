//! Problem-definition files.
//!
//! A TOML document with the sections `interval`, `system`, `boundary`,
//! `data`, and optionally `grid` and `limits`. Complex numbers are written
//! as `[re, im]`; matrices as `{ rows, cols, data }` with `data` row-major.
//!
//! ```toml
//! [interval]
//! a = 0.0
//! b = 1.0
//!
//! [system]
//! m = 1
//! s = 1
//! A = { kind = "constant", matrix = { rows = 1, cols = 1, data = [[0.0, 0.0]] } }
//!
//! [boundary]
//! r = 1
//! [[boundary.terms]]
//! variant = "point"
//! order = 0
//! point = 0.0
//! coeff = { rows = 1, cols = 1, data = [[1.0, 0.0]] }
//!
//! [data]
//! c = [[1.0, 0.0]]
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::{BoundaryOperator, BoundaryTerm, FractionalKind};
use crate::function::{CMatrix, CVector, CoefficientSpec, Interval, SampledCoefficient};
use crate::limits::{EpsSchedule, PerturbationFamily, PerturbationMode, DEFAULT_K_LIST};
use crate::solver::BvpProblem;

/// A parse or validation failure, located by line (syntax) or field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct FileError(pub String);

fn field_err(path: &str, msg: impl std::fmt::Display) -> FileError {
    FileError(format!("{path}: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn to_matrix(&self, path: &str) -> Result<CMatrix, FileError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(field_err(path, "matrix dimensions must be positive"));
        }
        if self.data.len() != self.rows * self.cols {
            return Err(field_err(
                path,
                format!(
                    "declared {}x{} needs {} entries, found {}",
                    self.rows,
                    self.cols,
                    self.rows * self.cols,
                    self.data.len()
                ),
            ));
        }
        if self.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(field_err(path, "entries must be finite"));
        }
        Ok(CMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.data.iter().map(|[re, im]| Complex64::new(*re, *im)),
        ))
    }

    fn to_shaped(&self, path: &str, rows: usize, cols: usize) -> Result<CMatrix, FileError> {
        let m = self.to_matrix(path)?;
        if m.shape() != (rows, cols) {
            return Err(field_err(
                path,
                format!(
                    "expected a {rows}x{cols} matrix, found {}x{}",
                    m.nrows(),
                    m.ncols()
                ),
            ));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarFunction {
    Sin,
    Cos,
    Exp,
}

impl ScalarFunction {
    fn eval(self, x: f64) -> f64 {
        match self {
            Self::Sin => x.sin(),
            Self::Cos => x.cos(),
            Self::Exp => x.exp(),
        }
    }
}

/// One summand `g(freq · t) · matrix` of a sampled coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledTermFile {
    pub func: ScalarFunction,
    #[serde(default = "one")]
    pub freq: f64,
    pub matrix: MatrixFile,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientFile {
    Constant {
        matrix: MatrixFile,
    },
    /// `Σ_k coeffs[k] t^k`.
    Polynomial {
        coeffs: Vec<MatrixFile>,
    },
    /// `Σ terms[i].func(terms[i].freq · t) · terms[i].matrix`, differentiated numerically.
    Sampled {
        max_order: usize,
        terms: Vec<SampledTermFile>,
    },
}

impl CoefficientFile {
    pub fn to_spec(
        &self,
        path: &str,
        rows: usize,
        cols: usize,
    ) -> Result<CoefficientSpec, FileError> {
        match self {
            Self::Constant { matrix } => Ok(CoefficientSpec::Constant(matrix.to_shaped(
                &format!("{path}.matrix"),
                rows,
                cols,
            )?)),
            Self::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(field_err(
                        &format!("{path}.coeffs"),
                        "needs at least one matrix",
                    ));
                }
                let cs = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.to_shaped(&format!("{path}.coeffs[{i}]"), rows, cols))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(CoefficientSpec::Polynomial(cs))
            }
            Self::Sampled { max_order, terms } => {
                let parts = terms
                    .iter()
                    .enumerate()
                    .map(|(i, term)| {
                        let p = format!("{path}.terms[{i}]");
                        if !term.freq.is_finite() {
                            return Err(field_err(&format!("{p}.freq"), "must be finite"));
                        }
                        Ok((
                            term.func,
                            term.freq,
                            term.matrix.to_shaped(&format!("{p}.matrix"), rows, cols)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let sampled = SampledCoefficient::new(rows, cols, *max_order, move |t| {
                    let mut acc = CMatrix::zeros(rows, cols);
                    for (func, freq, matrix) in &parts {
                        acc += matrix * Complex64::new(func.eval(freq * t), 0.0);
                    }
                    acc
                })
                .map_err(|e| field_err(&format!("{path}.max_order"), e))?;
                Ok(CoefficientSpec::Sampled(sampled))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionalKindFile {
    RiemannLiouville,
    Caputo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryTermFile {
    Point {
        order: usize,
        point: f64,
        coeff: MatrixFile,
    },
    Integral {
        kernel: CoefficientFile,
    },
    Fractional {
        alpha: f64,
        kind: FractionalKindFile,
        point: f64,
        coeff: MatrixFile,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalFile {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub m: usize,
    pub s: usize,
    #[serde(rename = "A")]
    pub a: CoefficientFile,
    #[serde(rename = "f", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<CoefficientFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    pub r: usize,
    /// Smoothness the operator is declared on; defaults to `system.s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    pub terms: Vec<BoundaryTermFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub c: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDirectionFile {
    pub term: usize,
    pub coeff: MatrixFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LimitsModeFile {
    CoefficientDecay { direction: CoefficientFile },
    BoundaryDecay { directions: Vec<TermDirectionFile> },
    PointDrift { shift: f64 },
    Oscillatory { direction: CoefficientFile },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsScheduleFile {
    Harmonic,
    Zero,
    Power(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsFile {
    #[serde(flatten)]
    pub mode: LimitsModeFile,
    #[serde(default = "harmonic")]
    pub eps_schedule: EpsScheduleFile,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<u32>,
}

fn harmonic() -> EpsScheduleFile {
    EpsScheduleFile::Harmonic
}

fn default_k_list() -> Vec<u32> {
    DEFAULT_K_LIST.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub interval: IntervalFile,
    pub system: SystemFile,
    pub boundary: BoundaryFile,
    pub data: DataFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsFile>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        toml::from_str(text).map_err(|e| FileError(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files always serialize")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_problem(&self) -> Result<BvpProblem, FileError> {
        let interval = Interval::new(self.interval.a, self.interval.b)
            .map_err(|e| field_err("interval", e))?;
        let SystemFile { m, s, .. } = self.system;
        if m == 0 {
            return Err(field_err("system.m", "must be positive"));
        }
        let a = self.system.a.to_spec("system.A", m, m)?;
        let f = match &self.system.f {
            Some(f) => f.to_spec("system.f", m, 1)?,
            None => CoefficientSpec::zeros(m, 1),
        };
        let r = self.boundary.r;
        if r == 0 {
            return Err(field_err("boundary.r", "must be positive"));
        }
        let terms = self
            .boundary
            .terms
            .iter()
            .enumerate()
            .map(|(i, term)| {
                let p = format!("boundary.terms[{i}]");
                Ok(match term {
                    BoundaryTermFile::Point {
                        order,
                        point,
                        coeff,
                    } => BoundaryTerm::PointDerivative {
                        order: *order,
                        point: *point,
                        coeff: coeff.to_shaped(&format!("{p}.coeff"), r, m)?,
                    },
                    BoundaryTermFile::Integral { kernel } => BoundaryTerm::Integral {
                        kernel: kernel.to_spec(&format!("{p}.kernel"), r, m)?,
                    },
                    BoundaryTermFile::Fractional {
                        alpha,
                        kind,
                        point,
                        coeff,
                    } => BoundaryTerm::FractionalPointDerivative {
                        alpha: *alpha,
                        kind: match kind {
                            FractionalKindFile::RiemannLiouville => {
                                FractionalKind::RiemannLiouvilleRight
                            }
                            FractionalKindFile::Caputo => FractionalKind::CaputoRight,
                        },
                        point: *point,
                        coeff: coeff.to_shaped(&format!("{p}.coeff"), r, m)?,
                    },
                })
            })
            .collect::<Result<Vec<_>, FileError>>()?;
        let boundary = BoundaryOperator::new(r, m, self.boundary.s.unwrap_or(s), terms)
            .map_err(|e| field_err("boundary", e))?;
        if self.data.c.len() != r {
            return Err(field_err(
                "data.c",
                format!("expected {r} entries, found {}", self.data.c.len()),
            ));
        }
        let c = CVector::from_iterator(
            r,
            self.data.c.iter().map(|[re, im]| Complex64::new(*re, *im)),
        );
        BvpProblem::new(interval, s, a, f, boundary, c).map_err(|e| field_err("problem", e))
    }

    pub fn n_steps(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.n_steps)
    }

    pub fn to_family(&self) -> Result<PerturbationFamily, FileError> {
        let limits = self
            .limits
            .as_ref()
            .ok_or_else(|| field_err("limits", "section is required for this command"))?;
        let base = self.to_problem()?;
        let (m, r) = (base.m(), base.r());
        let mode = match &limits.mode {
            LimitsModeFile::CoefficientDecay { direction } => PerturbationMode::CoefficientDecay {
                direction: direction.to_spec("limits.direction", m, m)?,
            },
            LimitsModeFile::Oscillatory { direction } => PerturbationMode::OscillatoryCoefficient {
                direction: direction.to_spec("limits.direction", m, m)?,
            },
            LimitsModeFile::PointDrift { shift } => PerturbationMode::PointDrift { shift: *shift },
            LimitsModeFile::BoundaryDecay { directions } => {
                let n_terms = base.boundary().terms().len();
                let mut per_term = vec![None; n_terms];
                for (i, d) in directions.iter().enumerate() {
                    let p = format!("limits.directions[{i}]");
                    if d.term >= n_terms {
                        return Err(field_err(
                            &format!("{p}.term"),
                            format!("no boundary term {}", d.term),
                        ));
                    }
                    per_term[d.term] = Some(d.coeff.to_shaped(&format!("{p}.coeff"), r, m)?);
                }
                PerturbationMode::BoundaryDecay {
                    directions: per_term,
                }
            }
        };
        let schedule = match limits.eps_schedule {
            EpsScheduleFile::Harmonic => EpsSchedule::Harmonic,
            EpsScheduleFile::Zero => EpsSchedule::Zero,
            EpsScheduleFile::Power(p) => EpsSchedule::Power(p),
        };
        PerturbationFamily::new(base, mode, schedule, limits.k_list.clone())
            .map_err(|e| field_err("limits", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAUCHY: &str = r#"
[interval]
a = 0.0
b = 1.0

[system]
m = 2
s = 1
A = { kind = "polynomial", coeffs = [
  { rows = 2, cols = 2, data = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]] },
  { rows = 2, cols = 2, data = [[0.1, 0.0], [0.0, 0.0], [0.0, 0.0], [0.1, 0.0]] },
] }
f = { kind = "sampled", max_order = 0, terms = [{ func = "sin", freq = 2.0, matrix = { rows = 2, cols = 1, data = [[1.0, 0.0], [0.0, 1.0]] } }] }

[boundary]
r = 2

[[boundary.terms]]
variant = "point"
order = 0
point = 0.0
coeff = { rows = 2, cols = 2, data = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]] }

[[boundary.terms]]
variant = "integral"
kernel = { kind = "constant", matrix = { rows = 2, cols = 2, data = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]] } }

[[boundary.terms]]
variant = "fractional"
alpha = 0.5
kind = "caputo"
point = 0.5
coeff = { rows = 2, cols = 2, data = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]] }

[data]
c = [[1.0, 0.0], [0.0, -1.0]]

[grid]
n_steps = 256

[limits]
mode = "boundary-decay"
directions = [{ term = 0, coeff = { rows = 2, cols = 2, data = [[0.1, 0.0], [0.0, 0.0], [0.0, 0.0], [0.1, 0.0]] } }]
eps_schedule = { power = 2.0 }
k_list = [1, 2, 4]
"#;

    #[test]
    fn parses_all_sections() {
        let file = ProblemFile::parse(CAUCHY).unwrap();
        assert_eq!(file.n_steps(), Some(256));
        let problem = file.to_problem().unwrap();
        assert_eq!((problem.m(), problem.r(), problem.s()), (2, 2, 1));
        assert_eq!(problem.boundary().terms().len(), 3);
        assert_eq!(problem.data()[1], Complex64::new(0.0, -1.0));
        let family = file.to_family().unwrap();
        assert_eq!(family.k_list(), &[1, 2, 4]);
        assert_eq!(family.schedule(), EpsSchedule::Power(2.0));
    }

    #[test]
    fn round_trip_is_identity() {
        let file = ProblemFile::parse(CAUCHY).unwrap();
        let again = ProblemFile::parse(&file.to_toml()).unwrap();
        assert_eq!(file, again);
        assert_eq!(file.hash(), again.hash());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let broken = CAUCHY.replace("m = 2", "m = = 2");
        let err = ProblemFile::parse(&broken).unwrap_err();
        assert!(err.0.contains("line 7"), "{err}");
    }

    #[test]
    fn missing_and_unknown_fields_are_named() {
        let err = ProblemFile::parse(&CAUCHY.replace("s = 1\n", "")).unwrap_err();
        assert!(err.0.contains("`s`"), "{err}");
        let err = ProblemFile::parse(&CAUCHY.replace("r = 2", "r = 2\nq = 1")).unwrap_err();
        assert!(err.0.contains("q"), "{err}");
    }

    #[test]
    fn validation_errors_carry_field_paths() {
        let short = CAUCHY.replace("c = [[1.0, 0.0], [0.0, -1.0]]", "c = [[1.0, 0.0]]");
        let err = ProblemFile::parse(&short)
            .unwrap()
            .to_problem()
            .unwrap_err();
        assert!(err.0.starts_with("data.c"), "{err}");

        let bad_shape = CAUCHY.replace(
            "coeff = { rows = 2, cols = 2, data = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]] }",
            "coeff = { rows = 2, cols = 2, data = [[1.0, 0.0]] }",
        );
        let err = ProblemFile::parse(&bad_shape)
            .unwrap()
            .to_problem()
            .unwrap_err();
        assert!(err.0.starts_with("boundary.terms[0].coeff"), "{err}");

        let no_limits = CAUCHY.split("[limits]").next().unwrap();
        let err = ProblemFile::parse(no_limits)
            .unwrap()
            .to_family()
            .unwrap_err();
        assert!(err.0.starts_with("limits"), "{err}");
    }
}
