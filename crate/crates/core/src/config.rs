//! TOML problem files.
//!
//! `save` writes a canonical layout; `load(save(spec))` reproduces `spec`
//! and saving it again yields the same bytes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mittag::SpectralOperator;
use crate::noise::QWienerSpec;
use crate::phase_space::{ExpTerm, PhaseSpaceSpec, Prehistory, Rho};
use crate::problem::{
    CoefficientSet, ConstantsSource, HypothesisConstants, Impulse, ImpulseMap, Kappa, OperatorField, ProblemSpec,
    VectorField,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSection,
    pub operator: OperatorSection,
    pub phase_space: PhaseSection,
    pub noise: NoiseSection,
    pub initial: InitialSection,
    pub coefficients: CoefficientsSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impulses: Vec<ImpulseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub alpha: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub eigenvalues: Vec<f64>,
    /// Rows of the orthonormal eigenvector matrix; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub rho: Rho,
    pub tail_tolerance: f64,
    pub prehistory_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub q_eigenvalues: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_trace: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x1: Vec<f64>,
    pub phi: Vec<ExpTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub k_zero: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    pub kappa: Kappa,
    pub g: VectorField,
    pub f: VectorField,
    pub sigma: OperatorField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSection {
    pub time: f64,
    pub p: f64,
    pub q: f64,
    pub jump_i: ImpulseMap,
    pub jump_j: ImpulseMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub m: f64,
    pub m_b: f64,
    pub gamma_b: f64,
    pub n_b: f64,
}

impl ProblemFile {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let custom = matches!(spec.coefficients.g, VectorField::Custom(_))
            || matches!(spec.coefficients.f, VectorField::Custom(_))
            || matches!(spec.coefficients.sigma, OperatorField::Custom(_))
            || spec
                .impulses
                .iter()
                .any(|i| matches!(i.jump_i, ImpulseMap::Custom(_)) || matches!(i.jump_j, ImpulseMap::Custom(_)));
        if custom {
            return Err(Error::Config("closure-valued coefficients cannot be written to a file".into()));
        }
        let basis = spec
            .operator
            .basis()
            .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect());
        let constants = match &spec.constants {
            Some(c) if c.source == ConstantsSource::UserSupplied => Some(ConstantsSection {
                m: c.m,
                m_b: c.m_b,
                gamma_b: c.gamma_b,
                n_b: c.n_b,
            }),
            _ => None,
        };
        let c = &spec.coefficients;
        Ok(Self {
            problem: ProblemSection {
                alpha: spec.alpha,
                horizon: spec.horizon,
            },
            operator: OperatorSection {
                eigenvalues: spec.operator.eigenvalues().to_vec(),
                basis,
            },
            phase_space: PhaseSection {
                rho: spec.phase.rho().clone(),
                tail_tolerance: spec.phase.tail_tolerance(),
                prehistory_steps: spec.phase.prehistory_steps(),
            },
            noise: NoiseSection {
                q_eigenvalues: spec.noise.q_eigenvalues().to_vec(),
                seed: spec.noise.seed(),
                full_trace: spec.noise.full_trace(),
            },
            initial: InitialSection {
                x1: spec.x1.iter().copied().collect(),
                phi: spec.phi.terms().to_vec(),
            },
            coefficients: CoefficientsSection {
                k_zero: c.k_zero,
                k1: c.k1,
                kappa: c.kappa.clone(),
                g: c.g.clone(),
                f: c.f.clone(),
                sigma: c.sigma.clone(),
            },
            impulses: spec
                .impulses
                .iter()
                .map(|i| ImpulseSection {
                    time: i.time,
                    p: i.p,
                    q: i.q,
                    jump_i: i.jump_i.clone(),
                    jump_j: i.jump_j.clone(),
                })
                .collect(),
            constants,
        })
    }

    /// Builds and validates the problem.
    pub fn into_spec(self) -> Result<ProblemSpec> {
        let n = self.operator.eigenvalues.len();
        let operator = match self.operator.basis {
            None => SpectralOperator::diagonal(self.operator.eigenvalues)?,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        context: "operator basis",
                        expected: n,
                        found: rows.len(),
                    });
                }
                let b = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                SpectralOperator::new(self.operator.eigenvalues, b)?
            }
        };
        let phase = PhaseSpaceSpec::new(
            self.phase_space.rho,
            self.phase_space.tail_tolerance,
            self.phase_space.prehistory_steps,
        )?;
        let mut noise = QWienerSpec::new(self.noise.q_eigenvalues, self.noise.seed)?;
        if let Some(t) = self.noise.full_trace {
            noise = noise.with_full_trace(t)?;
        }
        let constants = match self.constants {
            Some(c) => Some(HypothesisConstants::user(c.m, c.m_b, c.gamma_b, c.n_b)?),
            None => None,
        };
        let c = self.coefficients;
        let spec = ProblemSpec {
            operator,
            alpha: self.problem.alpha,
            horizon: self.problem.horizon,
            coefficients: CoefficientSet {
                g: c.g,
                f: c.f,
                sigma: c.sigma,
                kappa: c.kappa,
                k_zero: c.k_zero,
                k1: c.k1,
            },
            impulses: self
                .impulses
                .into_iter()
                .map(|i| Impulse {
                    time: i.time,
                    jump_i: i.jump_i,
                    jump_j: i.jump_j,
                    p: i.p,
                    q: i.q,
                })
                .collect(),
            phase,
            noise,
            phi: Prehistory::new(self.initial.phi)?,
            x1: DVector::from_vec(self.initial.x1),
            constants,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses and validates a problem from TOML text.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    file.into_spec()
}

/// Canonical TOML text for `spec`.
pub fn problem_to_string(spec: &ProblemSpec) -> Result<String> {
    let file = ProblemFile::from_spec(spec)?;
    toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_problem_config(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_problem_config(spec: &ProblemSpec, path: &Path) -> Result<()> {
    let text = problem_to_string(spec)?;
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
