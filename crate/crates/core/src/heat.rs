//! Stochastic impulsive fractional heat equation on `[0, pi]` with Dirichlet
//! boundary conditions, in the coefficients of `e_n(x) = sqrt(2/pi) sin(n x)`.
//!
//! Default instance:
//! - `rho(s) = e^{2s}`;
//! - `h(s, eta, x) = c_h e^{3s} sin(eta) sin(x)`;
//! - impulse kernels `c_p e^{3 theta}`, `c_q e^{3 theta}` at `t = 1/3, 2/3`;
//! - `f` and `sigma` driven by the delayed average with weight `e^{2s}`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::mittag::SpectralOperator;
use crate::noise::QWienerSpec;
use crate::phase_space::{ExpTerm, PhaseSpaceSpec, Prehistory};
use crate::problem::{
    CoefficientSet, Impulse, ImpulseMap, Kappa, OperatorField, ProblemSpec, VectorField, Weight,
};

/// `h(s, eta, x) = scale e^{rate s} sin(eta_mode eta) sin(x_mode x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutralKernel {
    pub scale: f64,
    pub rate: f64,
    pub eta_mode: usize,
    pub x_mode: usize,
}

/// Jump kernels `p_scale e^{p_rate theta}` and `q_scale e^{q_rate theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseKernel {
    pub time: f64,
    pub p_scale: f64,
    pub p_rate: f64,
    pub q_scale: f64,
    pub q_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatExampleParams {
    pub modes: usize,
    pub alpha: f64,
    pub horizon: f64,
    /// `c` in `rho(s) = e^{c s}`.
    pub rho_rate: f64,
    pub h: NeutralKernel,
    pub f_scale: f64,
    /// Rate of the delay weight `p_0(s) = e^{rate s}`.
    pub f_rate: f64,
    pub sigma_base: f64,
    pub sigma_gain: f64,
    /// Rate of the delay weight `q_0(s) = e^{rate s}`.
    pub sigma_rate: f64,
    pub impulses: Vec<ImpulseKernel>,
    /// `lambda_n = n^{-noise_decay}`.
    pub noise_decay: f64,
    pub seed: u64,
    /// `phi(theta) = e^{phi_rate theta} sum_n phi_amplitudes[n] sin((n+1) x)`.
    pub phi_rate: f64,
    pub phi_amplitudes: Vec<f64>,
    /// `z(x) = sum_n z_amplitudes[n] sin((n+1) x)`.
    pub z_amplitudes: Vec<f64>,
    /// Collocation points for the saturation `u / (1 + |u|)`.
    pub spatial_points: usize,
}

impl Default for HeatExampleParams {
    fn default() -> Self {
        Self {
            modes: 8,
            alpha: 0.5,
            horizon: 1.0,
            rho_rate: 2.0,
            h: NeutralKernel {
                scale: 0.5,
                rate: 3.0,
                eta_mode: 1,
                x_mode: 1,
            },
            f_scale: 0.5,
            f_rate: 2.0,
            sigma_base: 0.1,
            sigma_gain: 0.2,
            sigma_rate: 2.0,
            impulses: [1.0 / 3.0, 2.0 / 3.0]
                .into_iter()
                .map(|time| ImpulseKernel {
                    time,
                    p_scale: 0.01,
                    p_rate: 3.0,
                    q_scale: 0.01,
                    q_rate: 3.0,
                })
                .collect(),
            noise_decay: 2.0,
            seed: 20_240_601,
            phi_rate: 1.0,
            phi_amplitudes: vec![1.0, 0.5],
            z_amplitudes: vec![0.5],
            spatial_points: 32,
        }
    }
}

impl HeatExampleParams {
    /// Same instance with `modes` retained eigenfunctions.
    pub fn with_modes(mut self, modes: usize) -> Self {
        self.modes = modes;
        self.spatial_points = self.spatial_points.max(4 * modes);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(invalid("modes", "need at least one mode"));
        }
        if !(self.rho_rate > 0.0) {
            return Err(invalid("rho_rate", "must be positive"));
        }
        if self.h.scale != 0.0 && (self.h.eta_mode == 0 || self.h.x_mode == 0) {
            return Err(Error::Unsupported("kernel modes are 1-based sine indices".into()));
        }
        if self.h.scale != 0.0 && (self.h.eta_mode > self.modes || self.h.x_mode > self.modes) {
            return Err(Error::Unsupported(format!(
                "neutral kernel mode ({}, {}) lies outside the {} retained modes",
                self.h.eta_mode, self.h.x_mode, self.modes
            )));
        }
        if self.phi_amplitudes.len() > self.modes || self.z_amplitudes.len() > self.modes {
            return Err(invalid("phi/z", "more amplitudes than retained modes"));
        }
        if !(self.noise_decay > 1.0) {
            return Err(invalid("noise_decay", "must exceed 1 for a trace-class covariance"));
        }
        Ok(())
    }
}

/// `L0`, `p_i`, `q_i` and `l` from the kernel integrability bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConstants {
    pub l0: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: f64,
}

/// `(∫_{-inf}^0 (scale e^{rate theta})^2 / e^{c theta} d theta)^{1/2}`.
fn weighted_l2(scale: f64, rate: f64, c: f64, condition: &'static str) -> Result<f64> {
    if scale == 0.0 {
        return Ok(0.0);
    }
    let exponent = 2.0 * rate - c;
    if !(exponent > 0.0) {
        return Err(Error::Divergent {
            condition,
            detail: format!("kernel rate {rate} needs 2 rate > {c} for the ratio with rho to be integrable"),
        });
    }
    Ok(scale.abs() / exponent.sqrt())
}

pub fn compute_kernel_constants(params: &HeatExampleParams) -> Result<KernelConstants> {
    params.validate()?;
    let c = params.rho_rate;
    // ∫∫ sin^2 = (pi/2)^2 for both k = 0 and k = 1; the x-derivative adds x_mode^2.
    let base = weighted_l2(params.h.scale, params.h.rate, c, "neutral kernel h")? * FRAC_PI_2;
    let l0 = base * (params.h.x_mode as f64).max(1.0);
    let mut p = Vec::new();
    let mut q = Vec::new();
    for imp in &params.impulses {
        p.push(weighted_l2(imp.p_scale, imp.p_rate, c, "jump kernel of I")?);
        q.push(weighted_l2(imp.q_scale, imp.q_rate, c, "jump kernel of J")?);
    }
    Ok(KernelConstants { l0, p, q, l: 1.0 / c })
}

/// `sum_{n >= 1} n^{-s}` for `s > 1` (direct sum plus Euler–Maclaurin tail).
fn zeta(s: f64) -> f64 {
    let k = 1000.0f64;
    let head: f64 = (1..1000).map(|n| (n as f64).powf(-s)).sum();
    head + k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
}

/// Coefficients of `amplitude * sin(n x)` in the basis `e_n`.
fn sine_coefficients(amplitudes: &[f64], modes: usize) -> Vec<f64> {
    let s = FRAC_PI_2.sqrt();
    (0..modes).map(|k| amplitudes.get(k).copied().unwrap_or(0.0) * s).collect()
}

pub fn build_heat_example(params: &HeatExampleParams) -> Result<ProblemSpec> {
    let consts = compute_kernel_constants(params)?;
    let n = params.modes;
    let eigs: Vec<f64> = (1..=n).map(|k| -((k * k) as f64)).collect();
    let operator = SpectralOperator::diagonal(eigs)?;
    let phase = PhaseSpaceSpec::exponential(params.rho_rate)?;
    let lambdas: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-params.noise_decay)).collect();
    let noise = QWienerSpec::new(lambdas, params.seed)?.with_full_trace(zeta(params.noise_decay))?;

    let g = if params.h.scale == 0.0 {
        VectorField::Zero
    } else {
        let mut matrix = vec![vec![0.0; n]; n];
        matrix[params.h.x_mode - 1][params.h.eta_mode - 1] = params.h.scale * FRAC_PI_2;
        VectorField::Affine {
            offset: vec![0.0; n],
            matrix,
            weight: Weight::Exponential { rate: params.h.rate },
        }
    };
    let f = if params.f_scale == 0.0 {
        VectorField::Zero
    } else {
        VectorField::Affine {
            offset: vec![0.0; n],
            matrix: (0..n)
                .map(|i| (0..n).map(|j| if i == j { params.f_scale } else { 0.0 }).collect())
                .collect(),
            weight: Weight::Exponential { rate: params.f_rate },
        }
    };
    let sigma = if params.sigma_base == 0.0 && params.sigma_gain == 0.0 {
        OperatorField::Zero
    } else {
        OperatorField::DelayGain {
            base: params.sigma_base,
            gain: params.sigma_gain,
            weight: Weight::Exponential { rate: params.sigma_rate },
        }
    };

    let impulses = params
        .impulses
        .iter()
        .zip(consts.p.iter().zip(&consts.q))
        .map(|(k, (&p, &q))| Impulse {
            time: k.time,
            jump_i: if k.p_scale == 0.0 {
                ImpulseMap::Zero
            } else {
                ImpulseMap::DelayLinear {
                    gain: k.p_scale,
                    weight: Weight::Exponential { rate: k.p_rate },
                }
            },
            jump_j: if k.q_scale == 0.0 {
                ImpulseMap::Zero
            } else {
                ImpulseMap::SineSaturated {
                    gain: k.q_scale,
                    rate: k.q_rate,
                    spatial_points: params.spatial_points,
                }
            },
            p,
            q,
        })
        .collect();

    let phi = Prehistory::new(vec![ExpTerm {
        rate: params.phi_rate,
        amplitude: sine_coefficients(&params.phi_amplitudes, n),
    }])?;
    let x1 = DVector::from_vec(sine_coefficients(&params.z_amplitudes, n));

    let mut spec = ProblemSpec {
        operator,
        alpha: params.alpha,
        horizon: params.horizon,
        coefficients: CoefficientSet::zero(),
        impulses,
        phase,
        noise,
        phi,
        x1,
        constants: None,
    };
    // Squared Lipschitz constants certified for the assembled families.
    let lipschitz_sq = |field: &VectorField| field.lipschitz(&spec.phase).map(|l| l * l);
    let lg = lipschitz_sq(&g);
    let lf = lipschitz_sq(&f);
    let ls = sigma
        .lipschitz(&spec.phase, &spec.noise, n)
        .map(|l| l * l)
        .ok_or_else(|| invalid("sigma", "delay weight rate must be at least rho_rate"))?;
    let (lg, lf) = (
        lg.ok_or_else(|| invalid("h.rate", "delay weight rate must be at least rho_rate"))?,
        lf.ok_or_else(|| invalid("f_rate", "delay weight rate must be at least rho_rate"))?,
    );
    let l1 = params.f_scale.abs();
    let l2 = ls.sqrt();
    let big_l = [consts.l0, l1, l2, lg, lf, ls].into_iter().fold(0.0, f64::max);
    let k_zero = params.sigma_base * params.sigma_base * spec.noise.trace();
    spec.coefficients = CoefficientSet {
        g,
        f,
        sigma,
        kappa: Kappa::Linear {
            l: if big_l > 0.0 { big_l } else { 1.0 },
        },
        k_zero,
        k1: Some(lg),
    };
    spec.validate()?;
    Ok(spec)
}

/// Three-sigma size of the stochastic convolution carried by the discarded
/// modes `n > N`, bounded via `||T_q(t)|| <= t^{q-1} M_b` with `M_b = 1/Gamma(q)`.
pub fn truncation_estimate(spec: &ProblemSpec, params: &HeatExampleParams) -> f64 {
    let q = spec.q();
    let b = spec.horizon;
    let mb = crate::mittag::rgamma(q);
    let discarded = spec.noise.discarded_trace().unwrap_or(0.0);
    let base = params.sigma_base.abs() + params.sigma_gain.abs() * spec.phase.l();
    3.0 * (mb * mb * b.powf(2.0 * q - 1.0) / (2.0 * q - 1.0) * base * base * discarded).sqrt()
}

/// `u(t, x)` from sine coefficients.
pub fn synthesize(coefficients: &DVector<f64>, x: f64) -> f64 {
    let s = (2.0 / PI).sqrt();
    coefficients
        .iter()
        .enumerate()
        .map(|(k, a)| a * s * ((k + 1) as f64 * x).sin())
        .sum()
}
