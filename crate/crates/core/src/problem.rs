//! Problem description, coefficient families and the checkable conditions
//! (hypothesis constants, existence and stability conditions, a-priori bound).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Hypothesis, Result};
use crate::mittag::{operator_bounds, SpectralOperator};
use crate::noise::QWienerSpec;
use crate::phase_space::{
    b_norm, ExpTerm, HistoryPath, HistorySegment, PhaseSpaceSpec, Prehistory, Rho, Side, TimeGrid,
};

/// Shared handle to a user closure; compares by identity.
pub struct Custom<T: ?Sized>(pub Arc<T>);

impl<T: ?Sized> Clone for Custom<T> {
    fn clone(&self) -> Self {
        Custom(self.0.clone())
    }
}

impl<T: ?Sized> fmt::Debug for Custom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<custom>")
    }
}

impl<T: ?Sized> PartialEq for Custom<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

pub type SegmentFn = dyn Fn(f64, &HistorySegment<'_>) -> Result<DVector<f64>> + Send + Sync;
pub type OperatorFn = dyn Fn(f64, &HistorySegment<'_>) -> Result<DMatrix<f64>> + Send + Sync;
pub type JumpFn = dyn Fn(&HistorySegment<'_>) -> Result<DVector<f64>> + Send + Sync;

/// Linear functional of a history segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    /// `psi(0)`.
    Instant,
    /// `∫_{-inf}^0 e^{rate theta} psi(theta) d theta`.
    Exponential { rate: f64 },
}

impl Weight {
    pub fn apply(&self, seg: &HistorySegment<'_>) -> Result<DVector<f64>> {
        match self {
            Weight::Instant => Ok(seg.at_zero()),
            Weight::Exponential { rate } => seg.exp_moment(*rate),
        }
    }

    /// Lipschitz constant with respect to `||.||_B`, when one exists.
    pub fn lipschitz(&self, phase: &PhaseSpaceSpec) -> Option<f64> {
        match self {
            Weight::Instant => None,
            Weight::Exponential { rate } => match phase.rho() {
                // sup_theta e^{rate theta} / rho(theta)
                Rho::Exponential { rate: c } => (rate >= c).then_some(1.0),
                Rho::Tabulated { theta, values, .. } => Some(
                    theta
                        .iter()
                        .zip(values)
                        .map(|(t, v)| (rate * t).exp() / v)
                        .fold(0.0, f64::max),
                ),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if let Weight::Exponential { rate } = self {
            if !(*rate > 0.0 && rate.is_finite()) {
                return Err(invalid("weight.rate", "delay weight rate must be positive"));
            }
        }
        Ok(())
    }
}

/// Families for the state-valued coefficients `g` and `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorField {
    Zero,
    /// `offset + matrix * weight(psi)`.
    Affine {
        offset: Vec<f64>,
        matrix: Vec<Vec<f64>>,
        weight: Weight,
    },
    #[serde(skip)]
    Custom(Custom<SegmentFn>),
}

impl VectorField {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64, &HistorySegment<'_>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        VectorField::Custom(Custom(Arc::new(f)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VectorField::Zero)
    }

    pub fn eval(&self, t: f64, seg: &HistorySegment<'_>) -> Result<DVector<f64>> {
        match self {
            VectorField::Zero => Ok(DVector::zeros(seg.dimension())),
            VectorField::Affine { offset, matrix, weight } => {
                let w = weight.apply(seg)?;
                let mut out = DVector::from_column_slice(offset);
                for (i, row) in matrix.iter().enumerate() {
                    out[i] += row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
                Ok(out)
            }
            VectorField::Custom(f) => {
                let v = (f.0)(t, seg)?;
                check_dim("custom coefficient output", seg.dimension(), v.len())?;
                Ok(v)
            }
        }
    }

    /// `|field(t, 0)|^2` when it does not depend on `t`.
    fn zero_norm_sq(&self) -> Option<f64> {
        match self {
            VectorField::Zero => Some(0.0),
            VectorField::Affine { offset, .. } => Some(offset.iter().map(|x| x * x).sum()),
            VectorField::Custom(_) => None,
        }
    }

    /// Lipschitz constant in `||.||_B` (not squared).
    pub fn lipschitz(&self, phase: &PhaseSpaceSpec) -> Option<f64> {
        match self {
            VectorField::Zero => Some(0.0),
            VectorField::Affine { matrix, weight, .. } => {
                let norm = spectral_norm(matrix);
                if norm == 0.0 {
                    Some(0.0)
                } else {
                    weight.lipschitz(phase).map(|l| l * norm)
                }
            }
            VectorField::Custom(_) => None,
        }
    }

    fn validate(&self, n: usize, name: &'static str) -> Result<()> {
        if let VectorField::Affine { offset, matrix, weight } = self {
            check_dim(name, n, offset.len())?;
            check_dim(name, n, matrix.len())?;
            for row in matrix {
                check_dim(name, n, row.len())?;
            }
            if offset.iter().chain(matrix.iter().flatten()).any(|x| !x.is_finite()) {
                return Err(invalid(name, "entries must be finite"));
            }
            weight.validate()?;
        }
        Ok(())
    }
}

fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    m.svd(false, false).singular_values.max()
}

/// Families for the noise coefficient `sigma: B -> L(G, H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorField {
    Zero,
    /// Constant `N x N_w` matrix.
    Constant { matrix: Vec<Vec<f64>> },
    /// Diagonal `sigma_{ii} = base + gain * weight(psi)_i` for `i < min(N, N_w)`.
    DelayGain { base: f64, gain: f64, weight: Weight },
    #[serde(skip)]
    Custom(Custom<OperatorFn>),
}

impl OperatorField {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64, &HistorySegment<'_>) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        OperatorField::Custom(Custom(Arc::new(f)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, OperatorField::Zero)
    }

    pub fn eval(&self, t: f64, seg: &HistorySegment<'_>, modes: usize) -> Result<DMatrix<f64>> {
        let n = seg.dimension();
        match self {
            OperatorField::Zero => Ok(DMatrix::zeros(n, modes)),
            OperatorField::Constant { matrix } => Ok(DMatrix::from_fn(n, modes, |i, j| matrix[i][j])),
            OperatorField::DelayGain { base, gain, weight } => {
                let v = if *gain == 0.0 {
                    DVector::zeros(n)
                } else {
                    weight.apply(seg)?
                };
                let mut out = DMatrix::zeros(n, modes);
                for i in 0..n.min(modes) {
                    out[(i, i)] = base + gain * v[i];
                }
                Ok(out)
            }
            OperatorField::Custom(f) => {
                let m = (f.0)(t, seg)?;
                check_dim("custom sigma rows", n, m.nrows())?;
                check_dim("custom sigma columns", modes, m.ncols())?;
                Ok(m)
            }
        }
    }

    fn zero_hs_sq(&self, noise: &QWienerSpec, n: usize) -> Option<f64> {
        let lam = noise.q_eigenvalues();
        match self {
            OperatorField::Zero => Some(0.0),
            OperatorField::Constant { matrix } => Some(
                (0..noise.modes())
                    .map(|j| lam[j] * matrix.iter().map(|row| row[j] * row[j]).sum::<f64>())
                    .sum(),
            ),
            OperatorField::DelayGain { base, .. } => {
                Some(lam.iter().take(n).map(|l| l * base * base).sum())
            }
            OperatorField::Custom(_) => None,
        }
    }

    /// Lipschitz constant into the Hilbert–Schmidt space `L_2^0`.
    pub fn lipschitz(&self, phase: &PhaseSpaceSpec, noise: &QWienerSpec, n: usize) -> Option<f64> {
        match self {
            OperatorField::Zero | OperatorField::Constant { .. } => Some(0.0),
            OperatorField::DelayGain { gain, weight, .. } => {
                if *gain == 0.0 {
                    return Some(0.0);
                }
                let lmax = noise.q_eigenvalues().iter().take(n).fold(0.0, |a: f64, &b| a.max(b));
                weight.lipschitz(phase).map(|l| gain.abs() * lmax.sqrt() * l)
            }
            OperatorField::Custom(_) => None,
        }
    }

    fn validate(&self, n: usize, modes: usize) -> Result<()> {
        match self {
            OperatorField::Constant { matrix } => {
                check_dim("sigma rows", n, matrix.len())?;
                for row in matrix {
                    check_dim("sigma columns", modes, row.len())?;
                }
            }
            OperatorField::DelayGain { base, gain, weight } => {
                if !base.is_finite() || !gain.is_finite() {
                    return Err(invalid("sigma", "base and gain must be finite"));
                }
                weight.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Families for the impulse maps `I_i`, `J_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpulseMap {
    Zero,
    /// `gain * weight(psi)`.
    DelayLinear { gain: f64, weight: Weight },
    /// `gain * ∫ e^{rate theta} u/(1+|u|) d theta`, with the saturation applied
    /// pointwise in `x` to the sine series `u(x) = sum_k a_k sqrt(2/pi) sin(k x)`
    /// on `spatial_points` interior collocation points and projected back.
    SineSaturated {
        gain: f64,
        rate: f64,
        spatial_points: usize,
    },
    #[serde(skip)]
    Custom(Custom<JumpFn>),
}

impl ImpulseMap {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&HistorySegment<'_>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        ImpulseMap::Custom(Custom(Arc::new(f)))
    }

    pub fn eval(&self, seg: &HistorySegment<'_>) -> Result<DVector<f64>> {
        let n = seg.dimension();
        match self {
            ImpulseMap::Zero => Ok(DVector::zeros(n)),
            ImpulseMap::DelayLinear { gain, weight } => Ok(weight.apply(seg)? * *gain),
            ImpulseMap::SineSaturated {
                gain,
                rate,
                spatial_points,
            } => {
                let synth = sine_synthesis(n, *spatial_points);
                let project = synth.transpose() * (std::f64::consts::PI / (*spatial_points as f64 + 1.0));
                let integral = seg.weighted_integral(*rate, |a| {
                    let u = &synth * a;
                    let s = u.map(|x| x / (1.0 + x.abs()));
                    &project * s
                });
                Ok(integral * *gain)
            }
            ImpulseMap::Custom(f) => {
                let v = (f.0)(seg)?;
                check_dim("custom impulse output", n, v.len())?;
                Ok(v)
            }
        }
    }

    /// Lipschitz constant in `||.||_B` (not squared).
    pub fn lipschitz(&self, phase: &PhaseSpaceSpec) -> Option<f64> {
        match self {
            ImpulseMap::Zero => Some(0.0),
            ImpulseMap::DelayLinear { gain, weight } => weight.lipschitz(phase).map(|l| gain.abs() * l),
            ImpulseMap::SineSaturated { gain, rate, .. } => Weight::Exponential { rate: *rate }
                .lipschitz(phase)
                .map(|l| gain.abs() * l),
            ImpulseMap::Custom(_) => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ImpulseMap::DelayLinear { gain, weight } => {
                if !gain.is_finite() {
                    return Err(invalid("impulse gain", "must be finite"));
                }
                weight.validate()
            }
            ImpulseMap::SineSaturated {
                gain,
                rate,
                spatial_points,
            } => {
                if !gain.is_finite() || !(*rate > 0.0) {
                    return Err(invalid("impulse", "gain must be finite and rate positive"));
                }
                if *spatial_points < n {
                    return Err(invalid("spatial_points", format!("need at least {n} collocation points")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `S_{jk} = sqrt(2/pi) sin(k x_j)`, `x_j = j pi / (K + 1)`.
pub fn sine_synthesis(modes: usize, points: usize) -> DMatrix<f64> {
    let norm = (2.0 / std::f64::consts::PI).sqrt();
    let h = std::f64::consts::PI / (points as f64 + 1.0);
    DMatrix::from_fn(points, modes, |j, k| norm * (((k + 1) * (j + 1)) as f64 * h).sin())
}

/// The concave modulus `kappa` of the growth hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kappa {
    /// `kappa(u) = l u`.
    Linear { l: f64 },
    /// `kappa(u) = l sqrt(u)` (fails the Osgood condition; Bihari use only).
    Sqrt { l: f64 },
    /// `l u ln(1/u)` for `u <= e^{-2}`, `l (u + e^{-2})` beyond.
    LogModulated { l: f64 },
    /// Piecewise linear through `(u, values)`, starting at `(0, 0)`,
    /// continued with the last slope.
    Tabulated { u: Vec<f64>, values: Vec<f64> },
}

const LOG_DELTA: f64 = 0.135_335_283_236_612_7; // e^{-2}

impl Kappa {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::Hypothesis {
            tag: Hypothesis::H1,
            detail,
        };
        match self {
            Kappa::Linear { l } | Kappa::Sqrt { l } | Kappa::LogModulated { l } => {
                if !(*l > 0.0 && l.is_finite()) {
                    return Err(bad(format!("kappa scale must be positive, got {l}")));
                }
            }
            Kappa::Tabulated { u, values } => {
                if u.len() < 2 || u.len() != values.len() || u[0] != 0.0 || values[0] != 0.0 {
                    return Err(bad("tabulated kappa must start at (0, 0) with matching lists".into()));
                }
                if u.windows(2).any(|w| !(w[0] < w[1])) || values[1..].iter().any(|v| !(*v > 0.0)) {
                    return Err(bad("tabulated kappa must be positive on increasing nodes".into()));
                }
                let slopes: Vec<f64> = (1..u.len())
                    .map(|k| (values[k] - values[k - 1]) / (u[k] - u[k - 1]))
                    .collect();
                if slopes.iter().any(|s| *s < 0.0) || slopes.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                    return Err(bad("tabulated kappa must be nondecreasing and concave".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Kappa::Linear { l } => l * x,
            Kappa::Sqrt { l } => l * x.sqrt(),
            Kappa::LogModulated { l } => {
                if x == 0.0 {
                    0.0
                } else if x <= LOG_DELTA {
                    l * x * (1.0 / x).ln()
                } else {
                    l * (x + LOG_DELTA)
                }
            }
            Kappa::Tabulated { u, values } => {
                let k = u.partition_point(|&v| v <= x).clamp(1, u.len() - 1);
                let slope = (values[k] - values[k - 1]) / (u[k] - u[k - 1]);
                values[k - 1] + slope * (x - u[k - 1])
            }
        }
    }

    /// `∫_{0+} ds / kappa(s) = inf`.
    pub fn satisfies_osgood(&self) -> bool {
        !matches!(self, Kappa::Sqrt { .. })
    }

    /// `G(r) = ∫_1^r ds / kappa(s)`; `-inf` at `r = 0` under the Osgood condition.
    pub fn g(&self, r: f64) -> f64 {
        match self {
            Kappa::Linear { l } => r.ln() / l,
            Kappa::Sqrt { l } => 2.0 * (r.max(0.0).sqrt() - 1.0) / l,
            Kappa::LogModulated { l } => {
                if r >= LOG_DELTA {
                    ((r + LOG_DELTA) / (1.0 + LOG_DELTA)).ln() / l
                } else if r <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let g_delta = ((2.0 * LOG_DELTA) / (1.0 + LOG_DELTA)).ln() / l;
                    g_delta - ((1.0 / r).ln().ln() - 2f64.ln()) / l
                }
            }
            Kappa::Tabulated { .. } => {
                if r <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if r >= 1.0 {
                    self.tab_integral(1.0, r)
                } else {
                    -self.tab_integral(r, 1.0)
                }
            }
        }
    }

    /// `G^{-1}(y)`, or `None` when `y` is outside the range of `G`.
    pub fn g_inv(&self, y: f64) -> Option<f64> {
        if y.is_nan() {
            return None;
        }
        if y == f64::NEG_INFINITY {
            return self.satisfies_osgood().then_some(0.0);
        }
        match self {
            Kappa::Linear { l } => Some((l * y).exp()),
            Kappa::Sqrt { l } => {
                let s = 1.0 + l * y / 2.0;
                (s >= 0.0).then_some(s * s)
            }
            Kappa::LogModulated { l } => {
                let g_delta = self.g(LOG_DELTA);
                if y >= g_delta {
                    Some((1.0 + LOG_DELTA) * (l * y).exp() - LOG_DELTA)
                } else {
                    // ln ln(1/r) = ln 2 + l (G(delta) - y)
                    let lnln = 2f64.ln() + l * (g_delta - y);
                    Some((-(lnln.exp())).exp())
                }
            }
            Kappa::Tabulated { .. } => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                while self.g(hi) < y {
                    lo = hi;
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return None;
                    }
                }
                while hi - lo > 1e-10 * hi.max(1e-300) {
                    let mid = 0.5 * (lo + hi);
                    if self.g(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if mid == lo && mid == hi {
                        break;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }

    /// Exact `∫_a^b ds / kappa(s)` for the piecewise-linear table, `0 < a <= b`.
    fn tab_integral(&self, a: f64, b: f64) -> f64 {
        let Kappa::Tabulated { u, .. } = self else {
            unreachable!()
        };
        let mut pts = vec![a];
        pts.extend(u.iter().copied().filter(|&v| v > a && v < b));
        pts.push(b);
        pts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (x, y) = (w[0], w[1]);
                let (kx, ky) = (self.eval(x), self.eval(y));
                let slope = (ky - kx) / (y - x);
                if slope.abs() <= 1e-14 * kx.max(ky) / (y - x).max(1e-300) {
                    (y - x) / kx
                } else {
                    (ky / kx).ln() / slope
                }
            })
            .sum()
    }

    /// Constants `(a, beta)` with `kappa(u) <= a + beta u` for all `u >= 0`.
    pub fn affine_bound(&self) -> (f64, f64) {
        match self {
            Kappa::Linear { l } => (0.0, *l),
            // sqrt(u) <= (1 + u) / 2
            Kappa::Sqrt { l } => (0.5 * l, 0.5 * l),
            // tangent line at e^{-2}
            Kappa::LogModulated { l } => (l * LOG_DELTA, *l),
            Kappa::Tabulated { u, values } => {
                // Concave, so the first chord slope dominates every tangent.
                let beta = values[1] / u[1];
                (0.0, beta)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub g: VectorField,
    pub f: VectorField,
    pub sigma: OperatorField,
    pub kappa: Kappa,
    /// Bound `K` on `|g(t,0)|^2`, `|f(t,0)|^2`, `|sigma(t,0)|^2`.
    pub k_zero: f64,
    /// Lipschitz constant (squared) of `g` used for stability.
    pub k1: Option<f64>,
}

impl CoefficientSet {
    pub fn zero() -> Self {
        Self {
            g: VectorField::Zero,
            f: VectorField::Zero,
            sigma: OperatorField::Zero,
            kappa: Kappa::Linear { l: 1.0 },
            k_zero: 0.0,
            k1: Some(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub time: f64,
    /// Jump of the state, `I_i`.
    pub jump_i: ImpulseMap,
    /// Jump of the derivative, `J_i`.
    pub jump_j: ImpulseMap,
    /// `|I_i(phi) - I_i(psi)|^2 <= p ||phi - psi||_B^2`.
    pub p: f64,
    /// `|J_i(phi) - J_i(psi)|^2 <= q ||phi - psi||_B^2`.
    pub q: f64,
}

/// One complete Cauchy problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub operator: SpectralOperator,
    /// Caputo order `alpha in (0, 1)`; the operator families use `q = 1 + alpha`.
    pub alpha: f64,
    pub horizon: f64,
    pub coefficients: CoefficientSet,
    pub impulses: Vec<Impulse>,
    pub phase: PhaseSpaceSpec,
    pub noise: QWienerSpec,
    pub phi: Prehistory,
    pub x1: DVector<f64>,
    /// User-supplied operator and phase-space constants; measured when absent.
    pub constants: Option<HypothesisConstants>,
}

impl ProblemSpec {
    /// Unforced problem with zero coefficients and no impulses.
    pub fn linear(
        operator: SpectralOperator,
        alpha: f64,
        horizon: f64,
        phase: PhaseSpaceSpec,
        noise: QWienerSpec,
        phi: Prehistory,
        x1: DVector<f64>,
    ) -> Result<Self> {
        let spec = Self {
            operator,
            alpha,
            horizon,
            coefficients: CoefficientSet::zero(),
            impulses: Vec::new(),
            phase,
            noise,
            phi,
            x1,
            constants: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn q(&self) -> f64 {
        1.0 + self.alpha
    }

    pub fn dimension(&self) -> usize {
        self.operator.dimension()
    }

    pub fn impulse_times(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.time).collect()
    }

    pub fn sum_p(&self) -> f64 {
        self.impulses.iter().map(|i| i.p).sum()
    }

    pub fn sum_q(&self) -> f64 {
        self.impulses.iter().map(|i| i.q).sum()
    }

    /// `phi(0)`.
    pub fn phi_zero(&self) -> DVector<f64> {
        self.phi.eval(0.0, self.dimension())
    }

    /// Checks dimensions, parameter ranges and the hypothesis-level invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        check_dim("x1", n, self.x1.len())?;
        match self.phi.dimension() {
            Some(d) => check_dim("phi", n, d)?,
            None => return Err(invalid("phi", "initial history needs at least one term")),
        }
        if let Some(c) = self.phase.exponential_rate() {
            if let Some(t) = self.phi.terms().iter().find(|t| t.rate + c <= 0.0) {
                return Err(invalid(
                    "phi",
                    format!("term with rate {} has infinite B-norm under rho = e^({c} s)", t.rate),
                ));
            }
        }
        let c = &self.coefficients;
        c.g.validate(n, "g")?;
        c.f.validate(n, "f")?;
        c.sigma.validate(n, self.noise.modes())?;
        c.kappa.validate()?;
        if !c.kappa.satisfies_osgood() {
            return Err(Error::Hypothesis {
                tag: Hypothesis::H1,
                detail: "kappa must satisfy ∫_{0+} ds/kappa(s) = inf".into(),
            });
        }
        if !(c.k_zero >= 0.0 && c.k_zero.is_finite()) {
            return Err(Error::Hypothesis {
                tag: Hypothesis::H3,
                detail: format!("K must be finite and nonnegative, got {}", c.k_zero),
            });
        }
        if let Some(k1) = c.k1 {
            if !(k1 >= 0.0 && k1.is_finite()) {
                return Err(Error::Hypothesis {
                    tag: Hypothesis::H4,
                    detail: format!("K1 must be finite and nonnegative, got {k1}"),
                });
            }
        }
        let mut prev = 0.0;
        for (k, imp) in self.impulses.iter().enumerate() {
            if !(imp.time > prev && imp.time < self.horizon) {
                return Err(invalid(
                    "impulses",
                    format!("impulse times must increase strictly inside (0, b); impulse {} at {}", k + 1, imp.time),
                ));
            }
            prev = imp.time;
            for (name, v) in [("p", imp.p), ("q", imp.q)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Hypothesis {
                        tag: Hypothesis::H2,
                        detail: format!("impulse {} has {name} = {v}; Lipschitz constants must be >= 0", k + 1),
                    });
                }
            }
            imp.jump_i.validate(n)?;
            imp.jump_j.validate(n)?;
        }
        if let Some(consts) = &self.constants {
            consts.validate()?;
        }
        self.check_zero_growth()
    }

    /// (H3): coefficients at the zero history are bounded by `K`, and the
    /// impulse maps vanish there.
    fn check_zero_growth(&self) -> Result<()> {
        let n = self.dimension();
        let c = &self.coefficients;
        let zero = zero_path(n, &self.phase, self.horizon)?;
        let seg = zero.segment_at(0, Side::Right);
        let probe_times: Vec<f64> = (0..5).map(|k| self.horizon * k as f64 / 4.0).collect();
        let tol = c.k_zero * (1.0 + 1e-12) + 1e-300;
        let mut worst = 0.0f64;
        for (field, name) in [(&c.g, "g"), (&c.f, "f")] {
            let v = match field.zero_norm_sq() {
                Some(v) => v,
                None => probe_times
                    .iter()
                    .map(|&t| field.eval(t, &seg).map(|x| x.norm_squared()))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max),
            };
            if v > tol {
                return Err(Error::Hypothesis {
                    tag: Hypothesis::H3,
                    detail: format!("|{name}(t, 0)|^2 = {v} exceeds K = {}", c.k_zero),
                });
            }
            worst = worst.max(v);
        }
        let s = match c.sigma.zero_hs_sq(&self.noise, n) {
            Some(v) => v,
            None => {
                let mut best = 0.0f64;
                for &t in &probe_times {
                    let m = c.sigma.eval(t, &seg, self.noise.modes())?;
                    best = best.max(crate::noise::hs_norm_sq(&m, &self.noise)?);
                }
                best
            }
        };
        if s > tol {
            return Err(Error::Hypothesis {
                tag: Hypothesis::H3,
                detail: format!("|sigma(t, 0)|^2 = {s} exceeds K = {}", c.k_zero),
            });
        }
        for (k, imp) in self.impulses.iter().enumerate() {
            for (map, name) in [(&imp.jump_i, "I"), (&imp.jump_j, "J")] {
                let v = map.eval(&seg)?;
                if v.amax() > 0.0 {
                    return Err(Error::Hypothesis {
                        tag: Hypothesis::H3,
                        detail: format!("{name}_{}(0) must vanish, got norm {}", k + 1, v.norm()),
                    });
                }
            }
        }
        Ok(())
    }

    /// `||phi||_B`.
    pub fn norm_phi(&self) -> Result<f64> {
        let zero = zero_path_with(&self.phi, self.dimension(), &self.phase, self.horizon)?;
        Ok(b_norm(&zero.segment_at(0, Side::Right), &self.phase))
    }

    /// Constants from `self.constants`, or measured on `samples` points of `[0, b]`.
    pub fn resolve_constants(&self, samples: usize) -> Result<HypothesisConstants> {
        match &self.constants {
            Some(c) => Ok(c.clone()),
            None => HypothesisConstants::measure(self, samples),
        }
    }
}

fn zero_path(n: usize, phase: &PhaseSpaceSpec, horizon: f64) -> Result<HistoryPath> {
    zero_path_with(&Prehistory::zero(n), n, phase, horizon)
}

/// Two-node path on `[0, b]` holding `phi(0)`; its segment at 0 is `phi`.
fn zero_path_with(phi: &Prehistory, n: usize, phase: &PhaseSpaceSpec, horizon: f64) -> Result<HistoryPath> {
    let pre = Arc::new(phi.sample(n, phase));
    let grid = Arc::new(TimeGrid::new(vec![0.0, horizon], &[])?);
    let v0 = pre.at_zero().clone();
    HistoryPath::continuous(pre, grid, vec![v0.clone(), v0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsSource {
    UserSupplied,
    Measured,
}

/// Operator bounds `||S_q(t)|| <= M`, `||T_q(t)|| <= t^{q-1} M_b` and the
/// phase-space constants `Gamma_b`, `N_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisConstants {
    pub m: f64,
    pub m_b: f64,
    pub gamma_b: f64,
    pub n_b: f64,
    /// `sup_t ||T_q(t)||` (bound without the `t^{q-1}` factor), when measured.
    pub m_1: Option<f64>,
    pub source: ConstantsSource,
}

impl HypothesisConstants {
    pub fn user(m: f64, m_b: f64, gamma_b: f64, n_b: f64) -> Result<Self> {
        let c = Self {
            m,
            m_b,
            gamma_b,
            n_b,
            m_1: None,
            source: ConstantsSource::UserSupplied,
        };
        c.validate()?;
        Ok(c)
    }

    /// Empirical `M`, `M_b` over a uniform grid of `[0, b]`; `Gamma_b = l`, `N_b = 1`.
    pub fn measure(spec: &ProblemSpec, samples: usize) -> Result<Self> {
        let b = operator_bounds(&spec.operator, spec.q(), spec.horizon, samples)?;
        let c = Self {
            m: b.m,
            m_b: b.m_b,
            gamma_b: spec.phase.l(),
            n_b: 1.0,
            m_1: Some(b.m_1),
            source: ConstantsSource::Measured,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("M", self.m), ("M_b", self.m_b), ("Gamma_b", self.gamma_b), ("N_b", self.n_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("constants", format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub value_a: f64,
    pub value_b: f64,
    pub threshold: f64,
    pub satisfied: bool,
    pub constants: HypothesisConstants,
}

impl ConditionReport {
    fn new(value_a: f64, value_b: f64, constants: &HypothesisConstants) -> Self {
        Self {
            value_a,
            value_b,
            threshold: 1.0,
            satisfied: value_a.max(value_b) < 1.0,
            constants: constants.clone(),
        }
    }

    pub fn value(&self) -> f64 {
        self.value_a.max(self.value_b)
    }
}

fn impulse_sums(spec: &ProblemSpec) -> (f64, f64, f64) {
    (spec.impulses.len() as f64, spec.sum_p(), spec.sum_q())
}

/// `max{7mM²Γ_b Σp + 14mM²b²Γ_b Σq, 7mM² Σp + 7mM²b Σq} < 1`.
pub fn check_existence_condition(spec: &ProblemSpec, consts: &HypothesisConstants) -> ConditionReport {
    let (m, sp, sq) = impulse_sums(spec);
    let (mm, b, gb) = (consts.m * consts.m, spec.horizon, consts.gamma_b);
    let value_a = 7.0 * m * mm * gb * sp + 14.0 * m * mm * b * b * gb * sq;
    let value_b = 7.0 * m * mm * sp + 7.0 * m * mm * b * sq;
    ConditionReport::new(value_a, value_b, consts)
}

/// `7mM²Γ_b Σp + 14mM²b²Γ_b Σq < 1` (single branch).
pub fn check_apriori_condition(spec: &ProblemSpec, consts: &HypothesisConstants) -> ConditionReport {
    let a = check_existence_condition(spec, consts).value_a;
    ConditionReport::new(a, a, consts)
}

/// `21mM² Σp + 21mM²b Σq < 1`; requires the (H4) constant.
pub fn check_stability_condition(spec: &ProblemSpec, consts: &HypothesisConstants) -> Result<ConditionReport> {
    if spec.coefficients.k1.is_none() {
        return Err(Error::Hypothesis {
            tag: Hypothesis::H4,
            detail: "no Lipschitz constant K1 for g; stability cannot be assessed".into(),
        });
    }
    let (m, sp, sq) = impulse_sums(spec);
    let mm = consts.m * consts.m;
    let v = 21.0 * m * mm * sp + 21.0 * m * mm * spec.horizon * sq;
    Ok(ConditionReport::new(v, v, consts))
}

/// The constants `c1`, `c2`, `c3` of the a-priori estimate and the resulting
/// bound on `E sup |x(t)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriBound {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub denominator: f64,
    /// `E||phi||^2 + c2 e^{c3}`.
    pub bound_exp_c3: f64,
    /// `E||phi||^2 + c2 e^{c3 b}`.
    pub bound_exp_c3b: f64,
    /// The larger of the two.
    pub bound: f64,
}

pub fn a_priori_bound(
    spec: &ProblemSpec,
    consts: &HypothesisConstants,
    norm_phi_sq: f64,
    kappa_affine: (f64, f64),
) -> Result<AprioriBound> {
    let cond = check_apriori_condition(spec, consts);
    if !cond.satisfied {
        return Err(Error::BoundUndefined(format!(
            "impulse condition value {} is not below 1",
            cond.value_a
        )));
    }
    let (a, beta) = kappa_affine;
    let (m, sp, _) = impulse_sums(spec);
    let b = spec.horizon;
    let q = spec.q();
    let mm = consts.m * consts.m;
    let mb = consts.m_b * consts.m_b;
    let k = spec.coefficients.k_zero;
    let phi0 = spec.phi_zero().norm_squared();
    let x1 = spec.x1.norm_squared();
    let kphi = spec.coefficients.kappa.eval(norm_phi_sq);
    let norm_phi = norm_phi_sq.max(0.0).sqrt();

    let c1 = 7.0 * mm * phi0
        + 21.0 * mm * b * b * (x1 + kphi + k)
        + 14.0 * mm * b * b * k
        + 14.0 * mb * b.powf(2.0 * q) / (2.0 * q - 1.0) * k
        + 14.0 * mb * b.powf(2.0 * q - 1.0) * k;
    let denominator = 1.0 - cond.value_a;
    let c2 = (c1 + 7.0 * m * mm * consts.n_b * sp * norm_phi + 14.0 * m * mm * b * b * sp * norm_phi) / denominator
        + (14.0 * m * m * mm * b * a + (14.0 * mm * b * b + 28.0 * mb * b.powf(2.0 * q)) * a) / denominator;
    let c3 = (14.0 * m * mm * b * sp
        + 14.0 * mm * b
        + 14.0 * mb * b.powf(2.0 * q - 1.0) / (2.0 * q - 1.0)
        + 14.0 * mb * b.powf(2.0 * q - 2.0))
        * beta
        / denominator;
    let bound_exp_c3 = norm_phi_sq + c2 * c3.exp();
    let bound_exp_c3b = norm_phi_sq + c2 * (c3 * b).exp();
    Ok(AprioriBound {
        c1,
        c2,
        c3,
        denominator,
        bound_exp_c3,
        bound_exp_c3b,
        bound: bound_exp_c3.max(bound_exp_c3b),
    })
}

/// Constants appearing in the continuous-dependence estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    /// `max{6M²b², 6M²b²K1 + 3M²L²}`.
    pub nu: f64,
    /// `3(14m²M² + 7M²b + 7M_b² b^{2q-1}/(2q-1) + 7M_b² b^{2q-2})`.
    pub nu_tilde: f64,
    /// `1 - 3(7mM²Σp + 7mM²bΣq)`.
    pub lambda: f64,
}

/// `phase_l` is the constant `L` of `|psi(0)| <= L ||psi||_B`.
pub fn stability_constants(spec: &ProblemSpec, consts: &HypothesisConstants, phase_l: f64) -> Result<StabilityConstants> {
    let k1 = spec.coefficients.k1.ok_or_else(|| Error::Hypothesis {
        tag: Hypothesis::H4,
        detail: "no Lipschitz constant K1 for g".into(),
    })?;
    let (m, sp, sq) = impulse_sums(spec);
    let b = spec.horizon;
    let q = spec.q();
    let mm = consts.m * consts.m;
    let mb = consts.m_b * consts.m_b;
    let nu = (6.0 * mm * b * b).max(6.0 * mm * b * b * k1 + 3.0 * mm * phase_l * phase_l);
    let nu_tilde = 3.0
        * (14.0 * m * m * mm
            + 7.0 * mm * b
            + 7.0 * mb * b.powf(2.0 * q - 1.0) / (2.0 * q - 1.0)
            + 7.0 * mb * b.powf(2.0 * q - 2.0));
    let lambda = 1.0 - 3.0 * (7.0 * m * mm * sp + 7.0 * m * mm * b * sq);
    Ok(StabilityConstants { nu, nu_tilde, lambda })
}

/// An impulse map whose sampled Lipschitz ratio exceeds its declared constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationWarning {
    pub impulse: usize,
    pub map: &'static str,
    /// Largest observed `|F(psi) - F(phi)|^2 / ||psi - phi||_B^2`.
    pub observed: f64,
    pub declared: f64,
}

impl fmt::Display for CertificationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}: sampled squared Lipschitz ratio {:.6e} exceeds declared {:.6e}",
            self.map,
            self.impulse + 1,
            self.observed,
            self.declared
        )
    }
}

/// Samples random segment pairs and compares the squared Lipschitz ratios of
/// every impulse map against its declared `p_i` / `q_i`.
pub fn certify_impulse_constants(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<Vec<CertificationWarning>> {
    let n = spec.dimension();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let min_rate = spec.phase.exponential_rate().map_or(0.0, |c| -0.5 * c);
    let mut warnings = Vec::new();
    for (k, imp) in spec.impulses.iter().enumerate() {
        let steps = 24usize;
        let times: Vec<f64> = (0..=steps).map(|j| imp.time * j as f64 / steps as f64).collect();
        let grid = Arc::new(TimeGrid::new(times, &[])?);
        let mut worst_i = 0.0f64;
        let mut worst_j = 0.0f64;
        for _ in 0..samples {
            let make = |rng: &mut ChaCha20Rng| -> Result<HistoryPath> {
                let scale = 10f64.powf(rng.random_range(-2.0..1.0));
                let terms = (0..2)
                    .map(|_| ExpTerm {
                        rate: rng.random_range(min_rate..3.0),
                        amplitude: (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect(),
                    })
                    .collect();
                let phi = Prehistory::new(terms)?;
                let pre = Arc::new(phi.sample(n, &spec.phase));
                let mut vals = vec![pre.at_zero().clone()];
                for _ in 1..grid.len() {
                    vals.push(DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0)));
                }
                HistoryPath::continuous(pre, grid.clone(), vals)
            };
            let a = make(&mut rng)?;
            let b = make(&mut rng)?;
            let diff_phi = a.prehistory().analytic().plus(&b.prehistory().analytic().scaled(-1.0));
            let diff = HistoryPath::continuous(
                Arc::new(diff_phi.sample(n, &spec.phase)),
                grid.clone(),
                a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect(),
            )?;
            let last = grid.len() - 1;
            let dist = b_norm(&diff.segment_at(last, Side::Left), &spec.phase);
            if dist <= 0.0 {
                continue;
            }
            let (sa, sb) = (a.segment_at(last, Side::Left), b.segment_at(last, Side::Left));
            let di = (imp.jump_i.eval(&sa)? - imp.jump_i.eval(&sb)?).norm_squared();
            let dj = (imp.jump_j.eval(&sa)? - imp.jump_j.eval(&sb)?).norm_squared();
            worst_i = worst_i.max(di / (dist * dist));
            worst_j = worst_j.max(dj / (dist * dist));
        }
        if worst_i > imp.p * (1.0 + 1e-9) {
            warnings.push(CertificationWarning {
                impulse: k,
                map: "I",
                observed: worst_i,
                declared: imp.p,
            });
        }
        if worst_j > imp.q * (1.0 + 1e-9) {
            warnings.push(CertificationWarning {
                impulse: k,
                map: "J",
                observed: worst_j,
                declared: imp.q,
            });
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_spec(impulses: Vec<(f64, f64, f64)>) -> ProblemSpec {
        let mut spec = ProblemSpec::linear(
            SpectralOperator::diagonal(vec![-1.0]).unwrap(),
            0.5,
            1.0,
            PhaseSpaceSpec::exponential(2.0).unwrap(),
            QWienerSpec::new(vec![1.0], 0).unwrap(),
            Prehistory::zero(1),
            DVector::zeros(1),
        )
        .unwrap();
        spec.impulses = impulses
            .into_iter()
            .map(|(time, p, q)| Impulse {
                time,
                jump_i: ImpulseMap::Zero,
                jump_j: ImpulseMap::Zero,
                p,
                q,
            })
            .collect();
        spec.validate().unwrap();
        spec
    }

    fn unit() -> HypothesisConstants {
        HypothesisConstants::user(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn existence_arithmetic() {
        let r = check_existence_condition(&scalar_spec(vec![]), &unit());
        assert_eq!((r.value_a, r.value_b, r.satisfied), (0.0, 0.0, true));
        let r = check_existence_condition(&scalar_spec(vec![(0.5, 0.01, 0.001)]), &unit());
        assert_relative_eq!(r.value_a, 0.084, max_relative = 1e-14);
        assert_relative_eq!(r.value_b, 0.077, max_relative = 1e-14);
        assert!(r.satisfied);
        let r = check_existence_condition(&scalar_spec(vec![(0.5, 0.2, 0.0)]), &unit());
        assert_relative_eq!(r.value_a, 1.4, max_relative = 1e-14);
        assert!(!r.satisfied);
    }

    #[test]
    fn apriori_boundary_is_not_satisfied() {
        let r = check_apriori_condition(&scalar_spec(vec![(0.5, 1.0 / 7.0, 0.0)]), &unit());
        assert_eq!(r.value_a, 1.0);
        assert!(!r.satisfied);
    }

    #[test]
    fn stability_arithmetic() {
        let r = check_stability_condition(&scalar_spec(vec![(0.5, 0.01, 0.01)]), &unit()).unwrap();
        assert_relative_eq!(r.value_a, 0.42, max_relative = 1e-14);
        let r = check_stability_condition(&scalar_spec(vec![(0.3, 0.02, 0.0), (0.6, 0.02, 0.0)]), &unit()).unwrap();
        assert_relative_eq!(r.value_a, 1.68, max_relative = 1e-14);
        assert!(!r.satisfied);
        let mut spec = scalar_spec(vec![]);
        spec.coefficients.k1 = None;
        assert!(matches!(
            check_stability_condition(&spec, &unit()),
            Err(Error::Hypothesis { tag: Hypothesis::H4, .. })
        ));
    }

    #[test]
    fn a_priori_zero_problem_and_monotonicity() {
        let spec = scalar_spec(vec![]);
        let c = unit();
        let zero = a_priori_bound(&spec, &c, 0.0, (0.0, 1.0)).unwrap();
        assert_eq!(zero.bound, 0.0);
        let mut bigger = spec.clone();
        bigger.coefficients.k_zero = 0.5;
        let b1 = a_priori_bound(&bigger, &c, 0.0, (0.0, 1.0)).unwrap();
        bigger.coefficients.k_zero = 0.6;
        let b2 = a_priori_bound(&bigger, &c, 0.0, (0.0, 1.0)).unwrap();
        assert!(b2.bound > b1.bound && b1.bound > 0.0);
        let undefined = scalar_spec(vec![(0.5, 0.2, 0.0)]);
        assert!(matches!(a_priori_bound(&undefined, &c, 0.0, (0.0, 1.0)), Err(Error::BoundUndefined(_))));
    }

    #[test]
    fn kappa_inverses() {
        for kappa in [
            Kappa::Linear { l: 0.7 },
            Kappa::Sqrt { l: 1.3 },
            Kappa::LogModulated { l: 2.0 },
            Kappa::Tabulated {
                u: vec![0.0, 0.5, 2.0],
                values: vec![0.0, 1.0, 2.5],
            },
        ] {
            kappa.validate().unwrap();
            for &r in &[1e-6, 0.01, 0.1, 0.5, 1.0, 3.0, 40.0] {
                let back = kappa.g_inv(kappa.g(r)).unwrap_or_else(|| panic!("{kappa:?} {r} {}", kappa.g(r)));
                assert_relative_eq!(back, r, max_relative = 1e-9);
            }
            let (a, beta) = kappa.affine_bound();
            for k in 0..200 {
                let u = k as f64 * 0.05;
                assert!(kappa.eval(u) <= a + beta * u + 1e-12);
            }
        }
        assert!(Kappa::Linear { l: 0.0 }.validate().is_err());
        let convex = Kappa::Tabulated {
            u: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 3.0],
        };
        assert!(convex.validate().is_err());
    }

    #[test]
    fn validation_tags() {
        let mut spec = scalar_spec(vec![(0.5, 0.01, 0.0)]);
        spec.impulses[0].p = -0.1;
        assert!(matches!(spec.validate(), Err(Error::Hypothesis { tag: Hypothesis::H2, .. })));
        let mut spec = scalar_spec(vec![]);
        spec.coefficients.g = VectorField::Affine {
            offset: vec![1.0],
            matrix: vec![vec![0.0]],
            weight: Weight::Instant,
        };
        assert!(matches!(spec.validate(), Err(Error::Hypothesis { tag: Hypothesis::H3, .. })));
        spec.coefficients.k_zero = 1.0;
        spec.validate().unwrap();
        let mut spec = scalar_spec(vec![]);
        spec.coefficients.kappa = Kappa::Sqrt { l: 1.0 };
        assert!(matches!(spec.validate(), Err(Error::Hypothesis { tag: Hypothesis::H1, .. })));
    }

    #[test]
    fn scale_covariance() {
        let c = HypothesisConstants::user(1.3, 0.9, 0.5, 1.0).unwrap();
        let base = scalar_spec(vec![(0.3, 0.01, 0.002), (0.6, 0.003, 0.004)]);
        let mut scaled = base.clone();
        for imp in &mut scaled.impulses {
            imp.p *= 4.0;
            imp.q *= 4.0;
        }
        let (r0, r1) = (check_existence_condition(&base, &c), check_existence_condition(&scaled, &c));
        assert_relative_eq!(r1.value_a, 4.0 * r0.value_a, max_relative = 1e-14);
        assert_relative_eq!(r1.value_b, 4.0 * r0.value_b, max_relative = 1e-14);
    }

    #[test]
    fn saturated_impulse_is_contractive() {
        let spec = {
            let mut s = scalar_spec(vec![]);
            s.operator = SpectralOperator::diagonal(vec![-1.0, -4.0, -9.0]).unwrap();
            s.noise = QWienerSpec::new(vec![1.0, 0.25, 0.1], 0).unwrap();
            s.phi = Prehistory::zero(3);
            s.x1 = DVector::zeros(3);
            s.impulses = vec![Impulse {
                time: 0.5,
                jump_i: ImpulseMap::DelayLinear {
                    gain: 0.3,
                    weight: Weight::Exponential { rate: 3.0 },
                },
                jump_j: ImpulseMap::SineSaturated {
                    gain: 0.3,
                    rate: 3.0,
                    spatial_points: 16,
                },
                p: 0.09,
                q: 0.09,
            }];
            s.validate().unwrap();
            s
        };
        assert!(certify_impulse_constants(&spec, 40, 11).unwrap().is_empty());
        let mut tight = spec.clone();
        tight.impulses[0].p = 1e-6;
        let w = certify_impulse_constants(&tight, 10, 11).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].map, "I");
    }
}
