//! The weighted phase space of histories on `(-inf, 0]`, solution paths with
//! an infinite prehistory, and their history segments `x_t(theta) = x(t + theta)`.
//!
//! The norm is `||psi||_B = ∫ rho(s) sup_{s <= theta <= 0} |psi(theta)| ds`.
//! Histories are truncated at `-T_h` where the remaining weight mass is below
//! the configured tail tolerance; the truncated part is closed by the running
//! maximum at the last sample times that mass.

use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Weight `rho` on `(-inf, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rho {
    /// `rho(s) = e^{rate s}`.
    Exponential { rate: f64 },
    /// Piecewise linear through `(theta, values)` (ascending, ending at 0);
    /// `l` is the total mass including the part before the first node.
    Tabulated {
        theta: Vec<f64>,
        values: Vec<f64>,
        l: f64,
    },
}

impl Rho {
    fn validate(&self) -> Result<()> {
        match self {
            Rho::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid("rho.rate", format!("must be positive, got {rate}")));
                }
            }
            Rho::Tabulated { theta, values, l } => {
                if theta.len() < 2 || theta.len() != values.len() {
                    return Err(invalid("rho", "tabulated weight needs matching node lists of length >= 2"));
                }
                if theta.windows(2).any(|w| w[0] >= w[1]) || *theta.last().unwrap() != 0.0 {
                    return Err(invalid("rho.theta", "nodes must increase strictly up to 0"));
                }
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(invalid("rho.values", "weight must be positive"));
                }
                let table = trapezoid_mass(theta, values, theta[0], 0.0);
                if !(*l >= table) {
                    return Err(invalid("rho.l", format!("total mass {l} is below the tabulated mass {table}")));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Rho::Exponential { rate } => (rate * s).exp(),
            Rho::Tabulated { theta, values, .. } => interpolate(theta, values, s),
        }
    }

    /// `l = ∫_{-inf}^0 rho`.
    pub fn mass(&self) -> f64 {
        match self {
            Rho::Exponential { rate } => 1.0 / rate,
            Rho::Tabulated { l, .. } => *l,
        }
    }

    /// `∫_a^b rho` for `a <= b <= 0`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        match self {
            Rho::Exponential { rate } => ((rate * b).exp() - (rate * a).exp()) / rate,
            Rho::Tabulated { theta, values, .. } => {
                if a >= theta[0] {
                    trapezoid_mass(theta, values, a, b)
                } else {
                    self.tail(b) - self.tail(a)
                }
            }
        }
    }

    /// `∫_{-inf}^theta rho`.
    pub fn tail(&self, theta: f64) -> f64 {
        match self {
            Rho::Exponential { rate } => (rate * theta).exp() / rate,
            Rho::Tabulated { theta: nodes, values, l } => {
                let first = nodes[0];
                let before = l - trapezoid_mass(nodes, values, first, 0.0);
                if theta >= first {
                    before + trapezoid_mass(nodes, values, first, theta)
                } else {
                    // Spread the untabulated mass with the first node's density.
                    before * (values[0] * (theta - first) / before.max(f64::MIN_POSITIVE)).exp()
                }
            }
        }
    }
}

fn interpolate(x: &[f64], y: &[f64], s: f64) -> f64 {
    if s <= x[0] {
        return y[0];
    }
    let k = x.partition_point(|&v| v <= s).min(x.len() - 1);
    let (x0, x1, y0, y1) = (x[k - 1], x[k], y[k - 1], y[k]);
    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
}

fn trapezoid_mass(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a];
    pts.extend(x.iter().copied().filter(|&v| v > a && v < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (interpolate(x, y, w[0]) + interpolate(x, y, w[1])))
        .sum()
}

/// Weight, truncation horizon and prehistory sampling for the phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceSpec {
    rho: Rho,
    truncation_horizon: f64,
    tail_tolerance: f64,
    prehistory_steps: usize,
}

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_PREHISTORY_STEPS: usize = 400;

impl PhaseSpaceSpec {
    /// Chooses the smallest `T_h` with `∫_{-inf}^{-T_h} rho <= tail_tolerance`.
    pub fn new(rho: Rho, tail_tolerance: f64, prehistory_steps: usize) -> Result<Self> {
        rho.validate()?;
        if !(tail_tolerance > 0.0 && tail_tolerance.is_finite()) {
            return Err(invalid("tail_tolerance", "must be positive"));
        }
        if prehistory_steps == 0 {
            return Err(invalid("prehistory_steps", "must be positive"));
        }
        let horizon = match &rho {
            Rho::Exponential { rate } => ((1.0 / (rate * tail_tolerance)).ln() / rate).max(1.0 / rate),
            Rho::Tabulated { theta, .. } => {
                let found = theta
                    .iter()
                    .rev()
                    .copied()
                    .find(|&t| rho.tail(t) <= tail_tolerance && t < 0.0);
                match found {
                    Some(t) => -t,
                    None => {
                        return Err(invalid(
                            "tail_tolerance",
                            "tabulated weight does not reach the requested tail mass",
                        ))
                    }
                }
            }
        };
        Ok(Self {
            rho,
            truncation_horizon: horizon,
            tail_tolerance,
            prehistory_steps,
        })
    }

    /// Exponential weight `e^{rate s}` with default truncation settings.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Rho::Exponential { rate }, DEFAULT_TAIL_TOLERANCE, DEFAULT_PREHISTORY_STEPS)
    }

    pub fn rho(&self) -> &Rho {
        &self.rho
    }

    pub fn l(&self) -> f64 {
        self.rho.mass()
    }

    pub fn truncation_horizon(&self) -> f64 {
        self.truncation_horizon
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    pub fn prehistory_steps(&self) -> usize {
        self.prehistory_steps
    }

    pub fn prehistory_step(&self) -> f64 {
        self.truncation_horizon / self.prehistory_steps as f64
    }

    /// Rate of the exponential weight, if that is the form in use.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.rho {
            Rho::Exponential { rate } => Some(rate),
            Rho::Tabulated { .. } => None,
        }
    }
}

/// One term `amplitude * e^{rate theta}` of an initial history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpTerm {
    pub rate: f64,
    pub amplitude: Vec<f64>,
}

/// Initial history `phi(theta) = sum_k a_k e^{r_k theta}`, `theta <= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prehistory {
    terms: Vec<ExpTerm>,
}

impl Prehistory {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self> {
        if let Some(first) = terms.first() {
            let n = first.amplitude.len();
            for t in &terms {
                check_dim("prehistory amplitude", n, t.amplitude.len())?;
                if !t.rate.is_finite() || t.amplitude.iter().any(|a| !a.is_finite()) {
                    return Err(invalid("phi", "rates and amplitudes must be finite"));
                }
            }
        }
        Ok(Self { terms })
    }

    /// The zero history in dimension `n`.
    pub fn zero(n: usize) -> Self {
        Self {
            terms: vec![ExpTerm {
                rate: 0.0,
                amplitude: vec![0.0; n],
            }],
        }
    }

    /// Constant history.
    pub fn constant(value: &DVector<f64>) -> Self {
        Self {
            terms: vec![ExpTerm {
                rate: 0.0,
                amplitude: value.iter().copied().collect(),
            }],
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn dimension(&self) -> Option<usize> {
        self.terms.first().map(|t| t.amplitude.len())
    }

    pub fn eval(&self, theta: f64, n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        for t in &self.terms {
            let w = (t.rate * theta).exp();
            for (vi, a) in v.iter_mut().zip(&t.amplitude) {
                *vi += w * a;
            }
        }
        v
    }

    /// `∫_{-inf}^0 e^{rate tau} phi(tau) d tau` in closed form.
    pub fn moment(&self, rate: f64, n: usize) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(n);
        for t in &self.terms {
            let denom = rate + t.rate;
            if !(denom > 0.0) {
                return Err(invalid(
                    "phi",
                    format!("history term with rate {} is not integrable against e^({rate} s)", t.rate),
                ));
            }
            for (vi, a) in v.iter_mut().zip(&t.amplitude) {
                *vi += a / denom;
            }
        }
        Ok(v)
    }

    /// Scales every amplitude.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    rate: t.rate,
                    amplitude: t.amplitude.iter().map(|a| a * factor).collect(),
                })
                .collect(),
        }
    }

    /// Pointwise sum of two histories.
    pub fn plus(&self, other: &Prehistory) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    /// Samples at `tau_k = -k h`, `k = 0..=steps`.
    pub fn sample(&self, n: usize, phase: &PhaseSpaceSpec) -> SampledPrehistory {
        let step = phase.prehistory_step();
        let values = (0..=phase.prehistory_steps())
            .map(|k| self.eval(-(k as f64) * step, n))
            .collect();
        SampledPrehistory {
            analytic: self.clone(),
            step,
            horizon: phase.truncation_horizon(),
            values,
        }
    }
}

/// A prehistory sampled on the anchored grid `tau_k = -k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPrehistory {
    analytic: Prehistory,
    step: f64,
    horizon: f64,
    values: Vec<DVector<f64>>,
}

impl SampledPrehistory {
    pub fn analytic(&self) -> &Prehistory {
        &self.analytic
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn at_zero(&self) -> &DVector<f64> {
        &self.values[0]
    }
}

/// Strictly increasing times `0 = s_0 < ... < s_M = b` with marked impulse nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    impulse: Vec<bool>,
    impulse_nodes: Vec<usize>,
}

impl TimeGrid {
    /// Every entry of `impulse_times` must already be a node.
    pub fn new(times: Vec<f64>, impulse_times: &[f64]) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::BadGrid);
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::BadGrid);
        }
        let mut impulse = vec![false; times.len()];
        let mut impulse_nodes = Vec::with_capacity(impulse_times.len());
        for &ti in impulse_times {
            let j = exact_index(&times, ti).ok_or(Error::OffGrid { t: ti })?;
            if j == 0 {
                return Err(invalid("impulse time", "impulses must lie strictly after 0"));
            }
            impulse[j] = true;
            impulse_nodes.push(j);
        }
        impulse_nodes.sort_unstable();
        impulse_nodes.dedup();
        Ok(Self {
            times,
            impulse,
            impulse_nodes,
        })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::BadGrid);
        }
        let times = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
        Self::new(times, &[])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn is_impulse(&self, j: usize) -> bool {
        self.impulse[j]
    }

    pub fn impulse_nodes(&self) -> &[usize] {
        &self.impulse_nodes
    }

    /// Node index of `t`; off-grid times are an error.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        exact_index(&self.times, t).ok_or(Error::OffGrid { t })
    }
}

fn exact_index(times: &[f64], t: f64) -> Option<usize> {
    let scale = times.last().copied().unwrap_or(1.0).abs().max(1.0);
    let k = times.partition_point(|&s| s < t);
    [k.wrapping_sub(1), k]
        .into_iter()
        .filter(|&j| j < times.len())
        .find(|&j| (times[j] - t).abs() <= 1e-12 * scale)
}

/// Which limit a segment anchored at a jump node uses at `theta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A càdlàg path on a [`TimeGrid`] together with its prehistory.
///
/// `values[j]` is the right limit at node `j`; `left_limits[j]` is present
/// where the path jumps.
pub struct HistoryPath {
    prehistory: Arc<SampledPrehistory>,
    grid: Arc<TimeGrid>,
    values: Vec<DVector<f64>>,
    left_limits: Vec<Option<DVector<f64>>>,
    dimension: usize,
    truncation_horizon: f64,
    moments: Mutex<Vec<(u64, Arc<Vec<DVector<f64>>>)>>,
}

impl std::fmt::Debug for HistoryPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HistoryPath")
            .field("times", &self.grid.times())
            .field("values", &self.values)
            .field("left_limits", &self.left_limits)
            .finish()
    }
}

impl Clone for HistoryPath {
    fn clone(&self) -> Self {
        Self {
            prehistory: self.prehistory.clone(),
            grid: self.grid.clone(),
            values: self.values.clone(),
            left_limits: self.left_limits.clone(),
            dimension: self.dimension,
            truncation_horizon: self.truncation_horizon,
            moments: Mutex::new(Vec::new()),
        }
    }
}

impl PartialEq for HistoryPath {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.values == other.values
            && self.left_limits == other.left_limits
            && self.prehistory == other.prehistory
    }
}

impl HistoryPath {
    pub fn new(
        prehistory: Arc<SampledPrehistory>,
        grid: Arc<TimeGrid>,
        values: Vec<DVector<f64>>,
        left_limits: Vec<Option<DVector<f64>>>,
    ) -> Result<Self> {
        check_dim("path values", grid.len(), values.len())?;
        check_dim("path left limits", grid.len(), left_limits.len())?;
        let dimension = prehistory.at_zero().len();
        for v in values.iter().chain(left_limits.iter().flatten()) {
            check_dim("path state", dimension, v.len())?;
        }
        if left_limits[0].is_some() {
            return Err(invalid("left_limits", "the path cannot jump at t = 0"));
        }
        let truncation_horizon = prehistory.horizon;
        Ok(Self {
            prehistory,
            grid,
            values,
            left_limits,
            dimension,
            truncation_horizon,
            moments: Mutex::new(Vec::new()),
        })
    }

    /// Continuous path without jumps.
    pub fn continuous(
        prehistory: Arc<SampledPrehistory>,
        grid: Arc<TimeGrid>,
        values: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let n = values.len();
        Self::new(prehistory, grid, values, vec![None; n])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn prehistory(&self) -> &Arc<SampledPrehistory> {
        &self.prehistory
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn left_limits(&self) -> &[Option<DVector<f64>>] {
        &self.left_limits
    }

    pub fn value(&self, j: usize) -> &DVector<f64> {
        &self.values[j]
    }

    /// Left limit at node `j` (equal to the value where there is no jump).
    pub fn left_value(&self, j: usize) -> &DVector<f64> {
        self.left_limits[j].as_ref().unwrap_or(&self.values[j])
    }

    pub fn jump_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.left_limits
            .iter()
            .enumerate()
            .filter_map(|(j, l)| l.as_ref().map(|_| j))
    }

    /// Segment `x_t` anchored at grid time `t`, using the right limit there.
    pub fn segment(&self, t: f64) -> Result<HistorySegment<'_>> {
        Ok(self.segment_at(self.grid.index_of(t)?, Side::Right))
    }

    pub fn segment_at(&self, index: usize, side: Side) -> HistorySegment<'_> {
        assert!(index < self.values.len(), "segment index out of range");
        HistorySegment {
            path: self,
            index,
            side,
            shift: None,
        }
    }

    /// `Q_j = ∫_0^{t_j} e^{rate (s - t_j)} x(s) ds` by the trapezoid rule,
    /// cached per rate.
    pub fn path_moments(&self, rate: f64) -> Arc<Vec<DVector<f64>>> {
        let key = rate.to_bits();
        let mut cache = self.moments.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, m)) = cache.iter().find(|(k, _)| *k == key) {
            return m.clone();
        }
        let times = self.grid.times();
        let mut out = Vec::with_capacity(times.len());
        let mut acc = DVector::zeros(self.dimension);
        out.push(acc.clone());
        for j in 1..times.len() {
            let h = times[j] - times[j - 1];
            let decay = (-rate * h).exp();
            acc *= decay;
            acc.axpy(0.5 * h * decay, &self.values[j - 1], 1.0);
            acc.axpy(0.5 * h, self.left_value(j), 1.0);
            out.push(acc.clone());
        }
        let out = Arc::new(out);
        cache.push((key, out.clone()));
        out
    }

    /// `sup_{0 <= s <= t_j} |x(s)|^2` over nodes and left limits, for each `j`.
    pub fn running_sup_sq(&self) -> Vec<f64> {
        let mut best = 0.0f64;
        (0..self.values.len())
            .map(|j| {
                best = best
                    .max(self.values[j].norm_squared())
                    .max(self.left_value(j).norm_squared());
                best
            })
            .collect()
    }
}

/// View of the history segment `x_t` of a path, optionally shifted by a
/// constant vector (`x_t + c`).
#[derive(Debug, Clone)]
pub struct HistorySegment<'a> {
    path: &'a HistoryPath,
    index: usize,
    side: Side,
    shift: Option<DVector<f64>>,
}

impl<'a> HistorySegment<'a> {
    pub fn path(&self) -> &'a HistoryPath {
        self.path
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn anchor_time(&self) -> f64 {
        self.path.times()[self.index]
    }

    pub fn dimension(&self) -> usize {
        self.path.dimension
    }

    /// The same segment with `c` added at every `theta`.
    pub fn shifted(&self, c: &DVector<f64>) -> HistorySegment<'a> {
        let shift = match &self.shift {
            Some(s) => s + c,
            None => c.clone(),
        };
        HistorySegment {
            shift: Some(shift),
            ..self.clone()
        }
    }

    pub fn shift(&self) -> Option<&DVector<f64>> {
        self.shift.as_ref()
    }

    /// `psi(0)`.
    pub fn at_zero(&self) -> DVector<f64> {
        let raw = match self.side {
            Side::Right => self.path.value(self.index),
            Side::Left => self.path.left_value(self.index),
        };
        match &self.shift {
            Some(c) => raw + c,
            None => raw.clone(),
        }
    }

    /// Visits `(theta, psi(theta))` for decreasing `theta` down to `-T_h`.
    /// Both one-sided values are visited at interior jumps.
    pub fn for_each_sample<F: FnMut(f64, &DVector<f64>)>(&self, mut f: F) {
        let mut emit = |theta: f64, v: &DVector<f64>| match &self.shift {
            Some(c) => f(theta, &(v + c)),
            None => f(theta, v),
        };
        let path = self.path;
        let times = path.times();
        let t = times[self.index];
        let horizon = path.truncation_horizon;
        for j in (0..=self.index).rev() {
            let theta = times[j] - t;
            if theta < -horizon {
                return;
            }
            if j < self.index || self.side == Side::Right {
                emit(theta, &path.values[j]);
            }
            if let Some(l) = &path.left_limits[j] {
                emit(theta, l);
            }
        }
        let pre = &path.prehistory;
        for (k, v) in pre.values.iter().enumerate() {
            let theta = -(k as f64) * pre.step - t;
            if theta < -horizon - 1e-12 * horizon {
                break;
            }
            emit(theta, v);
        }
    }

    /// Sample abscissae in visiting order.
    pub fn thetas(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_sample(|theta, _| out.push(theta));
        out
    }

    /// `∫_{-inf}^0 e^{rate theta} psi(theta) d theta`, `rate > 0`.
    ///
    /// Closed form on the prehistory, trapezoid rule on the path part.
    pub fn exp_moment(&self, rate: f64) -> Result<DVector<f64>> {
        if !(rate > 0.0) {
            return Err(invalid("rate", "delay weight rate must be positive"));
        }
        let t = self.anchor_time();
        let n = self.dimension();
        let mut out = self.path.path_moments(rate)[self.index].clone();
        let pre = self.path.prehistory.analytic.moment(rate, n)?;
        out.axpy((-rate * t).exp(), &pre, 1.0);
        if let Some(c) = &self.shift {
            out.axpy(1.0 / rate, c, 1.0);
        }
        Ok(out)
    }

    /// `∫_{-T_h}^0 e^{rate theta} F(psi(theta)) d theta` by the trapezoid
    /// rule on the segment samples.
    pub fn weighted_integral<F>(&self, rate: f64, mut transform: F) -> DVector<f64>
    where
        F: FnMut(&DVector<f64>) -> DVector<f64>,
    {
        let mut acc: Option<DVector<f64>> = None;
        let mut prev: Option<(f64, DVector<f64>)> = None;
        self.for_each_sample(|theta, v| {
            let cur = transform(v) * (rate * theta).exp();
            if let Some((p_theta, p_val)) = &prev {
                let h = p_theta - theta;
                if h > 0.0 {
                    let a = acc.get_or_insert_with(|| DVector::zeros(cur.len()));
                    a.axpy(0.5 * h, p_val, 1.0);
                    a.axpy(0.5 * h, &cur, 1.0);
                }
            }
            prev = Some((theta, cur));
        });
        acc.unwrap_or_else(|| DVector::zeros(self.dimension()))
    }
}

/// `||psi||_B` for magnitudes `|psi(theta)|` given in decreasing-`theta` order.
///
/// The running maximum from the right is integrated against `rho` panel by
/// panel (exact weight mass, trapezoid in the running maximum); the part
/// before the last sample contributes `runmax * ∫_{-inf}^{theta_last} rho`.
pub fn b_norm_profile<I>(samples: I, spec: &PhaseSpaceSpec) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let rho = spec.rho();
    let mut total = 0.0;
    let mut runmax = 0.0f64;
    let mut last: Option<(f64, f64)> = None;
    for (theta, mag) in samples {
        let new_max = runmax.max(mag);
        if let Some((p_theta, p_max)) = last {
            if p_theta > theta {
                total += rho.mass_between(theta, p_theta) * 0.5 * (p_max + new_max);
            }
        }
        runmax = new_max;
        last = Some((theta, runmax));
    }
    if let Some((theta, m)) = last {
        total += m * rho.tail(theta);
    }
    total
}

/// `||x_t||_B` for a single (deterministic) segment.
pub fn b_norm(seg: &HistorySegment<'_>, spec: &PhaseSpaceSpec) -> f64 {
    let mut samples = Vec::new();
    seg.for_each_sample(|theta, v| samples.push((theta, v.norm())));
    b_norm_profile(samples, spec)
}

/// Monte Carlo B-norm: the root-mean-square magnitude across segments on a
/// common grid replaces `|psi(theta)|`.
pub fn b_norm_rms(segs: &[HistorySegment<'_>], spec: &PhaseSpaceSpec) -> Result<f64> {
    let Some(first) = segs.first() else {
        return Err(invalid("segments", "need at least one segment"));
    };
    let thetas = first.thetas();
    let mut sq = vec![0.0; thetas.len()];
    for seg in segs {
        let mut k = 0;
        let mut mismatch = false;
        seg.for_each_sample(|theta, v| {
            if k < sq.len() && theta == thetas[k] {
                sq[k] += v.norm_squared();
            } else {
                mismatch = true;
            }
            k += 1;
        });
        if mismatch || k != sq.len() {
            return Err(invalid("segments", "segments must share one sample grid"));
        }
    }
    let count = segs.len() as f64;
    Ok(b_norm_profile(
        thetas.into_iter().zip(sq.into_iter().map(|s| (s / count).sqrt())),
        spec,
    ))
}

/// `N_b ||phi||_B + Gamma_b sup_{0 <= s <= t} |x(s)|`.
pub fn history_norm_bound(n_b: f64, gamma_b: f64, norm_phi: f64, sup_path: f64) -> f64 {
    n_b * norm_phi + gamma_b * sup_path
}
