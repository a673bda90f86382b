//! Mild-solution map on a time grid and its successive approximations.
//!
//! Kernels `S_q`, `T_q` and `∫_0^t S_q` are tabulated once per solver on the
//! set of node differences `t_n - s_j`. Deterministic integrals use the
//! composite trapezoid rule over the nodes; the stochastic integral uses
//! left-endpoint Itô sums.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::mittag::{ml_scalar, MLOrder};
use crate::noise::{sample_path_indexed, QWienerPath};
use crate::phase_space::{HistoryPath, SampledPrehistory, Side, TimeGrid};
use crate::problem::ProblemSpec;

/// How the time grid is built from `[0, b]` and the impulse times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub base_steps: usize,
    /// Also insert the midpoint between each impulse time and the next node.
    pub refined: bool,
}

impl GridSpec {
    pub fn new(horizon: f64, base_steps: usize) -> Self {
        Self {
            horizon,
            base_steps,
            refined: false,
        }
    }

    pub fn refined(mut self, refined: bool) -> Self {
        self.refined = refined;
        self
    }

    /// Uniform nodes `k b / base_steps` with every impulse time inserted
    /// (or substituted for a node it coincides with).
    pub fn build(&self, impulse_times: &[f64]) -> Result<TimeGrid> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.base_steps == 0 {
            return Err(Error::BadGrid);
        }
        let h = self.horizon / self.base_steps as f64;
        let snap = 1e-12 * self.horizon.max(1.0);
        let mut times: Vec<f64> = (0..=self.base_steps).map(|k| k as f64 * h).collect();
        times[self.base_steps] = self.horizon;
        for &ti in impulse_times {
            if !(ti > 0.0 && ti < self.horizon) {
                return Err(invalid("impulse time", format!("{ti} is outside (0, b)")));
            }
            let k = times.partition_point(|&s| s < ti);
            if (times[k] - ti).abs() <= snap {
                times[k] = ti;
            } else if k > 0 && (ti - times[k - 1]).abs() <= snap {
                times[k - 1] = ti;
            } else {
                times.insert(k, ti);
            }
            if self.refined {
                let j = times.partition_point(|&s| s <= ti);
                let mid = 0.5 * (ti + times[j]);
                times.insert(j, mid);
            }
        }
        TimeGrid::new(times, impulse_times)
    }
}

/// Kernel values per eigenvalue on every node difference `t_n - s_j`, `j <= n`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    dimension: usize,
    nodes: usize,
    /// Flattened lower triangle: entry `n (n + 1) / 2 + j` indexes `t_n - s_j`.
    index: Vec<u32>,
    s: Vec<f64>,
    t: Vec<f64>,
    sint: Vec<f64>,
    differences: usize,
}

impl KernelTable {
    pub fn new(eigenvalues: &[f64], q: f64, grid: &TimeGrid) -> Result<Self> {
        let times = grid.times();
        let nodes = times.len();
        let mut keys: HashMap<i64, u32> = HashMap::new();
        let mut diffs: Vec<f64> = Vec::new();
        let mut index = Vec::with_capacity(nodes * (nodes + 1) / 2);
        for n in 0..nodes {
            for j in 0..=n {
                let d = if j == n { 0.0 } else { times[n] - times[j] };
                let key = (d * 68_719_476_736.0).round() as i64; // 2^36
                let id = *keys.entry(key).or_insert_with(|| {
                    diffs.push(d);
                    (diffs.len() - 1) as u32
                });
                index.push(id);
            }
        }
        let s_order = MLOrder::new(q, 1.0)?;
        let t_order = MLOrder::new(q, q)?;
        let i_order = MLOrder::new(q, 2.0)?;
        let dim = eigenvalues.len();
        let rows: Vec<Vec<(f64, f64, f64)>> = diffs
            .par_iter()
            .map(|&d| {
                let dq = d.powf(q);
                eigenvalues
                    .iter()
                    .map(|&lambda| {
                        let z = lambda * dq;
                        let s = ml_scalar(s_order, z)?;
                        let t = if d == 0.0 {
                            if q > 1.0 {
                                0.0
                            } else {
                                return Err(invalid("q", "T_q(0) is unbounded for q <= 1"));
                            }
                        } else {
                            d.powf(q - 1.0) * ml_scalar(t_order, z)?
                        };
                        let si = d * ml_scalar(i_order, z)?;
                        Ok((s, t, si))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = Vec::with_capacity(diffs.len() * dim);
        let mut t = Vec::with_capacity(diffs.len() * dim);
        let mut sint = Vec::with_capacity(diffs.len() * dim);
        for row in rows {
            for (a, b, c) in row {
                s.push(a);
                t.push(b);
                sint.push(c);
            }
        }
        Ok(Self {
            dimension: dim,
            nodes,
            index,
            s,
            t,
            sint,
            differences: diffs.len(),
        })
    }

    /// Number of distinct differences tabulated.
    pub fn differences(&self) -> usize {
        self.differences
    }

    fn slot(&self, n: usize, j: usize) -> usize {
        debug_assert!(j <= n && n < self.nodes);
        self.index[n * (n + 1) / 2 + j] as usize * self.dimension
    }

    /// `E_{q,1}(lambda_k (t_n - s_j)^q)` for every eigenvalue.
    pub fn s(&self, n: usize, j: usize) -> &[f64] {
        let o = self.slot(n, j);
        &self.s[o..o + self.dimension]
    }

    /// `(t_n - s_j)^{q-1} E_{q,q}(lambda_k (t_n - s_j)^q)`.
    pub fn t(&self, n: usize, j: usize) -> &[f64] {
        let o = self.slot(n, j);
        &self.t[o..o + self.dimension]
    }

    /// `(t_n - s_j) E_{q,2}(lambda_k (t_n - s_j)^q)`.
    pub fn sint(&self, n: usize, j: usize) -> &[f64] {
        let o = self.slot(n, j);
        &self.sint[o..o + self.dimension]
    }
}

/// Solved path on the grid; node values are right limits and left limits are
/// stored at impulse nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    path: HistoryPath,
}

impl Trajectory {
    pub fn from_path(path: HistoryPath) -> Self {
        Self { path }
    }

    pub fn path(&self) -> &HistoryPath {
        &self.path
    }

    pub fn into_path(self) -> HistoryPath {
        self.path
    }

    pub fn times(&self) -> &[f64] {
        self.path.times()
    }

    pub fn values(&self) -> &[DVector<f64>] {
        self.path.values()
    }

    pub fn left_limits(&self) -> &[Option<DVector<f64>>] {
        self.path.left_limits()
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.path.grid()
    }

    /// `sup_t |x(t)|^2` over node values and left limits.
    pub fn sup_norm_sq(&self) -> f64 {
        self.values()
            .iter()
            .chain(self.left_limits().iter().flatten())
            .map(|v| v.norm_squared())
            .fold(0.0, f64::max)
    }

    /// Comma-separated table: `t, x_1..x_N, is_impulse, left_1..left_N`
    /// (left-limit columns empty away from impulse nodes).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.path.dimension();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.push("is_impulse".into());
        header.extend((1..=n).map(|k| format!("left{k}")));
        writeln!(w, "{}", header.join(","))?;
        let grid = self.grid();
        for (j, t) in self.times().iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            row.extend(self.values()[j].iter().map(|x| fmt_f64(*x)));
            let imp = grid.is_impulse(j);
            row.push(if imp { "1".into() } else { "0".into() });
            match (&self.left_limits()[j], imp) {
                (Some(l), _) => row.extend(l.iter().map(|x| fmt_f64(*x))),
                (None, true) => row.extend(self.values()[j].iter().map(|x| fmt_f64(*x))),
                (None, false) => row.extend((0..n).map(|_| String::new())),
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Seventeen significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `sup_j |a(s_j) - b(s_j)|^2`, including left limits.
pub fn iterate_diff(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times() != b.times() {
        return Err(Error::BadGrid);
    }
    let mut worst = 0.0f64;
    for j in 0..a.times().len() {
        check_dim("trajectory state", a.values()[j].len(), b.values()[j].len())?;
        worst = worst.max((&a.values()[j] - &b.values()[j]).norm_squared());
        if a.left_limits()[j].is_some() || b.left_limits()[j].is_some() {
            worst = worst.max((a.path().left_value(j) - b.path().left_value(j)).norm_squared());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardDiagnostics {
    /// Number of applications of the mild map.
    pub iterations: usize,
    /// `diffs[k] = sup |x^{k+1} - x^k|^2`.
    pub diffs: Vec<f64>,
    pub converged: bool,
    pub tolerance_used: f64,
}

/// A problem bound to a grid, with its kernel table.
#[derive(Debug, Clone)]
pub struct Solver {
    spec: ProblemSpec,
    grid: Arc<TimeGrid>,
    kernels: Arc<KernelTable>,
    prehistory: Arc<SampledPrehistory>,
    impulse_nodes: Vec<usize>,
}

impl Solver {
    pub fn new(spec: &ProblemSpec, grid: &GridSpec) -> Result<Self> {
        spec.validate()?;
        if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
            return Err(invalid(
                "grid.horizon",
                format!("grid horizon {} differs from the problem horizon {}", grid.horizon, spec.horizon),
            ));
        }
        let grid = Arc::new(grid.build(&spec.impulse_times())?);
        let kernels = Arc::new(KernelTable::new(spec.operator.eigenvalues(), spec.q(), &grid)?);
        Self::assemble(spec.clone(), grid, kernels)
    }

    fn assemble(spec: ProblemSpec, grid: Arc<TimeGrid>, kernels: Arc<KernelTable>) -> Result<Self> {
        let prehistory = Arc::new(spec.phi.sample(spec.dimension(), &spec.phase));
        let impulse_nodes = spec
            .impulses
            .iter()
            .map(|imp| grid.index_of(imp.time))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            grid,
            kernels,
            prehistory,
            impulse_nodes,
        })
    }

    /// Same operator, coefficients and grid with different initial data; the
    /// kernel table is shared.
    pub fn with_initial(&self, phi: crate::phase_space::Prehistory, x1: DVector<f64>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.phi = phi;
        spec.x1 = x1;
        spec.validate()?;
        Self::assemble(spec, self.grid.clone(), self.kernels.clone())
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn kernels(&self) -> &KernelTable {
        &self.kernels
    }

    pub fn prehistory(&self) -> &Arc<SampledPrehistory> {
        &self.prehistory
    }

    /// Noise path number `index` on this grid.
    pub fn noise_path(&self, index: u64) -> Result<QWienerPath> {
        sample_path_indexed(&self.spec.noise, self.grid.times(), index)
    }

    fn check_noise(&self, noise: &QWienerPath) -> Result<()> {
        if noise.times() != self.grid.times() {
            return Err(invalid("noise", "noise path is not sampled on the solver grid"));
        }
        check_dim("noise modes", self.spec.noise.modes(), noise.modes())
    }

    fn to_path(&self, values: Vec<DVector<f64>>, left: Vec<Option<DVector<f64>>>) -> Result<Trajectory> {
        Ok(Trajectory::from_path(HistoryPath::new(
            self.prehistory.clone(),
            self.grid.clone(),
            values,
            left,
        )?))
    }

    /// `S_q(t) phi(0) + ∫_0^t S_q(s) ds [x1 - g(0, phi)]`.
    pub fn initial_iterate(&self) -> Result<Trajectory> {
        let n = self.spec.dimension();
        let phi0 = self.prehistory.at_zero().clone();
        let start = HistoryPath::continuous(
            self.prehistory.clone(),
            self.grid.clone(),
            vec![phi0.clone(); self.grid.len()],
        )?;
        let g0 = self.spec.coefficients.g.eval(0.0, &start.segment_at(0, Side::Right))?;
        let op = &self.spec.operator;
        let y0 = op.to_eigen(&phi0);
        let y1 = op.to_eigen(&(&self.spec.x1 - g0));
        let values = (0..self.grid.len())
            .map(|m| {
                let (s, si) = (self.kernels.s(m, 0), self.kernels.sint(m, 0));
                op.from_eigen(&DVector::from_fn(n, |k, _| s[k] * y0[k] + si[k] * y1[k]))
            })
            .collect();
        self.to_path(values, vec![None; self.grid.len()])
    }

    /// One application of the mild-solution map to `input`.
    pub fn mild_evaluate(&self, noise: &QWienerPath, input: &Trajectory) -> Result<Trajectory> {
        self.check_noise(noise)?;
        if input.times() != self.grid.times() {
            return Err(Error::BadGrid);
        }
        let spec = &self.spec;
        let op = &spec.operator;
        let coef = &spec.coefficients;
        let n = spec.dimension();
        let nodes = self.grid.len();
        let times = self.grid.times();
        let path = input.path();
        let kt = &self.kernels;

        let phi0 = self.prehistory.at_zero().clone();
        let g0 = coef.g.eval(0.0, &path.segment_at(0, Side::Right))?;
        let y0 = op.to_eigen(&phi0);
        let y1 = op.to_eigen(&(&spec.x1 - g0));

        // Trapezoid-weighted integrand values in eigen coordinates:
        // `hg[j]` multiplies S_q(t_n - s_j), `hf[j]` multiplies T_q(t_n - s_j)
        // (and also carries the Itô increment); `rg[n]`, `rf[n]` are the
        // terminal halves at s = t_n.
        let mut hg = vec![DVector::zeros(n); nodes];
        let mut hf = vec![DVector::zeros(n); nodes];
        let mut rg = vec![DVector::zeros(n); nodes];
        let mut rf = vec![DVector::zeros(n); nodes];
        let has_g = !coef.g.is_zero();
        let has_f = !coef.f.is_zero();
        let has_sigma = !coef.sigma.is_zero();
        for j in 0..nodes {
            let s = times[j];
            let right = path.segment_at(j, Side::Right);
            let left = path.segment_at(j, Side::Left);
            let jumps = path.left_limits()[j].is_some();
            let before = if j > 0 { 0.5 * (times[j] - times[j - 1]) } else { 0.0 };
            let after = if j + 1 < nodes { 0.5 * (times[j + 1] - times[j]) } else { 0.0 };
            for (active, field, h, r) in [
                (has_g, &coef.g, &mut hg[j], &mut rg[j]),
                (has_f, &coef.f, &mut hf[j], &mut rf[j]),
            ] {
                if !active {
                    continue;
                }
                let vr = op.to_eigen(&field.eval(s, &right)?);
                let vl = if jumps { op.to_eigen(&field.eval(s, &left)?) } else { vr.clone() };
                h.axpy(before, &vl, 0.0);
                h.axpy(after, &vr, 1.0);
                r.axpy(before, &vl, 0.0);
            }
            if has_sigma && j + 1 < nodes {
                let sig = coef.sigma.eval(s, &right, noise.modes())?;
                let xi = op.to_eigen(&(sig * noise.increment(j)));
                hf[j] += xi;
            }
        }

        // Impulse contributions from the pre-impulse segments.
        let mut jumps_i = Vec::with_capacity(spec.impulses.len());
        let mut jumps_j = Vec::with_capacity(spec.impulses.len());
        for (imp, &node) in spec.impulses.iter().zip(&self.impulse_nodes) {
            let seg = path.segment_at(node, Side::Left);
            let ii = imp.jump_i.eval(&seg)?;
            let mut jj = imp.jump_j.eval(&seg)?;
            if has_g {
                let t = times[node];
                jj -= coef.g.eval(t, &seg.shifted(&ii))?;
                jj += coef.g.eval(t, &seg)?;
            }
            jumps_i.push(op.to_eigen(&ii));
            jumps_j.push(op.to_eigen(&jj));
        }

        let mut values = Vec::with_capacity(nodes);
        let mut left = vec![None; nodes];
        let mut acc = vec![0.0; n];
        for m in 0..nodes {
            let (s0, i0) = (kt.s(m, 0), kt.sint(m, 0));
            for k in 0..n {
                acc[k] = s0[k] * y0[k] + i0[k] * y1[k];
            }
            for j in 0..m {
                let (s, t) = (kt.s(m, j), kt.t(m, j));
                let (g, f) = (&hg[j], &hf[j]);
                for k in 0..n {
                    acc[k] += s[k] * g[k] + t[k] * f[k];
                }
            }
            let (s, t) = (kt.s(m, m), kt.t(m, m));
            for k in 0..n {
                acc[k] += s[k] * rg[m][k] + t[k] * rf[m][k];
            }
            let mut at_node = None;
            for (i, &node) in self.impulse_nodes.iter().enumerate() {
                if node > m {
                    break;
                }
                let (s, si) = (kt.s(m, node), kt.sint(m, node));
                for k in 0..n {
                    acc[k] += si[k] * jumps_j[i][k];
                    if node < m {
                        acc[k] += s[k] * jumps_i[i][k];
                    }
                }
                if node == m {
                    at_node = Some(i);
                }
            }
            let mut y = DVector::from_column_slice(&acc);
            if let Some(i) = at_node {
                left[m] = Some(op.from_eigen(&y));
                let s = kt.s(m, m);
                for k in 0..n {
                    y[k] += s[k] * jumps_i[i][k];
                }
            }
            values.push(op.from_eigen(&y));
        }
        self.to_path(values, left)
    }

    /// Successive approximations from [`Solver::initial_iterate`] with the
    /// same noise path in every iteration.
    pub fn picard_solve(&self, noise: &QWienerPath, config: &PicardConfig) -> Result<(Trajectory, PicardDiagnostics)> {
        if !(config.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        self.check_noise(noise)?;
        let mut current = self.initial_iterate()?;
        let mut diffs = Vec::new();
        let mut converged = false;
        while diffs.len() < config.max_iterations {
            let next = self.mild_evaluate(noise, &current)?;
            let d = iterate_diff(&next, &current)?;
            diffs.push(d);
            current = next;
            if d <= config.tolerance {
                converged = true;
                break;
            }
            if !d.is_finite() {
                break;
            }
        }
        Ok((
            current,
            PicardDiagnostics {
                iterations: diffs.len(),
                diffs,
                converged,
                tolerance_used: config.tolerance,
            },
        ))
    }

    /// Independent solves for noise paths `first..first + count`, in parallel;
    /// results are in path order.
    pub fn solve_paths(
        &self,
        first: u64,
        count: usize,
        config: &PicardConfig,
    ) -> Result<Vec<(Trajectory, PicardDiagnostics)>> {
        (0..count as u64)
            .into_par_iter()
            .map(|k| {
                let noise = self.noise_path(first + k)?;
                self.picard_solve(&noise, config)
            })
            .collect()
    }
}

/// Builds a solver and applies the mild map once.
pub fn mild_evaluate(spec: &ProblemSpec, grid: &GridSpec, noise: &QWienerPath, input: &Trajectory) -> Result<Trajectory> {
    Solver::new(spec, grid)?.mild_evaluate(noise, input)
}

/// Builds a solver and runs the successive approximations.
pub fn picard_solve(
    spec: &ProblemSpec,
    grid: &GridSpec,
    noise: &QWienerPath,
    config: &PicardConfig,
) -> Result<(Trajectory, PicardDiagnostics)> {
    Solver::new(spec, grid)?.picard_solve(noise, config)
}
