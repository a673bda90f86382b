//! Bihari-type bounds and the paired mean-square stability experiment.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::phase_space::{b_norm, HistoryPath, Prehistory, Side, TimeGrid};
use crate::problem::{check_existence_condition, check_stability_condition, ConditionReport, Kappa, ProblemSpec};
use crate::solver::{fmt_f64, iterate_diff, GridSpec, PicardConfig, Solver};

/// `u0`, samples of `v` on `times`, and the modulus `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct BihariInput {
    pub u0: f64,
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa: Kappa,
}

impl BihariInput {
    fn validate(&self) -> Result<()> {
        if !(self.u0 >= 0.0) {
            return Err(invalid("u0", format!("must be nonnegative, got {}", self.u0)));
        }
        if self.times.len() != self.v.len() || self.times.is_empty() {
            return Err(invalid("v", "need one sample of v per time"));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::BadGrid);
        }
        self.kappa.validate()
    }

    /// `∫_{t_0}^t v` by the trapezoid rule, linear inside a panel.
    pub fn integral_to(&self, t: f64) -> f64 {
        let (ts, vs) = (&self.times, &self.v);
        let mut acc = 0.0;
        for k in 1..ts.len() {
            if ts[k - 1] >= t {
                break;
            }
            let hi = ts[k].min(t);
            let frac = (hi - ts[k - 1]) / (ts[k] - ts[k - 1]);
            let v_hi = vs[k - 1] + frac * (vs[k] - vs[k - 1]);
            acc += 0.5 * (hi - ts[k - 1]) * (vs[k - 1] + v_hi);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BihariResult {
    Finite(f64),
    /// `G(u0) + ∫ v` left the range of `G`.
    Unbounded,
}

impl BihariResult {
    pub fn value(&self) -> f64 {
        match self {
            BihariResult::Finite(v) => *v,
            BihariResult::Unbounded => f64::INFINITY,
        }
    }
}

/// `G^{-1}(G(u0) + ∫_0^t v)`.
pub fn bihari_bound(input: &BihariInput, t: f64) -> Result<BihariResult> {
    input.validate()?;
    let y = input.kappa.g(input.u0) + input.integral_to(t);
    Ok(match input.kappa.g_inv(y) {
        Some(u) if u.is_finite() => BihariResult::Finite(u),
        _ => BihariResult::Unbounded,
    })
}

/// Smallest grid time `t1 < T` with `∫_{t1}^T v <= ∫_{u0}^{eps} ds / kappa(s)`.
pub fn epsilon_time(kappa: &Kappa, epsilon: f64, u0: f64, times: &[f64], v: &[f64]) -> Result<Option<f64>> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    if !(u0 >= 0.0 && u0 <= epsilon) {
        return Err(invalid("u0", "must lie in [0, epsilon]"));
    }
    if times.len() != v.len() || times.len() < 2 {
        return Err(invalid("v", "need one sample of v per time"));
    }
    kappa.validate()?;
    let budget = kappa.g(epsilon) - kappa.g(u0);
    let last = times.len() - 1;
    let mut tail = vec![0.0; times.len()];
    for k in (0..last).rev() {
        tail[k] = tail[k + 1] + 0.5 * (times[k + 1] - times[k]) * (v[k] + v[k + 1]);
    }
    Ok((0..last).find(|&k| tail[k] <= budget).map(|k| times[k]))
}

/// Perturbation of the initial data `(phi, x1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub dphi: Prehistory,
    pub dx1: DVector<f64>,
}

impl Perturbation {
    pub fn zero(n: usize) -> Self {
        Self {
            dphi: Prehistory::zero(n),
            dx1: DVector::zeros(n),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dphi: self.dphi.scaled(factor),
            dx1: &self.dx1 * factor,
        }
    }

    fn is_zero(&self) -> bool {
        self.dx1.iter().all(|x| *x == 0.0)
            && self.dphi.terms().iter().all(|t| t.amplitude.iter().all(|a| *a == 0.0))
    }

    /// `||dphi||_B^2 + |dx1|^2`.
    pub fn delta(&self, spec: &ProblemSpec) -> Result<f64> {
        let n = spec.dimension();
        let pre = std::sync::Arc::new(self.dphi.sample(n, &spec.phase));
        let grid = std::sync::Arc::new(TimeGrid::new(vec![0.0, spec.horizon], &[])?);
        let v0 = pre.at_zero().clone();
        let path = HistoryPath::continuous(pre, grid, vec![v0.clone(), v0])?;
        let norm = b_norm(&path.segment_at(0, Side::Right), &spec.phase);
        Ok(norm * norm + self.dx1.norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub delta: f64,
    /// Monte Carlo mean of `sup_t |x(t) - y(t)|^2`.
    pub estimate: f64,
    pub standard_error: f64,
    pub paths: usize,
    /// Stability condition, absent when no `K1` is available.
    pub condition: Option<ConditionReport>,
    /// Existence and stability conditions hold and `K1` is present.
    pub guarantee_applies: bool,
    /// Solves (either member of a pair) that did not meet the tolerance.
    pub unconverged: usize,
}

/// Mean and standard error of `samples`, summed in order.
pub fn mean_and_standard_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Paired experiment driver: base solves are computed once and reused for
/// every perturbation.
pub struct StabilityExperiment {
    base: Solver,
    config: PicardConfig,
    paths: usize,
    base_runs: Vec<(crate::solver::Trajectory, bool)>,
    condition: Option<ConditionReport>,
    guarantee_applies: bool,
}

impl StabilityExperiment {
    pub fn new(spec: &ProblemSpec, grid: &GridSpec, paths: usize, seed: u64, config: &PicardConfig) -> Result<Self> {
        if paths == 0 {
            return Err(invalid("paths", "need at least one path"));
        }
        let mut spec = spec.clone();
        spec.noise = spec.noise.clone().with_seed(seed);
        let base = Solver::new(&spec, grid)?;
        let consts = spec.resolve_constants(400)?;
        let existence = check_existence_condition(&spec, &consts);
        let condition = check_stability_condition(&spec, &consts).ok();
        let guarantee_applies = existence.satisfied && condition.as_ref().is_some_and(|c| c.satisfied);
        let base_runs = base
            .solve_paths(0, paths, config)?
            .into_iter()
            .map(|(t, d)| (t, d.converged))
            .collect();
        Ok(Self {
            base,
            config: *config,
            paths,
            base_runs,
            condition,
            guarantee_applies,
        })
    }

    pub fn solver(&self) -> &Solver {
        &self.base
    }

    pub fn run(&self, perturbation: &Perturbation) -> Result<StabilityReport> {
        let spec = self.base.spec();
        let delta = perturbation.delta(spec)?;
        let pairs: Vec<(f64, usize)> = if perturbation.is_zero() {
            self.base_runs.iter().map(|(_, c)| (0.0, usize::from(!c))).collect()
        } else {
            let phi = spec.phi.plus(&perturbation.dphi);
            let x1 = &spec.x1 + &perturbation.dx1;
            let other = self.base.with_initial(phi, x1)?;
            (0..self.paths)
                .into_par_iter()
                .map(|k| {
                    let noise = other.noise_path(k as u64)?;
                    let (y, diag) = other.picard_solve(&noise, &self.config)?;
                    let (x, base_ok) = &self.base_runs[k];
                    let bad = usize::from(!base_ok) + usize::from(!diag.converged);
                    Ok((iterate_diff(x, &y)?, bad))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let samples: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let (estimate, standard_error) = mean_and_standard_error(&samples);
        Ok(StabilityReport {
            delta,
            estimate,
            standard_error,
            paths: self.paths,
            condition: self.condition.clone(),
            guarantee_applies: self.guarantee_applies,
            unconverged: pairs.iter().map(|p| p.1).sum(),
        })
    }

    /// Rescales `direction` to each requested `delta` and runs it.
    pub fn sweep(&self, direction: &Perturbation, deltas: &[f64]) -> Result<Vec<StabilityReport>> {
        let unit = direction.delta(self.base.spec())?;
        if !(unit > 0.0) {
            return Err(invalid("direction", "perturbation direction must be nonzero"));
        }
        deltas
            .iter()
            .map(|&d| {
                if !(d >= 0.0) {
                    return Err(invalid("delta", "must be nonnegative"));
                }
                self.run(&direction.scaled((d / unit).sqrt()))
            })
            .collect()
    }
}

/// Solves the base and perturbed problems on `paths` shared noise paths.
pub fn ms_stability_experiment(
    spec: &ProblemSpec,
    grid: &GridSpec,
    perturbation: &Perturbation,
    paths: usize,
    seed: u64,
    config: &PicardConfig,
) -> Result<StabilityReport> {
    StabilityExperiment::new(spec, grid, paths, seed, config)?.run(perturbation)
}

/// `delta,estimate,standard_error,paths,condition_value` table.
pub fn write_sweep_csv<W: Write>(reports: &[StabilityReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "delta,estimate,standard_error,paths,condition_value")?;
    for r in reports {
        let cond = r.condition.as_ref().map_or(String::new(), |c| fmt_f64(c.value()));
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(r.delta),
            fmt_f64(r.estimate),
            fmt_f64(r.standard_error),
            r.paths,
            cond
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag::{sq_apply, sq_integral_apply, SpectralOperator};
    use crate::noise::QWienerSpec;
    use crate::phase_space::{ExpTerm, PhaseSpaceSpec};

    fn input(kappa: Kappa, u0: f64, c: f64) -> BihariInput {
        let times: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
        BihariInput {
            u0,
            v: vec![c; times.len()],
            times,
            kappa,
        }
    }

    #[test]
    fn gronwall_and_sqrt_closed_forms() {
        let inp = input(Kappa::Linear { l: 1.0 }, 0.3, 0.7);
        let b = bihari_bound(&inp, 2.0).unwrap().value();
        assert!((b - 0.3 * (1.4f64).exp()).abs() <= 1e-12 * b);
        let inp = input(Kappa::Sqrt { l: 1.0 }, 1.0, 1.0);
        for &t in &[0.0, 0.5, 1.25, 3.0] {
            let b = bihari_bound(&inp, t).unwrap().value();
            assert!((b - (1.0 + t / 2.0).powi(2)).abs() < 1e-10);
        }
        let zero = input(Kappa::LogModulated { l: 1.0 }, 0.0, 5.0);
        assert_eq!(bihari_bound(&zero, 3.0).unwrap(), BihariResult::Finite(0.0));
        let neg = input(Kappa::Linear { l: 1.0 }, -1.0, 1.0);
        assert!(bihari_bound(&neg, 1.0).is_err());
    }

    #[test]
    fn sqrt_leaves_domain() {
        // G(0) = -2, so a negative v can push the argument below the range.
        let mut inp = input(Kappa::Sqrt { l: 1.0 }, 0.25, -1.0);
        inp.v.iter_mut().for_each(|x| *x = -1.0);
        assert_eq!(bihari_bound(&inp, 3.0).unwrap(), BihariResult::Unbounded);
    }

    #[test]
    fn epsilon_time_budget() {
        let times: Vec<f64> = (0..=3000).map(|k| k as f64 * 1e-3).collect();
        let ones = vec![1.0; times.len()];
        let t1 = epsilon_time(&Kappa::Linear { l: 1.0 }, 0.1, 0.01, &times, &ones)
            .unwrap()
            .unwrap();
        assert!((t1 - 0.698).abs() < 1e-12, "{t1}");
        let zeros = vec![0.0; times.len()];
        assert_eq!(epsilon_time(&Kappa::Linear { l: 1.0 }, 0.1, 0.1, &times, &zeros).unwrap(), Some(0.0));
        assert_eq!(epsilon_time(&Kappa::Linear { l: 1.0 }, 0.1, 0.1, &times, &ones).unwrap(), None);
        assert!(epsilon_time(&Kappa::Linear { l: 1.0 }, 0.0, 0.0, &times, &ones).is_err());
    }

    fn linear_spec() -> ProblemSpec {
        ProblemSpec::linear(
            SpectralOperator::diagonal(vec![-1.0, -3.0]).unwrap(),
            0.5,
            1.0,
            PhaseSpaceSpec::exponential(2.0).unwrap(),
            QWienerSpec::new(vec![1.0, 0.5], 0).unwrap(),
            Prehistory::new(vec![ExpTerm {
                rate: 1.0,
                amplitude: vec![1.0, -0.5],
            }])
            .unwrap(),
            DVector::from_vec(vec![0.2, 0.1]),
        )
        .unwrap()
    }

    #[test]
    fn linear_deterministic_difference_is_closed_form() {
        let spec = linear_spec();
        let grid = GridSpec::new(1.0, 20);
        let pert = Perturbation {
            dphi: Prehistory::new(vec![ExpTerm {
                rate: 2.0,
                amplitude: vec![0.1, 0.05],
            }])
            .unwrap(),
            dx1: DVector::from_vec(vec![-0.02, 0.03]),
        };
        let exp = StabilityExperiment::new(&spec, &grid, 4, 9, &PicardConfig::default()).unwrap();
        let r = exp.run(&pert).unwrap();
        let mut expected = 0.0f64;
        for &t in exp.solver().grid().times() {
            let d = sq_apply(&spec.operator, 1.5, t, &pert.dphi.eval(0.0, 2)).unwrap()
                + sq_integral_apply(&spec.operator, 1.5, t, &pert.dx1).unwrap();
            expected = expected.max(d.norm_squared());
        }
        assert!((r.estimate - expected).abs() < 1e-14 * expected);
        assert!(r.standard_error < 1e-15 * expected);
        let r2 = exp.run(&pert.scaled(2.0)).unwrap();
        assert!((r2.estimate - 4.0 * r.estimate).abs() < 1e-13 * r.estimate);
        assert_eq!(exp.run(&Perturbation::zero(2)).unwrap().estimate, 0.0);
    }

    #[test]
    fn slope_fit() {
        let x = [1e-4, 1e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|d| 3.0 * d).collect();
        assert!((loglog_slope(&x, &y) - 1.0).abs() < 1e-12);
    }
}
