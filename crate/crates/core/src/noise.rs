//! Truncated Karhunen–Loève simulation of a Q-Wiener process
//! `w(t) = sum_n sqrt(lambda_n) beta_n(t) e_n` and left-endpoint Itô sums.
//!
//! Randomness is keyed by `(seed, path index, mode, step)`: each path uses
//! its own ChaCha stream, each mode a disjoint block of that stream, and the
//! steps of a mode are drawn in order. Paths can therefore be generated in
//! any order or in parallel with identical results.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, invalid, Error, Result};

/// Words of the ChaCha stream reserved per mode.
const MODE_BLOCK: u128 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct QWienerSpec {
    q_eigenvalues: Vec<f64>,
    seed: u64,
    full_trace: Option<f64>,
}

impl QWienerSpec {
    pub fn new(q_eigenvalues: Vec<f64>, seed: u64) -> Result<Self> {
        if q_eigenvalues.is_empty() {
            return Err(invalid("q_eigenvalues", "need at least one mode"));
        }
        if q_eigenvalues.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(invalid("q_eigenvalues", "eigenvalues of Q must be finite and nonnegative"));
        }
        Ok(Self {
            q_eigenvalues,
            seed,
            full_trace: None,
        })
    }

    /// Records the trace of the untruncated covariance.
    pub fn with_full_trace(mut self, trace: f64) -> Result<Self> {
        if !(trace >= self.trace() * (1.0 - 1e-12)) || !trace.is_finite() {
            return Err(invalid("full_trace", "must be finite and at least the truncated trace"));
        }
        self.full_trace = Some(trace);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn modes(&self) -> usize {
        self.q_eigenvalues.len()
    }

    pub fn q_eigenvalues(&self) -> &[f64] {
        &self.q_eigenvalues
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn full_trace(&self) -> Option<f64> {
        self.full_trace
    }

    /// `sum_n lambda_n` over the retained modes.
    pub fn trace(&self) -> f64 {
        self.q_eigenvalues.iter().sum()
    }

    /// Trace mass dropped by the truncation, when the full trace is known.
    pub fn discarded_trace(&self) -> Option<f64> {
        self.full_trace.map(|t| (t - self.trace()).max(0.0))
    }
}

/// Increments of one sampled path; row `j` is `w(s_{j+1}) - w(s_j)` in mode
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QWienerPath {
    times: Vec<f64>,
    increments: DMatrix<f64>,
}

impl QWienerPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn increments(&self) -> &DMatrix<f64> {
        &self.increments
    }

    pub fn modes(&self) -> usize {
        self.increments.ncols()
    }

    pub fn increment(&self, j: usize) -> DVector<f64> {
        self.increments.row(j).transpose()
    }

    /// `w(s_j)`.
    pub fn value_at(&self, j: usize) -> DVector<f64> {
        let mut w = DVector::zeros(self.modes());
        for r in 0..j {
            w += self.increments.row(r).transpose();
        }
        w
    }

    /// Path with every increment set to zero (deterministic runs).
    pub fn zero(times: &[f64], modes: usize) -> Result<Self> {
        check_times(times)?;
        Ok(Self {
            times: times.to_vec(),
            increments: DMatrix::zeros(times.len() - 1, modes),
        })
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Path number 0 for `spec.seed`.
pub fn sample_path(spec: &QWienerSpec, times: &[f64]) -> Result<QWienerPath> {
    sample_path_indexed(spec, times, 0)
}

/// Path number `path_index`; independent of any other index.
pub fn sample_path_indexed(spec: &QWienerSpec, times: &[f64], path_index: u64) -> Result<QWienerPath> {
    check_times(times)?;
    let steps = times.len() - 1;
    let mut increments = DMatrix::zeros(steps, spec.modes());
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(path_index);
    for (n, &lambda) in spec.q_eigenvalues.iter().enumerate() {
        rng.set_word_pos(n as u128 * MODE_BLOCK);
        let scale = lambda.sqrt();
        for j in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            increments[(j, n)] = scale * (times[j + 1] - times[j]).sqrt() * z;
        }
    }
    Ok(QWienerPath {
        times: times.to_vec(),
        increments,
    })
}

/// `sum_{s_j < t} kernel(t, s_j) sigma(j) dw_j` with `dw_j` the increment over
/// `[s_j, s_{j+1}]`.
pub fn ito_integral<K, S>(kernel: K, mut sigma: S, path: &QWienerPath, t: f64) -> Result<DVector<f64>>
where
    K: Fn(f64, f64) -> DMatrix<f64>,
    S: FnMut(usize) -> DMatrix<f64>,
{
    let scale = path.times.last().copied().unwrap_or(1.0).max(1.0);
    let n = path
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * scale)
        .ok_or(Error::OffGrid { t })?;
    let mut acc: Option<DVector<f64>> = None;
    for j in 0..n {
        let s = sigma(j);
        check_dim("sigma columns", path.modes(), s.ncols())?;
        let v = kernel(t, path.times[j]) * (s * path.increment(j));
        match &mut acc {
            Some(a) => *a += v,
            None => acc = Some(v),
        }
    }
    match acc {
        Some(a) => Ok(a),
        None => {
            let rows = sigma(0).nrows();
            Ok(DVector::zeros(rows))
        }
    }
}

/// `||op||^2_{L_2^0} = sum_n lambda_n |op e_n|^2`.
pub fn hs_norm_sq(op: &DMatrix<f64>, spec: &QWienerSpec) -> Result<f64> {
    check_dim("operator columns (noise modes)", spec.modes(), op.ncols())?;
    Ok(op
        .column_iter()
        .zip(&spec.q_eigenvalues)
        .map(|(c, l)| l * c.norm_squared())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn zero_covariance_gives_zero_path() {
        let spec = QWienerSpec::new(vec![0.0, 0.0], 7).unwrap();
        let p = sample_path(&spec, &grid(10)).unwrap();
        assert!(p.increments().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_and_keyed() {
        let spec = QWienerSpec::new(vec![1.0, 0.5, 0.25], 42).unwrap();
        let g = grid(50);
        let a = sample_path_indexed(&spec, &g, 3).unwrap();
        let b = sample_path_indexed(&spec, &g, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_path_indexed(&spec, &g, 4).unwrap();
        assert_ne!(a, c);
        let other_seed = sample_path_indexed(&spec.clone().with_seed(43), &g, 3).unwrap();
        assert_ne!(a, other_seed);
        // Adding modes does not disturb the draws of existing modes.
        let wider = QWienerSpec::new(vec![1.0, 0.5, 0.25, 0.125], 42).unwrap();
        let d = sample_path_indexed(&wider, &g, 3).unwrap();
        assert_eq!(d.increments().columns(0, 3), a.increments().columns(0, 3));
    }

    #[test]
    fn doubling_covariance_scales_increments() {
        let g = grid(20);
        let a = sample_path(&QWienerSpec::new(vec![1.0, 0.3], 1).unwrap(), &g).unwrap();
        let b = sample_path(&QWienerSpec::new(vec![2.0, 0.6], 1).unwrap(), &g).unwrap();
        for (x, y) in a.increments().iter().zip(b.increments().iter()) {
            assert!((y - std::f64::consts::SQRT_2 * x).abs() <= 1e-15 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn ito_sum_telescopes() {
        let spec = QWienerSpec::new(vec![1.0, 1.0], 5).unwrap();
        let g = grid(16);
        let p = sample_path(&spec, &g).unwrap();
        let id = |_: f64, _: f64| DMatrix::identity(2, 2);
        let v = ito_integral(id, |_| DMatrix::identity(2, 2), &p, 1.0).unwrap();
        let w = p.value_at(16);
        assert!((v - w).amax() < 1e-14);
        let zero = ito_integral(id, |_| DMatrix::zeros(2, 2), &p, 0.5).unwrap();
        assert_eq!(zero, DVector::zeros(2));
        assert!(ito_integral(id, |_| DMatrix::identity(2, 2), &p, 0.3).is_err());
    }

    #[test]
    fn hilbert_schmidt_norms() {
        let spec = QWienerSpec::new(vec![1.0, 0.5], 0).unwrap();
        let op = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_eq!(hs_norm_sq(&op, &spec).unwrap(), 8.5);
        assert_eq!(hs_norm_sq(&DMatrix::identity(2, 2), &spec).unwrap(), spec.trace());
        assert_eq!(hs_norm_sq(&DMatrix::zeros(2, 2), &spec).unwrap(), 0.0);
        assert!(hs_norm_sq(&DMatrix::zeros(2, 3), &spec).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(QWienerSpec::new(vec![], 0).is_err());
        assert!(QWienerSpec::new(vec![-1.0], 0).is_err());
        assert!(sample_path(&QWienerSpec::new(vec![1.0], 0).unwrap(), &[]).is_err());
        let spec = QWienerSpec::new(vec![1.0, 0.25], 0).unwrap();
        assert!(spec.clone().with_full_trace(1.0).is_err());
        assert_eq!(spec.with_full_trace(1.5).unwrap().discarded_trace(), Some(0.25));
    }
}
