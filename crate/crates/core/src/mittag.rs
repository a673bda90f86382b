//! Two-parameter Mittag-Leffler function and the solution operator families
//! `S_q(t) = E_{q,1}(A t^q)` and `T_q(t) = t^{q-1} E_{q,q}(A t^q)` for a
//! generator given by its spectral decomposition.
//!
//! `E_{q,beta}(z)` is evaluated on the real axis by
//!
//! * the defining power series for `z >= -1` (no cancellation issues there),
//! * for `z < -1`, the Laplace-inversion (Hankel contour) representation
//!   collapsed onto the branch cut of `s^q`:
//!
//!   ```text
//!   E(z) = (2/q) Re[s* ^(1-beta) exp(s*)]                      (q > 1 only)
//!        + 1/pi ∫_0^∞ e^{-r} r^{q-beta} (r^q sin(pi beta) + z sin(pi(q-beta)))
//!                              / (r^{2q} - 2 z r^q cos(pi q) + z^2) dr
//!   ```
//!
//!   where `s* = |z|^{1/q} e^{i pi / q}` is the pole of `s^{q-beta}/(s^q - z)`
//!   in the principal sheet.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

use crate::error::{check_dim, invalid, Error, Result};
use crate::quad;

/// Largest `|z|` (for negative `z`) handled by the power series.
const SERIES_RADIUS: f64 = 1.0;
/// Truncation point of the branch-cut integral; `e^{-r}` is below 1e-30 there.
const CUT_END: f64 = 72.0;
const LOG_MAX: f64 = 709.0;

/// Parameters `(q, beta)` of `E_{q,beta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLOrder {
    q: f64,
    beta: f64,
}

impl MLOrder {
    pub fn new(q: f64, beta: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 2.0) {
            return Err(invalid("q", format!("order must lie in (0, 2], got {q}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self { q, beta })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `sin(pi x)`, exactly zero at integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r == 0.5 {
        return 1.0;
    }
    if r == 1.5 {
        return -1.0;
    }
    (PI * r).sin()
}

/// `cos(pi x)`, exact at half-integers.
pub(crate) fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// `1 / Gamma(x)`, zero at the poles of Gamma and exact at small integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        return 0.0;
    }
    if x.fract() == 0.0 && x <= 21.0 {
        let mut f = 1.0;
        for k in 2..(x as u64) {
            f *= k as f64;
        }
        return 1.0 / f;
    }
    if x > 171.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / gamma(x)
}

/// Evaluates `E_{q,beta}(z)` for real `z`.
pub fn ml_scalar(order: MLOrder, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(invalid("z", "argument must be finite"));
    }
    let MLOrder { q, beta } = order;
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    if z > 0.0 {
        return positive_series(q, beta, z);
    }
    if z >= -SERIES_RADIUS {
        return Ok(alternating_series(q, beta, z));
    }
    Ok(negative_axis(q, beta, z))
}

fn positive_series(q: f64, beta: f64, z: f64) -> Result<f64> {
    let lz = z.ln();
    let mut sum = 0.0;
    let mut peaked = false;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..100_000u32 {
        let kf = k as f64;
        let log_term = kf * lz - ln_gamma(q * kf + beta);
        if log_term > LOG_MAX {
            return Err(Error::Overflow { q, beta, z });
        }
        let term = log_term.exp();
        sum += term;
        if log_term < prev {
            peaked = true;
        }
        prev = log_term;
        if peaked && term <= 1e-17 * sum {
            break;
        }
    }
    if !sum.is_finite() {
        return Err(Error::Overflow { q, beta, z });
    }
    Ok(sum)
}

fn alternating_series(q: f64, beta: f64, z: f64) -> f64 {
    // |z| <= 1 here, so terms decrease monotonically past k ~ 1 and the
    // largest term is at most 1/min Gamma; no cancellation to speak of.
    let mut sum = rgamma(beta);
    let mut zk = 1.0;
    for k in 1..10_000u32 {
        zk *= z;
        let term = zk * rgamma(q * k as f64 + beta);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) || zk == 0.0 {
            break;
        }
    }
    sum
}

fn negative_axis(q: f64, beta: f64, z: f64) -> f64 {
    if q == 1.0 {
        return unit_order_negative(beta, z);
    }
    // E_{q,beta}(z) = (E_{q,beta-q}(z) - 1/Gamma(beta-q)) / z keeps the
    // branch-cut weight r^{q-beta} integrable.
    if beta - q >= 1.0 {
        return (negative_axis(q, beta - q, z) - rgamma(beta - q)) / z;
    }
    let x = -z;
    let mut value = 0.0;
    if q > 1.0 {
        let rho = x.powf(1.0 / q);
        let amp = (2.0 / q) * x.powf((1.0 - beta) / q) * (rho * cos_pi(1.0 / q)).exp();
        let phase = PI * (1.0 - beta) / q + rho * sin_pi(1.0 / q);
        value += amp * phase.cos();
    }
    value + branch_cut_integral(q, beta, z)
}

fn branch_cut_integral(q: f64, beta: f64, z: f64) -> f64 {
    let sb = sin_pi(beta);
    let sqb = sin_pi(q - beta);
    if sb == 0.0 && sqb == 0.0 {
        return 0.0;
    }
    let cq = cos_pi(q);
    let gamma_exp = q - beta;
    let rest = move |r: f64| {
        let rq = r.powf(q);
        (-r).exp() * (rq * sb + z * sqb) / (rq * rq - 2.0 * z * rq * cq + z * z)
    };
    let full = move |r: f64| r.powf(gamma_exp) * rest(r);

    let abs_tol = 1e-17;
    let rel_tol = 1e-14;
    let head = 1.0;
    let mut total = quad::power_weighted(rest, gamma_exp, head, abs_tol, rel_tol).value;

    let mut breaks = vec![head];
    if cq < 0.0 {
        // Denominator is smallest at r^q = -z cos(pi q) > 0.
        let peak = (-z * cq).powf(1.0 / q);
        if peak > head && peak < CUT_END {
            breaks.push(peak);
        }
    }
    breaks.push(CUT_END);
    for w in breaks.windows(2) {
        total += quad::tanh_sinh(&full, w[0], w[1], abs_tol, rel_tol).value;
    }
    total / PI
}

/// `q = 1`: the pole sits on the negative axis, so use `E_{1,1} = exp`, the
/// Euler integral for `beta > 1`, and upward recursion for `beta < 1`.
fn unit_order_negative(beta: f64, z: f64) -> f64 {
    if beta == 1.0 {
        return z.exp();
    }
    if beta < 1.0 {
        return rgamma(beta) + z * unit_order_negative(beta + 1.0, z);
    }
    // E_{1,beta}(z) = 1/Gamma(beta) ∫_0^1 exp(z (1 - u^{1/(beta-1)})) du
    let p = 1.0 / (beta - 1.0);
    let integral = quad::tanh_sinh(|u| (z * (1.0 - u.powf(p))).exp(), 0.0, 1.0, 1e-300, 1e-14);
    rgamma(beta) * integral.value
}

/// A self-adjoint generator `A = B diag(lambda) B^T` given by eigenpairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors; `None` means the identity.
    basis: Option<DMatrix<f64>>,
}

impl SpectralOperator {
    /// Diagonal operator in the coordinate basis.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("eigenvalues", "operator dimension must be positive"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(invalid("eigenvalues", "eigenvalues must be finite"));
        }
        Ok(Self {
            eigenvalues,
            basis: None,
        })
    }

    pub fn new(eigenvalues: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        let mut op = Self::diagonal(eigenvalues)?;
        let n = op.dimension();
        check_dim("basis rows", n, basis.nrows())?;
        check_dim("basis columns", n, basis.ncols())?;
        let gram = basis.transpose() * &basis;
        let defect = (gram - DMatrix::identity(n, n)).amax();
        if defect > 1e-10 {
            return Err(invalid(
                "basis",
                format!("columns are not orthonormal (max defect {defect:e})"),
            ));
        }
        op.basis = Some(basis);
        Ok(op)
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn to_eigen(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => b.tr_mul(v),
            None => v.clone(),
        }
    }

    pub fn from_eigen(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => b * y,
            None => y.clone(),
        }
    }

    /// `B diag(f(lambda_k)) B^T v`.
    pub fn apply_fn<F>(&self, v: &DVector<f64>, mut f: F) -> Result<DVector<f64>>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        check_dim("state vector", self.dimension(), v.len())?;
        let mut y = self.to_eigen(v);
        for (yk, &lambda) in y.iter_mut().zip(&self.eigenvalues) {
            *yk *= f(lambda)?;
        }
        Ok(self.from_eigen(&y))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `S_q(t) v`.
pub fn sq_apply(a: &SpectralOperator, q: f64, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_time(t)?;
    let order = MLOrder::new(q, 1.0)?;
    let tq = t.powf(q);
    a.apply_fn(v, |lambda| ml_scalar(order, lambda * tq))
}

/// `T_q(t) v`; zero at `t = 0` for `q > 1`.
pub fn tq_apply(a: &SpectralOperator, q: f64, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_time(t)?;
    let order = MLOrder::new(q, q)?;
    if t == 0.0 {
        check_dim("state vector", a.dimension(), v.len())?;
        if q > 1.0 {
            return Ok(DVector::zeros(v.len()));
        }
        if q < 1.0 {
            return Err(invalid("t", "T_q(0) is unbounded for q < 1"));
        }
    }
    let tq = t.powf(q);
    let scale = t.powf(q - 1.0);
    a.apply_fn(v, |lambda| Ok(scale * ml_scalar(order, lambda * tq)?))
}

/// `∫_0^t S_q(s) v ds`, using the term-by-term integrated series
/// `∫_0^t E_{q,1}(lambda s^q) ds = t E_{q,2}(lambda t^q)`.
pub fn sq_integral_apply(
    a: &SpectralOperator,
    q: f64,
    t: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_time(t)?;
    let order = MLOrder::new(q, 2.0)?;
    let tq = t.powf(q);
    a.apply_fn(v, |lambda| Ok(t * ml_scalar(order, lambda * tq)?))
}

/// Empirical operator-norm bounds over a uniform grid of `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorBounds {
    /// `max_t ||S_q(t)||`.
    pub m: f64,
    /// `max_t t^{1-q} ||T_q(t)||`.
    pub m_b: f64,
    /// `max_t ||T_q(t)||` (constant-style bound).
    pub m_1: f64,
}

pub fn operator_bounds(
    a: &SpectralOperator,
    q: f64,
    horizon: f64,
    samples: usize,
) -> Result<OperatorBounds> {
    if !(horizon > 0.0) || samples == 0 {
        return Err(invalid("horizon", "need a positive horizon and at least one sample"));
    }
    let s_order = MLOrder::new(q, 1.0)?;
    let t_order = MLOrder::new(q, q)?;
    let mut bounds = OperatorBounds {
        m: 0.0,
        m_b: 0.0,
        m_1: 0.0,
    };
    for i in 0..=samples {
        let t = horizon * i as f64 / samples as f64;
        let tq = t.powf(q);
        for &lambda in a.eigenvalues() {
            let s = ml_scalar(s_order, lambda * tq)?.abs();
            let e = ml_scalar(t_order, lambda * tq)?.abs();
            bounds.m = bounds.m.max(s);
            bounds.m_b = bounds.m_b.max(e);
            if t > 0.0 || q <= 1.0 {
                bounds.m_1 = bounds.m_1.max(t.powf(q - 1.0) * e);
            }
        }
    }
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ml(q: f64, b: f64, z: f64) -> f64 {
        ml_scalar(MLOrder::new(q, b).unwrap(), z).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(ml(1.0, 1.0, 1.0), std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(ml(1.5, 1.5, 0.0), 1.128_379_167_095_512_6, max_relative = 1e-14);
        assert!(ml(2.0, 1.0, -(PI / 2.0).powi(2)).abs() < 1e-14);
        // E_{1,2}(z) = (e^z - 1) / z
        let z = -7.5f64;
        assert_relative_eq!(ml(1.0, 2.0, z), (z.exp() - 1.0) / z, max_relative = 1e-13);
        // E_{2,2}(-x^2) = sin(x) / x
        let x = 3.3f64;
        assert_relative_eq!(ml(2.0, 2.0, -x * x), x.sin() / x, max_relative = 1e-12);
    }

    #[test]
    fn series_and_contour_agree_across_crossover() {
        for &(q, b) in &[(1.2, 1.0), (1.5, 1.5), (1.8, 1.0), (1.5, 2.0), (0.6, 1.0)] {
            for i in 0..20 {
                let z = -1.0 - 0.1 * i as f64;
                let series = alternating_series(q, b, z);
                let contour = negative_axis(q, b, z);
                assert!(
                    (series - contour).abs() < 1e-12,
                    "q={q} b={b} z={z}: {series} vs {contour}"
                );
            }
        }
    }

    #[test]
    fn recursion_for_large_beta() {
        // beta >= q + 1 goes through the downward recursion.
        let (q, b, z) = (1.3, 2.5, -4.0);
        let direct = alternating_series(q, b, -0.9);
        assert_relative_eq!(negative_axis(q, b, -0.9), direct, max_relative = 1e-12);
        let v = ml(q, b, z);
        let lower = ml(q, b - q, z);
        assert_relative_eq!(v, (lower - rgamma(b - q)) / z, max_relative = 1e-12);
    }

    #[test]
    fn overflow_is_an_error() {
        let err = ml_scalar(MLOrder::new(1.0, 1.0).unwrap(), 800.0).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
        assert!(ml_scalar(MLOrder::new(1.5, 1.0).unwrap(), 50.0).unwrap().is_finite());
    }

    #[test]
    fn invalid_orders() {
        assert!(MLOrder::new(0.0, 1.0).is_err());
        assert!(MLOrder::new(2.5, 1.0).is_err());
        assert!(MLOrder::new(1.5, 0.0).is_err());
        assert!(ml_scalar(MLOrder::new(1.5, 1.0).unwrap(), f64::NAN).is_err());
    }

    #[test]
    fn operator_identities() {
        let zero = SpectralOperator::diagonal(vec![0.0, 0.0]).unwrap();
        let v = DVector::from_vec(vec![1.5, -2.0]);
        assert_eq!(sq_apply(&zero, 1.5, 0.7, &v).unwrap(), v);
        let a = SpectralOperator::diagonal(vec![-1.0, -9.0]).unwrap();
        assert_eq!(sq_apply(&a, 1.5, 0.0, &v).unwrap(), v);
        assert_eq!(tq_apply(&a, 1.5, 0.0, &v).unwrap(), DVector::zeros(2));
        assert_eq!(sq_integral_apply(&a, 1.5, 0.0, &v).unwrap(), DVector::zeros(2));
        let t = 0.8f64;
        let tz = tq_apply(&zero, 1.5, t, &v).unwrap();
        assert_relative_eq!(tz[0], t.powf(0.5) * rgamma(1.5) * 1.5, max_relative = 1e-14);
        let iz = sq_integral_apply(&zero, 1.5, t, &v).unwrap();
        assert_relative_eq!(iz[1], -2.0 * t, max_relative = 1e-14);
        assert!(sq_apply(&a, 1.5, 1.0, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn basis_must_be_orthonormal() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(SpectralOperator::new(vec![-1.0, -2.0], b).is_err());
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!(SpectralOperator::new(vec![-1.0, -2.0], r).is_ok());
    }

    #[test]
    fn tq_kernel_vanishes_at_coincident_times() {
        let a = SpectralOperator::diagonal(vec![-1.0, -16.0]).unwrap();
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let mut prev = f64::INFINITY;
        for k in 1..12 {
            let t = 10f64.powi(-k);
            let n = tq_apply(&a, 1.5, t, &v).unwrap().norm();
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn measured_bounds_for_dissipative_generator() {
        let a = SpectralOperator::diagonal((1..=8).map(|n| -((n * n) as f64)).collect()).unwrap();
        let b1 = operator_bounds(&a, 1.5, 1.0, 200).unwrap();
        let b2 = operator_bounds(&a, 1.5, 1.0, 200).unwrap();
        assert_eq!(b1, b2);
        assert_relative_eq!(b1.m, 1.0, max_relative = 1e-15);
        assert_relative_eq!(b1.m_b, rgamma(1.5), max_relative = 1e-12);
        assert!(b1.m_1.is_finite() && b1.m_1 > 0.0);
    }
}
