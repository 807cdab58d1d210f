//! Means `θ(r, s)` and their partial derivatives.
//!
//! A mean is symmetric, monotone, 1-homogeneous and normalized (`θ(1,1) = 1`).
//! Means with `θ(0, s) = 0` have open domain `(0, ∞)`; the arithmetic mean has
//! closed domain `[0, ∞)`.
//!
//! The logarithmic mean `(r − s)/(ln r − ln s)` is evaluated through an accurate
//! log-ratio, with a short Taylor expansion in `u = (s − r)/(s + r)` right at the
//! diagonal and an exponential power series in `λ = ln(s/r)` for the derivatives
//! when `|λ| ≤ 1`, where the closed forms cancel badly.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{CurvError, Result};

/// Relative gap `|r − s| ≤ DIAGONAL_GAP · max(r, s)` below which the
/// near-diagonal expansion is used.
pub const DIAGONAL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainClass {
    /// `I_θ = (0, ∞)`
    Open,
    /// `I_θ = [0, ∞)`
    Closed,
}

pub type MeanFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied mean: value and first partial derivative, plus the declared domain.
#[derive(Clone)]
pub struct CustomMean {
    pub name: String,
    pub eval: MeanFn,
    pub d1: MeanFn,
    pub domain: DomainClass,
}

#[derive(Clone)]
pub enum Mean {
    Arithmetic,
    Logarithmic,
    Geometric,
    Custom(CustomMean),
}

impl fmt::Debug for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Mean {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl FromStr for Mean {
    type Err = CurvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arithmetic" | "a" | "arith" => Ok(Mean::Arithmetic),
            "logarithmic" | "log" | "ent" | "entropic" => Ok(Mean::Logarithmic),
            "geometric" | "g" | "geo" => Ok(Mean::Geometric),
            other => {
                Err(CurvError::Parse(format!("unknown mean '{other}' (expected arithmetic|logarithmic|geometric)")))
            }
        }
    }
}

impl Mean {
    pub fn name(&self) -> &str {
        match self {
            Mean::Arithmetic => "arithmetic",
            Mean::Logarithmic => "logarithmic",
            Mean::Geometric => "geometric",
            Mean::Custom(c) => &c.name,
        }
    }

    pub fn domain_class(&self) -> DomainClass {
        match self {
            Mean::Arithmetic => DomainClass::Closed,
            Mean::Logarithmic | Mean::Geometric => DomainClass::Open,
            Mean::Custom(c) => c.domain,
        }
    }

    /// `θ(r, s)`
    pub fn eval(&self, r: f64, s: f64) -> Result<f64> {
        check_nonneg(r, s)?;
        Ok(self.eval_raw(r, s))
    }

    /// `∂₁θ(r, s) = ∂θ/∂r`
    pub fn d1(&self, r: f64, s: f64) -> Result<f64> {
        check_nonneg(r, s)?;
        if r == 0.0 && self.domain_class() == DomainClass::Open {
            return Err(CurvError::DomainError(format!("∂₁θ of the {} mean is undefined at r = 0", self.name())));
        }
        Ok(self.d1_raw(r, s))
    }

    /// `∂₂θ(r, s) = ∂₁θ(s, r)`
    pub fn d2(&self, r: f64, s: f64) -> Result<f64> {
        self.d1(s, r)
    }

    /// `∂²θ/∂r²`
    pub fn d11(&self, r: f64, s: f64) -> Result<f64> {
        self.d1(r, s)?;
        Ok(self.d11_raw(r, s))
    }

    pub(crate) fn eval_raw(&self, r: f64, s: f64) -> f64 {
        match self {
            Mean::Arithmetic => 0.5 * (r + s),
            Mean::Geometric => r.sqrt() * s.sqrt(),
            Mean::Logarithmic => log_mean(r, s),
            Mean::Custom(c) => (c.eval)(r, s),
        }
    }

    pub(crate) fn d1_raw(&self, r: f64, s: f64) -> f64 {
        match self {
            Mean::Arithmetic => 0.5,
            Mean::Geometric => {
                if r == s {
                    0.5
                } else {
                    0.5 * (s / r).sqrt()
                }
            }
            Mean::Logarithmic => log_mean_d1(r, s),
            Mean::Custom(c) => (c.d1)(r, s),
        }
    }

    pub(crate) fn d11_raw(&self, r: f64, s: f64) -> f64 {
        match self {
            Mean::Arithmetic => 0.0,
            Mean::Geometric => -0.25 * s.sqrt() / (r * r.sqrt()),
            Mean::Logarithmic => log_mean_d11(r, s),
            Mean::Custom(c) => {
                let h = 1e-5 * r.max(1e-300);
                let lo = (r - h).max(0.5 * r);
                ((c.d1)(r + h, s) - (c.d1)(lo, s)) / (r + h - lo)
            }
        }
    }

    /// `∂²θ/∂r∂s`, from degree-0 homogeneity of `∂₁θ`: `r ∂₁₁θ + s ∂₁₂θ = 0`.
    pub(crate) fn d12_raw(&self, r: f64, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        -(r / s) * self.d11_raw(r, s)
    }
}

fn check_nonneg(r: f64, s: f64) -> Result<()> {
    if !(r >= 0.0 && s >= 0.0) || !r.is_finite() || !s.is_finite() {
        return Err(CurvError::NegativeInput { r, s });
    }
    Ok(())
}

fn near_diagonal(r: f64, s: f64) -> bool {
    (r - s).abs() <= DIAGONAL_GAP * r.max(s)
}

/// `ln(r/s)` without cancellation near `r = s`.
fn log_ratio(r: f64, s: f64) -> f64 {
    let ratio = r / s;
    if (0.5..=2.0).contains(&ratio) {
        ((r - s) / s).ln_1p()
    } else {
        r.ln() - s.ln()
    }
}

fn log_mean(r: f64, s: f64) -> f64 {
    if r == 0.0 || s == 0.0 {
        return 0.0;
    }
    if r == s {
        return r;
    }
    let (r, s) = (r.min(s), r.max(s));
    if near_diagonal(r, s) {
        let m = 0.5 * (r + s);
        let u = (s - r) / (s + r);
        let x = u * u;
        // u / artanh(u)
        return m * (1.0 - x / 3.0 - 4.0 * x * x / 45.0 - 44.0 * x * x * x / 945.0);
    }
    (r - s) / log_ratio(r, s)
}

fn log_mean_d1(r: f64, s: f64) -> f64 {
    if s == 0.0 {
        // θ(r, 0) ≡ 0
        return 0.0;
    }
    if r == s {
        return 0.5;
    }
    if near_diagonal(r, s) {
        let u = (s - r) / (s + r);
        return 0.5 * (1.0 + u * (2.0 / 3.0 + u * (1.0 / 3.0 + u * 16.0 / 45.0)));
    }
    let ell = log_ratio(r, s);
    if ell.abs() <= 1.0 {
        // ∫₀¹ (1 − p) e^{pλ} dp with λ = ln(s/r)
        return exp_moment_series(-ell, |k| 1.0 / ((k + 1.0) * (k + 2.0)));
    }
    (ell - (r - s) / r) / (ell * ell)
}

fn log_mean_d11(r: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let lambda = -log_ratio(r, s);
    if lambda.abs() <= 1.0 {
        // −(1/r) ∫₀¹ p(1 − p) e^{pλ} dp
        return -exp_moment_series(lambda, |k| 1.0 / ((k + 2.0) * (k + 3.0))) / r;
    }
    let e = s / r;
    let l2 = lambda * lambda;
    let l3 = l2 * lambda;
    -(e * (1.0 / l2 - 2.0 / l3) + 1.0 / l2 + 2.0 / l3) / r
}

/// `Σ_k λ^k / k! · c(k)` for `|λ| ≤ 1`.
fn exp_moment_series(lambda: f64, coeff: impl Fn(f64) -> f64) -> f64 {
    let mut power = 1.0;
    let mut sum = 0.0;
    for k in 0..40 {
        let kf = k as f64;
        if k > 0 {
            power *= lambda / kf;
        }
        let term = power * coeff(kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Largest observed violation per mean axiom over random samples.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub mean: String,
    pub samples: usize,
    pub domain_class: DomainClass,
    pub symmetry: f64,
    pub homogeneity: f64,
    pub monotonicity: f64,
    pub normalization: f64,
    pub diagonal_derivative: f64,
    pub euler_identity: f64,
    /// `max θ(0, s)/s`; zero when the mean vanishes on the boundary.
    pub vanishing_at_zero: f64,
    /// `θ ≤ θ_a`: relative amount by which the mean exceeds the arithmetic mean.
    pub above_arithmetic: f64,
    /// Violation of `min ≤ θ_g ≤ θ_log ≤ θ_a ≤ max` on the same samples.
    pub builtin_ordering: f64,
}

impl AxiomReport {
    /// Symmetry, homogeneity, monotonicity, normalization and the derivative identities.
    pub fn passes(&self, tol: f64) -> bool {
        [
            self.symmetry,
            self.homogeneity,
            self.monotonicity,
            self.normalization,
            self.diagonal_derivative,
            self.euler_identity,
        ]
        .iter()
        .all(|&v| v <= tol)
    }

    pub fn vanishes_at_zero(&self, tol: f64) -> bool {
        self.vanishing_at_zero <= tol
    }

    pub fn below_arithmetic(&self, tol: f64) -> bool {
        self.above_arithmetic <= tol
    }
}

/// Checks the mean axioms statistically on log-uniform samples in `(1e-6, 1e6)²`.
pub fn check_mean_axioms(mean: &Mean, sample_count: usize, seed: u64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || 10f64.powf(rng.random_range(-6.0..6.0));
    let mut rep = AxiomReport {
        mean: mean.name().to_string(),
        samples: sample_count,
        domain_class: mean.domain_class(),
        symmetry: 0.0,
        homogeneity: 0.0,
        monotonicity: 0.0,
        normalization: (mean.eval_raw(1.0, 1.0) - 1.0).abs(),
        diagonal_derivative: 0.0,
        euler_identity: 0.0,
        vanishing_at_zero: 0.0,
        above_arithmetic: 0.0,
        builtin_ordering: 0.0,
    };
    for _ in 0..sample_count {
        let (r, s, t) = (sample(), sample(), sample());
        let v = mean.eval_raw(r, s);
        let scale = v.abs().max(f64::MIN_POSITIVE);
        rep.symmetry = rep.symmetry.max((v - mean.eval_raw(s, r)).abs() / scale);
        for lam in [1e-3, 1.0, 1e3] {
            let h = (mean.eval_raw(lam * r, lam * s) - lam * v).abs() / (lam * scale);
            rep.homogeneity = rep.homogeneity.max(h);
        }
        let (hi, lo) = if r >= t { (r, t) } else { (t, r) };
        let drop = mean.eval_raw(lo, s) - mean.eval_raw(hi, s);
        rep.monotonicity = rep.monotonicity.max(drop.max(0.0) / scale);
        rep.diagonal_derivative = rep.diagonal_derivative.max((mean.d1_raw(r, r) - 0.5).abs());
        let euler = r * mean.d1_raw(r, s) + s * mean.d1_raw(s, r);
        rep.euler_identity = rep.euler_identity.max((v - euler).abs() / scale);
        rep.vanishing_at_zero = rep.vanishing_at_zero.max(mean.eval_raw(0.0, s) / s);
        let a = 0.5 * (r + s);
        rep.above_arithmetic = rep.above_arithmetic.max((v - a).max(0.0) / a);
        let chain = [r.min(s), Mean::Geometric.eval_raw(r, s), log_mean(r, s), a, r.max(s)];
        for w in chain.windows(2) {
            rep.builtin_ordering = rep.builtin_ordering.max((w[0] - w[1]).max(0.0) / w[1]);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_values() {
        assert_eq!(Mean::Arithmetic.eval(3.0, 5.0).unwrap(), 4.0);
        assert_eq!(Mean::Arithmetic.d1(0.0, 7.0).unwrap(), 0.5);
    }

    #[test]
    fn log_mean_at_one_two() {
        let v = Mean::Logarithmic.eval(1.0, 2.0).unwrap();
        assert!((v - 1.0 / std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(Mean::Logarithmic.eval(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(Mean::Logarithmic.eval(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_input_rejected() {
        assert!(matches!(Mean::Logarithmic.eval(-1.0, 2.0), Err(CurvError::NegativeInput { .. })));
        assert!(Mean::Arithmetic.eval(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn open_domain_derivative_at_zero() {
        assert!(matches!(Mean::Logarithmic.d1(0.0, 1.0), Err(CurvError::DomainError(_))));
        assert!(matches!(Mean::Geometric.d1(0.0, 1.0), Err(CurvError::DomainError(_))));
        assert!(Mean::Arithmetic.d1(0.0, 1.0).is_ok());
    }

    #[test]
    fn diagonal_derivative_is_half() {
        for m in [Mean::Arithmetic, Mean::Logarithmic, Mean::Geometric] {
            for r in [1e-5, 0.3, 1.0, 7e4] {
                assert_eq!(m.d1(r, r).unwrap(), 0.5, "{m}");
            }
        }
    }

    #[test]
    fn log_mean_near_diagonal_stability() {
        for r in [1e-3, 1.0, 5e5] {
            for eps in [1e-14, 1e-12, 1e-9, 1e-7, 3e-6] {
                let v = log_mean(r, r * (1.0 + eps));
                let exact_mid = r * (1.0 + eps / 2.0);
                assert!((v - exact_mid).abs() <= 1e-12 * r, "r={r} eps={eps}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert!(matches!("logarithmic".parse::<Mean>(), Ok(Mean::Logarithmic)));
        assert!(matches!("Arithmetic".parse::<Mean>(), Ok(Mean::Arithmetic)));
        assert!("min".parse::<Mean>().is_err());
    }
}
