//! Heat semigroup `P_t = e^{tΔ}` from the spectral decomposition of the
//! π-symmetrized generator, the average mixing time, and numerical checks of the
//! heat-flow inequalities.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::forms::inverse_dim;
use crate::gamma::{a_form, check_len, laplacian_raw};
use crate::linalg::sym_eigen;
use crate::mean::{DomainClass, Mean};
use crate::serde_ext;

/// Eigen-decomposition `−Δφ_k = λ_kφ_k` with `⟨φ_j, φ_k⟩_π = δ_jk`.
#[derive(Debug, Clone)]
pub struct HeatSystem {
    pub eigenvalues: DVector<f64>,
    /// Columns are the π-orthonormal eigenfunctions, `φ₀ ≡ 1`.
    pub basis: DMatrix<f64>,
    pi: DVector<f64>,
}

pub fn spectral_decompose(chain: &MarkovChain) -> HeatSystem {
    let n = chain.len();
    let pi = chain.pi().clone();
    let sq: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let l = chain.laplacian_matrix();
    let s = DMatrix::from_fn(n, n, |x, y| -sq[x] * l[(x, y)] / sq[y]);
    let (mut values, vectors) = sym_eigen(&s);
    let mut basis = DMatrix::from_fn(n, n, |x, k| vectors[(x, k)] / sq[x]);
    if n > 0 {
        // λ₀ = 0 with the constant eigenfunction; pin both exactly
        values[0] = 0.0;
        basis.set_column(0, &DVector::from_element(n, 1.0));
    }
    for k in 1..n {
        values[k] = values[k].max(0.0);
    }
    HeatSystem { eigenvalues: values, basis, pi }
}

impl HeatSystem {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Smallest positive eigenvalue of `−Δ` (`+∞` for a single state).
    pub fn lambda1(&self) -> f64 {
        if self.len() < 2 {
            f64::INFINITY
        } else {
            self.eigenvalues[1]
        }
    }

    /// `P_t f = Σ_k e^{−λ_k t}⟨f, φ_k⟩_π φ_k`
    pub fn apply(&self, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_time(t)?;
        if f.len() != self.len() {
            return Err(CurvError::ShapeMismatch { expected: self.len(), got: f.len() });
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let weighted = f.component_mul(&self.pi);
        let mut coeff = self.basis.transpose() * weighted;
        for k in 0..coeff.len() {
            coeff[k] *= (-self.eigenvalues[k] * t).exp();
        }
        Ok(&self.basis * coeff)
    }

    /// `p_t(x, y) = Σ_k e^{−λ_k t}φ_k(x)φ_k(y)`
    pub fn kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        check_time(t)?;
        Ok((0..self.len()).map(|k| (-self.eigenvalues[k] * t).exp() * self.basis[(x, k)] * self.basis[(y, k)]).sum())
    }

    /// Full heat kernel matrix `p_t(·,·)`.
    pub fn kernel_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        let n = self.len();
        let scaled = DMatrix::from_fn(n, n, |x, k| self.basis[(x, k)] * (-self.eigenvalues[k] * t).exp());
        Ok(scaled * self.basis.transpose())
    }

    /// `φ(t) = Σ_{x,y} π(x)π(y)|p_t(x,y) − 1|`
    pub fn l1_distance(&self, t: f64) -> Result<f64> {
        let p = self.kernel_matrix(t)?;
        let n = self.len();
        let mut s = 0.0;
        for x in 0..n {
            for y in 0..n {
                s += self.pi[x] * self.pi[y] * (p[(x, y)] - 1.0).abs();
            }
        }
        Ok(s)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 || t.is_infinite() {
        return Err(CurvError::NegativeTime(t));
    }
    Ok(())
}

pub fn heat_apply(sys: &HeatSystem, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    sys.apply(t, f)
}

pub fn heat_kernel(sys: &HeatSystem, t: f64, x: usize, y: usize) -> Result<f64> {
    sys.kernel(t, x, y)
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingTime {
    pub eps: f64,
    pub tau: f64,
    /// `φ(0) = 2(1 − Σπ²)`
    pub initial_distance: f64,
    pub evaluations: usize,
    /// `φ` was non-increasing along the evaluation trace.
    pub monotone: bool,
}

/// `τ_avg(ε) = inf{t > 0 : φ(t) ≤ ε}` by doubling and bisection to `1e-10` in `t`.
pub fn avg_mixing_time(sys: &HeatSystem, eps: f64) -> Result<MixingTime> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(CurvError::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    let initial = 2.0 * (1.0 - sys.pi.iter().map(|p| p * p).sum::<f64>());
    if initial <= eps {
        return Err(CurvError::EpsTooLarge { eps, initial });
    }
    let mut trace: Vec<(f64, f64)> = vec![(0.0, initial)];
    let eval = |t: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = sys.l1_distance(t)?;
        trace.push((t, v));
        Ok(v)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while eval(hi, &mut trace)? > eps {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(CurvError::NumericalFailure(format!("average L¹ distance never drops below {eps}")));
        }
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut trace)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    if !monotone {
        log::warn!("average L¹ distance is not monotone along the bisection trace");
    }
    Ok(MixingTime { eps, tau: hi, initial_distance: initial, evaluations: trace.len() - 1, monotone })
}

/// A sampled point `(ρ, f, t)` of a heat-flow inequality.
#[derive(Debug, Clone, Serialize)]
pub struct HeatWitness {
    #[serde(serialize_with = "serde_ext::dvector")]
    pub rho: DVector<f64>,
    #[serde(serialize_with = "serde_ext::dvector")]
    pub f: DVector<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatCheck {
    pub inequality: String,
    pub mean: String,
    pub k: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub n: f64,
    pub trials: usize,
    /// Smallest `(lhs − rhs)/scale`, scale = sum of absolute values of all terms.
    pub worst_residual: f64,
    pub witness: Option<HeatWitness>,
    pub holds: bool,
    pub tolerance: f64,
}

/// Residual tolerance for heat-flow inequalities, relative to the term scale.
pub const HEAT_TOL: f64 = 1e-9;

/// Density with `⟨ρ, 1⟩_π = 1` drawn from a flat Dirichlet, floored at `1e-9`
/// for open-domain means.
pub fn random_density(chain: &MarkovChain, mean: &Mean, rng: &mut impl Rng) -> DVector<f64> {
    let n = chain.len();
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let mut rho = DVector::from_iterator(n, raw.iter().zip(chain.pi().iter()).map(|(w, p)| w / total / p));
    if mean.domain_class() == DomainClass::Open {
        rho.apply(|v| *v = v.max(1e-9));
    }
    rho
}

pub fn random_function(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Heat flow of a density, kept strictly positive for open-domain means.
fn flow_density(sys: &HeatSystem, mean: &Mean, t: f64, rho: &DVector<f64>) -> Result<DVector<f64>> {
    let mut r = sys.apply(t, rho)?;
    let floor = match mean.domain_class() {
        DomainClass::Open => rho.min().max(f64::MIN_POSITIVE),
        DomainClass::Closed => 0.0,
    };
    r.apply(|v| *v = v.max(floor));
    Ok(r)
}

/// `(1 − e^{−2Kt})/(Kn)`, with limit `2t/n` at `K = 0`.
pub fn gradient_estimate_factor(k: f64, t: f64, inv_n: f64) -> f64 {
    if inv_n == 0.0 {
        return 0.0;
    }
    let x = 2.0 * k * t;
    let ratio = if x.abs() < 1e-8 { 2.0 * t * (1.0 - x / 2.0) } else { -(-x).exp_m1() / k };
    ratio * inv_n
}

/// `((e^{2Kt} − 1)/K, (1/(Kn))((e^{2Kt} − 1)/K − 2t))` with their `K → 0` limits.
pub fn reverse_poincare_factors(k: f64, t: f64, inv_n: f64) -> (f64, f64) {
    let x = 2.0 * k * t;
    if x.abs() < 1e-4 {
        let c1 = 2.0 * t * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0);
        let c2 = 2.0 * t * t * (1.0 + x / 3.0 + x * x / 12.0 + x * x * x / 60.0) * inv_n;
        (c1, c2)
    } else {
        let c1 = x.exp_m1() / k;
        (c1, (c1 - 2.0 * t) / k * inv_n)
    }
}

/// Normalized residual of `e^{−2Kt}𝒜_{P_tρ}(f) − 𝒜_ρ(P_tf) ≥ c⟨ρ, (ΔP_tf)²⟩_π`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_estimate_residual(
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let inv_n = inverse_dim(n)?;
    let rho_t = flow_density(sys, mean, t, rho)?;
    let f_t = sys.apply(t, f)?;
    let a1 = (-2.0 * k * t).exp() * a_form(chain, mean, &rho_t, f)?;
    let a2 = a_form(chain, mean, rho, &f_t)?;
    let lf = laplacian_raw(chain, &f_t);
    let rhs = gradient_estimate_factor(k, t, inv_n) * chain.inner(rho, &lf.component_mul(&lf));
    Ok(normalized(a1 - a2 - rhs, a1.abs() + a2.abs() + rhs.abs()))
}

/// Normalized residual of the reverse Poincaré inequality.
#[allow(clippy::too_many_arguments)]
pub fn reverse_poincare_residual(
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let inv_n = inverse_dim(n)?;
    let rho_t = flow_density(sys, mean, t, rho)?;
    let f_t = sys.apply(t, f)?;
    let l1 = chain.inner(&f.component_mul(f), &rho_t);
    let l2 = chain.inner(&f_t.component_mul(&f_t), rho);
    let (c1, c2) = reverse_poincare_factors(k, t, inv_n);
    let r1 = c1 * a_form(chain, mean, rho, &f_t)?;
    let lf = laplacian_raw(chain, &f_t);
    let r2 = c2 * chain.inner(rho, &lf.component_mul(&lf));
    Ok(normalized(l1 - l2 - r1 - r2, l1.abs() + l2.abs() + r1.abs() + r2.abs()))
}

fn normalized(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        0.0
    }
}

type ResidualFn = fn(&MarkovChain, &HeatSystem, &Mean, f64, f64, &DVector<f64>, &DVector<f64>, f64) -> Result<f64>;

#[allow(clippy::too_many_arguments)]
fn sample_inequality(
    name: &str,
    residual: ResidualFn,
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<HeatCheck> {
    inverse_dim(n)?;
    for &t in t_grid {
        check_time(t)?;
    }
    let samples: Vec<Result<(f64, HeatWitness)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let rho = random_density(chain, mean, &mut rng);
            let f = random_function(chain.len(), &mut rng);
            let mut worst = (f64::INFINITY, 0.0);
            for &t in t_grid {
                let r = residual(chain, sys, mean, k, n, &rho, &f, t)?;
                if r < worst.0 {
                    worst = (r, t);
                }
            }
            Ok((worst.0, HeatWitness { rho, f, t: worst.1 }))
        })
        .collect();
    let mut check = HeatCheck {
        inequality: name.to_string(),
        mean: mean.name().to_string(),
        k,
        n,
        trials,
        worst_residual: f64::INFINITY,
        witness: None,
        holds: true,
        tolerance: HEAT_TOL,
    };
    for s in samples {
        let (r, w) = s?;
        if r < check.worst_residual {
            check.worst_residual = r;
            check.witness = Some(w);
        }
    }
    if trials == 0 || t_grid.is_empty() {
        check.worst_residual = 0.0;
    }
    check.holds = check.worst_residual >= -HEAT_TOL;
    Ok(check)
}

/// Samples the heat-flow gradient estimate at curvature bound `K` over random
/// `(ρ, f)` and every `t` in `t_grid`.
#[allow(clippy::too_many_arguments)]
pub fn verify_gradient_estimate(
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<HeatCheck> {
    sample_inequality("gradient_estimate", gradient_estimate_residual, chain, sys, mean, k, n, trials, t_grid, seed)
}

/// Samples the reverse Poincaré inequality; meaningful for means below the
/// arithmetic mean.
#[allow(clippy::too_many_arguments)]
pub fn verify_reverse_poincare(
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<HeatCheck> {
    sample_inequality("reverse_poincare", reverse_poincare_residual, chain, sys, mean, k, n, trials, t_grid, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub inequality: String,
    pub k: f64,
    pub worst_residual: f64,
    pub witness: HeatWitness,
    pub iterations: usize,
    pub violated: bool,
}

/// Searches for a violation of the gradient estimate at `K` by coordinate
/// descent on `(log ρ, f, log t)`, started from the worst of a few structured
/// seeds (`ρ = 𝟏` with the first eigenfunction) and random samples.
#[allow(clippy::too_many_arguments)]
pub fn probe_gradient_estimate(
    chain: &MarkovChain,
    sys: &HeatSystem,
    mean: &Mean,
    k: f64,
    n: f64,
    extra_seeds: &[(DVector<f64>, DVector<f64>)],
    iterations: usize,
    seed: u64,
) -> Result<ProbeResult> {
    let size = chain.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    if size > 1 {
        seeds.push((chain.ones(), sys.basis.column(1).into_owned()));
    }
    seeds.extend(extra_seeds.iter().cloned());
    for _ in 0..16 {
        seeds.push((random_density(chain, mean, &mut rng), random_function(size, &mut rng)));
    }
    let t_starts: [f64; 4] = [1e-3, 1e-2, 0.1, 1.0];
    let eval = |log_rho: &DVector<f64>, f: &DVector<f64>, log_t: f64| -> f64 {
        let rho = log_rho.map(f64::exp);
        gradient_estimate_residual(chain, sys, mean, k, n, &rho, f, log_t.exp()).unwrap_or(f64::INFINITY)
    };
    let mut best: Option<(f64, DVector<f64>, DVector<f64>, f64)> = None;
    for (rho, f) in &seeds {
        let floor = 1e-9;
        let log_rho = rho.map(|v| v.max(floor).ln());
        for &t in &t_starts {
            let r = eval(&log_rho, f, t.ln());
            if best.as_ref().is_none_or(|b| r < b.0) {
                best = Some((r, log_rho.clone(), f.clone(), t.ln()));
            }
        }
    }
    let (mut val, mut log_rho, mut f, mut log_t) = best.expect("at least one seed");
    let mut step = 0.5;
    let mut used = 0;
    for it in 0..iterations {
        used = it + 1;
        let mut improved = false;
        for coord in 0..(2 * size + 1) {
            for dir in [1.0, -1.0] {
                let (mut lr, mut ff, mut lt) = (log_rho.clone(), f.clone(), log_t);
                if coord < size {
                    lr[coord] += dir * step;
                } else if coord < 2 * size {
                    ff[coord - size] += dir * step * (1.0 + f.amax());
                } else {
                    lt += dir * step;
                }
                let r = eval(&lr, &ff, lt);
                if r < val {
                    val = r;
                    log_rho = lr;
                    f = ff;
                    log_t = lt;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-8 {
                break;
            }
        }
    }
    Ok(ProbeResult {
        inequality: "gradient_estimate".into(),
        k,
        worst_residual: val,
        witness: HeatWitness { rho: log_rho.map(f64::exp), f, t: log_t.exp() },
        iterations: used,
        violated: val < -HEAT_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LinfGradientCheck {
    pub trials: usize,
    /// Largest `max_{x∼y}|P_tf(y) − P_tf(x)| − ‖f‖_∞/√(t q_min)` over samples.
    pub worst_excess: f64,
    pub holds: bool,
}

/// `‖∇P_tf‖_∞ ≤ ‖f‖_∞/√(t q_min)` on random `f` and `t ∈ t_grid`, `t > 0`.
/// The bound is a consequence of nonnegative curvature; callers attach that
/// precondition.
pub fn check_linf_gradient_bound(
    chain: &MarkovChain,
    sys: &HeatSystem,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<LinfGradientCheck> {
    let q_min = chain.stats().q_min;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let f = DVector::from_fn(chain.len(), |_, _| rng.random_range(-1.0..1.0));
        let sup = f.amax();
        for &t in t_grid.iter().filter(|&&t| t > 0.0) {
            let ft = sys.apply(t, &f)?;
            let mut grad: f64 = 0.0;
            for x in 0..chain.len() {
                for &(y, _) in chain.neighbors(x) {
                    grad = grad.max((ft[y] - ft[x]).abs());
                }
            }
            worst = worst.max(grad - sup / (t * q_min).sqrt());
        }
    }
    Ok(LinfGradientCheck { trials, worst_excess: worst, holds: worst <= 1e-9 })
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatKernelBoundCheck {
    /// Smallest `bound − p_t(x,y)` over all pairs and times, relative to `1/π(x)`.
    pub min_slack: f64,
    pub worst_pair: (usize, usize),
    pub worst_t: f64,
    pub holds: bool,
}

/// `p_t(x,y) ≤ (1/π(x)) t^r / r!` with `r = d(x,y)`, for every pair and `t ∈ t_grid`.
pub fn check_heat_kernel_bound(sys: &HeatSystem, chain: &MarkovChain, t_grid: &[f64]) -> Result<HeatKernelBoundCheck> {
    let dist = chain.distance_matrix();
    let pi = chain.pi();
    let mut out = HeatKernelBoundCheck { min_slack: f64::INFINITY, worst_pair: (0, 0), worst_t: 0.0, holds: true };
    for &t in t_grid {
        let p = sys.kernel_matrix(t)?;
        for x in 0..chain.len() {
            for y in 0..chain.len() {
                let r = dist[x][y];
                let log_bound = r as f64 * t.ln() - ln_factorial(r);
                let bound = if r == 0 { 1.0 } else { log_bound.exp() } / pi[x];
                let slack = (bound - p[(x, y)]) * pi[x];
                if slack < out.min_slack {
                    out.min_slack = slack;
                    out.worst_pair = (x, y);
                    out.worst_t = t;
                }
            }
        }
    }
    out.holds = out.min_slack >= -1e-12;
    Ok(out)
}

fn ln_factorial(r: usize) -> f64 {
    (1..=r).map(|k| (k as f64).ln()).sum()
}

/// `P_t` applied to a function given on states, with shape checking against the chain.
pub fn heat_apply_checked(chain: &MarkovChain, sys: &HeatSystem, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(chain, f)?;
    sys.apply(t, f)
}
