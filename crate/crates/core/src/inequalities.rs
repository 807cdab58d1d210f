//! Spectral, isoperimetric, mixing and diameter inequalities that follow from
//! curvature lower bounds, evaluated on concrete chains.
//!
//! Every report lists its preconditions with a status. Checks whose
//! preconditions rest on optimizer output are labeled heuristic and callers
//! should not treat their failure as a contradiction.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::chain::MarkovChain;
use crate::curvature::bakry_emery_global;
use crate::entropic::EntropicEstimate;
use crate::error::Result;
use crate::geometry::{cheeger_bounds, d_gamma_matrix, diam_combinatorial, gradient_l1, norm_l1, CheegerBounds};
use crate::heat::{self, avg_mixing_time, spectral_decompose, HeatSystem, HEAT_TOL};
use crate::mean::{check_mean_axioms, Mean};
use crate::serde_ext;

/// Relative tolerance on `rhs − lhs`.
pub const SLACK_TOL: f64 = 1e-9;
/// Estimated curvature at or above this counts as nonnegative.
pub const NONNEGATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Exact,
    Heuristic,
    Unmet,
}

#[derive(Debug, Clone, Serialize)]
pub struct Precondition {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Precondition {
    pub fn new(name: &str, status: Status, detail: impl Into<String>) -> Self {
        Precondition { name: name.to_string(), status, detail: detail.into() }
    }

    fn check(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Precondition::new(name, if ok { Status::Exact } else { Status::Unmet }, detail)
    }
}

fn ext_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    struct W(f64);
    impl Serialize for W {
        fn serialize<S2: Serializer>(&self, s: S2) -> std::result::Result<S2::Ok, S2::Error> {
            serde_ext::ext_f64(&self.0, s)
        }
    }
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &W(*v))?;
    }
    map.end()
}

/// `lhs ≤ rhs` evaluated on one chain.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub slack: f64,
    pub verdict: Verdict,
    pub preconditions: Vec<Precondition>,
    #[serde(serialize_with = "ext_map")]
    pub inputs: BTreeMap<String, f64>,
}

impl InequalityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, preconditions: Vec<Precondition>, inputs: &[(&str, f64)]) -> Self {
        let slack = rhs - lhs;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let verdict = if preconditions.iter().any(|p| p.status == Status::Unmet) {
            Verdict::NotApplicable
        } else if slack >= -SLACK_TOL * scale || (lhs.is_infinite() && lhs == rhs) {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            verdict,
            preconditions,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Every precondition is proof-backed.
    pub fn exact(&self) -> bool {
        self.preconditions.iter().all(|p| p.status == Status::Exact)
    }

    /// A violation under proof-backed preconditions.
    pub fn exact_violation(&self) -> bool {
        self.verdict == Verdict::Violated && self.exact()
    }
}

/// A curvature lower bound together with how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureEvidence {
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k: f64,
    pub status: Status,
    pub source: String,
}

impl CurvatureEvidence {
    /// A bound known to hold, e.g. a closed form.
    pub fn exact(k: f64, source: &str) -> Self {
        CurvatureEvidence { k, status: Status::Exact, source: source.to_string() }
    }

    /// An optimizer value: an upper bound on the infimum, used as if it were a
    /// lower bound.
    pub fn heuristic(k: f64, source: &str) -> Self {
        CurvatureEvidence { k, status: Status::Heuristic, source: source.to_string() }
    }

    pub fn from_estimate(est: &EntropicEstimate) -> Self {
        CurvatureEvidence::heuristic(est.k_hat, &format!("multi-start estimate ({} mean)", est.mean))
    }

    /// Nonnegative curvature. A negative optimizer value is an upper bound on the
    /// infimum, so it rules the condition out.
    fn nonnegative(&self) -> Precondition {
        let name = "nonnegative_entropic_curvature";
        if self.k >= -NONNEGATIVE_TOL {
            Precondition::new(name, self.status, format!("K = {} from {}", self.k, self.source))
        } else {
            Precondition::new(name, Status::Unmet, format!("K = {} from {}", self.k, self.source))
        }
    }

    fn positive(&self, name: &str) -> Precondition {
        if self.k > 0.0 {
            Precondition::new(name, self.status, format!("K = {} from {}", self.k, self.source))
        } else {
            Precondition::new(name, Status::Unmet, format!("K = {} is not positive ({})", self.k, self.source))
        }
    }
}

/// Heat kernel decay `p_t(x,y) ≤ (1/π(x)) t^r/r!` with `r = d(x,y)`. Reported at
/// the worst pair in the scaled form `π(x)p_t(x,y) ≤ t^r/r!`.
pub fn check_heat_kernel_bound(chain: &MarkovChain, sys: &HeatSystem, t_grid: &[f64]) -> Result<InequalityReport> {
    let c = heat::check_heat_kernel_bound(sys, chain, t_grid)?;
    let (x, y) = c.worst_pair;
    let lhs = chain.pi()[x] * sys.kernel(c.worst_t, x, y)?;
    Ok(InequalityReport::new(
        "heat_kernel_decay",
        lhs,
        lhs + c.min_slack,
        vec![],
        &[("t", c.worst_t), ("x", x as f64), ("y", y as f64), ("times", t_grid.len() as f64)],
    ))
}

/// `‖∇P_tf‖_∞ ≤ ‖f‖_∞/√(t Q_min)` under nonnegative curvature for a mean below
/// the arithmetic one.
pub fn check_linf_gradient(
    chain: &MarkovChain,
    sys: &HeatSystem,
    evidence: &CurvatureEvidence,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<InequalityReport> {
    let c = heat::check_linf_gradient_bound(chain, sys, trials, t_grid, seed)?;
    Ok(InequalityReport::new(
        "linf_gradient_decay",
        c.worst_excess,
        0.0,
        vec![evidence.nonnegative()],
        &[("trials", trials as f64), ("q_min", chain.stats().q_min)],
    ))
}

fn cheeger_precondition(b: &CheegerBounds) -> Precondition {
    Precondition::new(
        "cheeger_constant",
        if b.exact { Status::Exact } else { Status::Heuristic },
        format!("{}: {} ≤ h ≤ {}", b.method, b.lower, b.upper),
    )
}

/// `‖∇f‖₁ ≥ (h/2)‖f‖₁` for π-mean-zero `f`, sampled with `‖f‖₁ = 1`. Reported
/// as `h/2 ≤ min ‖∇f‖₁/‖f‖₁` over the samples, which include the centered
/// indicator of the Cheeger set.
pub fn check_cheeger_l1(chain: &MarkovChain, bounds: &CheegerBounds, trials: usize, seed: u64) -> InequalityReport {
    let ones = chain.ones();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = |f: DVector<f64>| {
        let m = chain.inner(&f, &ones);
        f.add_scalar(-m)
    };
    let mut samples = vec![center(chain.indicator(&bounds.set))];
    for _ in 0..trials {
        samples.push(center(DVector::from_fn(chain.len(), |_, _| StandardNormal.sample(&mut rng))));
    }
    let worst = samples
        .iter()
        .filter(|f| norm_l1(chain, f) > 0.0)
        .map(|f| gradient_l1(chain, f) / norm_l1(chain, f))
        .fold(f64::INFINITY, f64::min);
    InequalityReport::new(
        "cheeger_l1",
        bounds.upper / 2.0,
        worst,
        vec![cheeger_precondition(bounds)],
        &[("h", bounds.upper), ("trials", trials as f64)],
    )
}

/// `R₀ = ln(4π_max)/ln(Q_min)`
fn r0(chain: &MarkovChain) -> f64 {
    let s = chain.stats();
    (4.0 * s.pi_max).ln() / s.q_min.ln()
}

fn mixing_preconditions(chain: &MarkovChain) -> Vec<Precondition> {
    let s = chain.stats();
    vec![
        Precondition::check("pi_max_below_quarter", s.pi_max < 0.25, format!("π_max = {}", s.pi_max)),
        Precondition::check("q_min_below_one", s.q_min < 1.0, format!("Q_min = {}", s.q_min)),
    ]
}

/// `τ_avg(1/4) ≥ (π_min/(8π_max))^{1/R₀}·(Q_min/e)·R₀`, stated as `bound ≤ τ`.
pub fn check_tau_lower_bound(chain: &MarkovChain, sys: &HeatSystem) -> Result<InequalityReport> {
    let s = chain.stats();
    let pre = mixing_preconditions(chain);
    if pre.iter().any(|p| p.status == Status::Unmet) {
        return Ok(InequalityReport::new("mixing_time_lower_bound", f64::NAN, f64::NAN, pre, &[]));
    }
    let r = r0(chain);
    let bound = (s.pi_min / (8.0 * s.pi_max)).powf(1.0 / r) * (s.q_min / std::f64::consts::E) * r;
    let tau = avg_mixing_time(sys, 0.25)?.tau;
    Ok(InequalityReport::new("mixing_time_lower_bound", bound, tau, pre, &[("r0", r), ("tau", tau)]))
}

/// `λ₁ ≤ 16 ln2·h²/Q_min` under nonnegative entropic curvature.
pub fn check_buser(
    chain: &MarkovChain,
    sys: &HeatSystem,
    bounds: &CheegerBounds,
    evidence: &CurvatureEvidence,
) -> InequalityReport {
    let q = chain.stats().q_min;
    let l1 = sys.lambda1();
    InequalityReport::new(
        "buser",
        l1,
        16.0 * LN_2 * bounds.upper * bounds.upper / q,
        vec![evidence.nonnegative(), cheeger_precondition(bounds)],
        &[("lambda1", l1), ("h", bounds.upper), ("q_min", q)],
    )
}

/// `λ₁·τ_avg(1/4) ≤ 256 ln2/Q_min²` under nonnegative entropic curvature.
pub fn check_lambda_tau(
    chain: &MarkovChain,
    sys: &HeatSystem,
    evidence: &CurvatureEvidence,
) -> Result<InequalityReport> {
    let q = chain.stats().q_min;
    let l1 = sys.lambda1();
    let tau = avg_mixing_time(sys, 0.25)?.tau;
    Ok(InequalityReport::new(
        "spectral_gap_mixing_product",
        l1 * tau,
        256.0 * LN_2 / (q * q),
        vec![evidence.nonnegative()],
        &[("lambda1", l1), ("tau", tau), ("q_min", q)],
    ))
}

/// Degree `d` when the chain is the simple random walk on a `d`-regular graph.
pub fn regular_degree(chain: &MarkovChain) -> Option<usize> {
    let size = chain.len();
    let d = chain.neighbors(0).len();
    if d == 0 {
        return None;
    }
    let uniform = chain.pi().iter().all(|&p| (p * size as f64 - 1.0).abs() < 1e-9);
    let walk = (0..size).all(|x| {
        let nb = chain.neighbors(x);
        nb.len() == d && chain.q()[(x, x)] == 0.0 && nb.iter().all(|&(_, q)| (q * d as f64 - 1.0).abs() < 1e-9)
    });
    (uniform && walk).then_some(d)
}

/// Spectral gap bounds without expanders: `λ₁ ≤ (483/Q_min³)(8π_max/π_min)^{1/R₀}/R₀`
/// when `π_max < ¼` and `Q_min < 1`, and for `d`-regular simple random walks with
/// `|X| ≥ 4d`, `d·λ₁ ≤ 4000 d⁴ ln d/ln(|X|/4)`.
pub fn check_expander_bounds(
    chain: &MarkovChain,
    sys: &HeatSystem,
    evidence: &CurvatureEvidence,
) -> Vec<InequalityReport> {
    let s = chain.stats();
    let l1 = sys.lambda1();
    let mut general = mixing_preconditions(chain);
    general.push(evidence.nonnegative());
    let first = if general.iter().any(|p| p.status == Status::Unmet) {
        InequalityReport::new("spectral_gap_upper_bound", l1, f64::NAN, general, &[("lambda1", l1)])
    } else {
        let r = r0(chain);
        let rhs = 483.0 / s.q_min.powi(3) * (8.0 * s.pi_max / s.pi_min).powf(1.0 / r) / r;
        InequalityReport::new("spectral_gap_upper_bound", l1, rhs, general, &[("lambda1", l1), ("r0", r)])
    };
    let degree = regular_degree(chain);
    let size = chain.len() as f64;
    let mut regular = vec![
        Precondition::check("regular_simple_random_walk", degree.is_some(), format!("degree {degree:?}")),
        evidence.nonnegative(),
    ];
    let second = match degree {
        Some(d) => {
            let df = d as f64;
            regular.push(Precondition::check("degree_at_least_two", d >= 2, format!("d = {d}")));
            regular.push(Precondition::check(
                "size_at_least_four_d",
                size >= 4.0 * df,
                format!("|X| = {size}, 4d = {}", 4 * d),
            ));
            let applicable = !regular.iter().any(|p| p.status == Status::Unmet);
            let rhs = if applicable { 4000.0 * df.powi(4) * df.ln() / (size / 4.0).ln() } else { f64::NAN };
            InequalityReport::new(
                "regular_spectral_gap_upper_bound",
                df * l1,
                rhs,
                regular,
                &[("degree", df), ("lambda1", l1)],
            )
        }
        None => InequalityReport::new("regular_spectral_gap_upper_bound", f64::NAN, f64::NAN, regular, &[]),
    };
    vec![first, second]
}

#[derive(Debug, Clone, Serialize)]
pub struct Diameters {
    /// `diam(X, d_Γ)`
    pub gamma: f64,
    pub combinatorial: usize,
    pub gamma_converged: bool,
}

impl Diameters {
    pub fn compute(chain: &MarkovChain) -> Result<Self> {
        let m = d_gamma_matrix(chain)?;
        Ok(Diameters {
            gamma: m.values.iter().flatten().copied().fold(0.0, f64::max),
            combinatorial: diam_combinatorial(chain),
            gamma_converged: m.unconverged.is_empty(),
        })
    }
}

fn solver_precondition(d: &Diameters) -> Precondition {
    Precondition::new(
        "dgamma_solver_converged",
        if d.gamma_converged { Status::Exact } else { Status::Heuristic },
        "all pair solves reached the duality-gap tolerance",
    )
}

/// Diameter bounds under positive entropic curvature `K`:
/// `diam_Γ ≤ (2/K)√(2c)` and `diam_d ≤ (2/K)√c` with `c = D_π ln D_π/(D_π − 1)`
/// (`c = 1` when `D_π = 1`).
pub fn check_diameter_bound_ent(
    chain: &MarkovChain,
    evidence: &CurvatureEvidence,
    diam: &Diameters,
) -> Vec<InequalityReport> {
    let dp = chain.stats().deg_pi_max;
    let c = if (dp - 1.0).abs() < 1e-12 { 1.0 } else { dp * dp.ln() / (dp - 1.0) };
    let pre = || vec![evidence.positive("positive_entropic_curvature"), solver_precondition(diam)];
    let k = evidence.k;
    let inputs = [("k", k), ("d_pi", dp), ("c", c)];
    vec![
        InequalityReport::new("entropic_diameter_dgamma", diam.gamma, 2.0 / k * (2.0 * c).sqrt(), pre(), &inputs),
        InequalityReport::new(
            "entropic_diameter_combinatorial",
            diam.combinatorial as f64,
            2.0 / k * c.sqrt(),
            vec![evidence.positive("positive_entropic_curvature")],
            &inputs,
        ),
    ]
}

/// Diameter bounds under `CD_θ(K, n)` with `K > 0`, `n < ∞` and `θ` below the
/// arithmetic mean: `diam_Γ ≤ π√(n/K)` and `diam_d ≤ π√(Dn/(2K))`.
pub fn check_diameter_bound_finite_n(
    chain: &MarkovChain,
    mean: &Mean,
    evidence: &CurvatureEvidence,
    n: f64,
    diam: &Diameters,
) -> Vec<InequalityReport> {
    let below = match mean {
        Mean::Arithmetic | Mean::Logarithmic | Mean::Geometric => {
            Precondition::new("mean_below_arithmetic", Status::Exact, mean.name())
        }
        Mean::Custom(_) => {
            let ok = check_mean_axioms(mean, 2000, 0).below_arithmetic(1e-12);
            Precondition::new(
                "mean_below_arithmetic",
                if ok { Status::Heuristic } else { Status::Unmet },
                "sampled comparison with the arithmetic mean",
            )
        }
    };
    let d = chain.stats().deg_weighted_max;
    let k = evidence.k;
    let pre = |extra: Option<Precondition>| {
        let mut v = vec![
            evidence.positive("positive_curvature"),
            Precondition::check("finite_dimension", n.is_finite() && n > 0.0, format!("n = {n}")),
            below.clone(),
        ];
        v.extend(extra);
        v
    };
    let inputs = [("k", k), ("n", n), ("degree", d)];
    vec![
        InequalityReport::new(
            "dimensional_diameter_dgamma",
            diam.gamma,
            PI * (n / k).sqrt(),
            pre(Some(solver_precondition(diam))),
            &inputs,
        ),
        InequalityReport::new(
            "dimensional_diameter_combinatorial",
            diam.combinatorial as f64,
            PI * (d * n / (2.0 * k)).sqrt(),
            pre(None),
            &inputs,
        ),
    ]
}

/// Arithmetic-mean `K_n(X)` at the first `n` of the grid where it is positive.
pub fn positive_dimensional_curvature(chain: &MarkovChain, n_grid: &[f64]) -> Result<Option<(f64, f64)>> {
    for &n in n_grid {
        let k = bakry_emery_global(chain, n)?.value;
        if k > 0.0 {
            return Ok(Some((n, k)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone)]
pub struct BatteryOptions {
    pub trials: usize,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            trials: 200,
            t_grid: vec![0.01, 0.1, 0.5, 1.0, 2.0, 5.0],
            n_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            seed: 0,
        }
    }
}

/// Heat kernel decay, `L∞` gradient decay, `ℓ¹` Cheeger, mixing-time lower
/// bound, Buser, gap-mixing product, expander bounds and both diameter bounds.
pub fn inequality_battery(
    chain: &MarkovChain,
    evidence: &CurvatureEvidence,
    opts: &BatteryOptions,
) -> Result<Vec<InequalityReport>> {
    let sys = spectral_decompose(chain);
    let bounds = cheeger_bounds(chain)?;
    let diam = Diameters::compute(chain)?;
    let mut out = vec![
        check_heat_kernel_bound(chain, &sys, &opts.t_grid)?,
        check_linf_gradient(chain, &sys, evidence, opts.trials, &opts.t_grid, opts.seed)?,
        check_cheeger_l1(chain, &bounds, opts.trials, opts.seed),
        check_tau_lower_bound(chain, &sys)?,
        check_buser(chain, &sys, &bounds, evidence),
        check_lambda_tau(chain, &sys, evidence)?,
    ];
    out.extend(check_expander_bounds(chain, &sys, evidence));
    out.extend(check_diameter_bound_ent(chain, evidence, &diam));
    match positive_dimensional_curvature(chain, &opts.n_grid)? {
        Some((n, k)) => {
            let ev = CurvatureEvidence::exact(k, "arithmetic-mean vertex curvature");
            out.extend(check_diameter_bound_finite_n(chain, &Mean::Arithmetic, &ev, n, &diam));
        }
        None => {
            let ev = CurvatureEvidence::exact(f64::NAN, "no positive dimensional curvature on the grid");
            out.extend(check_diameter_bound_finite_n(chain, &Mean::Arithmetic, &ev, f64::NAN, &diam));
        }
    }
    Ok(out)
}

/// Gradient estimate and reverse Poincaré inequality at curvature `K` as reports.
pub fn heat_flow_reports(
    chain: &MarkovChain,
    mean: &Mean,
    evidence: &CurvatureEvidence,
    n: f64,
    opts: &BatteryOptions,
) -> Result<Vec<InequalityReport>> {
    let sys = spectral_decompose(chain);
    let ge = heat::verify_gradient_estimate(chain, &sys, mean, evidence.k, n, opts.trials, &opts.t_grid, opts.seed)?;
    let rp = heat::verify_reverse_poincare(chain, &sys, mean, evidence.k, n, opts.trials, &opts.t_grid, opts.seed)?;
    let below = match mean {
        Mean::Custom(_) => Precondition::new("mean_below_arithmetic", Status::Heuristic, "custom mean"),
        _ => Precondition::new("mean_below_arithmetic", Status::Exact, mean.name()),
    };
    let curvature = Precondition::new(
        "curvature_bound",
        if evidence.k.is_finite() { evidence.status } else { Status::Unmet },
        format!("K = {} from {}", evidence.k, evidence.source),
    );
    Ok([ge, rp]
        .into_iter()
        .map(|c| {
            let mut pre = vec![curvature.clone()];
            if c.inequality == "reverse_poincare" {
                pre.push(below.clone());
            }
            // residual form: 0 ≤ worst normalized residual
            let mut r = InequalityReport::new(
                &c.inequality,
                0.0,
                c.worst_residual,
                pre,
                &[("k", c.k), ("trials", c.trials as f64)],
            );
            if r.verdict != Verdict::NotApplicable {
                r.verdict = if c.worst_residual >= -HEAT_TOL { Verdict::Holds } else { Verdict::Violated };
            }
            r
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cycle, hypercube};

    #[test]
    fn two_state_buser_and_lambda_tau() {
        let c = hypercube(1).unwrap();
        let sys = spectral_decompose(&c);
        let ev = CurvatureEvidence::exact(2.0, "closed form");
        let b = cheeger_bounds(&c).unwrap();
        let buser = check_buser(&c, &sys, &b, &ev);
        assert_eq!(buser.verdict, Verdict::Holds);
        assert!((buser.rhs - 16.0 * LN_2).abs() < 1e-12);
        let lt = check_lambda_tau(&c, &sys, &ev).unwrap();
        assert!((lt.lhs - 2.0 * (4f64.ln() / 2.0)).abs() < 1e-8, "{}", lt.lhs);
        assert_eq!(check_tau_lower_bound(&c, &sys).unwrap().verdict, Verdict::NotApplicable);
    }

    #[test]
    fn entropic_diameter_values() {
        let c = hypercube(2).unwrap();
        let d = Diameters::compute(&c).unwrap();
        let r = check_diameter_bound_ent(&c, &CurvatureEvidence::exact(1.0, "closed form"), &d);
        assert!((r[0].rhs - 2.0 * (2.0 * 2.0 * LN_2).sqrt()).abs() < 1e-12);
        assert!(r.iter().all(|x| x.verdict == Verdict::Holds));
        let c3 = hypercube(3).unwrap();
        let d3 = Diameters::compute(&c3).unwrap();
        let r3 = check_diameter_bound_ent(&c3, &CurvatureEvidence::exact(2.0 / 3.0, "closed form"), &d3);
        assert!((r3[1].rhs - 3.0 * (1.5 * 3f64.ln()).sqrt()).abs() < 1e-12);
        let two = hypercube(1).unwrap();
        let r1 = check_diameter_bound_ent(
            &two,
            &CurvatureEvidence::exact(2.0, "closed form"),
            &Diameters::compute(&two).unwrap(),
        );
        assert_eq!(r1[0].inputs["c"], 1.0);
    }

    #[test]
    fn finite_dimension_two_state() {
        let c = hypercube(1).unwrap();
        let k = bakry_emery_global(&c, 2.0).unwrap().value;
        assert!((k - 1.0).abs() < 1e-9);
        let d = Diameters::compute(&c).unwrap();
        let r = check_diameter_bound_finite_n(&c, &Mean::Arithmetic, &CurvatureEvidence::exact(k, "solver"), 2.0, &d);
        assert!((r[0].rhs - PI * 2f64.sqrt()).abs() < 1e-8);
        assert!(r.iter().all(|x| x.verdict == Verdict::Holds));
    }

    #[test]
    fn negative_estimate_makes_expander_bound_inapplicable() {
        let c = cycle(8).unwrap();
        let sys = spectral_decompose(&c);
        let r = check_expander_bounds(&c, &sys, &CurvatureEvidence::heuristic(-0.5, "test"));
        assert!(r.iter().all(|x| x.verdict == Verdict::NotApplicable));
    }

    #[test]
    fn cheeger_l1_on_cycle() {
        let c = cycle(6).unwrap();
        let b = cheeger_bounds(&c).unwrap();
        let r = check_cheeger_l1(&c, &b, 1000, 3);
        assert_eq!(r.verdict, Verdict::Holds);
        // the indicator sample is within a factor 2 of tight
        assert!(r.rhs <= 2.0 * b.upper);
    }
}
