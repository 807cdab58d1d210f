//! Optimal sets for the arithmetic mean and the simplicial complex they form.
//!
//! A set `A` is optimal when some `f₀` has `Γf₀ > 0` on `A` and attains
//! equality `Γ₂f₀ − (1/n)(Δf₀)² = K_n(X)·Γf₀` at every vertex of `A`. Since each
//! pointwise form `q_x = Γ₂ − (1/n)Δ² − K_n(X)Γ` is PSD, this is a kernel
//! computation on `Σ_{x∈A} q_x`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::curvature::{bakry_emery_global, lichnerowicz_check};
use crate::error::{CurvError, Result};
use crate::forms::assemble_forms;
use crate::linalg::{sym_eigen, symmetrize};
use crate::mean::Mean;
use crate::serde_ext;

/// Relative singular-value threshold for the kernel of `Σ q_x`.
pub const KERNEL_TOL: f64 = 1e-8;
/// Largest chain accepted by the enumeration.
pub const MAX_STATES: usize = 24;

const VANISH_TOL: f64 = 1e-9;
const POSITIVE_TOL: f64 = 1e-10;
const RANDOM_DRAWS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityCertificate {
    pub set: Vec<usize>,
    pub is_optimal: bool,
    /// `f₀` with `Γf₀ > 0` on the set and zero defect there, when optimal.
    #[serde(serialize_with = "serde_ext::ext_f64_vec")]
    pub witness_f: Vec<f64>,
    pub kernel_dim: usize,
    /// Vertex where `Γ` vanishes on the whole kernel.
    pub failing_vertex: Option<usize>,
    /// Largest `q_x(f₀)/((‖q_x‖ + max(1,|K|)‖Γ_x‖)·‖f₀‖²)` over the set.
    pub max_defect: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k: f64,
}

/// Pointwise forms `q_x` and `Γ(·)(x)` at a fixed `K_n(X)`; reused across subset tests.
pub struct PointwiseForms {
    pub k: f64,
    pub per_vertex: Vec<f64>,
    q: Vec<DMatrix<f64>>,
    gamma: Vec<DMatrix<f64>>,
}

impl PointwiseForms {
    pub fn new(chain: &MarkovChain, n: f64) -> Result<Self> {
        let global = bakry_emery_global(chain, n)?;
        let k = global.value;
        let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..chain.len())
            .into_par_iter()
            .map(|x| {
                let forms = assemble_forms(chain, &Mean::Arithmetic, &chain.dirac(x), n)?;
                let q = if k.is_finite() { symmetrize(&(&forms.m - &forms.n * k)) } else { forms.m.clone() };
                Ok((q, forms.n))
            })
            .collect::<Result<_>>()?;
        let (q, gamma) = pairs.into_iter().unzip();
        Ok(PointwiseForms { k, per_vertex: global.per_vertex, q, gamma })
    }

    /// `X₀ = {x : K_n(x) = K_n(X)}`.
    pub fn zero_cells(&self) -> Vec<usize> {
        let tol = 1e-8 * self.k.abs().max(1.0);
        (0..self.per_vertex.len()).filter(|&x| self.per_vertex[x] - self.k <= tol).collect()
    }

    pub fn certify(&self, set: &[usize], seed: u64) -> OptimalityCertificate {
        let size = self.q.first().map_or(0, |m| m.nrows());
        let mut cert = OptimalityCertificate {
            set: set.to_vec(),
            is_optimal: false,
            witness_f: vec![],
            kernel_dim: 0,
            failing_vertex: None,
            max_defect: 0.0,
            k: self.k,
        };
        if !self.k.is_finite() || size < 2 {
            cert.failing_vertex = set.first().copied();
            return cert;
        }
        let mut total = DMatrix::<f64>::zeros(size, size);
        for &x in set {
            total += &self.q[x];
        }
        let (vals, vecs) = sym_eigen(&total);
        let sigma_max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // floor keeps the threshold above roundoff when every q_x vanishes
        let gamma_scale: f64 = set.iter().map(|&x| self.gamma[x].norm()).sum::<f64>() * self.k.abs().max(1.0);
        let reference = sigma_max.max(1e-6 * gamma_scale);
        let cols: Vec<usize> = (0..size).filter(|&i| vals[i].abs() <= KERNEL_TOL * reference).collect();
        let basis = DMatrix::from_fn(size, cols.len(), |r, c| vecs[(r, cols[c])]);
        cert.kernel_dim = cols.len();

        let grams: Vec<DMatrix<f64>> = set.iter().map(|&x| basis.transpose() * &self.gamma[x] * &basis).collect();
        for (i, &x) in set.iter().enumerate() {
            let scale = self.gamma[x].norm();
            if grams[i].amax() <= VANISH_TOL * scale {
                cert.failing_vertex = Some(x);
                return cert;
            }
        }
        let Some(coeffs) = positive_combination(set, &grams, &self.gamma, seed) else {
            return cert;
        };
        let mut f = &basis * coeffs;
        let top = f.amax();
        if top > 0.0 {
            f /= top;
        }
        let fnorm2 = f.norm_squared();
        cert.max_defect = set
            .iter()
            .map(|&x| {
                let scale = self.q[x].norm() + self.gamma[x].norm() * self.k.abs().max(1.0);
                (f.dot(&(&self.q[x] * &f)) / (scale * fnorm2)).max(0.0)
            })
            .fold(0.0, f64::max);
        cert.is_optimal = cert.max_defect <= 1e-8;
        cert.witness_f = f.iter().copied().collect();
        cert
    }
}

/// Coefficients `c` with `cᵀG_x c > 0` for every Gram matrix: random draws,
/// then a greedy perturbation that adds kernel directions one vertex at a time.
fn positive_combination(
    set: &[usize],
    grams: &[DMatrix<f64>],
    gamma: &[DMatrix<f64>],
    seed: u64,
) -> Option<DVector<f64>> {
    let dim = grams.first()?.nrows();
    let threshold: Vec<f64> = set.iter().map(|&x| POSITIVE_TOL * gamma[x].norm()).collect();
    let positive = |c: &DVector<f64>| {
        let nc = c.norm_squared();
        grams.iter().zip(&threshold).all(|(g, &t)| c.dot(&(g * c)) > t * nc)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_DRAWS {
        let c = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        if positive(&c) {
            return Some(c);
        }
    }
    let mut c = DVector::<f64>::zeros(dim);
    for (i, g) in grams.iter().enumerate() {
        if c.dot(&(g * &c)) > threshold[i] * c.norm_squared().max(1.0) {
            continue;
        }
        let (_, vecs) = sym_eigen(g);
        let dir = vecs.column(dim - 1).into_owned();
        let mut eps = 1.0;
        let mut done = false;
        for _ in 0..60 {
            let trial = &c + &dir * eps;
            let nt = trial.norm_squared();
            if grams[..=i].iter().zip(&threshold).all(|(h, &t)| trial.dot(&(h * &trial)) > t * nt) {
                c = trial;
                done = true;
                break;
            }
            eps *= 0.5;
        }
        if !done {
            return None;
        }
    }
    positive(&c).then_some(c)
}

/// Decides whether `set` is optimal for dimension `n`.
pub fn is_optimal_set(chain: &MarkovChain, set: &[usize], n: f64) -> Result<OptimalityCertificate> {
    check_set(chain, set)?;
    Ok(PointwiseForms::new(chain, n)?.certify(set, 0))
}

fn check_set(chain: &MarkovChain, set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return Err(CurvError::InvalidParameters("optimality needs a nonempty set".into()));
    }
    if let Some(&x) = set.iter().find(|&&x| x >= chain.len()) {
        return Err(CurvError::UnknownState(x.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalComplex {
    /// Maximal optimal sets as sorted index lists, in lexicographic order.
    pub facets: Vec<Vec<usize>>,
    pub facet_states: Vec<Vec<String>>,
    /// `max |facet| − 1`; `−1` for the empty complex.
    pub dimension: i64,
    pub zero_cells: Vec<usize>,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k: f64,
    pub sets_tested: usize,
    pub max_size: usize,
}

fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Enumerates the facets of the complex of optimal sets with at most
/// `max_size` vertices. `X₀` itself is tested first; otherwise the complex is
/// built level by level, only testing sets whose every face is optimal.
pub fn optimal_complex(chain: &MarkovChain, n: f64, max_size: usize) -> Result<OptimalComplex> {
    if chain.len() > MAX_STATES {
        return Err(CurvError::TooLarge { size: chain.len(), limit: MAX_STATES });
    }
    let forms = PointwiseForms::new(chain, n)?;
    let zero = forms.zero_cells();
    let mut tested = 0usize;
    let finish = |mut facets: Vec<Vec<usize>>, tested: usize| {
        facets.sort();
        let dimension = facets.iter().map(|f| f.len() as i64).max().unwrap_or(0) - 1;
        OptimalComplex {
            facet_states: facets.iter().map(|f| f.iter().map(|&x| chain.states()[x].clone()).collect()).collect(),
            facets,
            dimension,
            zero_cells: zero.clone(),
            k: forms.k,
            sets_tested: tested,
            max_size,
        }
    };
    if zero.len() <= max_size {
        tested += 1;
        if forms.certify(&zero, 0).is_optimal {
            return Ok(finish(vec![zero.clone()], tested));
        }
    }
    let test = |masks: Vec<u32>| -> Vec<u32> {
        let verdicts: Vec<bool> = masks.par_iter().map(|&m| forms.certify(&members(m), m as u64).is_optimal).collect();
        masks.into_iter().zip(verdicts).filter_map(|(m, ok)| ok.then_some(m)).collect()
    };
    let singles: Vec<u32> = zero.iter().map(|&x| 1u32 << x).collect();
    tested += singles.len();
    let mut level = test(singles);
    let mut facets = Vec::new();
    let mut size = 1;
    while !level.is_empty() {
        if size >= max_size {
            facets.extend(level.iter().map(|&m| members(m)));
            break;
        }
        let known: HashSet<u32> = level.iter().copied().collect();
        let mut candidates = Vec::new();
        for &s in &level {
            let top = 31 - s.leading_zeros() as usize;
            for &y in zero.iter().filter(|&&y| y > top) {
                let t = s | (1 << y);
                if members(t).iter().all(|&z| known.contains(&(t & !(1 << z)))) {
                    candidates.push(t);
                }
            }
        }
        candidates.sort_unstable();
        tested += candidates.len();
        let next = test(candidates);
        for &s in &level {
            if !next.iter().any(|&t| t & s == s) {
                facets.push(members(s));
            }
        }
        level = next;
        size += 1;
    }
    Ok(finish(facets, tested))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    /// Whether the whole state space is an optimal set.
    pub equilibrium_optimal: bool,
    /// `λ₁ = K_∞(X)`.
    pub lichnerowicz_sharp: bool,
    pub agree: bool,
    pub lambda1: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k_inf: f64,
}

/// Compares optimality of the equilibrium measure with Lichnerowicz sharpness at `n = ∞`.
pub fn check_equilibrium_optimality(chain: &MarkovChain) -> Result<EquilibriumReport> {
    let all: Vec<usize> = (0..chain.len()).collect();
    let cert = is_optimal_set(chain, &all, f64::INFINITY)?;
    let lich = lichnerowicz_check(chain, &Mean::Arithmetic, 0)?;
    Ok(EquilibriumReport {
        equilibrium_optimal: cert.is_optimal,
        lichnerowicz_sharp: lich.sharp,
        agree: cert.is_optimal == lich.sharp,
        lambda1: lich.lambda1,
        k_inf: lich.k_inf,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnionReport {
    pub distance: usize,
    pub precondition_met: bool,
    pub first_optimal: bool,
    pub second_optimal: bool,
    pub union_optimal: bool,
    /// `None` when the preconditions fail.
    pub holds: Option<bool>,
}

/// Two optimal sets at distance at least 5 have an optimal union.
pub fn check_union_proposition(chain: &MarkovChain, a0: &[usize], a1: &[usize], n: f64) -> Result<UnionReport> {
    check_set(chain, a0)?;
    check_set(chain, a1)?;
    let dist = chain.distance_matrix();
    let distance = a0.iter().flat_map(|&x| a1.iter().map(move |&y| (x, y))).map(|(x, y)| dist[x][y]).min().unwrap_or(0);
    let forms = PointwiseForms::new(chain, n)?;
    let first_optimal = forms.certify(a0, 0).is_optimal;
    let second_optimal = forms.certify(a1, 1).is_optimal;
    let mut union: Vec<usize> = a0.iter().chain(a1).copied().collect();
    union.sort_unstable();
    union.dedup();
    let union_optimal = forms.certify(&union, 2).is_optimal;
    let precondition_met = distance >= 5 && first_optimal && second_optimal;
    Ok(UnionReport {
        distance,
        precondition_met,
        first_optimal,
        second_optimal,
        union_optimal,
        holds: precondition_met.then_some(union_optimal),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::curvature_of_measure;
    use crate::generate::{cycle, hypercube, path};

    #[test]
    fn single_minimizing_vertex_is_optimal() {
        let c = cycle(6).unwrap();
        let cert = is_optimal_set(&c, &[0], f64::INFINITY).unwrap();
        assert!(cert.is_optimal);
        assert!(cert.max_defect <= 1e-8);
    }

    #[test]
    fn whole_cycle_is_not_optimal() {
        let c = cycle(6).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let cert = is_optimal_set(&c, &all, f64::INFINITY).unwrap();
        assert!(!cert.is_optimal);
        assert!(cert.failing_vertex.is_some());
    }

    #[test]
    fn cycle_complement_of_four_is_a_progression() {
        let c = cycle(6).unwrap();
        let cert = is_optimal_set(&c, &[2, 3], f64::INFINITY).unwrap();
        assert!(cert.is_optimal);
        let f = &cert.witness_f;
        // second differences vanish on the arc 1..4
        for x in 2..4 {
            assert!((f[x + 1] - 2.0 * f[x] + f[x - 1]).abs() < 1e-6, "{f:?}");
        }
    }

    #[test]
    fn two_state_facet_is_everything() {
        let c = hypercube(1).unwrap();
        let cx = optimal_complex(&c, f64::INFINITY, 24).unwrap();
        assert_eq!(cx.facets, vec![vec![0, 1]]);
        assert_eq!(cx.dimension, 1);
    }

    #[test]
    fn cycle_seven_complex() {
        let c = cycle(7).unwrap();
        let cx = optimal_complex(&c, f64::INFINITY, 24).unwrap();
        assert_eq!(cx.facets.len(), 7);
        assert_eq!(cx.dimension, 2);
        for f in &cx.facets {
            assert_eq!(f.len(), 3);
        }
    }

    #[test]
    fn union_of_far_singletons() {
        let c = cycle(16).unwrap();
        let r = check_union_proposition(&c, &[0], &[8], f64::INFINITY).unwrap();
        assert!(r.precondition_met);
        assert_eq!(r.holds, Some(true));
        let near = check_union_proposition(&c, &[0], &[4], f64::INFINITY).unwrap();
        assert!(!near.precondition_met);
        assert_eq!(near.holds, None);
    }

    #[test]
    fn optimal_curvature_without_optimal_support() {
        // path endpoints and interior vertices have different curvature
        let c = path(8).unwrap();
        let forms = PointwiseForms::new(&c, f64::INFINITY).unwrap();
        let (x, y) = {
            let zero = forms.zero_cells();
            let x = zero[0];
            let y = (0..8)
                .filter(|&y| forms.per_vertex[y] > forms.k + 1e-6)
                .find(|&y| c.distance_matrix()[x][y] >= 5)
                .expect("far vertex with larger curvature");
            (x, y)
        };
        let rho = c.indicator(&[x, y]);
        let k = curvature_of_measure(&c, &Mean::Arithmetic, &rho, f64::INFINITY).unwrap().value;
        assert!((k - forms.k).abs() < 1e-8);
        assert!(!forms.certify(&[x, y], 0).is_optimal);
    }

    #[test]
    fn too_large_is_rejected() {
        let c = cycle(25).unwrap();
        assert!(matches!(optimal_complex(&c, f64::INFINITY, 24), Err(CurvError::TooLarge { .. })));
    }
}
