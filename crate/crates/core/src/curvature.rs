//! Optimal constants `K_n(ρ) = sup{K : M − K·N ⪰ 0}` of the curvature-dimension
//! inequality, for a fixed measure, for vertices and for the whole chain.
//!
//! The primary solver splits `N` into its null space `U` and range `V`. `K` is
//! `−∞` unless `M` is PSD on `U` and the coupling `VᵀMU` stays in the range of
//! `UᵀMU`; otherwise it is the smallest eigenvalue of the pencil formed by the
//! Schur complement `VᵀMV − B(UᵀMU)⁺Bᵀ` against `VᵀNV`. A bisection on `K` with an
//! eigenvalue PSD test confirms the value.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::forms::{assemble_forms_local, FormPair};
use crate::heat::spectral_decompose;
use crate::linalg::{min_eigenvalue, spectral_split, sym_eigen};
use crate::mean::Mean;
use crate::serde_ext;

/// Eigenvalues of `N` below this fraction of its largest one count as zero.
pub const NULL_TOL: f64 = 1e-12;
/// PSD floor for the bisection test, relative to `‖M‖ + |K|‖N‖`.
pub const PSD_FLOOR: f64 = 1e-11;
/// Required agreement between the pencil and bisection values.
pub const AGREEMENT_TOL: f64 = 1e-8;
/// `|K|` beyond which bisection reports `±∞`.
pub const K_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Pencil,
    Bisection,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    #[serde(serialize_with = "serde_ext::ext_f64_vec")]
    pub bracket: Vec<f64>,
    pub iterations: usize,
    pub null_dim: usize,
    #[serde(serialize_with = "serde_ext::ext_f64_opt")]
    pub bisection_value: Option<f64>,
    /// Gap between the two smallest pencil eigenvalues (`+∞` if only one).
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub eigen_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureResult {
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub value: f64,
    /// Function attaining (near-)equality, defined on all states.
    #[serde(serialize_with = "serde_ext::dvector")]
    pub witness: DVector<f64>,
    pub method: SolveMethod,
    pub diagnostics: Diagnostics,
}

/// Outcome of the pencil solver in local coordinates.
#[derive(Debug, Clone)]
pub struct PencilSolution {
    pub value: f64,
    pub witness: DVector<f64>,
    pub null_dim: usize,
    pub eigen_gap: f64,
}

/// `sup{K : M − K·N ⪰ 0}` by the null-space / Schur-complement reduction.
pub fn pencil_curvature(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<PencilSolution> {
    let size = m.nrows();
    let split = spectral_split(n, NULL_TOL);
    let v = &split.range_basis;
    let u = &split.null_basis;
    let null_dim = u.ncols();
    if v.ncols() == 0 {
        return Ok(PencilSolution {
            value: f64::INFINITY,
            witness: DVector::zeros(size),
            null_dim,
            eigen_gap: f64::INFINITY,
        });
    }
    if split.range_values.iter().any(|&d| d < 0.0) {
        return Err(CurvError::NumericalFailure("N has a negative eigenvalue".into()));
    }
    let scale_m = m.norm().max(f64::MIN_POSITIVE);
    let neg_inf =
        PencilSolution { value: f64::NEG_INFINITY, witness: DVector::zeros(size), null_dim, eigen_gap: f64::INFINITY };

    let mvv = v.transpose() * m * v;
    let (schur, coupling) = if null_dim > 0 {
        let muu = u.transpose() * m * u;
        let b = v.transpose() * m * u;
        let (vals, vecs) = sym_eigen(&muu);
        let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if vals[0] < -1e-10 * scale_m {
            let mut res = neg_inf;
            res.witness = u * vecs.column(0);
            return Ok(res);
        }
        // coupling into the kernel of UᵀMU makes the form unbounded below
        let ker_tol = 1e-10 * top.max(scale_m);
        for k in 0..vals.len() {
            if vals[k].abs() <= ker_tol {
                let leak = (&b * vecs.column(k)).norm();
                if leak > 1e-8 * scale_m {
                    return Ok(neg_inf);
                }
            }
        }
        let mut pinv = DMatrix::<f64>::zeros(null_dim, null_dim);
        for k in 0..vals.len() {
            if vals[k].abs() > ker_tol {
                let c = vecs.column(k);
                pinv += (c * c.transpose()) / vals[k];
            }
        }
        (&mvv - &b * &pinv * b.transpose(), Some((b, pinv)))
    } else {
        (mvv, None)
    };

    let dinv: Vec<f64> = split.range_values.iter().map(|d| 1.0 / d.sqrt()).collect();
    let r = schur.nrows();
    let reduced = DMatrix::from_fn(r, r, |i, j| dinv[i] * schur[(i, j)] * dinv[j]);
    let (vals, vecs) = sym_eigen(&reduced);
    let y = DVector::from_iterator(r, (0..r).map(|i| dinv[i] * vecs[(i, 0)]));
    let mut f = v * &y;
    if let Some((b, pinv)) = coupling {
        let w = -(&pinv * (b.transpose() * &y));
        f += u * w;
    }
    Ok(PencilSolution {
        value: vals[0],
        witness: f,
        null_dim,
        eigen_gap: if r > 1 { vals[1] - vals[0] } else { f64::INFINITY },
    })
}

fn is_psd_at(m: &DMatrix<f64>, n: &DMatrix<f64>, k: f64, scale_m: f64, scale_n: f64) -> bool {
    let floor = -PSD_FLOOR * (scale_m + k.abs() * scale_n);
    min_eigenvalue(&(m - n * k)) >= floor
}

/// Bisection on `K` with the PSD test. Returns `(value, iterations, bracket)`.
pub fn bisection_curvature(m: &DMatrix<f64>, n: &DMatrix<f64>, q_min: f64) -> (f64, usize, [f64; 2]) {
    let scale_m = m.norm();
    let scale_n = n.norm();
    let mut lo = -4.0 / q_min.max(1e-12);
    let mut hi = 4.0;
    let mut iterations = 0;
    while !is_psd_at(m, n, lo, scale_m, scale_n) {
        iterations += 1;
        hi = lo;
        lo *= 2.0;
        if lo < -K_CAP {
            return (f64::NEG_INFINITY, iterations, [f64::NEG_INFINITY, hi]);
        }
    }
    while is_psd_at(m, n, hi, scale_m, scale_n) {
        iterations += 1;
        lo = hi;
        hi *= 2.0;
        if hi > K_CAP {
            return (f64::INFINITY, iterations, [lo, f64::INFINITY]);
        }
    }
    let bracket = [lo, hi];
    while hi - lo > 1e-11 * hi.abs().max(lo.abs()).max(1.0) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if is_psd_at(m, n, mid, scale_m, scale_n) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), iterations, bracket)
}

fn agree(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= AGREEMENT_TOL * a.abs().max(1.0)
}

/// Solves a form pair with both methods; `NumericalFailure` if they disagree.
pub fn solve_forms(forms: &FormPair, chain: &MarkovChain) -> Result<CurvatureResult> {
    let pencil = pencil_curvature(&forms.m, &forms.n)?;
    let (bis, iterations, bracket) = bisection_curvature(&forms.m, &forms.n, chain.stats().q_min);
    if !agree(pencil.value, bis) {
        return Err(CurvError::NumericalFailure(format!(
            "pencil value {} and bisection value {} disagree beyond {AGREEMENT_TOL:e}",
            pencil.value, bis
        )));
    }
    Ok(CurvatureResult {
        value: pencil.value,
        witness: forms.lift(&pencil.witness, chain.len()),
        method: SolveMethod::Pencil,
        diagnostics: Diagnostics {
            bracket: bracket.to_vec(),
            iterations,
            null_dim: pencil.null_dim,
            bisection_value: Some(bis),
            eigen_gap: pencil.eigen_gap,
        },
    })
}

/// `K_n(ρ)` for the given mean, confirmed by bisection.
pub fn curvature_of_measure(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, n: f64) -> Result<CurvatureResult> {
    if chain.len() == 1 {
        log::warn!("single-state chain: curvature is +∞");
    }
    let forms = assemble_forms_local(chain, mean, rho, n)?;
    solve_forms(&forms, chain)
}

/// `K_n(ρ)` by the pencil solver only.
pub fn curvature_of_measure_fast(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    n: f64,
) -> Result<CurvatureResult> {
    let forms = assemble_forms_local(chain, mean, rho, n)?;
    let pencil = pencil_curvature(&forms.m, &forms.n)?;
    Ok(CurvatureResult {
        value: pencil.value,
        witness: forms.lift(&pencil.witness, chain.len()),
        method: SolveMethod::Pencil,
        diagnostics: Diagnostics {
            bracket: vec![],
            iterations: 0,
            null_dim: pencil.null_dim,
            bisection_value: None,
            eigen_gap: pencil.eigen_gap,
        },
    })
}

/// Bakry-Émery curvature `K_n(x)`: arithmetic mean at the Dirac measure `δ_x`,
/// solved on the ball `B₂(x)`.
pub fn bakry_emery_vertex(chain: &MarkovChain, x: usize, n: f64) -> Result<CurvatureResult> {
    if x >= chain.len() {
        return Err(CurvError::UnknownState(x.to_string()));
    }
    curvature_of_measure(chain, &Mean::Arithmetic, &chain.dirac(x), n)
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalCurvature {
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub value: f64,
    pub argmin: usize,
    #[serde(serialize_with = "serde_ext::ext_f64_vec")]
    pub per_vertex: Vec<f64>,
}

/// `K_n(X) = min_x K_n(x)` for the arithmetic mean.
pub fn bakry_emery_global(chain: &MarkovChain, n: f64) -> Result<GlobalCurvature> {
    let per_vertex: Vec<f64> = (0..chain.len())
        .into_par_iter()
        .map(|x| bakry_emery_vertex(chain, x, n).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut argmin = 0;
    for (x, &k) in per_vertex.iter().enumerate() {
        if k < per_vertex[argmin] {
            argmin = x;
        }
    }
    Ok(GlobalCurvature { value: per_vertex[argmin], argmin, per_vertex })
}

/// Smallest positive eigenvalue of `−Δ`.
pub fn lambda1(chain: &MarkovChain) -> f64 {
    spectral_decompose(chain).lambda1()
}

#[derive(Debug, Clone, Serialize)]
pub struct LichnerowiczReport {
    pub mean: String,
    pub lambda1: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k_inf: f64,
    /// `true` when `k_inf` is exact (arithmetic mean), `false` when it is an
    /// optimizer upper bound on the infimum over measures.
    pub exact: bool,
    pub sharp: bool,
}

/// Compares `λ₁` with `K_∞(X)`. For non-arithmetic means `K_∞(X)` comes from
/// the multi-start optimizer and is labeled heuristic.
pub fn lichnerowicz_check(chain: &MarkovChain, mean: &Mean, seed: u64) -> Result<LichnerowiczReport> {
    let l1 = lambda1(chain);
    let (k, exact) = match mean {
        Mean::Arithmetic => (bakry_emery_global(chain, f64::INFINITY)?.value, true),
        _ => {
            let opts = crate::entropic::EntropicOptions { seed, ..Default::default() };
            (crate::entropic::curvature_estimate(chain, mean, f64::INFINITY, &opts)?.k_hat, false)
        }
    };
    if exact && k > l1 + 1e-9 {
        return Err(CurvError::NumericalFailure(format!("K_∞(X) = {k} exceeds λ₁ = {l1}")));
    }
    Ok(LichnerowiczReport { mean: mean.name().to_string(), lambda1: l1, k_inf: k, exact, sharp: (l1 - k) <= 1e-6 })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    /// `s = 1/n`
    pub s: f64,
    #[serde(serialize_with = "serde_ext::ext_f64")]
    pub k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureProfile {
    pub points: Vec<ProfilePoint>,
    /// Largest failure of midpoint concavity over consecutive triples.
    pub concavity_violation: f64,
    pub concave: bool,
}

/// `K` as a function of `s = 1/n` on the given grid of dimensions.
pub fn curvature_profile(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    n_grid: &[f64],
) -> Result<CurvatureProfile> {
    let mut points: Vec<ProfilePoint> = n_grid
        .iter()
        .map(|&n| {
            let s = crate::forms::inverse_dim(n)?;
            Ok(ProfilePoint { s, k: curvature_of_measure(chain, mean, rho, n)?.value })
        })
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.s.total_cmp(&b.s));
    let mut violation: f64 = 0.0;
    for w in points.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if !(a.k.is_finite() && b.k.is_finite() && c.k.is_finite()) || c.s == a.s {
            continue;
        }
        let lam = (b.s - a.s) / (c.s - a.s);
        let chord = (1.0 - lam) * a.k + lam * c.k;
        violation = violation.max(chord - b.k);
    }
    Ok(CurvatureProfile { points, concavity_violation: violation, concave: violation <= 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cycle, hypercube};

    #[test]
    fn two_state_vertex() {
        let c = hypercube(1).unwrap();
        let k = bakry_emery_vertex(&c, 0, f64::INFINITY).unwrap();
        assert!((k.value - 2.0).abs() < 1e-10);
        let k3 = bakry_emery_vertex(&c, 0, 3.0).unwrap();
        assert!((k3.value - 2.0 * (1.0 - 1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn cycle_vertex_is_flat() {
        let c = cycle(6).unwrap();
        for x in 0..6 {
            assert!(bakry_emery_vertex(&c, x, f64::INFINITY).unwrap().value.abs() < 1e-9);
        }
    }

    #[test]
    fn hypercube_three() {
        let c = hypercube(3).unwrap();
        let g = bakry_emery_global(&c, f64::INFINITY).unwrap();
        for k in g.per_vertex {
            assert!((k - 2.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn equilibrium_measure_gives_lambda1() {
        let c = cycle(5).unwrap();
        let l1 = lambda1(&c);
        for mean in [Mean::Arithmetic, Mean::Logarithmic, Mean::Geometric] {
            let k = curvature_of_measure(&c, &mean, &c.ones(), f64::INFINITY).unwrap();
            assert!((k.value - l1).abs() < 1e-9, "{mean}");
        }
    }

    #[test]
    fn zero_measure_is_unconstrained() {
        let c = cycle(5).unwrap();
        let r = curvature_of_measure(&c, &Mean::Arithmetic, &DVector::zeros(5), f64::INFINITY).unwrap();
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn negative_definite_kernel_block_gives_neg_inf() {
        // N = diag(1, 0), M = diag(0, −1)
        let n = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0]));
        assert_eq!(pencil_curvature(&m, &n).unwrap().value, f64::NEG_INFINITY);
        assert_eq!(bisection_curvature(&m, &n, 0.5).0, f64::NEG_INFINITY);
    }
}
