//! Intrinsic metric `d_Γ`, diameters and the Cheeger constant.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::heat::spectral_decompose;

/// Duality-gap bound `m/t` at which the barrier method stops.
pub const GAP_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 30;
const MAX_OUTER: usize = 40;
/// Largest chain for exact Cheeger enumeration.
pub const CHEEGER_MAX_STATES: usize = 24;

#[derive(Debug, Clone, Serialize)]
pub struct DGamma {
    /// Objective of the last feasible iterate: a lower bound on `d_Γ(x,y)`
    /// within `gap` of the optimum when `converged`.
    pub value: f64,
    pub gap: f64,
    pub converged: bool,
    pub newton_steps: usize,
    /// Maximizing potential with `f(x) = 0`.
    pub potential: Vec<f64>,
}

/// `Γf(z)` for every state.
pub fn gamma_values(chain: &MarkovChain, f: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(chain.len(), |z, _| {
        0.5 * chain.neighbors(z).iter().map(|&(y, q)| q * (f[y] - f[z]).powi(2)).sum::<f64>()
    })
}

/// `d_Γ(x,y) = sup{f(y) − f(x) : Γf ≤ 1}` by a log-barrier Newton method
/// started from `f ≡ 0`.
pub fn d_gamma(chain: &MarkovChain, x: usize, y: usize) -> Result<DGamma> {
    let size = chain.len();
    if x >= size || y >= size {
        return Err(CurvError::UnknownState(x.max(y).to_string()));
    }
    if x == y {
        return Ok(DGamma { value: 0.0, gap: 0.0, converged: true, newton_steps: 0, potential: vec![0.0; size] });
    }
    // coordinates are f on X∖{x}
    let idx = |v: usize| {
        if v < x {
            Some(v)
        } else if v > x {
            Some(v - 1)
        } else {
            None
        }
    };
    let dim = size - 1;
    let cy = idx(y).expect("y differs from x");
    let m = size as f64;
    let full = |u: &DVector<f64>| DVector::from_fn(size, |v, _| idx(v).map_or(0.0, |i| u[i]));

    // barrier value, gradient and Hessian of  −t·f(y) − Σ_z ln(1 − Γf(z))
    let eval = |u: &DVector<f64>, t: f64, with_hess: bool| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let f = full(u);
        let mut val = -t * u[cy];
        let mut grad = DVector::<f64>::zeros(dim);
        grad[cy] = -t;
        let mut hess = DMatrix::<f64>::zeros(if with_hess { dim } else { 0 }, if with_hess { dim } else { 0 });
        for z in 0..size {
            let nb = chain.neighbors(z);
            let g = 0.5 * nb.iter().map(|&(w, q)| q * (f[w] - f[z]).powi(2)).sum::<f64>();
            let s = 1.0 - g;
            if s <= 0.0 {
                return None;
            }
            val -= s.ln();
            // ∇Γf(z) in full coordinates
            let mut dg = vec![(z, 0.0)];
            for &(w, q) in nb {
                let d = q * (f[w] - f[z]);
                dg.push((w, d));
                dg[0].1 -= d;
            }
            for &(v, d) in &dg {
                if let Some(i) = idx(v) {
                    grad[i] += d / s;
                }
            }
            if with_hess {
                for &(v, dv) in &dg {
                    let Some(i) = idx(v) else { continue };
                    for &(w, dw) in &dg {
                        if let Some(j) = idx(w) {
                            hess[(i, j)] += dv * dw / (s * s);
                        }
                    }
                }
                let iz = idx(z);
                for &(w, q) in nb {
                    let iw = idx(w);
                    let c = q / s;
                    if let Some(i) = iw {
                        hess[(i, i)] += c;
                    }
                    if let Some(i) = iz {
                        hess[(i, i)] += c;
                    }
                    if let (Some(i), Some(j)) = (iz, iw) {
                        hess[(i, j)] -= c;
                        hess[(j, i)] -= c;
                    }
                }
            }
        }
        Some((val, grad, hess))
    };

    let mut u = DVector::<f64>::zeros(dim);
    let mut t = 1.0;
    let mut steps = 0;
    let mut converged = false;
    for _ in 0..MAX_OUTER {
        for _ in 0..MAX_NEWTON {
            let (val, grad, hess) = eval(&u, t, true).expect("iterates stay strictly feasible");
            let Some(chol) = hess.clone().cholesky() else {
                return Err(CurvError::NumericalFailure("barrier Hessian is not positive definite".into()));
            };
            let step = -chol.solve(&grad);
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            steps += 1;
            let mut alpha = 1.0;
            loop {
                let trial = &u + &step * alpha;
                if let Some((tv, _, _)) = eval(&trial, t, false) {
                    if tv <= val - 0.25 * alpha * decrement {
                        u = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    break;
                }
            }
            if alpha < 1e-20 {
                break;
            }
        }
        if m / t <= GAP_TOL {
            converged = true;
            break;
        }
        t *= 10.0;
    }
    // scaling onto the constraint boundary keeps feasibility and raises the objective
    let mut f = full(&u);
    let peak = gamma_values(chain, &f).max();
    if peak > 0.0 {
        f /= peak.sqrt();
    }
    Ok(DGamma { value: f[y], gap: m / t, converged, newton_steps: steps, potential: f.iter().copied().collect() })
}

#[derive(Debug, Clone, Serialize)]
pub struct DGammaMatrix {
    pub values: Vec<Vec<f64>>,
    /// Pairs whose solve did not reach the gap tolerance.
    pub unconverged: Vec<(usize, usize)>,
}

/// `d_Γ` on all pairs `x < y`, mirrored.
pub fn d_gamma_matrix(chain: &MarkovChain) -> Result<DGammaMatrix> {
    let size = chain.len();
    let pairs: Vec<(usize, usize)> = (0..size).flat_map(|x| (x + 1..size).map(move |y| (x, y))).collect();
    let solved: Vec<DGamma> = pairs.par_iter().map(|&(x, y)| d_gamma(chain, x, y)).collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; size]; size];
    let mut unconverged = Vec::new();
    for (&(x, y), r) in pairs.iter().zip(&solved) {
        values[x][y] = r.value;
        values[y][x] = r.value;
        if !r.converged {
            unconverged.push((x, y));
        }
    }
    Ok(DGammaMatrix { values, unconverged })
}

/// `diam(X, d_Γ)`
pub fn diam_gamma(chain: &MarkovChain) -> Result<f64> {
    Ok(d_gamma_matrix(chain)?.values.iter().flatten().copied().fold(0.0, f64::max))
}

/// Combinatorial diameter.
pub fn diam_combinatorial(chain: &MarkovChain) -> usize {
    chain.distance_matrix().iter().flatten().copied().max().unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Cheeger {
    pub h: f64,
    /// Minimizing set `W` with `π(W) ≤ ½`.
    pub set: Vec<usize>,
    pub boundary: f64,
    pub measure: f64,
}

/// `|∂W| = Σ_{x∈W, y∉W} π(x)Q(x,y)` and `π(W)`.
pub fn cut(chain: &MarkovChain, set: &[usize]) -> (f64, f64) {
    let pi = chain.pi();
    let mut inside = vec![false; chain.len()];
    for &x in set {
        inside[x] = true;
    }
    let mut boundary = 0.0;
    for &x in set {
        for &(y, q) in chain.neighbors(x) {
            if !inside[y] {
                boundary += pi[x] * q;
            }
        }
    }
    (boundary, set.iter().map(|&x| pi[x]).sum())
}

fn guard(chain: &MarkovChain) -> Result<()> {
    if chain.len() > CHEEGER_MAX_STATES {
        return Err(CurvError::TooLarge { size: chain.len(), limit: CHEEGER_MAX_STATES });
    }
    if chain.len() < 2 {
        return Err(CurvError::InvalidParameters("the Cheeger constant needs at least two states".into()));
    }
    Ok(())
}

// subsets with π(W) ≤ ½ (ties included, with a relative allowance for rounding)
fn admissible(measure: f64) -> bool {
    measure > 0.0 && measure <= 0.5 * (1.0 + 1e-12)
}

/// Exact `h(X) = min_{π(W)≤½} |∂W|/π(W)` by Gray-code enumeration with
/// incremental cut updates. The reported value is recomputed directly on the
/// minimizing set.
pub fn cheeger(chain: &MarkovChain) -> Result<Cheeger> {
    guard(chain)?;
    let size = chain.len();
    let pi = chain.pi();
    let mut inside = vec![false; size];
    let (mut boundary, mut measure) = (0.0f64, 0.0f64);
    let mut best: Option<(f64, u32)> = None;
    let mut code = 0u32;
    for i in 1u32..(1u32 << size) {
        let v = i.trailing_zeros() as usize;
        code ^= 1 << v;
        let entering = !inside[v];
        let mut to_out = 0.0;
        let mut to_in = 0.0;
        for &(y, q) in chain.neighbors(v) {
            if inside[y] {
                to_in += pi[v] * q;
            } else {
                to_out += pi[v] * q;
            }
        }
        if entering {
            boundary += to_out - to_in;
            measure += pi[v];
        } else {
            boundary -= to_out - to_in;
            measure -= pi[v];
        }
        inside[v] = entering;
        if admissible(measure) {
            let ratio = boundary / measure;
            if best.is_none_or(|(b, _)| ratio < b - 1e-12 * b.abs().max(1.0)) {
                best = Some((ratio, code));
            }
        }
    }
    let (_, mask) = best.expect("some singleton has π ≤ ½");
    let set: Vec<usize> = (0..size).filter(|&x| mask & (1 << x) != 0).collect();
    let (boundary, measure) = cut(chain, &set);
    Ok(Cheeger { h: boundary / measure, set, boundary, measure })
}

/// Independent enumeration in binary order with direct cut evaluation.
pub fn cheeger_brute_force(chain: &MarkovChain) -> Result<Cheeger> {
    guard(chain)?;
    let size = chain.len();
    let mut best: Option<Cheeger> = None;
    for mask in 1u32..(1u32 << size) {
        let set: Vec<usize> = (0..size).filter(|&x| mask & (1 << x) != 0).collect();
        let (boundary, measure) = cut(chain, &set);
        if !admissible(measure) {
            continue;
        }
        let h = boundary / measure;
        if best.as_ref().is_none_or(|b| h < b.h) {
            best = Some(Cheeger { h, set, boundary, measure });
        }
    }
    Ok(best.expect("some singleton has π ≤ ½"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheegerBounds {
    pub lower: f64,
    /// Ratio of `set`, an upper bound on `h(X)`.
    pub upper: f64,
    pub set: Vec<usize>,
    /// Bounds coincide: exact enumeration, or spectral lower bound met by a cut.
    pub exact: bool,
    pub method: String,
}

/// `h(X)` exactly when enumeration is feasible. Otherwise `λ₁/2 ≤ h(X)` from
/// the spectral inequality and an upper bound from sweep cuts of the low
/// eigenvectors refined by single-vertex moves.
pub fn cheeger_bounds(chain: &MarkovChain) -> Result<CheegerBounds> {
    if chain.len() <= CHEEGER_MAX_STATES {
        let c = cheeger(chain)?;
        return Ok(CheegerBounds { lower: c.h, upper: c.h, set: c.set, exact: true, method: "enumeration".into() });
    }
    let sys = spectral_decompose(chain);
    let lower = sys.lambda1() / 2.0;
    let size = chain.len();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for k in 1..size.min(9) {
        let phi: Vec<f64> = (0..size).map(|x| sys.basis[(x, k)]).collect();
        for sign in [1.0, -1.0] {
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&a, &b| (sign * phi[a]).total_cmp(&(sign * phi[b])).then(a.cmp(&b)));
            let mut inside = vec![false; size];
            for &x in &order {
                inside[x] = true;
                if let Some(r) = ratio(chain, &inside) {
                    let improved = local_search(chain, inside.clone());
                    let r = ratio(chain, &improved).unwrap_or(r);
                    if best.as_ref().is_none_or(|(b, _)| r < *b) {
                        best = Some((r, improved));
                    }
                } else {
                    break;
                }
            }
        }
    }
    let (upper, inside) = best.expect("some sweep prefix is admissible");
    let set: Vec<usize> = (0..size).filter(|&x| inside[x]).collect();
    let exact = upper - lower <= 1e-12 * upper.max(1.0);
    Ok(CheegerBounds { lower, upper, set, exact, method: "spectral-sweep".into() })
}

fn ratio(chain: &MarkovChain, inside: &[bool]) -> Option<f64> {
    let set: Vec<usize> = (0..chain.len()).filter(|&x| inside[x]).collect();
    let (boundary, measure) = cut(chain, &set);
    admissible(measure).then(|| boundary / measure)
}

fn local_search(chain: &MarkovChain, mut inside: Vec<bool>) -> Vec<bool> {
    let mut current = ratio(chain, &inside).unwrap_or(f64::INFINITY);
    loop {
        let mut moved = false;
        for x in 0..chain.len() {
            inside[x] = !inside[x];
            match ratio(chain, &inside) {
                Some(r) if r < current - 1e-15 => {
                    current = r;
                    moved = true;
                }
                _ => inside[x] = !inside[x],
            }
        }
        if !moved {
            return inside;
        }
    }
}

/// `‖∇f‖₁ = ½ Σ_{x,y} |f(y) − f(x)| π(x)Q(x,y)`
pub fn gradient_l1(chain: &MarkovChain, f: &DVector<f64>) -> f64 {
    let pi = chain.pi();
    0.5 * (0..chain.len())
        .map(|x| chain.neighbors(x).iter().map(|&(y, q)| (f[y] - f[x]).abs() * pi[x] * q).sum::<f64>())
        .sum::<f64>()
}

/// `‖f‖₁ = Σ_x |f(x)| π(x)`
pub fn norm_l1(chain: &MarkovChain, f: &DVector<f64>) -> f64 {
    f.iter().zip(chain.pi().iter()).map(|(v, p)| v.abs() * p).sum()
}
