//! Matrices of the two quadratic forms behind the curvature-dimension inequality:
//! `fᵀMf = ⟨ρ, Γ_{2,ρ}f − (1/n)(Δf)²⟩_π` and `fᵀNf = ⟨ρ, Γ_ρ f⟩_π`.
//!
//! With `G_x = Σ_y ∂₁θ(ρ_x,ρ_y)Q(x,y)(e_y − e_x)(e_y − e_x)ᵀ` (so `Γ_ρ f(x) = fᵀG_x f`)
//! and self-adjointness of Δ in `ℓ²(π)`:
//!
//! ```text
//! N = Σ_x ρ_x π_x G_x
//! M = ½ Σ_x (Δρ)_x π_x G_x − ½(NL + LᵀN) − (1/n) Lᵀ diag(ρπ) L
//! ```
//!
//! `assemble_forms_by_basis` builds the same matrices by applying the bilinear
//! operators to basis vectors and serves as the reference.

use nalgebra::{DMatrix, DVector};

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::gamma::{check_len, check_measure, gamma2_rho_raw, gamma_rho_raw, laplacian_raw};
use crate::mean::Mean;

/// Validates a dimension parameter `n ∈ (0, ∞]` and returns `1/n`.
pub fn inverse_dim(n: f64) -> Result<f64> {
    if n.is_nan() || n <= 0.0 {
        return Err(CurvError::InvalidParameters(format!("dimension n must lie in (0, ∞], got {n}")));
    }
    Ok(if n.is_infinite() { 0.0 } else { 1.0 / n })
}

#[derive(Debug, Clone)]
pub struct FormPair {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// Global state index of each matrix coordinate.
    pub vertices: Vec<usize>,
    pub mean: String,
    pub rho: DVector<f64>,
    pub dim: f64,
}

impl FormPair {
    /// Extends a local vector to a function on all states (zero elsewhere).
    pub fn lift(&self, local: &DVector<f64>, size: usize) -> DVector<f64> {
        let mut f = DVector::zeros(size);
        for (k, &x) in self.vertices.iter().enumerate() {
            f[x] = local[k];
        }
        f
    }

    /// Restricts a global function to the local coordinates.
    pub fn restrict(&self, f: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.vertices.len(), self.vertices.iter().map(|&x| f[x]))
    }
}

/// Forms on all states.
pub fn assemble_forms(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, n: f64) -> Result<FormPair> {
    let all: Vec<usize> = (0..chain.len()).collect();
    assemble_on(chain, mean, rho, n, all)
}

/// Forms restricted to `B₂(supp ρ)`, outside of which both vanish.
pub fn assemble_forms_local(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, n: f64) -> Result<FormPair> {
    check_len(chain, rho)?;
    let mut inside = vec![false; chain.len()];
    for x in (0..chain.len()).filter(|&x| rho[x] != 0.0) {
        inside[x] = true;
    }
    for _ in 0..2 {
        let frontier: Vec<usize> = (0..chain.len()).filter(|&x| inside[x]).collect();
        for x in frontier {
            for &(y, _) in chain.neighbors(x) {
                inside[y] = true;
            }
        }
    }
    let vertices: Vec<usize> = (0..chain.len()).filter(|&x| inside[x]).collect();
    assemble_on(chain, mean, rho, n, vertices)
}

fn assemble_on(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, n: f64, vertices: Vec<usize>) -> Result<FormPair> {
    check_measure(chain, mean, rho)?;
    let inv_n = inverse_dim(n)?;
    let size = chain.len();
    let m_loc = vertices.len();
    let mut pos = vec![usize::MAX; size];
    for (k, &x) in vertices.iter().enumerate() {
        pos[x] = k;
    }
    let pi = chain.pi();
    let lr = laplacian_raw(chain, rho);

    let mut nmat = DMatrix::<f64>::zeros(m_loc, m_loc);
    let mut mmat = DMatrix::<f64>::zeros(m_loc, m_loc);
    let add_g = |mat: &mut DMatrix<f64>, x: usize, weight: f64| {
        if weight == 0.0 {
            return;
        }
        let i = pos[x];
        for &(y, q) in chain.neighbors(x) {
            let a = weight * mean.d1_raw(rho[x], rho[y]) * q;
            let j = pos[y];
            mat[(i, i)] += a;
            mat[(j, j)] += a;
            mat[(i, j)] -= a;
            mat[(j, i)] -= a;
        }
    };
    for x in 0..size {
        add_g(&mut nmat, x, rho[x] * pi[x]);
        add_g(&mut mmat, x, 0.5 * lr[x] * pi[x]);
    }

    // N L, using the sparsity of the generator rows
    let lmat = chain.laplacian_matrix();
    let mut nl = DMatrix::<f64>::zeros(m_loc, m_loc);
    for (kk, &k) in vertices.iter().enumerate() {
        let diag = lmat[(k, k)];
        let row: Vec<(usize, f64)> = std::iter::once((kk, diag))
            .chain(chain.neighbors(k).iter().filter(|(j, _)| pos[*j] != usize::MAX).map(|&(j, q)| (pos[j], q)))
            .collect();
        for i in 0..m_loc {
            let nik = nmat[(i, kk)];
            if nik == 0.0 {
                continue;
            }
            for &(j, l) in &row {
                nl[(i, j)] += nik * l;
            }
        }
    }
    mmat -= (&nl + nl.transpose()) * 0.5;

    if inv_n > 0.0 {
        for x in 0..size {
            let w = rho[x] * pi[x];
            if w == 0.0 {
                continue;
            }
            let row: Vec<(usize, f64)> = std::iter::once((pos[x], lmat[(x, x)]))
                .chain(chain.neighbors(x).iter().map(|&(y, q)| (pos[y], q)))
                .collect();
            for &(i, li) in &row {
                for &(j, lj) in &row {
                    mmat[(i, j)] -= inv_n * w * li * lj;
                }
            }
        }
    }

    Ok(FormPair {
        m: symmetrize_exact(mmat),
        n: symmetrize_exact(nmat),
        vertices,
        mean: mean.name().to_string(),
        rho: rho.clone(),
        dim: n,
    })
}

fn symmetrize_exact(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Reference assembly: `M_ij` and `N_ij` from the bilinear operators applied to
/// standard basis vectors.
pub fn assemble_forms_by_basis(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, n: f64) -> Result<FormPair> {
    check_measure(chain, mean, rho)?;
    let inv_n = inverse_dim(n)?;
    let size = chain.len();
    let basis: Vec<DVector<f64>> = (0..size)
        .map(|i| {
            let mut e = DVector::zeros(size);
            e[i] = 1.0;
            e
        })
        .collect();
    let lap: Vec<DVector<f64>> = basis.iter().map(|e| laplacian_raw(chain, e)).collect();
    let mut mmat = DMatrix::zeros(size, size);
    let mut nmat = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in i..size {
            let g2 = gamma2_rho_raw(chain, mean, rho, &basis[i], &basis[j]);
            let g = gamma_rho_raw(chain, mean, rho, &basis[i], &basis[j]);
            let dd = lap[i].component_mul(&lap[j]);
            let mv = chain.inner(rho, &(g2 - dd * inv_n));
            let nv = chain.inner(rho, &g);
            mmat[(i, j)] = mv;
            mmat[(j, i)] = mv;
            nmat[(i, j)] = nv;
            nmat[(j, i)] = nv;
        }
    }
    Ok(FormPair {
        m: mmat,
        n: nmat,
        vertices: (0..size).collect(),
        mean: mean.name().to_string(),
        rho: rho.clone(),
        dim: n,
    })
}

/// Direct scalar evaluation `(⟨ρ, Γ_{2,ρ}f − (1/n)(Δf)²⟩_π, ⟨ρ, Γ_ρ f⟩_π)`.
pub fn evaluate_forms(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    n: f64,
    f: &DVector<f64>,
) -> Result<(f64, f64)> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    let inv_n = inverse_dim(n)?;
    let lf = laplacian_raw(chain, f);
    let g2 = gamma2_rho_raw(chain, mean, rho, f, f);
    let g = gamma_rho_raw(chain, mean, rho, f, f);
    Ok((chain.inner(rho, &(g2 - lf.component_mul(&lf) * inv_n)), chain.inner(rho, &g)))
}

/// Gradient in ρ of `fᵀM(ρ)f − K·fᵀN(ρ)f` for a fixed `f`.
pub fn form_gradient(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    n: f64,
    f: &DVector<f64>,
    k: f64,
) -> Result<DVector<f64>> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    let inv_n = inverse_dim(n)?;
    let size = chain.len();
    let pi = chain.pi();
    let h = laplacian_raw(chain, f);
    let lr = laplacian_raw(chain, rho);
    let mut phi = DVector::<f64>::zeros(size);
    let mut psi = DVector::<f64>::zeros(size);
    let mut grad = DVector::<f64>::zeros(size);
    for x in 0..size {
        let w_phi = 0.5 * lr[x] * pi[x] - k * rho[x] * pi[x];
        let w_psi = -rho[x] * pi[x];
        for &(y, q) in chain.neighbors(x) {
            let df = f[y] - f[x];
            let a = q * df * df;
            let b = q * df * (h[y] - h[x]);
            let d1 = mean.d1_raw(rho[x], rho[y]);
            phi[x] += d1 * a;
            psi[x] += d1 * b;
            let inner = w_phi * a + w_psi * b;
            if inner != 0.0 {
                grad[x] += mean.d11_raw(rho[x], rho[y]) * inner;
                grad[y] += mean.d12_raw(rho[x], rho[y]) * inner;
            }
        }
    }
    // derivative of Δρ enters through Lᵀ
    let weighted = DVector::from_iterator(size, (0..size).map(|x| pi[x] * phi[x]));
    grad += chain.laplacian_matrix().transpose() * weighted * 0.5;
    for i in 0..size {
        grad[i] -= pi[i] * psi[i] + inv_n * pi[i] * h[i] * h[i] + k * pi[i] * phi[i];
    }
    Ok(grad)
}
