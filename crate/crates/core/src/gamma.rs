//! Discrete vector calculus and the ρ-modulated carré du champ operators.
//!
//! Functions and measures are `DVector`s indexed like the chain's states.
//! Measures are densities against π.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::mean::{DomainClass, Mean};

/// Antisymmetric function on ordered pairs, supported on the adjacency relation.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    values: DMatrix<f64>,
}

impl VectorField {
    pub fn new(chain: &MarkovChain, values: DMatrix<f64>) -> Result<Self> {
        let n = chain.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(CurvError::ShapeMismatch { expected: n, got: values.nrows() });
        }
        let scale = values.amax().max(1.0);
        for x in 0..n {
            for y in 0..n {
                let v = values[(x, y)];
                if !v.is_finite() {
                    return Err(CurvError::InvalidParameters(format!("non-finite field value at ({x},{y})")));
                }
                if v != 0.0 && !chain.is_adjacent(x, y) {
                    return Err(CurvError::InvalidParameters(format!("field is nonzero on non-edge ({x},{y})")));
                }
                if (v + values[(y, x)]).abs() > 1e-12 * scale {
                    return Err(CurvError::InvalidParameters(format!("field is not antisymmetric at ({x},{y})")));
                }
            }
        }
        Ok(VectorField { values })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

pub(crate) fn check_len(chain: &MarkovChain, f: &DVector<f64>) -> Result<()> {
    if f.len() != chain.len() {
        return Err(CurvError::ShapeMismatch { expected: chain.len(), got: f.len() });
    }
    Ok(())
}

/// Checks that `rho` is a valid measure for `mean`: finite, nonnegative, and
/// strictly positive when the mean has open domain.
pub fn check_measure(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>) -> Result<()> {
    check_len(chain, rho)?;
    for (x, &r) in rho.iter().enumerate() {
        if !r.is_finite() || r < 0.0 {
            return Err(CurvError::NegativeInput { r, s: r });
        }
        if r == 0.0 && mean.domain_class() == DomainClass::Open {
            return Err(CurvError::DomainError(format!(
                "ρ vanishes at state '{}' but the {} mean needs a strictly positive measure",
                chain.states()[x],
                mean.name()
            )));
        }
    }
    Ok(())
}

/// `Δf(x) = Σ_y Q(x,y)(f(y) − f(x))`
pub fn laplacian(chain: &MarkovChain, f: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(chain, f)?;
    Ok(laplacian_raw(chain, f))
}

pub(crate) fn laplacian_raw(chain: &MarkovChain, f: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        chain.len(),
        (0..chain.len()).map(|x| chain.neighbors(x).iter().map(|&(y, q)| q * (f[y] - f[x])).sum()),
    )
}

pub fn gradient_field(chain: &MarkovChain, f: &DVector<f64>) -> Result<VectorField> {
    check_len(chain, f)?;
    let n = chain.len();
    let mut v = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, _) in chain.neighbors(x) {
            v[(x, y)] = f[y] - f[x];
        }
    }
    Ok(VectorField { values: v })
}

/// `div V(x) = Σ_y V(x,y) Q(x,y)`
pub fn divergence(chain: &MarkovChain, v: &VectorField) -> Result<DVector<f64>> {
    if v.values.nrows() != chain.len() {
        return Err(CurvError::ShapeMismatch { expected: chain.len(), got: v.values.nrows() });
    }
    Ok(DVector::from_iterator(
        chain.len(),
        (0..chain.len()).map(|x| chain.neighbors(x).iter().map(|&(y, q)| v.get(x, y) * q).sum()),
    ))
}

/// `⟨V₁, V₂⟩_π = ½ Σ_{x,y} V₁ V₂ Q(x,y) π(x)`
pub fn field_inner(chain: &MarkovChain, v1: &VectorField, v2: &VectorField) -> f64 {
    let pi = chain.pi();
    let mut s = 0.0;
    for x in 0..chain.len() {
        for &(y, q) in chain.neighbors(x) {
            s += v1.get(x, y) * v2.get(x, y) * q * pi[x];
        }
    }
    0.5 * s
}

/// `⟨V₁, V₂⟩_ρ = ½ Σ_{x,y} θ(ρ_x,ρ_y) V₁ V₂ Q(x,y) π(x)`
pub fn field_inner_rho(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    v1: &VectorField,
    v2: &VectorField,
) -> Result<f64> {
    check_measure(chain, mean, rho)?;
    let pi = chain.pi();
    let mut s = 0.0;
    for x in 0..chain.len() {
        for &(y, q) in chain.neighbors(x) {
            s += mean.eval_raw(rho[x], rho[y]) * v1.get(x, y) * v2.get(x, y) * q * pi[x];
        }
    }
    Ok(0.5 * s)
}

/// `⟨f, g⟩_{ρ·π} = Σ f g ρ π`
pub fn inner_rho_pi(chain: &MarkovChain, rho: &DVector<f64>, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let pi = chain.pi();
    (0..chain.len()).map(|x| f[x] * g[x] * rho[x] * pi[x]).sum()
}

/// `Δ_ρ f(x) = Σ_y 2∂₁θ(ρ_x,ρ_y)(f(y) − f(x))Q(x,y)`
pub fn rho_laplacian(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    Ok(DVector::from_iterator(
        chain.len(),
        (0..chain.len()).map(|x| {
            chain.neighbors(x).iter().map(|&(y, q)| 2.0 * mean.d1_raw(rho[x], rho[y]) * (f[y] - f[x]) * q).sum()
        }),
    ))
}

/// `Γ_ρ(f,g)(x) = Σ_y ∂₁θ(ρ_x,ρ_y)(f(y) − f(x))(g(y) − g(x))Q(x,y)`
pub fn gamma_rho(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    check_len(chain, g)?;
    Ok(gamma_rho_raw(chain, mean, rho, f, g))
}

pub(crate) fn gamma_rho_raw(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(
        chain.len(),
        (0..chain.len()).map(|x| {
            chain
                .neighbors(x)
                .iter()
                .map(|&(y, q)| mean.d1_raw(rho[x], rho[y]) * (f[y] - f[x]) * (g[y] - g[x]) * q)
                .sum()
        }),
    )
}

/// `Γ_ρ` through the product rule `2Γ_ρ(f,g) = Δ_ρ(fg) − fΔ_ρg − gΔ_ρf`.
pub fn gamma_rho_product_rule(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(chain, g)?;
    let fg = f.component_mul(g);
    let lfg = rho_laplacian(chain, mean, rho, &fg)?;
    let lf = rho_laplacian(chain, mean, rho, f)?;
    let lg = rho_laplacian(chain, mean, rho, g)?;
    Ok((lfg - f.component_mul(&lg) - g.component_mul(&lf)) * 0.5)
}

/// `2Γ_{2,ρ}(f,g) = ΔΓ_ρ(f,g) − Γ_ρ(f,Δg) − Γ_ρ(g,Δf)` with the standard outer Δ.
pub fn gamma2_rho(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    check_len(chain, g)?;
    Ok(gamma2_rho_raw(chain, mean, rho, f, g))
}

pub(crate) fn gamma2_rho_raw(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> DVector<f64> {
    let lf = laplacian_raw(chain, f);
    let lg = laplacian_raw(chain, g);
    let gfg = gamma_rho_raw(chain, mean, rho, f, g);
    let a = laplacian_raw(chain, &gfg);
    let b = gamma_rho_raw(chain, mean, rho, f, &lg);
    let c = gamma_rho_raw(chain, mean, rho, g, &lf);
    (a - b - c) * 0.5
}

/// Classical `Γ(f,g)`.
pub fn gamma(chain: &MarkovChain, f: &DVector<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    gamma_rho(chain, &Mean::Arithmetic, &chain.ones(), f, g)
}

/// Classical `Γ₂(f,g)`.
pub fn gamma2(chain: &MarkovChain, f: &DVector<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    gamma2_rho(chain, &Mean::Arithmetic, &chain.ones(), f, g)
}

/// Values of a function on the directed edges, aligned with `chain.neighbors(x)`.
pub type EdgeArray = Vec<Vec<f64>>;

/// `ρ̂(x,y) = θ(ρ_x, ρ_y)` on edges.
pub fn rho_hat(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>) -> EdgeArray {
    (0..chain.len()).map(|x| chain.neighbors(x).iter().map(|&(y, _)| mean.eval_raw(rho[x], rho[y])).collect()).collect()
}

/// `Δ̂ρ(x,y) = ∂₁θ(ρ_x,ρ_y)Δρ(x) + ∂₂θ(ρ_x,ρ_y)Δρ(y)` on edges.
pub fn delta_hat_rho(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>) -> EdgeArray {
    let lr = laplacian_raw(chain, rho);
    (0..chain.len())
        .map(|x| {
            chain
                .neighbors(x)
                .iter()
                .map(|&(y, _)| mean.d1_raw(rho[x], rho[y]) * lr[x] + mean.d1_raw(rho[y], rho[x]) * lr[y])
                .collect()
        })
        .collect()
}

/// `½ Σ_{x,y} w(x,y) ∇f ∇g Q π` for an edge weight `w`.
fn weighted_edge_sum(chain: &MarkovChain, w: &EdgeArray, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let pi = chain.pi();
    let mut s = 0.0;
    for x in 0..chain.len() {
        for (k, &(y, q)) in chain.neighbors(x).iter().enumerate() {
            s += w[x][k] * (f[y] - f[x]) * (g[y] - g[x]) * q * pi[x];
        }
    }
    0.5 * s
}

/// `𝒜_ρ(f) = ⟨ρ̂·∇f, ∇f⟩_π`
pub fn a_form(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, f: &DVector<f64>) -> Result<f64> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    Ok(weighted_edge_sum(chain, &rho_hat(chain, mean, rho), f, f))
}

/// `ℬ_ρ(f) = ½⟨Δ̂ρ·∇f, ∇f⟩_π − ⟨ρ̂·∇f, ∇(Δf)⟩_π`
pub fn b_form(chain: &MarkovChain, mean: &Mean, rho: &DVector<f64>, f: &DVector<f64>) -> Result<f64> {
    check_measure(chain, mean, rho)?;
    check_len(chain, f)?;
    let lf = laplacian_raw(chain, f);
    let first = weighted_edge_sum(chain, &delta_hat_rho(chain, mean, rho), f, f);
    let second = weighted_edge_sum(chain, &rho_hat(chain, mean, rho), f, &lf);
    Ok(0.5 * first - second)
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenReport {
    pub mean: String,
    pub trials: usize,
    /// Largest `|⟨Δ_ρf₁, f₂⟩_{ρπ} + ⟨∇f₁, ∇f₂⟩_ρ|` over the trials.
    pub max_residual: f64,
    /// Same residual relative to the sum of absolute values of both sides.
    pub max_relative_residual: f64,
}

/// Checks the Green formula `⟨Δ_ρf₁, f₂⟩_{ρ·π} = −⟨∇f₁, ∇f₂⟩_ρ` on random
/// Gaussian pairs. It is exact for the geometric mean only.
pub fn check_green_formula(
    chain: &MarkovChain,
    mean: &Mean,
    rho: &DVector<f64>,
    trials: usize,
    seed: u64,
) -> Result<GreenReport> {
    check_measure(chain, mean, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chain.len();
    let mut rep = GreenReport { mean: mean.name().to_string(), trials, max_residual: 0.0, max_relative_residual: 0.0 };
    for _ in 0..trials {
        let f1 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let f2 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let lhs = inner_rho_pi(chain, rho, &rho_laplacian(chain, mean, rho, &f1)?, &f2);
        let rhs = field_inner_rho(chain, mean, rho, &gradient_field(chain, &f1)?, &gradient_field(chain, &f2)?)?;
        let res = (lhs + rhs).abs();
        rep.max_residual = rep.max_residual.max(res);
        let scale = lhs.abs() + rhs.abs();
        if scale > 0.0 {
            rep.max_relative_residual = rep.max_relative_residual.max(res / scale);
        }
    }
    Ok(rep)
}

/// Green formula check for the geometric mean.
pub fn check_geometric_green(chain: &MarkovChain, rho: &DVector<f64>, trials: usize, seed: u64) -> Result<GreenReport> {
    check_green_formula(chain, &Mean::Geometric, rho, trials, seed)
}
