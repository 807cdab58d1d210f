//! Finite irreducible reversible Markov chains.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CurvError, Result};

/// Relative tolerance for row sums, detailed balance and stationarity.
pub const VALIDATION_TOL: f64 = 1e-10;

/// A validated chain `(X, Q, π)`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    states: Vec<String>,
    index: HashMap<String, usize>,
    q: DMatrix<f64>,
    pi: DVector<f64>,
    /// `neighbors[x]` lists `(y, Q(x,y))` for `y != x` with `Q(x,y) > 0`.
    neighbors: Vec<Vec<(usize, f64)>>,
    laplacian: DMatrix<f64>,
}

/// Degree and measure statistics of a chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainStats {
    pub size: usize,
    pub q_min: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    /// `D(x) = Σ_{y≠x} Q(x,y)`
    pub deg_weighted: Vec<f64>,
    pub deg_weighted_max: f64,
    /// `D_π(x) = π(x)^{-1} Σ_{y∼x} π(y)`
    pub deg_pi: Vec<f64>,
    pub deg_pi_max: f64,
}

impl MarkovChain {
    /// Validates `q` (and `pi`, if given) and builds the chain. When `pi` is
    /// absent the stationary vector is solved for directly.
    pub fn new(states: Vec<String>, q: DMatrix<f64>, pi: Option<DVector<f64>>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 {
            return Err(CurvError::InvalidParameters("empty state space".into()));
        }
        if q.ncols() != n {
            return Err(CurvError::NotSquare { rows: n, bad_row: 0, cols: q.ncols() });
        }
        if states.len() != n {
            return Err(CurvError::ShapeMismatch { expected: n, got: states.len() });
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(CurvError::InvalidParameters(format!("duplicate state id '{s}'")));
            }
        }
        for x in 0..n {
            for y in 0..n {
                let v = q[(x, y)];
                if !v.is_finite() || v < 0.0 {
                    return Err(CurvError::NegativeEntry { row: x, col: y, value: v });
                }
            }
            let sum: f64 = q.row(x).iter().sum();
            let residual = (sum - 1.0).abs();
            if residual > VALIDATION_TOL {
                return Err(CurvError::NotStochastic { row: x, sum, residual });
            }
        }

        check_irreducible(&states, &q)?;

        let pi = match pi {
            Some(p) => {
                if p.len() != n {
                    return Err(CurvError::ShapeMismatch { expected: n, got: p.len() });
                }
                p
            }
            None => solve_stationary(&q)?,
        };
        if pi.iter().any(|&p| !p.is_finite() || p <= 0.0) {
            return Err(CurvError::InvalidStationary { reason: "entries must lie in (0,1]".into() });
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(CurvError::InvalidStationary { reason: format!("sums to {total}") });
        }

        for x in 0..n {
            for y in (x + 1)..n {
                let a = q[(x, y)] * pi[x];
                let b = q[(y, x)] * pi[y];
                let residual = (a - b).abs();
                if residual > VALIDATION_TOL * a.max(b) + 1e-15 {
                    return Err(CurvError::NotReversible { x: states[x].clone(), y: states[y].clone(), residual });
                }
            }
        }
        let pi_q = q.transpose() * &pi;
        for y in 0..n {
            let residual = (pi_q[y] - pi[y]).abs();
            if residual > VALIDATION_TOL * pi[y] + 1e-15 {
                return Err(CurvError::InvalidStationary {
                    reason: format!("(πQ)({}) differs from π by {residual:e}", states[y]),
                });
            }
        }

        let neighbors: Vec<Vec<(usize, f64)>> =
            (0..n).map(|x| (0..n).filter(|&y| y != x && q[(x, y)] > 0.0).map(|y| (y, q[(x, y)])).collect()).collect();
        let mut laplacian = DMatrix::zeros(n, n);
        for x in 0..n {
            for &(y, qxy) in &neighbors[x] {
                laplacian[(x, y)] = qxy;
                laplacian[(x, x)] -= qxy;
            }
        }
        Ok(Self { states, index, q, pi, neighbors, laplacian })
    }

    /// Chain from symmetric nonnegative weights: `Q(x,y) = w(x,y)/Σ_z w(x,z)`,
    /// `π(x) ∝ Σ_z w(x,z)`. Diagonal weights become lazy self-loops.
    pub fn from_weights(states: Vec<String>, w: &DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(CurvError::NotSquare { rows: n, bad_row: 0, cols: w.ncols() });
        }
        for x in 0..n {
            for y in 0..n {
                let v = w[(x, y)];
                if !v.is_finite() || v < 0.0 {
                    return Err(CurvError::NegativeEntry { row: x, col: y, value: v });
                }
                if (v - w[(y, x)]).abs() > VALIDATION_TOL * v.max(w[(y, x)]) {
                    return Err(CurvError::InvalidParameters(format!("weights are not symmetric at ({x},{y})")));
                }
            }
        }
        let row_sums: Vec<f64> = (0..n).map(|x| w.row(x).iter().sum()).collect();
        if let Some(x) = row_sums.iter().position(|&s| s <= 0.0) {
            return Err(CurvError::NotIrreducible { state: states.get(x).cloned().unwrap_or_default() });
        }
        let total: f64 = row_sums.iter().sum();
        let q = DMatrix::from_fn(n, n, |x, y| w[(x, y)] / row_sums[x]);
        let pi = DVector::from_iterator(n, row_sums.iter().map(|s| s / total));
        Self::new(states, q, Some(pi))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| CurvError::UnknownState(id.to_string()))
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.neighbors[x]
    }

    /// Matrix of the generator `Δ`, so that `Δf = L f`.
    pub fn laplacian_matrix(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Symmetric edge weight `w(x,y) = Q(x,y)π(x)` for `x ≠ y`, zero on the diagonal.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        if x == y {
            0.0
        } else {
            self.q[(x, y)] * self.pi[x]
        }
    }

    pub fn is_adjacent(&self, x: usize, y: usize) -> bool {
        x != y && self.q[(x, y)] > 0.0
    }

    pub fn stats(&self) -> ChainStats {
        let n = self.len();
        let q_min = self.neighbors.iter().flat_map(|nb| nb.iter().map(|&(_, q)| q)).fold(f64::INFINITY, f64::min);
        let q_min = if q_min.is_finite() { q_min } else { 1.0 };
        let pi_min = self.pi.iter().copied().fold(f64::INFINITY, f64::min);
        let pi_max = self.pi.iter().copied().fold(0.0, f64::max);
        let deg_weighted: Vec<f64> = (0..n).map(|x| self.neighbors[x].iter().map(|&(_, q)| q).sum()).collect();
        let deg_pi: Vec<f64> =
            (0..n).map(|x| self.neighbors[x].iter().map(|&(y, _)| self.pi[y]).sum::<f64>() / self.pi[x]).collect();
        ChainStats {
            size: n,
            q_min,
            pi_min,
            pi_max,
            deg_weighted_max: deg_weighted.iter().copied().fold(0.0, f64::max),
            deg_weighted,
            deg_pi_max: deg_pi.iter().copied().fold(0.0, f64::max),
            deg_pi,
        }
    }

    /// Combinatorial (graph) distances by breadth-first search.
    pub fn distance_matrix(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|x| self.bfs(x)).collect()
    }

    pub fn bfs(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.neighbors[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Sorted indices of the ball `B_r(x)`.
    pub fn ball(&self, x: usize, radius: usize) -> Vec<usize> {
        self.bfs(x).iter().enumerate().filter(|(_, &d)| d <= radius).map(|(i, _)| i).collect()
    }

    /// Dirac measure `δ_x` as a density: `1/π(x)` at `x`, zero elsewhere.
    pub fn dirac(&self, x: usize) -> DVector<f64> {
        let mut rho = DVector::zeros(self.len());
        rho[x] = 1.0 / self.pi[x];
        rho
    }

    /// Indicator `𝟏_A`.
    pub fn indicator(&self, set: &[usize]) -> DVector<f64> {
        let mut rho = DVector::zeros(self.len());
        for &x in set {
            rho[x] = 1.0;
        }
        rho
    }

    pub fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.len(), 1.0)
    }

    /// `⟨f, g⟩_π`
    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        f.iter().zip(g.iter()).zip(self.pi.iter()).map(|((a, b), p)| a * b * p).sum()
    }
}

fn check_irreducible(states: &[String], q: &DMatrix<f64>) -> Result<()> {
    let n = q.nrows();
    for transpose in [false, true] {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let edge = if transpose { q[(y, x)] } else { q[(x, y)] };
                if !seen[y] && edge > 0.0 {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        if let Some(bad) = seen.iter().position(|s| !s) {
            return Err(CurvError::NotIrreducible { state: states[bad].clone() });
        }
    }
    Ok(())
}

/// Normalized left Perron vector from `[Qᵀ − I; 𝟏ᵀ] π = [0; 1]`.
fn solve_stationary(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&(q.transpose() - DMatrix::identity(n, n)));
    a.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;
    let svd = a.svd(true, true);
    let pi = svd.solve(&b, 1e-14).map_err(|e| CurvError::NumericalFailure(format!("stationary solve: {e}")))?;
    let total: f64 = pi.iter().sum();
    Ok(pi / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn two_state_flip_has_uniform_pi() {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = MarkovChain::new(ids(2), q, None).unwrap();
        assert!((c.pi()[0] - 0.5).abs() < 1e-15);
        assert!((c.pi()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lazy_chain_degree() {
        let q = DMatrix::from_element(2, 2, 0.5);
        let c = MarkovChain::new(ids(2), q, None).unwrap();
        let s = c.stats();
        assert_eq!(s.deg_weighted, vec![0.5, 0.5]);
        assert!(!c.is_adjacent(0, 0));
    }

    #[test]
    fn row_sum_violation() {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 0.9, 1.0, 0.0]);
        match MarkovChain::new(ids(2), q, None) {
            Err(CurvError::NotStochastic { row, .. }) => assert_eq!(row, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let q = DMatrix::identity(3, 3);
        assert!(matches!(MarkovChain::new(ids(3), q, None), Err(CurvError::NotIrreducible { .. })));
    }

    #[test]
    fn non_reversible_cycle_is_rejected() {
        // deterministic rotation 0 -> 1 -> 2 -> 0
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(MarkovChain::new(ids(3), q, None), Err(CurvError::NotReversible { .. })));
    }

    #[test]
    fn non_uniform_stationary_vector() {
        // path on 3 vertices: π ∝ deg = (1,2,1)
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let c = MarkovChain::new(ids(3), q, None).unwrap();
        assert!((c.pi()[0] - 0.25).abs() < 1e-14);
        assert!((c.pi()[1] - 0.5).abs() < 1e-14);
        let s = c.stats();
        assert!((s.deg_pi[0] - 2.0).abs() < 1e-12);
        assert!((s.deg_pi[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.q_min, 0.5);
    }

    #[test]
    fn wrong_pi_is_rejected() {
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let pi = DVector::from_vec(vec![1.0 / 3.0; 3]);
        assert!(MarkovChain::new(ids(3), q, Some(pi)).is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = MarkovChain::new(vec!["a".into(), "a".into()], q, None);
        assert!(matches!(r, Err(CurvError::InvalidParameters(_))));
    }
}
