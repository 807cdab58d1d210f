//! Simple random walks on standard graph families.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Hypercube { dim: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Path { n: usize },
    RandomRegular { d: usize, n: usize, seed: u64 },
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Generator::Hypercube { dim } => write!(f, "hypercube:{dim}"),
            Generator::Cycle { n } => write!(f, "cycle:{n}"),
            Generator::Complete { n } => write!(f, "complete:{n}"),
            Generator::Path { n } => write!(f, "path:{n}"),
            Generator::RandomRegular { d, n, seed } => write!(f, "random-regular:{d}:{n}:{seed}"),
        }
    }
}

impl FromStr for Generator {
    type Err = CurvError;

    /// `hypercube:N`, `cycle:n`, `complete:n`, `path:n`, `random-regular:d:n:seed`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<u64> {
            let p = parts.get(i).ok_or_else(|| CurvError::Parse(format!("generator spec `{s}` is missing a field")))?;
            p.trim()
                .parse::<u64>()
                .map_err(|_| CurvError::Parse(format!("`{p}` is not a nonnegative integer in `{s}`")))
        };
        let size = |i: usize| -> Result<usize> {
            usize::try_from(num(i)?).map_err(|_| CurvError::Parse(format!("field {i} of `{s}` is too large")))
        };
        let arity = |k: usize| -> Result<()> {
            if parts.len() == k + 1 {
                Ok(())
            } else {
                Err(CurvError::Parse(format!("generator spec `{s}` needs {k} field(s)")))
            }
        };
        match parts[0].trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "hypercube" => arity(1).and_then(|_| Ok(Generator::Hypercube { dim: size(1)? })),
            "cycle" => arity(1).and_then(|_| Ok(Generator::Cycle { n: size(1)? })),
            "complete" => arity(1).and_then(|_| Ok(Generator::Complete { n: size(1)? })),
            "path" => arity(1).and_then(|_| Ok(Generator::Path { n: size(1)? })),
            "random-regular" => {
                arity(3).and_then(|_| Ok(Generator::RandomRegular { d: size(1)?, n: size(2)?, seed: num(3)? }))
            }
            other => Err(CurvError::Parse(format!("unknown generator `{other}`"))),
        }
    }
}

const MAX_HYPERCUBE_DIM: usize = 11;

impl Generator {
    pub fn build(&self) -> Result<MarkovChain> {
        match *self {
            Generator::Hypercube { dim } => hypercube(dim),
            Generator::Cycle { n } => cycle(n),
            Generator::Complete { n } => complete(n),
            Generator::Path { n } => path(n),
            Generator::RandomRegular { d, n, seed } => random_regular(d, n, seed),
        }
    }
}

/// Simple random walk `Q(x,y) = 1/deg(x)` on an undirected simple graph.
pub fn simple_random_walk(states: Vec<String>, adjacency: &[BTreeSet<usize>]) -> Result<MarkovChain> {
    let n = adjacency.len();
    let mut w = DMatrix::zeros(n, n);
    for (x, nb) in adjacency.iter().enumerate() {
        for &y in nb {
            if y == x || y >= n {
                return Err(CurvError::InvalidParameters(format!("bad edge ({x},{y})")));
            }
            w[(x, y)] = 1.0;
            w[(y, x)] = 1.0;
        }
    }
    MarkovChain::from_weights(states, &w)
}

pub fn hypercube(dim: usize) -> Result<MarkovChain> {
    if dim == 0 || dim > MAX_HYPERCUBE_DIM {
        return Err(CurvError::InvalidParameters(format!(
            "hypercube dimension must be in 1..={MAX_HYPERCUBE_DIM}, got {dim}"
        )));
    }
    let n = 1usize << dim;
    let states = (0..n).map(|v| format!("{v:0dim$b}")).collect();
    let adjacency: Vec<BTreeSet<usize>> = (0..n).map(|v| (0..dim).map(|b| v ^ (1 << b)).collect()).collect();
    simple_random_walk(states, &adjacency)
}

pub fn cycle(n: usize) -> Result<MarkovChain> {
    if n < 3 {
        return Err(CurvError::InvalidParameters(format!("cycle needs n >= 3, got {n}")));
    }
    let adjacency: Vec<BTreeSet<usize>> = (0..n).map(|v| [(v + 1) % n, (v + n - 1) % n].into()).collect();
    simple_random_walk(numbered(n), &adjacency)
}

pub fn complete(n: usize) -> Result<MarkovChain> {
    if n < 2 {
        return Err(CurvError::InvalidParameters(format!("complete graph needs n >= 2, got {n}")));
    }
    let adjacency: Vec<BTreeSet<usize>> = (0..n).map(|v| (0..n).filter(|&u| u != v).collect()).collect();
    simple_random_walk(numbered(n), &adjacency)
}

pub fn path(n: usize) -> Result<MarkovChain> {
    if n < 2 {
        return Err(CurvError::InvalidParameters(format!("path needs n >= 2, got {n}")));
    }
    let adjacency: Vec<BTreeSet<usize>> = (0..n)
        .map(|v| {
            let mut s = BTreeSet::new();
            if v > 0 {
                s.insert(v - 1);
            }
            if v + 1 < n {
                s.insert(v + 1);
            }
            s
        })
        .collect();
    simple_random_walk(numbered(n), &adjacency)
}

/// Connected simple `d`-regular graph on `n` vertices from the pairing model,
/// re-pairing locally on conflicts and restarting when stuck.
pub fn random_regular(d: usize, n: usize, seed: u64) -> Result<MarkovChain> {
    if d == 0 || n <= d || !(n * d).is_multiple_of(2) {
        return Err(CurvError::InvalidParameters(format!(
            "random regular graph needs d >= 1, n > d and n*d even (d={d}, n={n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        if let Some(adjacency) = try_pairing(d, n, &mut rng) {
            if is_connected(&adjacency) {
                return simple_random_walk(numbered(n), &adjacency);
            }
        }
    }
    Err(CurvError::InvalidParameters(format!("could not sample a connected {d}-regular graph on {n} vertices")))
}

fn try_pairing(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<BTreeSet<usize>>> {
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    let mut adjacency = vec![BTreeSet::new(); n];
    while !points.is_empty() {
        let mut paired = false;
        for _ in 0..200 {
            let i = rng.random_range(0..points.len());
            let j = rng.random_range(0..points.len());
            let (u, v) = (points[i], points[j]);
            if i == j || u == v || adjacency[u].contains(&v) {
                continue;
            }
            adjacency[u].insert(v);
            adjacency[v].insert(u);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            points.swap_remove(hi);
            points.swap_remove(lo);
            paired = true;
            break;
        }
        if !paired {
            return None;
        }
    }
    Some(adjacency)
}

fn is_connected(adjacency: &[BTreeSet<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(x) = stack.pop() {
        for &y in &adjacency[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_one_is_two_state_flip() {
        let c = hypercube(1).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.q()[(0, 1)], 1.0);
        assert_eq!(c.states(), &["0".to_string(), "1".to_string()]);
    }

    #[test]
    fn cycle_five_transitions() {
        let c = cycle(5).unwrap();
        for x in 0..5 {
            assert_eq!(c.q()[(x, (x + 1) % 5)], 0.5);
            assert_eq!(c.q()[(x, (x + 4) % 5)], 0.5);
            assert!((c.pi()[x] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn random_regular_parity() {
        // 3-regular on 5 vertices does not exist (odd degree sum)
        assert!(random_regular(3, 5, 7).is_err());
        let c = random_regular(3, 6, 7).unwrap();
        assert_eq!(c.len(), 6);
        for x in 0..6 {
            assert_eq!(c.neighbors(x).len(), 3);
        }
        assert!((c.stats().q_min - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_regular_is_seed_deterministic() {
        let a = random_regular(4, 12, 99).unwrap();
        let b = random_regular(4, 12, 99).unwrap();
        assert_eq!(a.q(), b.q());
    }

    #[test]
    fn invalid_parameters() {
        assert!(cycle(2).is_err());
        assert!(path(1).is_err());
        assert!(complete(1).is_err());
        assert!(hypercube(0).is_err());
        assert!(random_regular(4, 4, 0).is_err());
    }

    #[test]
    fn display_round_trips_through_text() {
        let g = Generator::RandomRegular { d: 3, n: 10, seed: 4 };
        assert_eq!(g.to_string(), "random-regular:3:10:4");
        assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
        assert_eq!("hypercube:3".parse::<Generator>().unwrap(), Generator::Hypercube { dim: 3 });
        assert!("cycle".parse::<Generator>().is_err());
        assert!("cycle:5:1".parse::<Generator>().is_err());
        assert!("torus:3".parse::<Generator>().is_err());
        assert!("path:-1".parse::<Generator>().is_err());
    }
}
