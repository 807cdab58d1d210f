//! Text formats: chain JSON, edge-list TSV, density and dimension specs.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{CurvError, Result};
use crate::generate::Generator;

/// `{"states": [...], "Q": [[...]], "pi": [...]}` with `pi` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub states: Vec<String>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_chain(chain: &MarkovChain) -> Self {
        let q = chain.q();
        ChainFile {
            states: chain.states().to_vec(),
            q: (0..chain.len()).map(|x| q.row(x).iter().copied().collect()).collect(),
            pi: Some(chain.pi().iter().copied().collect()),
        }
    }

    pub fn build(self) -> Result<MarkovChain> {
        let n = self.states.len();
        if self.q.len() != n {
            return Err(CurvError::ShapeMismatch { expected: n, got: self.q.len() });
        }
        if let Some((row, r)) = self.q.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(CurvError::NotSquare { rows: n, bad_row: row, cols: r.len() });
        }
        let q = DMatrix::from_fn(n, n, |x, y| self.q[x][y]);
        let pi = match self.pi {
            Some(p) if p.len() != n => return Err(CurvError::ShapeMismatch { expected: n, got: p.len() }),
            Some(p) => Some(DVector::from_vec(p)),
            None => None,
        };
        MarkovChain::new(self.states, q, pi)
    }
}

pub fn parse_chain_json(text: &str) -> Result<MarkovChain> {
    let file: ChainFile = serde_json::from_str(text).map_err(|e| CurvError::Parse(format!("chain JSON: {e}")))?;
    file.build()
}

pub fn chain_to_json(chain: &MarkovChain) -> String {
    serde_json::to_string_pretty(&ChainFile::from_chain(chain)).expect("chain serializes")
}

/// Lines `u<TAB>v<TAB>weight` as symmetric weights; the weight defaults to 1.
/// Blank lines and lines starting with `#` are skipped, repeated edges add up,
/// and states are numbered in order of first appearance.
pub fn parse_edge_list(text: &str) -> Result<MarkovChain> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut states: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) || fields[..2].iter().any(|f| f.is_empty()) {
            return Err(CurvError::Parse(format!("line {}: expected `u<TAB>v<TAB>weight`", lineno + 1)));
        }
        let w = match fields.get(2) {
            Some(f) => {
                f.parse::<f64>().map_err(|_| CurvError::Parse(format!("line {}: bad weight `{f}`", lineno + 1)))?
            }
            None => 1.0,
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(CurvError::Parse(format!("line {}: weight must be positive and finite, got {w}", lineno + 1)));
        }
        let mut id = |name: &str| {
            *index.entry(name.to_string()).or_insert_with(|| {
                states.push(name.to_string());
                states.len() - 1
            })
        };
        let (u, v) = (id(fields[0]), id(fields[1]));
        edges.push((u, v, w));
    }
    if states.is_empty() {
        return Err(CurvError::Parse("edge list has no edges".into()));
    }
    let n = states.len();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for (u, v, x) in edges {
        w[(u, v)] += x;
        if u != v {
            w[(v, u)] += x;
        }
    }
    MarkovChain::from_weights(states, &w)
}

/// Dimension spec: `inf` (also `infinity`, `∞`) or a positive finite number.
pub fn parse_n(spec: &str) -> Result<f64> {
    let s = spec.trim();
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "∞" => return Ok(f64::INFINITY),
        _ => {}
    }
    let v: f64 = s.parse().map_err(|_| CurvError::Parse(format!("dimension `{spec}` is not `inf` or a number")))?;
    if v.is_nan() || v <= 0.0 || v.is_infinite() {
        return Err(CurvError::InvalidParameters(format!("dimension must lie in (0, ∞], got {spec}")));
    }
    Ok(v)
}

pub fn format_n(n: f64) -> String {
    if n.is_infinite() {
        "inf".into()
    } else {
        n.to_string()
    }
}

pub fn parse_generator(spec: &str) -> Result<Generator> {
    spec.parse()
}

/// Density spec relative to `π`:
/// - `ones`: the equilibrium density `𝟏`;
/// - `uniform`: the density of the uniform distribution, `1/(|X|π(x))`;
/// - `dirac:x`: `δ_x = 𝟏_x/π(x)`;
/// - a JSON array (one entry per state) or object keyed by state id, missing
///   states set to zero.
pub fn parse_rho(spec: &str, chain: &MarkovChain) -> Result<DVector<f64>> {
    let s = spec.trim();
    let rho = if s == "ones" {
        chain.ones()
    } else if s == "uniform" {
        let n = chain.len() as f64;
        DVector::from_iterator(chain.len(), chain.pi().iter().map(|p| 1.0 / (n * p)))
    } else if let Some(id) = s.strip_prefix("dirac:") {
        chain.dirac(chain.state_index(id)?)
    } else if s.starts_with('[') {
        let v: Vec<f64> = serde_json::from_str(s).map_err(|e| CurvError::Parse(format!("density array: {e}")))?;
        if v.len() != chain.len() {
            return Err(CurvError::ShapeMismatch { expected: chain.len(), got: v.len() });
        }
        DVector::from_vec(v)
    } else if s.starts_with('{') {
        let m: HashMap<String, f64> =
            serde_json::from_str(s).map_err(|e| CurvError::Parse(format!("density object: {e}")))?;
        let mut rho = DVector::zeros(chain.len());
        for (id, v) in m {
            rho[chain.state_index(&id)?] = v;
        }
        rho
    } else {
        return Err(CurvError::Parse(format!("unrecognized density `{spec}`")));
    };
    if let Some((r, v)) = rho.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(CurvError::NegativeEntry { row: r, col: 0, value: *v });
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cycle, path};

    #[test]
    fn chain_json_round_trip() {
        let c = path(4).unwrap();
        let back = parse_chain_json(&chain_to_json(&c)).unwrap();
        assert_eq!(back.states(), c.states());
        assert!((back.q() - c.q()).amax() == 0.0);
    }

    #[test]
    fn chain_json_without_pi() {
        let c = parse_chain_json(r#"{"states":["a","b"],"Q":[[0,1],[1,0]]}"#).unwrap();
        assert!((c.pi()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chain_json_errors() {
        assert!(matches!(parse_chain_json("{"), Err(CurvError::Parse(_))));
        assert!(parse_chain_json(r#"{"states":["a","b"],"Q":[[0,1]]}"#).is_err());
        assert!(parse_chain_json(r#"{"states":["a","b"],"Q":[[0,1],[1]]}"#).is_err());
        assert!(matches!(
            parse_chain_json(r#"{"states":["a","b"],"Q":[[0,0.9],[1,0]]}"#),
            Err(CurvError::NotStochastic { .. })
        ));
    }

    #[test]
    fn edge_list_weights() {
        let c = parse_edge_list("# triangle with a heavy edge\na\tb\t2\nb\tc\t1\nc\ta\n").unwrap();
        assert_eq!(c.states(), ["a", "b", "c"]);
        // π ∝ weighted degree (3, 3, 2)
        assert!((c.pi()[2] - 0.25).abs() < 1e-15);
        assert!((c.q()[(0, 1)] - 2.0 / 3.0).abs() < 1e-15);
        assert!(parse_edge_list("a b 1").is_err());
        assert!(parse_edge_list("a\tb\t-1").is_err());
        assert!(parse_edge_list("").is_err());
    }

    #[test]
    fn dimension_specs() {
        assert_eq!(parse_n("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_n("2.5").unwrap(), 2.5);
        assert!(parse_n("0").is_err());
        assert!(parse_n("-1").is_err());
        assert!(parse_n("nan").is_err());
        assert!(parse_n("abc").is_err());
    }

    #[test]
    fn density_specs() {
        let c = cycle(5).unwrap();
        assert_eq!(parse_rho("ones", &c).unwrap(), c.ones());
        assert!((c.inner(&parse_rho("uniform", &c).unwrap(), &c.ones()) - 1.0).abs() < 1e-15);
        assert_eq!(parse_rho("dirac:2", &c).unwrap(), c.dirac(2));
        assert_eq!(parse_rho(r#"{"1": 2.0}"#, &c).unwrap()[1], 2.0);
        assert_eq!(parse_rho("[1,2,3,4,5]", &c).unwrap()[4], 5.0);
        assert!(parse_rho("[1,2]", &c).is_err());
        assert!(parse_rho("dirac:zz", &c).is_err());
        assert!(parse_rho("[1,2,3,4,-5]", &c).is_err());
    }
}
