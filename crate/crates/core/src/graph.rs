//! Node network: neighborhoods, the particle-walk transition matrix, and
//! Metropolis combination weights.

use nalgebra::DMatrix;
use std::path::Path;

use crate::error::{Error, Result};

/// Undirected communication graph over `K` nodes.
///
/// Every node is a member of its own neighborhood. The walk matrix is
/// row-stochastic with support restricted to neighborhoods; by default it
/// is the uniform walk over the true neighbors (no self-loop), matching the
/// usual distributed-particle-filter setup.
#[derive(Debug, Clone)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    walk: DMatrix<f64>,
}

impl Graph {
    pub fn new(neighbor_lists: Vec<Vec<usize>>, walk: Option<DMatrix<f64>>) -> Result<Self> {
        let k = neighbor_lists.len();
        if k == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(k);
        for (node, mut list) in neighbor_lists.into_iter().enumerate() {
            list.push(node);
            list.sort_unstable();
            list.dedup();
            if let Some(&bad) = list.iter().find(|&&n| n >= k) {
                return Err(Error::Graph(format!(
                    "node {node} lists neighbor {bad}, but the graph has {k} nodes"
                )));
            }
            neighbors.push(list);
        }
        for node in 0..k {
            for &other in &neighbors[node] {
                if other != node && !neighbors[other].contains(&node) {
                    return Err(Error::Graph(format!(
                        "asymmetric neighborhood: {node} lists {other} but not vice versa"
                    )));
                }
            }
        }

        let walk = match walk {
            Some(m) => {
                if m.nrows() != k || m.ncols() != k {
                    return Err(Error::Graph(format!(
                        "walk matrix must be {k}x{k}, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                for row in 0..k {
                    let mut sum = 0.0;
                    for col in 0..k {
                        let v = m[(row, col)];
                        if v < 0.0 || !v.is_finite() {
                            return Err(Error::Graph(format!(
                                "walk entry ({row},{col}) = {v} is invalid"
                            )));
                        }
                        if v > 0.0 && !neighbors[row].contains(&col) {
                            return Err(Error::Graph(format!(
                                "walk entry ({row},{col}) is positive but {col} is not a neighbor of {row}"
                            )));
                        }
                        sum += v;
                    }
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Graph(format!("walk row {row} sums to {sum}")));
                    }
                }
                m
            }
            None => uniform_walk(&neighbors),
        };

        Ok(Graph { neighbors, walk })
    }

    /// Ring over `k` nodes (for `k` = 2 this degenerates to a single edge,
    /// for `k` = 1 to an isolated node).
    pub fn ring(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let lists = (0..k)
            .map(|i| {
                if k == 1 {
                    vec![]
                } else {
                    vec![(i + k - 1) % k, (i + 1) % k]
                }
            })
            .collect();
        Graph::new(lists, None)
    }

    pub fn complete(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let lists = (0..k)
            .map(|i| (0..k).filter(|&j| j != i).collect())
            .collect();
        Graph::new(lists, None)
    }

    pub fn line(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let lists = (0..k)
            .map(|i| {
                let mut l = Vec::new();
                if i > 0 {
                    l.push(i - 1);
                }
                if i + 1 < k {
                    l.push(i + 1);
                }
                l
            })
            .collect();
        Graph::new(lists, None)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighborhood of `k`, including `k` itself.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// Neighborhood size including the node itself.
    pub fn eta(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    /// Graph-theoretic degree: neighbors excluding the node itself.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(node, list)| list.iter().filter(|&&n| n > node).count())
            .sum()
    }

    /// Row-stochastic particle-walk matrix.
    pub fn walk(&self) -> &DMatrix<f64> {
        &self.walk
    }
}

fn uniform_walk(neighbors: &[Vec<usize>]) -> DMatrix<f64> {
    let k = neighbors.len();
    let mut m = DMatrix::zeros(k, k);
    for (node, list) in neighbors.iter().enumerate() {
        let others: Vec<usize> = list.iter().copied().filter(|&n| n != node).collect();
        if others.is_empty() {
            m[(node, node)] = 1.0;
        } else {
            let w = 1.0 / others.len() as f64;
            for n in others {
                m[(node, n)] = w;
            }
        }
    }
    m
}

/// Parse the graph description format: first line `K`, then one line per
/// node listing its neighbor indices (the node itself is implied; a blank
/// line means no neighbors), then optionally `K` further lines giving the
/// rows of an explicit walk matrix. Lines starting with `#` are comments.
pub fn parse_graph_text(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.starts_with('#'));
    let k: usize = lines
        .next()
        .ok_or_else(|| Error::Graph("empty graph file".into()))?
        .parse()
        .map_err(|_| Error::Graph("first line must be the node count".into()))?;
    if k == 0 {
        return Err(Error::Graph("graph needs at least one node".into()));
    }

    let mut neighbor_lists = Vec::with_capacity(k);
    for node in 0..k {
        let line = lines
            .next()
            .ok_or_else(|| Error::Graph(format!("missing neighbor line for node {node}")))?;
        let list = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Graph(format!("node {node}: bad neighbor index `{tok}`")))
            })
            .collect::<Result<Vec<usize>>>()?;
        neighbor_lists.push(list);
    }

    let rest: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let walk = if rest.is_empty() {
        None
    } else {
        if rest.len() != k {
            return Err(Error::Graph(format!(
                "walk matrix block must have {k} rows, got {}",
                rest.len()
            )));
        }
        let mut m = DMatrix::zeros(k, k);
        for (row, line) in rest.iter().enumerate() {
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::Graph(format!("walk row {row}: bad entry `{tok}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != k {
                return Err(Error::Graph(format!(
                    "walk row {row} has {} entries, expected {k}",
                    values.len()
                )));
            }
            for (col, v) in values.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        Some(m)
    };

    Graph::new(neighbor_lists, walk)
}

pub fn load_graph_file(path: impl AsRef<Path>) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph_text(&text)
}

/// Metropolis combination weights over a graph.
#[derive(Debug, Clone)]
pub struct CombinationWeights {
    c: DMatrix<f64>,
}

impl CombinationWeights {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.c[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }
}

/// The Metropolis rule: `c(k,l) = 1 / max(eta_k, eta_l)` for true neighbors,
/// the complement on the diagonal, zero elsewhere. `eta` counts the
/// neighborhood including the node itself, which is what reproduces the
/// equal 1/3 weights on a four-node ring.
///
/// The weights are small rationals; each diagonal is accumulated exactly in
/// integer fractions before the single conversion to f64, so `1 - sum`
/// cannot drift an ulp away from the exact value.
pub fn metropolis_weights(g: &Graph) -> CombinationWeights {
    let k = g.node_count();
    let mut c = DMatrix::zeros(k, k);
    for node in 0..k {
        // Running off-diagonal sum as num/den in i128; falls back to float
        // accumulation if the denominators outgrow the integer range.
        let mut num: i128 = 0;
        let mut den: i128 = 1;
        let mut exact = true;
        let mut float_sum = 0.0;
        for &l in g.neighbors(node) {
            if l == node {
                continue;
            }
            let d = g.eta(node).max(g.eta(l)) as i128;
            let w = 1.0 / d as f64;
            c[(node, l)] = w;
            float_sum += w;
            if exact {
                if let (Some(sn), Some(sd)) = (
                    num.checked_mul(d).and_then(|nd| nd.checked_add(den)),
                    den.checked_mul(d),
                ) {
                    let g = gcd128(sn, sd);
                    num = sn / g;
                    den = sd / g;
                } else {
                    exact = false;
                }
            }
        }
        c[(node, node)] = if exact {
            (den - num) as f64 / den as f64
        } else {
            1.0 - float_sum
        };
    }
    CombinationWeights { c }
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}
