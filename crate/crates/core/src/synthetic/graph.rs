use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edges::EdgeSet;
use crate::error::{Error, Result};

/// Random graph families used for the synthetic benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Random permutation of the nodes joined in succession.
    Chain,
    /// Each node joined to its 2 nearest neighbours among uniform points in
    /// the unit square (union of the neighbour relations).
    NearestNeighbor,
    /// `2p` edges drawn uniformly with every degree capped at 5.
    ErdosRenyi,
    /// Preferential attachment grown from a 5-clique, one edge per new node.
    ScaleFree,
}

pub const ER_MAX_DEGREE: usize = 5;
const NN_NEIGHBOURS: usize = 2;
const SEED_CLIQUE: usize = 5;

impl GraphKind {
    pub const ALL: [GraphKind; 4] = [
        GraphKind::Chain,
        GraphKind::NearestNeighbor,
        GraphKind::ErdosRenyi,
        GraphKind::ScaleFree,
    ];

    pub fn min_nodes(self) -> usize {
        match self {
            GraphKind::Chain => 2,
            GraphKind::NearestNeighbor => 3,
            // 2p <= p(p-1)/2
            GraphKind::ErdosRenyi => 5,
            GraphKind::ScaleFree => SEED_CLIQUE + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Chain => "chain",
            GraphKind::NearestNeighbor => "nearest_neighbor",
            GraphKind::ErdosRenyi => "erdos_renyi",
            GraphKind::ScaleFree => "scale_free",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(GraphKind::Chain),
            "nearest_neighbor" | "nn" => Ok(GraphKind::NearestNeighbor),
            "erdos_renyi" | "er" => Ok(GraphKind::ErdosRenyi),
            "scale_free" => Ok(GraphKind::ScaleFree),
            other => Err(Error::Parse(format!("unknown graph kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub p: usize,
    pub edges: EdgeSet,
    pub max_degree: usize,
}

pub(crate) fn generate_graph_with(kind: GraphKind, p: usize, rng: &mut ChaCha8Rng) -> Result<GraphSpec> {
    if p < kind.min_nodes() {
        return Err(Error::InvalidInput(format!(
            "{kind} graph needs p >= {}, got {p}",
            kind.min_nodes()
        )));
    }
    let edges = match kind {
        GraphKind::Chain => chain(p, rng)?,
        GraphKind::NearestNeighbor => nearest_neighbor(p, rng)?,
        GraphKind::ErdosRenyi => erdos_renyi(p, rng)?,
        GraphKind::ScaleFree => scale_free(p, rng)?,
    };
    let max_degree = edges.max_degree();
    Ok(GraphSpec {
        kind,
        p,
        edges,
        max_degree,
    })
}

fn chain(p: usize, rng: &mut ChaCha8Rng) -> Result<EdgeSet> {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    EdgeSet::from_pairs(p, order.windows(2).map(|w| (w[0], w[1])))
}

fn nearest_neighbor(p: usize, rng: &mut ChaCha8Rng) -> Result<EdgeSet> {
    let pts: Vec<(f64, f64)> = (0..p).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let mut edges = EdgeSet::new(p);
    for i in 0..p {
        let mut others: Vec<(f64, usize)> = (0..p)
            .filter(|&j| j != i)
            .map(|j| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(NN_NEIGHBOURS) {
            edges.insert(i, j)?;
        }
    }
    Ok(edges)
}

fn erdos_renyi(p: usize, rng: &mut ChaCha8Rng) -> Result<EdgeSet> {
    let target = 2 * p;
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|u| ((u + 1)..p).map(move |v| (u, v))).collect();
    for _attempt in 0..10_000 {
        pairs.shuffle(rng);
        let mut edges = EdgeSet::new(p);
        let mut degree = vec![0usize; p];
        for &(u, v) in &pairs {
            if degree[u] < ER_MAX_DEGREE && degree[v] < ER_MAX_DEGREE {
                edges.insert(u, v)?;
                degree[u] += 1;
                degree[v] += 1;
                if edges.len() == target {
                    return Ok(edges);
                }
            }
        }
    }
    Err(Error::InvalidInput(format!(
        "could not place {target} edges with degree cap {ER_MAX_DEGREE} on {p} nodes"
    )))
}

fn scale_free(p: usize, rng: &mut ChaCha8Rng) -> Result<EdgeSet> {
    let mut edges = EdgeSet::new(p);
    let mut degree = vec![0usize; p];
    for u in 0..SEED_CLIQUE {
        for v in (u + 1)..SEED_CLIQUE {
            edges.insert(u, v)?;
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    for new in SEED_CLIQUE..p {
        let total: usize = degree[..new].iter().sum();
        let mut ticket = rng.random_range(0..total);
        let mut target = 0;
        for (j, &d) in degree[..new].iter().enumerate() {
            if ticket < d {
                target = j;
                break;
            }
            ticket -= d;
        }
        edges.insert(new, target)?;
        degree[new] += 1;
        degree[target] += 1;
    }
    Ok(edges)
}
