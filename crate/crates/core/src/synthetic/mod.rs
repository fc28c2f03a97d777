//! Ground-truth scenarios: random graphs, smooth edge paths over the index,
//! positive-definite flooring and Gaussian sampling given the index.

mod graph;
mod spline;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use graph::{GraphKind, GraphSpec, ER_MAX_DEGREE};
pub use spline::NaturalCubicSpline;

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::local_moments::{IndexGrid, IndexedSample};

pub const DEFAULT_PD_FLOOR: f64 = 0.5;
pub const WALK_STEPS: usize = 10_000;
pub const WALK_STEP_SIZE: f64 = 0.002;
pub const SPLINE_KNOTS: usize = 21;

pub fn generate_graph(kind: GraphKind, p: usize, seed: u64) -> Result<GraphSpec> {
    graph::generate_graph_with(kind, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Shape of the edge values as functions of the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Spline-smoothed ±0.002 random walk started in ±[0.2, 0.3].
    RandomWalk,
    /// `2z - c` with `c ~ U[0,1]`.
    Linear,
    /// `sin(2πz + c)` with `c ~ U[0,1]`.
    Sin,
    /// Index-free value drawn from ±[0.2, 0.4].
    Constant,
    /// Value from ±[0.3, 0.5] whose sign flips at `z = 0.5`.
    TwoRegime,
}

impl PathKind {
    pub const ALL: [PathKind; 5] = [
        PathKind::RandomWalk,
        PathKind::Linear,
        PathKind::Sin,
        PathKind::Constant,
        PathKind::TwoRegime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathKind::RandomWalk => "random_walk",
            PathKind::Linear => "linear",
            PathKind::Sin => "sin",
            PathKind::Constant => "constant",
            PathKind::TwoRegime => "two_regime",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PathKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown path kind '{s}'")))
    }
}

/// Distribution of the index variable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum IndexDistribution {
    #[default]
    Uniform,
    Beta {
        a: f64,
        b: f64,
    },
}

impl fmt::Display for IndexDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexDistribution::Uniform => f.write_str("uniform"),
            IndexDistribution::Beta { a, b } => write!(f, "beta:{a}:{b}"),
        }
    }
}

impl FromStr for IndexDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(IndexDistribution::Uniform);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if let ["beta", a, b] = parts.as_slice() {
            let a: f64 = a.parse().map_err(|_| Error::Parse(format!("bad beta shape in '{s}'")))?;
            let b: f64 = b.parse().map_err(|_| Error::Parse(format!("bad beta shape in '{s}'")))?;
            if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
                return Ok(IndexDistribution::Beta { a, b });
            }
        }
        Err(Error::Parse(format!("unknown index distribution '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgePath {
    RandomWalk(NaturalCubicSpline),
    Linear { offset: f64 },
    Sin { offset: f64 },
    Constant { level: f64 },
    TwoRegime { level: f64 },
}

impl EdgePath {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            EdgePath::RandomWalk(spline) => spline.eval(z),
            EdgePath::Linear { offset } => 2.0 * z - offset,
            EdgePath::Sin { offset } => (2.0 * std::f64::consts::PI * z + offset).sin(),
            EdgePath::Constant { level } => *level,
            EdgePath::TwoRegime { level } => {
                if z < 0.5 {
                    *level
                } else {
                    -level
                }
            }
        }
    }

    fn draw(kind: PathKind, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            PathKind::RandomWalk => {
                let walk = random_walk(rng);
                let stride = WALK_STEPS / (SPLINE_KNOTS - 1);
                let knots = (0..SPLINE_KNOTS).map(|j| (j * stride) as f64 / WALK_STEPS as f64).collect();
                let values = (0..SPLINE_KNOTS).map(|j| walk[j * stride]).collect();
                EdgePath::RandomWalk(NaturalCubicSpline::new(knots, values))
            }
            PathKind::Linear => EdgePath::Linear { offset: rng.random() },
            PathKind::Sin => EdgePath::Sin { offset: rng.random() },
            PathKind::Constant => EdgePath::Constant {
                level: signed_uniform(rng, 0.2, 0.4),
            },
            PathKind::TwoRegime => EdgePath::TwoRegime {
                level: signed_uniform(rng, 0.3, 0.5),
            },
        }
    }
}

fn signed_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let magnitude = rng.random_range(lo..hi);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Raw walk values at `t/T` for `t = 0..=T`.
pub fn random_walk(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut walk = Vec::with_capacity(WALK_STEPS + 1);
    let mut value = signed_uniform(rng, 0.2, 0.3);
    walk.push(value);
    for _ in 0..WALK_STEPS {
        value += if rng.random::<bool>() { WALK_STEP_SIZE } else { -WALK_STEP_SIZE };
        walk.push(value);
    }
    walk
}

/// A reproducible ground-truth model: graph, one path per edge, and the
/// floor applied to the smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub graph: GraphSpec,
    pub path_kind: PathKind,
    pub paths: Vec<((usize, usize), EdgePath)>,
    pub pd_floor: f64,
    pub seed: u64,
    pub index_distribution: IndexDistribution,
}

impl ScenarioSpec {
    pub fn generate(kind: GraphKind, p: usize, path_kind: PathKind, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = graph::generate_graph_with(kind, p, &mut rng)?;
        Ok(Self::with_paths(graph, path_kind, seed, &mut rng))
    }

    /// Draws paths for a caller-supplied graph.
    pub fn from_graph(graph: GraphSpec, path_kind: PathKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_paths(graph, path_kind, seed, &mut rng)
    }

    fn with_paths(graph: GraphSpec, path_kind: PathKind, seed: u64, rng: &mut ChaCha8Rng) -> Self {
        let paths = graph.edges.iter().map(|e| (e, EdgePath::draw(path_kind, rng))).collect();
        ScenarioSpec {
            graph,
            path_kind,
            paths,
            pd_floor: DEFAULT_PD_FLOOR,
            seed,
            index_distribution: IndexDistribution::Uniform,
        }
    }

    pub fn p(&self) -> usize {
        self.graph.p
    }

    pub fn support(&self) -> &EdgeSet {
        &self.graph.edges
    }

    /// Off-diagonal path values with a zero diagonal, before flooring.
    pub fn raw_precision_at(&self, z: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p(), self.p());
        for ((u, v), path) in &self.paths {
            let value = path.eval(z);
            m[(*u, *v)] = value;
            m[(*v, *u)] = value;
        }
        m
    }

    pub fn precision_at(&self, z: f64) -> DMatrix<f64> {
        floor_spectrum(self.raw_precision_at(z), self.pd_floor)
    }

    pub fn precision_on_grid(&self, grid: &IndexGrid) -> Vec<DMatrix<f64>> {
        grid.points().iter().map(|&z| self.precision_at(z)).collect()
    }

    /// `key=value` lines sufficient to regenerate the scenario.
    pub fn to_text(&self) -> String {
        format!(
            "graph_kind={}\np={}\nseed={}\npath_kind={}\npd_floor={}\nindex_distribution={}\n",
            self.graph.kind,
            self.p(),
            self.seed,
            self.path_kind,
            self.pd_floor,
            self.index_distribution
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut p = None;
        let mut seed = None;
        let mut path_kind = None;
        let mut pd_floor = DEFAULT_PD_FLOOR;
        let mut index_distribution = IndexDistribution::Uniform;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Parse(format!("invalid {what} '{value}'"));
            match key {
                "graph_kind" => kind = Some(value.parse::<GraphKind>()?),
                "p" => p = Some(value.parse::<usize>().map_err(|_| bad("p"))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
                "path_kind" => path_kind = Some(value.parse::<PathKind>()?),
                "pd_floor" => pd_floor = value.parse::<f64>().map_err(|_| bad("pd_floor"))?,
                "index_distribution" => index_distribution = value.parse()?,
                other => return Err(Error::Parse(format!("unknown scenario key '{other}'"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("scenario missing '{k}'"));
        let mut spec = ScenarioSpec::generate(
            kind.ok_or_else(|| missing("graph_kind"))?,
            p.ok_or_else(|| missing("p"))?,
            path_kind.ok_or_else(|| missing("path_kind"))?,
            seed.ok_or_else(|| missing("seed"))?,
        )?;
        if !(pd_floor > 0.0 && pd_floor.is_finite()) {
            return Err(Error::InvalidInput(format!("pd_floor must be positive, got {pd_floor}")));
        }
        spec.pd_floor = pd_floor;
        spec.index_distribution = index_distribution;
        Ok(spec)
    }
}

fn floor_spectrum(mut m: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let shift = (floor - SymEigen::new(&m).min()).max(0.0);
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    m
}

/// Adds `max(0, floor - λ_min)·I` to each matrix.
pub fn enforce_pd(matrices: &[DMatrix<f64>], floor: f64) -> Vec<DMatrix<f64>> {
    matrices.iter().map(|m| floor_spectrum(m.clone(), floor)).collect()
}

pub fn generate_precision_field(graph: &GraphSpec, path_kind: PathKind, grid: &IndexGrid, seed: u64) -> Vec<DMatrix<f64>> {
    ScenarioSpec::from_graph(graph.clone(), path_kind, seed).precision_on_grid(grid)
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub sample: IndexedSample,
    pub grid: IndexGrid,
    /// True precision matrices at the grid points.
    pub truth: Vec<DMatrix<f64>>,
}

/// Draws `z ~ f`, then `x | z ~ N(0, Ω*(z)⁻¹)` through the symmetric square
/// root of the covariance.
pub fn sample_dataset(scenario: &ScenarioSpec, n: usize, grid: &IndexGrid, seed: u64) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let p = scenario.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = match scenario.index_distribution {
        IndexDistribution::Uniform => None,
        IndexDistribution::Beta { a, b } => Some(Beta::new(a, b).map_err(|e| Error::InvalidInput(format!("beta index law: {e}")))?),
    };
    let mut z = Vec::with_capacity(n);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let zi: f64 = match &beta {
            None => rng.random(),
            Some(dist) => dist.sample(&mut rng),
        };
        let root = SymEigen::new(&scenario.precision_at(zi)).map(|w| 1.0 / w.sqrt());
        let noise = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        x.row_mut(i).copy_from(&(root * noise).transpose());
        z.push(zi);
    }
    Ok(SyntheticDataset {
        sample: IndexedSample::new(z, x)?,
        grid: grid.clone(),
        truth: scenario.precision_on_grid(grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;

    #[test]
    fn graph_examples() {
        let chain = generate_graph(GraphKind::Chain, 20, 1).unwrap();
        assert_eq!(chain.edges.len(), 19);
        assert_eq!(chain.max_degree, 2);
        let er = generate_graph(GraphKind::ErdosRenyi, 20, 1).unwrap();
        assert_eq!(er.edges.len(), 40);
        assert!(er.max_degree <= 5);
        assert_eq!(generate_graph(GraphKind::ScaleFree, 50, 1).unwrap().edges.len(), 55);
        assert!(generate_graph(GraphKind::ScaleFree, 5, 1).is_err());
        assert!(generate_graph(GraphKind::NearestNeighbor, 2, 1).is_err());
        assert!(generate_graph(GraphKind::Chain, 1, 1).is_err());
    }

    #[test]
    fn kind_invariants_over_seeds() {
        for p in [10, 20, 50] {
            for seed in 0..100 {
                let c = generate_graph(GraphKind::Chain, p, seed).unwrap();
                assert_eq!(c.edges.len(), p - 1);
                assert!(c.max_degree <= 2);
                let e = generate_graph(GraphKind::ErdosRenyi, p, seed).unwrap();
                assert_eq!(e.edges.len(), 2 * p);
                assert!(e.max_degree <= ER_MAX_DEGREE);
                let s = generate_graph(GraphKind::ScaleFree, p, seed).unwrap();
                assert_eq!(s.edges.len(), 10 + p - 5);
                let nn = generate_graph(GraphKind::NearestNeighbor, p, seed).unwrap();
                assert!(nn.edges.len() >= p && nn.edges.len() <= 2 * p);
                assert!(nn.edges.degrees().iter().all(|&d| d >= 2));
            }
        }
    }

    #[test]
    fn er_smallest_graph_is_complete() {
        let g = generate_graph(GraphKind::ErdosRenyi, 5, 3).unwrap();
        assert_eq!(g.edges.len(), 10);
    }

    #[test]
    fn path_examples() {
        assert_eq!(EdgePath::Linear { offset: 1.0 }.eval(0.5), 0.0);
        let s = EdgePath::Sin { offset: 0.7 };
        assert!((0..=100).all(|i| s.eval(i as f64 / 100.0).abs() <= 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let walk = random_walk(&mut rng);
        assert_eq!(walk.len(), WALK_STEPS + 1);
        assert!((0.2..=0.3).contains(&walk[0].abs()));
        assert!(walk.windows(2).all(|w| ((w[1] - w[0]).abs() - WALK_STEP_SIZE).abs() < 1e-12));
    }

    #[test]
    fn spline_passes_through_subsampled_walk() {
        let spec = ScenarioSpec::generate(GraphKind::Chain, 4, PathKind::RandomWalk, 5).unwrap();
        let (_, EdgePath::RandomWalk(spline)) = &spec.paths[0] else {
            panic!("expected walk")
        };
        assert_eq!(spline.knots().len(), SPLINE_KNOTS);
        assert_eq!(spline.knots()[1], 0.05);
        for (k, v) in spline.knots().iter().zip(spline.values()) {
            assert!((spline.eval(*k) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn precision_support_and_floor() {
        let spec = ScenarioSpec::generate(GraphKind::ErdosRenyi, 12, PathKind::Sin, 2).unwrap();
        for i in 0..=200 {
            let m = spec.precision_at(i as f64 / 200.0);
            assert!(min_eigenvalue(&m) >= DEFAULT_PD_FLOOR - 1e-9);
            for u in 0..12 {
                for v in 0..12 {
                    if u != v && !spec.support().contains(u, v) {
                        assert_eq!(m[(u, v)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn enforce_pd_examples() {
        let big = DMatrix::from_diagonal_element(3, 3, 2.0);
        assert_eq!(enforce_pd(&[big.clone()], 0.5)[0], big);
        assert_eq!(
            enforce_pd(&[DMatrix::zeros(2, 2)], 0.5)[0],
            DMatrix::from_diagonal_element(2, 2, 0.5)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-2.0..2.0));
            let sym = (&a + a.transpose()) * 0.5;
            let once = enforce_pd(&[sym], 0.5);
            assert!(min_eigenvalue(&once[0]) >= 0.5 - 1e-9);
            let twice = enforce_pd(&once, 0.5);
            assert!((&twice[0] - &once[0]).amax() < 1e-9);
        }
    }

    #[test]
    fn scenario_text_round_trip() {
        let mut spec = ScenarioSpec::generate(GraphKind::NearestNeighbor, 8, PathKind::Linear, 77).unwrap();
        spec.index_distribution = IndexDistribution::Beta { a: 2.0, b: 3.0 };
        let back = ScenarioSpec::from_text(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
        assert!(ScenarioSpec::from_text("p=4\n").is_err());
    }

    #[test]
    fn identity_scenario_moments() {
        let graph = GraphSpec {
            kind: GraphKind::Chain,
            p: 3,
            edges: EdgeSet::new(3),
            max_degree: 0,
        };
        let mut spec = ScenarioSpec::from_graph(graph, PathKind::Sin, 0);
        spec.pd_floor = 1.0;
        let n = 10_000;
        let data = sample_dataset(&spec, n, &IndexGrid::uniform(5).unwrap(), 11).unwrap();
        assert!(data.sample.z().iter().all(|z| (0.0..=1.0).contains(z)));
        let x = data.sample.x();
        let second = x.transpose() * x / n as f64;
        let tol = 5.0 / (n as f64).sqrt();
        assert!((second - DMatrix::<f64>::identity(3, 3)).amax() <= tol);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ScenarioSpec::generate(GraphKind::Chain, 5, PathKind::RandomWalk, 3).unwrap();
        let grid = IndexGrid::uniform(4).unwrap();
        let a = sample_dataset(&spec, 50, &grid, 8).unwrap();
        let b = sample_dataset(&spec, 50, &grid, 8).unwrap();
        assert_eq!(a.sample.x(), b.sample.x());
        assert_eq!(a.sample.z(), b.sample.z());
        assert_eq!(a.truth, b.truth);
    }
}
