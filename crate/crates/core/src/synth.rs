//! Nested Erdős–Rényi graphs and GP-prior label samples.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterSpec, SpectralFilter};
use crate::graph::{Graph, SpectralDecomposition};

/// Regeneration attempts before giving up on connectivity.
pub const CONNECTIVITY_RETRIES: usize = 100;
const SUPER_EDGE_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Number of blocks (nodes at the finest level) grouped together.
    pub size: usize,
    /// ER edge probability between the blocks of a group.
    pub p: f64,
}

/// Generator parameters. `levels` runs from finest to coarsest; `cross[i]`
/// is the node-pair probability used to realize a super-edge at level `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiScaleSpec {
    pub levels: Vec<Level>,
    pub cross: Vec<f64>,
    pub seed: u64,
}

impl Default for MultiScaleSpec {
    fn default() -> Self {
        MultiScaleSpec {
            levels: vec![
                Level { size: 4, p: 0.9 },
                Level { size: 4, p: 0.5 },
                Level { size: 8, p: 0.4 },
            ],
            cross: vec![0.15, 0.01],
            seed: 0,
        }
    }
}

impl MultiScaleSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        MultiScaleSpec { seed, ..self.clone() }
    }

    pub fn n_nodes(&self) -> usize {
        self.levels.iter().map(|l| l.size).product()
    }

    fn validate(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(Error::invalid("need at least two levels"));
        }
        if self.cross.len() != self.levels.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} cross probabilities, got {}",
                self.levels.len() - 1,
                self.cross.len()
            )));
        }
        for l in &self.levels {
            if l.size < 1 {
                return Err(Error::invalid("level sizes must be positive"));
            }
            if !(l.p > 0.0 && l.p <= 1.0) {
                return Err(Error::invalid(format!("probability {} not in (0, 1]", l.p)));
            }
        }
        if let Some(p) = self.cross.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::invalid(format!("cross probability {p} not in (0, 1]")));
        }
        if self.levels.iter().skip(1).any(|l| l.p > self.levels[0].p) {
            warn!("finest level does not have the highest edge probability");
        }
        Ok(())
    }
}

/// Samples a connected nested-ER graph, regenerating up to
/// [`CONNECTIVITY_RETRIES`] times.
pub fn generate_multiscale(spec: &MultiScaleSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_nodes();
    for _ in 0..CONNECTIVITY_RETRIES {
        let edges = sample_edges(spec, &mut rng);
        let covered = {
            let mut seen = vec![false; n];
            for &(a, b, _) in &edges {
                seen[a] = true;
                seen[b] = true;
            }
            seen.iter().all(|&s| s) || n == 1
        };
        if !covered {
            continue;
        }
        let graph = Graph::new(n, &edges)?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::NotConnected(CONNECTIVITY_RETRIES))
}

fn sample_edges(spec: &MultiScaleSpec, rng: &mut ChaCha8Rng) -> Vec<(usize, usize, f64)> {
    let n = spec.n_nodes();
    let mut edges = Vec::new();
    let mut block = 1;
    for (li, level) in spec.levels.iter().enumerate() {
        let group = block * level.size;
        for start in (0..n).step_by(group) {
            for a in 0..level.size {
                for b in a + 1..level.size {
                    if !rng.random_bool(level.p) {
                        continue;
                    }
                    let (sa, sb) = (start + a * block, start + b * block);
                    if li == 0 {
                        edges.push((sa, sb, 1.0));
                    } else {
                        connect_blocks(sa, sb, block, spec.cross[li - 1], rng, &mut edges);
                    }
                }
            }
        }
        block = group;
    }
    edges
}

/// Joins two blocks pairwise with probability `p`, with at least one edge.
fn connect_blocks(
    sa: usize,
    sb: usize,
    size: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
    edges: &mut Vec<(usize, usize, f64)>,
) {
    for _ in 0..SUPER_EDGE_RETRIES {
        let before = edges.len();
        for i in 0..size {
            for j in 0..size {
                if rng.random_bool(p) {
                    edges.push((sa + i, sb + j, 1.0));
                }
            }
        }
        if edges.len() > before {
            return;
        }
    }
    edges.push((sa + rng.random_range(0..size), sb + rng.random_range(0..size), 1.0));
}

/// A signal drawn from the GP prior of a filter.
#[derive(Debug, Clone, Serialize)]
pub struct LabelSample {
    pub values: Vec<f64>,
    pub spec: Option<FilterSpec>,
    pub seed: u64,
}

impl LabelSample {
    /// `node,value` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{v}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `y = W z`, `z ~ N(0, I)`, so that `y ~ N(0, W Wᵀ)`.
pub fn sample_labels<F: SpectralFilter + ?Sized>(dec: &SpectralDecomposition, filter: &F, seed: u64) -> LabelSample {
    let n = dec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    let u = dec.eigenvectors();
    let mut coeffs = u.tr_mul(&z);
    for (c, &l) in coeffs.iter_mut().zip(dec.eigenvalues().iter()) {
        *c *= filter.value(l);
    }
    let y = u * coeffs;
    LabelSample {
        values: y.iter().copied().collect(),
        spec: filter.as_spec().cloned(),
        seed,
    }
}

/// Number of training nodes: `round(n · fraction)` half up, kept in `1..n`.
pub fn train_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {fraction} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two nodes to split"));
    }
    let k = (n as f64 * fraction + 0.5).floor() as usize;
    Ok(k.clamp(1, n - 1))
}

/// Uniform random partition into (train, test), each sorted.
pub fn split_nodes(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = train_count(n, fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(k);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}
