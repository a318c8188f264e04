//! Node-classification bundles, TFIDF weighting and the polynomial feature kernel.
//!
//! A bundle is a directory with `edges.txt` (edge-list format), `features.csv`
//! (`node_id` then dense values or sparse `col:val` pairs), `labels.csv`
//! (`node_id,class`), `splits.json` (`{"train":[..],"val":[..],"test":[..]}`)
//! and `meta.json` (`{"name":..,"num_classes":..}`; optional `num_features`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{implied_nodes, parse_edge_records, Graph};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_features: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NodeDataset {
    pub name: String,
    pub graph: Graph,
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub split: Split,
}

impl NodeDataset {
    /// Builds a dataset and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let ds = NodeDataset {
            name: name.into(),
            graph,
            features,
            labels,
            n_classes,
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.graph.n_nodes();
        let bad = |m: String| Err(Error::InvalidDataset(m));
        if self.features.nrows() != n {
            return bad(format!("{} feature rows for {n} nodes", self.features.nrows()));
        }
        if self.labels.len() != n {
            return bad(format!("{} labels for {n} nodes", self.labels.len()));
        }
        if let Some(c) = self.labels.iter().find(|&&c| c >= self.n_classes) {
            return bad(format!("class {c} outside 0..{}", self.n_classes));
        }
        let mut owner = vec![None; n];
        for (name, set) in [
            ("train", &self.split.train),
            ("val", &self.split.val),
            ("test", &self.split.test),
        ] {
            for &i in set {
                if i >= n {
                    return bad(format!("{name} index {i} out of range"));
                }
                if let Some(prev) = owner[i].replace(name) {
                    return bad(format!("node {i} in both {prev} and {name}"));
                }
            }
        }
        let mut present = vec![false; self.n_classes];
        for &i in &self.split.train {
            present[self.labels[i]] = true;
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return bad(format!("class {c} absent from the training split"));
        }
        Ok(())
    }

    /// Stratified split: `per_class_train` per class, then `val_size` uniformly
    /// from the rest; the remainder is test.
    pub fn random_split(&self, per_class_train: usize, val_size: usize, seed: u64) -> Result<NodeDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class = vec![Vec::new(); self.n_classes];
        for (i, &c) in self.labels.iter().enumerate() {
            by_class[c].push(i);
        }
        let mut train = Vec::new();
        let mut rest = Vec::new();
        for (c, mut members) in by_class.into_iter().enumerate() {
            if members.len() < per_class_train.max(1) {
                return Err(Error::InvalidDataset(format!(
                    "class {c} has {} nodes, need {per_class_train}",
                    members.len()
                )));
            }
            members.shuffle(&mut rng);
            rest.extend(members.split_off(per_class_train));
            train.extend(members);
        }
        if rest.len() < val_size {
            return Err(Error::InvalidDataset(format!(
                "only {} nodes left for validation",
                rest.len()
            )));
        }
        rest.sort_unstable();
        rest.shuffle(&mut rng);
        let mut test = rest.split_off(val_size);
        let mut val = rest;
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let mut out = self.clone();
        out.split = Split { train, val, test };
        out.validate()?;
        Ok(out)
    }

    /// Writes the bundle layout described in the module docs (dense features).
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("edges.txt", self.graph.to_edge_list())?;
        let mut feats = String::new();
        for (i, row) in self.features.row_iter().enumerate() {
            feats.push_str(&i.to_string());
            for v in row.iter() {
                feats.push(',');
                feats.push_str(&v.to_string());
            }
            feats.push('\n');
        }
        write("features.csv", feats)?;
        let labels: String = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{i},{c}\n"))
            .collect();
        write("labels.csv", labels)?;
        write("splits.json", serde_json::to_string(&self.split)?)?;
        let meta = Meta {
            name: self.name.clone(),
            num_classes: self.n_classes,
            num_features: Some(self.n_features()),
        };
        write("meta.json", serde_json::to_string_pretty(&meta)?)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Data lines with their 1-based numbers; skips blanks, `#` comments and a
/// header whose first field is not an integer.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        let header = i == 0 && l.split(',').next().is_some_and(|f| f.trim().parse::<usize>().is_err());
        (!l.is_empty() && !l.starts_with('#') && !header).then_some((i + 1, l))
    })
}

enum Row {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

fn parse_features(path: &Path, num_features: Option<usize>) -> Result<BTreeMap<usize, Row>> {
    let text = read(path)?;
    let mut rows = BTreeMap::new();
    for (line, l) in data_lines(&text) {
        let mut fields = l.split(',').map(str::trim);
        let node: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_error(path, line, "bad node id"))?;
        let rest: Vec<&str> = fields.filter(|f| !f.is_empty()).collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_error(path, line, format!("bad value {s:?}")))
        };
        let row = if rest.is_empty() || rest.iter().any(|f| f.contains(':')) {
            let mut pairs = Vec::with_capacity(rest.len());
            for f in rest {
                let (c, v) = f
                    .split_once(':')
                    .ok_or_else(|| parse_error(path, line, format!("expected col:val, got {f:?}")))?;
                let c: usize = c
                    .parse()
                    .map_err(|_| parse_error(path, line, format!("bad column {c:?}")))?;
                if num_features.is_some_and(|d| c >= d) {
                    return Err(parse_error(path, line, format!("column {c} out of range")));
                }
                pairs.push((c, num(v)?));
            }
            Row::Sparse(pairs)
        } else {
            Row::Dense(rest.into_iter().map(num).collect::<Result<_>>()?)
        };
        if rows.insert(node, row).is_some() {
            return Err(parse_error(path, line, format!("duplicate node {node}")));
        }
    }
    Ok(rows)
}

/// Loads and validates a bundle directory.
pub fn load_dataset(dir: &Path) -> Result<NodeDataset> {
    let meta: Meta = {
        let p = dir.join("meta.json");
        serde_json::from_str(&read(&p)?)?
    };
    let labels_path = dir.join("labels.csv");
    let text = read(&labels_path)?;
    let mut label_map = BTreeMap::new();
    for (line, l) in data_lines(&text) {
        let (node, class) = l
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| parse_error(&labels_path, line, "expected node_id,class"))?;
        if label_map.insert(node, class).is_some() {
            return Err(parse_error(&labels_path, line, format!("duplicate node {node}")));
        }
    }
    let n = label_map.len();
    if label_map.keys().enumerate().any(|(i, &k)| i != k) {
        return Err(Error::InvalidDataset("labels.csv must cover nodes 0..N exactly".into()));
    }
    let labels: Vec<usize> = label_map.into_values().collect();

    let features_path = dir.join("features.csv");
    let rows = parse_features(&features_path, meta.num_features)?;
    if rows.len() != n || rows.keys().enumerate().any(|(i, &k)| i != k) {
        return Err(Error::InvalidDataset(format!(
            "features.csv must have one row per node (0..{n})"
        )));
    }
    let d = match meta.num_features {
        Some(d) => d,
        None => rows
            .values()
            .map(|r| match r {
                Row::Dense(v) => v.len(),
                Row::Sparse(p) => p.iter().map(|(c, _)| c + 1).max().unwrap_or(0),
            })
            .max()
            .unwrap_or(0),
    };
    let mut features = DMatrix::zeros(n, d);
    for (i, row) in rows.into_values().enumerate() {
        match row {
            Row::Dense(v) => {
                if v.len() != d {
                    return Err(Error::InvalidDataset(format!(
                        "node {i} has {} features, expected {d}",
                        v.len()
                    )));
                }
                for (j, x) in v.into_iter().enumerate() {
                    features[(i, j)] = x;
                }
            }
            Row::Sparse(pairs) => {
                for (j, x) in pairs {
                    features[(i, j)] = x;
                }
            }
        }
    }

    let edges_path = dir.join("edges.txt");
    let (declared, records) = parse_edge_records(&read(&edges_path)?, &edges_path)?;
    let seen = declared.unwrap_or(0).max(implied_nodes(&records));
    if seen > n {
        return Err(Error::InvalidDataset(format!(
            "edge list references {seen} nodes but only {n} are labelled"
        )));
    }
    let graph = Graph::new(n, &undirected_edges(records))?;

    let split: Split = {
        let p = dir.join("splits.json");
        serde_json::from_str(&read(&p)?)?
    };
    NodeDataset::new(meta.name, graph, features, labels, meta.num_classes, split)
}

/// Collapses reversed and repeated pairs (first weight wins) and drops self-loops.
fn undirected_edges(records: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    let mut seen = std::collections::HashSet::new();
    let mut loops = 0;
    let mut out = Vec::with_capacity(records.len());
    for (i, j, w) in records {
        if i == j {
            loops += 1;
        } else if seen.insert((i.min(j), i.max(j))) {
            out.push((i, j, w));
        }
    }
    if loops > 0 {
        warn!("dropped {loops} self-loops from the edge list");
    }
    out
}

/// Directory named by an environment variable, when set and present.
pub fn bundle_from_env(var: &str) -> Option<PathBuf> {
    let p = PathBuf::from(std::env::var_os(var)?);
    p.is_dir().then_some(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfConfig {
    /// `ln(N / (1 + df)) + 1` when set, `ln(N / df) + 1` otherwise.
    pub smooth_idf: bool,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            smooth_idf: true,
            l2_normalize: true,
        }
    }
}

/// Inverse document frequencies of the columns of a count matrix.
pub fn idf(features: &DMatrix<f64>, smooth: bool) -> Vec<f64> {
    let n = features.nrows() as f64;
    features
        .column_iter()
        .map(|col| {
            let df = col.iter().filter(|&&x| x != 0.0).count() as f64;
            if smooth {
                (n / (1.0 + df)).ln() + 1.0
            } else if df > 0.0 {
                (n / df).ln() + 1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Term-frequency / inverse-document-frequency weighting of nonnegative counts.
pub fn tfidf(features: &DMatrix<f64>, config: TfidfConfig) -> Result<DMatrix<f64>> {
    if let Some(x) = features.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::invalid(format!("tfidf needs nonnegative entries, found {x}")));
    }
    let weights = idf(features, config.smooth_idf);
    let mut out = features.clone();
    let mut zero_rows = 0;
    for mut row in out.row_iter_mut() {
        let total: f64 = row.sum();
        if total == 0.0 {
            zero_rows += 1;
            continue;
        }
        for (x, w) in row.iter_mut().zip(&weights) {
            *x = *x / total * w;
        }
        if config.l2_normalize {
            let norm = row.norm();
            if norm > 0.0 {
                row.scale_mut(1.0 / norm);
            }
        }
    }
    if zero_rows > 0 {
        warn!("{zero_rows} all-zero feature rows kept as zero vectors");
    }
    Ok(out)
}

/// `K_ij = variance · (x_iᵀ x_j + offset)^degree`.
pub fn polynomial_feature_kernel(x: &DMatrix<f64>, degree: u32, variance: f64, offset: f64) -> Result<DMatrix<f64>> {
    if degree < 1 || !(variance > 0.0) || !(offset >= 0.0) {
        return Err(Error::invalid(
            "polynomial kernel needs degree ≥ 1, variance > 0, offset ≥ 0",
        ));
    }
    let mut k = (x * x.transpose()).map(|g| variance * (g + offset).powi(degree as i32));
    crate::gp::linalg::symmetrize(&mut k);
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tfidf_hand_example() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0]);
        let out = tfidf(&x, TfidfConfig::default()).unwrap();
        // df = (3, 1, 1); idf = ln(3/4)+1, ln(3/2)+1, ln(3/2)+1
        let i0 = (0.75f64).ln() + 1.0;
        let i1 = (1.5f64).ln() + 1.0;
        let r0 = [0.5 * i0, 0.5 * i1, 0.0];
        let r2 = [0.25 * i0, 0.0, 0.75 * i1];
        let norm = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..3 {
            assert!((out[(0, j)] - r0[j] / norm(&r0)).abs() < 1e-12);
            assert!((out[(2, j)] - r2[j] / norm(&r2)).abs() < 1e-12);
        }
        assert!((out[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rarer_terms_weigh_more() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let w = idf(&x, true);
        assert!(w[1] > w[0]);
    }

    #[test]
    fn zero_rows_stay_zero() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 2.0]);
        let out = tfidf(&x, TfidfConfig::default()).unwrap();
        assert_eq!(out.row(0).norm(), 0.0);
        assert!((out.row(1).norm() - 1.0).abs() < 1e-12);
        assert!(tfidf(&DMatrix::from_element(1, 1, -1.0), TfidfConfig::default()).is_err());
    }

    #[test]
    fn polynomial_kernel_examples() {
        let k = polynomial_feature_kernel(&DMatrix::identity(2, 2), 3, 1.0, 0.0).unwrap();
        assert_eq!(k, DMatrix::identity(2, 2));
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let k = polynomial_feature_kernel(&x, 1, 2.0, 0.0).unwrap();
        assert_eq!(k, (&x * x.transpose()) * 2.0);
        assert!(polynomial_feature_kernel(&x, 0, 1.0, 0.0).is_err());
    }
}
