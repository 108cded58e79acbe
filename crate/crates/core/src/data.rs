//! Datasets, the CADG v1 text format, and train/val/test splits.
//!
//! A CADG v1 file is line oriented:
//!
//! ```text
//! cadg 1
//! name cora
//! nodes 2708
//! edges 5278
//! features 1433 sparse
//! classes 7
//! E
//! 0 633
//! ...
//! X
//! 0 19 1
//! ...
//! Y
//! 3
//! ...
//! S
//! train 0
//! ...
//! ```
//!
//! `E` holds one undirected edge per line, `X` holds `row col value` triples
//! (sparse) or one whitespace separated row per node (dense), `Y` holds one
//! class index per node and the optional `S` section lists the stored split.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{build_graph, SparseGraph};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureStorage {
    Sparse,
    Dense,
}

impl FeatureStorage {
    fn name(self) -> &'static str {
        match self {
            FeatureStorage::Sparse => "sparse",
            FeatureStorage::Dense => "dense",
        }
    }
}

/// Raw node features plus the layout they were stored with.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: CsrMatrix,
    pub storage: FeatureStorage,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks that all three lists are in range, duplicate free and pairwise disjoint.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for (part, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in ids {
                if i >= n_nodes {
                    return Err(Error::Invariant(format!("{part} node {i} out of range for {n_nodes} nodes")));
                }
                if !seen.insert(i) {
                    return Err(Error::Invariant(format!("node {i} appears twice in the split ({part})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Graph without self-loops; models add them per configuration.
    pub graph: SparseGraph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub standard_split: Option<Split>,
}

impl Dataset {
    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.features.matrix.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        self.graph.validate()?;
        if self.graph.has_self_loops() {
            return Err(Error::Invariant("dataset graph must not carry self-loops".into()));
        }
        if self.features.matrix.rows() != n {
            return Err(Error::Invariant(format!(
                "feature matrix has {} rows for {n} nodes",
                self.features.matrix.rows()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Invariant(format!("{} labels for {n} nodes", self.labels.len())));
        }
        if let Some((i, &y)) = self.labels.iter().enumerate().find(|(_, &y)| y >= self.n_classes) {
            return Err(Error::Invariant(format!("node {i} has label {y} >= {} classes", self.n_classes)));
        }
        if let Some(split) = &self.standard_split {
            split.validate(n)?;
        }
        Ok(())
    }

    /// Nodes of each class in increasing order.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitKind {
    Standard,
    RandomPlanetoid,
    RandomPerClass,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Standard => "standard",
            SplitKind::RandomPlanetoid => "random-planetoid",
            SplitKind::RandomPerClass => "random-per-class",
        }
    }
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "standard" => Ok(SplitKind::Standard),
            "random-planetoid" | "planetoid" => Ok(SplitKind::RandomPlanetoid),
            "random-per-class" | "per-class" => Ok(SplitKind::RandomPerClass),
            other => Err(Error::invalid(format!("unknown split kind '{other}'"))),
        }
    }
}

/// How to draw train/val/test nodes.
///
/// For `RandomPlanetoid`, `val` and `test` are totals; for `RandomPerClass`,
/// `val` is per class and the remainder becomes the test set. On the
/// standard split, `train_per_class` subsamples the stored training nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_per_class: Option<usize>,
    pub val: usize,
    pub test: Option<usize>,
}

impl SplitSpec {
    pub fn standard() -> Self {
        SplitSpec { kind: SplitKind::Standard, train_per_class: None, val: 500, test: Some(1000) }
    }

    pub fn planetoid() -> Self {
        SplitSpec { kind: SplitKind::RandomPlanetoid, train_per_class: Some(20), val: 500, test: Some(1000) }
    }

    pub fn per_class() -> Self {
        SplitSpec { kind: SplitKind::RandomPerClass, train_per_class: Some(20), val: 30, test: None }
    }

    pub fn for_kind(kind: SplitKind) -> Self {
        match kind {
            SplitKind::Standard => Self::standard(),
            SplitKind::RandomPlanetoid => Self::planetoid(),
            SplitKind::RandomPerClass => Self::per_class(),
        }
    }
}

pub fn make_split<R: Rng + ?Sized>(d: &Dataset, spec: &SplitSpec, rng: &mut R) -> Result<Split> {
    let by_class = d.nodes_by_class();
    let split = match spec.kind {
        SplitKind::Standard => {
            let stored = d
                .standard_split
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("dataset '{}' has no stored split", d.name)))?;
            match spec.train_per_class {
                None => stored.clone(),
                Some(per) => {
                    let mut train = Vec::with_capacity(per * d.n_classes);
                    for class in 0..d.n_classes {
                        let mut pool: Vec<usize> =
                            stored.train.iter().copied().filter(|&i| d.labels[i] == class).collect();
                        if pool.len() < per {
                            return Err(insufficient(class, pool.len(), per, "standard training nodes"));
                        }
                        pool.shuffle(rng);
                        train.extend_from_slice(&pool[..per]);
                    }
                    train.sort_unstable();
                    Split { train, val: stored.val.clone(), test: stored.test.clone() }
                }
            }
        }
        SplitKind::RandomPlanetoid => {
            let per = spec.train_per_class.unwrap_or(20);
            let mut train = Vec::new();
            let mut rest = Vec::new();
            for (class, nodes) in by_class.iter().enumerate() {
                if nodes.len() < per {
                    return Err(insufficient(class, nodes.len(), per, "nodes"));
                }
                let mut pool = nodes.clone();
                pool.shuffle(rng);
                train.extend_from_slice(&pool[..per]);
                rest.extend_from_slice(&pool[per..]);
            }
            rest.sort_unstable();
            rest.shuffle(rng);
            let test_n = spec.test.unwrap_or(rest.len().saturating_sub(spec.val));
            if rest.len() < spec.val + test_n {
                return Err(Error::invalid(format!(
                    "{} nodes remain after training selection, need {} val + {test_n} test",
                    rest.len(),
                    spec.val
                )));
            }
            let mut val = rest[..spec.val].to_vec();
            let mut test = rest[spec.val..spec.val + test_n].to_vec();
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            Split { train, val, test }
        }
        SplitKind::RandomPerClass => {
            let per = spec.train_per_class.unwrap_or(20);
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (class, nodes) in by_class.iter().enumerate() {
                if nodes.len() < per + spec.val {
                    return Err(insufficient(class, nodes.len(), per + spec.val, "nodes"));
                }
                let mut pool = nodes.clone();
                pool.shuffle(rng);
                train.extend_from_slice(&pool[..per]);
                val.extend_from_slice(&pool[per..per + spec.val]);
                test.extend_from_slice(&pool[per + spec.val..]);
            }
            if let Some(cap) = spec.test {
                test.shuffle(rng);
                test.truncate(cap);
            }
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            Split { train, val, test }
        }
    };
    split.validate(d.n_nodes())?;
    Ok(split)
}

fn insufficient(class: usize, have: usize, need: usize, what: &str) -> Error {
    Error::invalid(format!("class {class} has {have} {what}, need {need}"))
}

/// Published statistics of a known benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkStats {
    pub name: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    pub classes: usize,
}

pub const BENCHMARKS: [BenchmarkStats; 7] = [
    BenchmarkStats { name: "citeseer", nodes: 3327, edges: 4552, features: 3703, classes: 6 },
    BenchmarkStats { name: "cora", nodes: 2708, edges: 5278, features: 1433, classes: 7 },
    BenchmarkStats { name: "pubmed", nodes: 19717, edges: 44324, features: 500, classes: 3 },
    BenchmarkStats { name: "amazon-comp", nodes: 13752, edges: 245861, features: 767, classes: 10 },
    BenchmarkStats { name: "amazon-photo", nodes: 7650, edges: 119081, features: 745, classes: 8 },
    BenchmarkStats { name: "coauthor-cs", nodes: 18333, edges: 81894, features: 6805, classes: 15 },
    BenchmarkStats { name: "coauthor-phy", nodes: 34493, edges: 247962, features: 8415, classes: 5 },
];

pub fn known_benchmark(name: &str) -> Option<BenchmarkStats> {
    let key = name.to_ascii_lowercase().replace('_', "-");
    BENCHMARKS.iter().copied().find(|b| b.name == key)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatCheck {
    pub what: &'static str,
    pub expected: usize,
    pub actual: usize,
}

impl StatCheck {
    pub fn ok(&self) -> bool {
        self.expected == self.actual
    }
}

/// Compares a dataset against its published statistics, if it is a known benchmark.
pub fn check_benchmark(d: &Dataset) -> Option<Vec<StatCheck>> {
    let b = known_benchmark(&d.name)?;
    Some(vec![
        StatCheck { what: "nodes", expected: b.nodes, actual: d.n_nodes() },
        StatCheck { what: "edges", expected: b.edges, actual: d.graph.n_undirected_edges() },
        StatCheck { what: "features", expected: b.features, actual: d.n_features() },
        StatCheck { what: "classes", expected: b.classes, actual: d.n_classes },
    ])
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_dataset(&text, path)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, serialize_dataset(d)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Canonical CADG v1 text for a dataset.
pub fn serialize_dataset(d: &Dataset) -> String {
    let mut out = String::new();
    let n = d.n_nodes();
    let _ = writeln!(out, "cadg 1");
    let _ = writeln!(out, "name {}", d.name);
    let _ = writeln!(out, "nodes {n}");
    let _ = writeln!(out, "edges {}", d.graph.n_undirected_edges());
    let _ = writeln!(out, "features {} {}", d.n_features(), d.features.storage.name());
    let _ = writeln!(out, "classes {}", d.n_classes);
    out.push_str("E\n");
    for (i, j) in d.graph.edge_dump() {
        let _ = writeln!(out, "{i} {j}");
    }
    out.push_str("X\n");
    match d.features.storage {
        FeatureStorage::Sparse => {
            for (i, k, v) in d.features.matrix.triplets() {
                let _ = writeln!(out, "{i} {k} {v}");
            }
        }
        FeatureStorage::Dense => {
            let cols = d.n_features();
            let dense = d.features.matrix.to_dense();
            for row in 0..n {
                let line: Vec<String> = dense[row * cols..(row + 1) * cols].iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
    }
    out.push_str("Y\n");
    for y in &d.labels {
        let _ = writeln!(out, "{y}");
    }
    if let Some(split) = &d.standard_split {
        out.push_str("S\n");
        for (part, ids) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
            for i in ids {
                let _ = writeln!(out, "{part} {i}");
            }
        }
    }
    out
}

struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()),
        );
        Lines { path: path.to_path_buf(), inner: it.peekable(), last_line: 0 }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line, msg: msg.into() }
    }

    fn next(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last_line = n;
                Ok((n, l))
            }
            None => Err(self.err(self.last_line + 1, format!("unexpected end of file, expected {expecting}"))),
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|&(_, l)| l)
    }

    fn header(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next(&format!("header '{key}'"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(n, format!("expected header '{key}', found '{line}'")));
        }
        Ok((n, parts.collect()))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, parts) = self.header(key)?;
        match parts.as_slice() {
            [v] => v.parse().map_err(|_| self.err(n, format!("'{key}' needs a count, found '{v}'"))),
            _ => Err(self.err(n, format!("'{key}' needs exactly one value"))),
        }
    }

    fn section(&mut self, tag: &str) -> Result<()> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last_line = n;
                if l == tag {
                    Ok(())
                } else {
                    Err(self.err(n, format!("expected section {tag}, found '{l}'")))
                }
            }
            None => Err(self.err(self.last_line + 1, format!("missing section {tag}"))),
        }
    }

    /// Next line of a fixed-length section, naming the section when truncated.
    fn body(&mut self, tag: &str, idx: usize, total: usize) -> Result<(usize, &'a str)> {
        let truncated = || format!("section {tag} truncated: expected {total} lines, found {idx}");
        match self.inner.peek() {
            Some(&(_, l)) if is_section_tag(l) => {
                let line = self.inner.peek().map(|&(n, _)| n).unwrap_or(self.last_line + 1);
                Err(self.err(line, truncated()))
            }
            Some(_) => self.next(tag),
            None => Err(self.err(self.last_line + 1, truncated())),
        }
    }
}

fn is_section_tag(l: &str) -> bool {
    matches!(l, "E" | "X" | "Y" | "S")
}

fn parse_fields<'a, const N: usize>(lines: &Lines<'a>, n: usize, line: &'a str, what: &str) -> Result<[&'a str; N]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| lines.err(n, format!("{what} needs {N} fields, found {}", p.len())))
}

fn parse_num<T: FromStr>(lines: &Lines<'_>, n: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| lines.err(n, format!("invalid {what} '{s}'")))
}

fn parse_float(lines: &Lines<'_>, n: usize, s: &str) -> Result<f64> {
    let v: f64 = parse_num(lines, n, s, "feature value")?;
    if !v.is_finite() {
        return Err(lines.err(n, format!("non-finite feature value '{s}'")));
    }
    Ok(v)
}

fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = Lines::new(text, path);
    let (n, magic) = lines.header("cadg")?;
    if magic != ["1"] {
        return Err(lines.err(n, format!("unsupported version '{}'", magic.join(" "))));
    }
    let (n, name_parts) = lines.header("name")?;
    if name_parts.len() != 1 {
        return Err(lines.err(n, "name must be a single token"));
    }
    let name = name_parts[0].to_string();
    let n_nodes = lines.count("nodes")?;
    let n_edges = lines.count("edges")?;
    let (n, feat) = lines.header("features")?;
    let (n_features, storage) = match feat.as_slice() {
        [d, kind] => {
            let d = parse_num(&lines, n, d, "feature count")?;
            let kind = match *kind {
                "sparse" => FeatureStorage::Sparse,
                "dense" => FeatureStorage::Dense,
                other => return Err(lines.err(n, format!("feature storage must be sparse or dense, found '{other}'"))),
            };
            (d, kind)
        }
        _ => return Err(lines.err(n, "expected 'features D sparse|dense'")),
    };
    let n_classes = lines.count("classes")?;

    lines.section("E")?;
    let mut edges = Vec::with_capacity(n_edges);
    for idx in 0..n_edges {
        let (n, line) = lines.body("E", idx, n_edges)?;
        let [a, b] = parse_fields(&lines, n, line, "edge")?;
        let (a, b): (usize, usize) = (parse_num(&lines, n, a, "node")?, parse_num(&lines, n, b, "node")?);
        if a >= n_nodes || b >= n_nodes {
            return Err(lines.err(n, format!("edge ({a}, {b}) references a node >= {n_nodes}")));
        }
        if a == b {
            return Err(lines.err(n, format!("self-loop ({a}, {a}) in edge list")));
        }
        edges.push((a, b));
    }
    let graph = build_graph(&edges, n_nodes, false)?;
    if graph.n_undirected_edges() != n_edges {
        return Err(Error::Invariant(format!(
            "header declares {n_edges} edges but {} are distinct",
            graph.n_undirected_edges()
        )));
    }

    lines.section("X")?;
    let matrix = match storage {
        FeatureStorage::Sparse => {
            let mut triplets = Vec::new();
            let mut seen = HashSet::new();
            while let Some(l) = lines.peek() {
                if is_section_tag(l) {
                    break;
                }
                let (n, line) = lines.next("feature triple")?;
                let [i, k, v] = parse_fields(&lines, n, line, "feature triple")?;
                let i: usize = parse_num(&lines, n, i, "row")?;
                let k: usize = parse_num(&lines, n, k, "column")?;
                let v = parse_float(&lines, n, v)?;
                if i >= n_nodes || k >= n_features {
                    return Err(lines.err(n, format!("feature ({i}, {k}) outside {n_nodes} x {n_features}")));
                }
                if !seen.insert((i, k)) {
                    return Err(lines.err(n, format!("duplicate feature entry ({i}, {k})")));
                }
                triplets.push((i, k, v));
            }
            CsrMatrix::from_triplets(n_nodes, n_features, &triplets)?
        }
        FeatureStorage::Dense => {
            let mut data = Vec::with_capacity(n_nodes * n_features);
            for idx in 0..n_nodes {
                let (n, line) = lines.body("X", idx, n_nodes)?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(parse_float(&lines, n, tok)?);
                }
                if data.len() - before != n_features {
                    return Err(lines.err(n, format!("row has {} values, expected {n_features}", data.len() - before)));
                }
            }
            CsrMatrix::from_dense(n_nodes, n_features, &data)?
        }
    };

    lines.section("Y")?;
    let mut labels = Vec::with_capacity(n_nodes);
    for idx in 0..n_nodes {
        let (n, line) = lines.body("Y", idx, n_nodes)?;
        let y: usize = parse_num(&lines, n, line, "label")?;
        if y >= n_classes {
            return Err(lines.err(n, format!("label {y} >= {n_classes} classes")));
        }
        labels.push(y);
    }

    let standard_split = if lines.peek().is_some() {
        lines.section("S")?;
        let mut split = Split::default();
        while lines.peek().is_some() {
            let (n, line) = lines.next("split entry")?;
            let [part, i] = parse_fields(&lines, n, line, "split entry")?;
            let i: usize = parse_num(&lines, n, i, "node")?;
            match part {
                "train" => split.train.push(i),
                "val" => split.val.push(i),
                "test" => split.test.push(i),
                other => return Err(lines.err(n, format!("unknown split part '{other}'"))),
            }
        }
        Some(split)
    } else {
        None
    };

    let d = Dataset {
        name,
        graph,
        features: FeatureMatrix { matrix, storage },
        labels,
        n_classes,
        standard_split,
    };
    d.validate()?;
    Ok(d)
}

/// Parameters of a planted-partition graph with class-correlated sparse features.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub nodes_per_class: usize,
    pub n_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub n_features: usize,
    /// Active words per node.
    pub words_per_node: usize,
    /// Probability that an active word is drawn from the node's class block.
    pub signal: f64,
    pub train_per_class: usize,
    pub val_per_class: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            nodes_per_class: 40,
            n_classes: 3,
            p_in: 0.15,
            p_out: 0.01,
            n_features: 60,
            words_per_node: 6,
            signal: 0.6,
            train_per_class: 5,
            val_per_class: 10,
        }
    }
}

/// A small labeled graph with a stored split, for tests and demos.
pub fn synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Dataset> {
    let c = spec.n_classes;
    let n = spec.nodes_per_class * c;
    if c == 0 || spec.n_features < c || spec.train_per_class + spec.val_per_class > spec.nodes_per_class {
        return Err(Error::invalid("synthetic spec is infeasible"));
    }
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let block = spec.n_features / c;
    let mut triplets = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        let mut words = HashSet::new();
        while words.len() < spec.words_per_node.min(spec.n_features) {
            let w = if rng.random::<f64>() < spec.signal {
                y * block + rng.random_range(0..block)
            } else {
                rng.random_range(0..spec.n_features)
            };
            words.insert(w);
        }
        let mut words: Vec<usize> = words.into_iter().collect();
        words.sort_unstable();
        triplets.extend(words.into_iter().map(|w| (i, w, 1.0)));
    }
    let mut split = Split::default();
    for class in 0..c {
        let nodes: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        split.train.extend_from_slice(&nodes[..spec.train_per_class]);
        split.val.extend_from_slice(&nodes[spec.train_per_class..spec.train_per_class + spec.val_per_class]);
        split.test.extend_from_slice(&nodes[spec.train_per_class + spec.val_per_class..]);
    }
    for part in [&mut split.train, &mut split.val, &mut split.test] {
        part.sort_unstable();
    }
    let d = Dataset {
        name: "synthetic".into(),
        graph: build_graph(&edges, n, false)?,
        features: FeatureMatrix {
            matrix: CsrMatrix::from_triplets(n, spec.n_features, &triplets)?,
            storage: FeatureStorage::Sparse,
        },
        labels,
        n_classes: c,
        standard_split: Some(split),
    };
    d.validate()?;
    Ok(d)
}
