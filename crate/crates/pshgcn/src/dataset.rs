//! On-disk dataset directory:
//!
//! - `schema.json`: node type names, edge types `{name, src, dst}`, target type
//!   and optionally the class count.
//! - `nodes.tsv`: `node_id<TAB>type_name<TAB>f1,f2,...` (dims may differ per type).
//! - `edges.tsv`: `src<TAB>dst<TAB>edge_type_name[<TAB>weight]`.
//! - `labels.tsv`: `node_id<TAB>class_id`.
//! - `splits.json`: `{"train": [...], "val": [...], "test": [...]}`.
//!
//! Blank lines and lines starting with `#` are ignored in the TSV files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use pshgcn_core::{Edge, EdgeSignature, HeteroGraph, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTypeSchema {
    pub name: String,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub node_types: Vec<String>,
    pub edge_types: Vec<EdgeTypeSchema>,
    pub target_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
}

impl Schema {
    pub fn node_type_id(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn edge_type_id(&self, name: &str) -> Option<usize> {
        self.edge_types.iter().position(|e| e.name == name)
    }

    pub fn signatures(&self) -> Result<Vec<EdgeSignature>> {
        self.edge_types
            .iter()
            .map(|e| {
                let lookup = |t: &str| {
                    self.node_type_id(t)
                        .ok_or_else(|| Error::Data(format!("edge type {} references unknown node type {t}", e.name)))
                };
                Ok(EdgeSignature::new(lookup(&e.src)?, lookup(&e.dst)?))
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let unique = |names: Vec<&String>, what: &str| -> Result<()> {
            let mut seen = BTreeSet::new();
            for n in names {
                if n.is_empty() || n.contains(char::is_whitespace) {
                    return Err(Error::Data(format!("{what} name {n:?} must be non-empty without whitespace")));
                }
                if !seen.insert(n) {
                    return Err(Error::Data(format!("duplicate {what} name {n}")));
                }
            }
            Ok(())
        };
        if self.node_types.is_empty() {
            return Err(Error::Data("schema declares no node types".into()));
        }
        unique(self.node_types.iter().collect(), "node type")?;
        unique(self.edge_types.iter().map(|e| &e.name).collect(), "edge type")?;
        self.signatures()?;
        if self.node_type_id(&self.target_type).is_none() {
            return Err(Error::Data(format!("target type {} is not a node type", self.target_type)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub schema: Schema,
    pub graph: HeteroGraph,
    /// Per-node raw features; the length is fixed per node type.
    pub features: Vec<Vec<f64>>,
    /// Per-node class, `None` for unlabeled nodes.
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    pub splits: Splits,
    pub target_type: usize,
}

impl DatasetBundle {
    /// Validates and assembles a bundle from in-memory parts.
    pub fn new(
        schema: Schema,
        node_type: Vec<usize>,
        features: Vec<Vec<f64>>,
        edges: &[Edge],
        labels: Vec<Option<usize>>,
        splits: Splits,
    ) -> Result<Self> {
        schema.validate()?;
        let n = node_type.len();
        if features.len() != n || labels.len() != n {
            return Err(Error::Data(format!(
                "{n} nodes but {} feature rows and {} labels",
                features.len(),
                labels.len()
            )));
        }
        let graph = HeteroGraph::build(schema.node_types.len(), node_type, schema.signatures()?, edges)?;
        let target_type = schema.node_type_id(&schema.target_type).expect("validated");
        let max_label = labels.iter().flatten().max().copied();
        let num_classes = match (schema.num_classes, max_label) {
            (Some(c), Some(m)) if m >= c => {
                return Err(Error::Data(format!("label {m} outside [0, {c})")));
            }
            (Some(c), _) => c,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        let bundle = Self {
            schema,
            graph,
            features,
            labels,
            num_classes,
            splits,
            target_type,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Raw feature dimension of each node type (0 for types without nodes).
    pub fn type_dims(&self) -> Vec<usize> {
        let mut dims = vec![None; self.schema.node_types.len()];
        for (f, &t) in self.features.iter().zip(self.graph.node_types()) {
            dims[t].get_or_insert(f.len());
        }
        dims.into_iter().map(|d| d.unwrap_or(0)).collect()
    }

    /// Block-padded features plus a trailing one-hot node-type indicator:
    /// a node of type `t` fills columns `offset[t]..offset[t] + d_t`.
    pub fn aligned_features(&self) -> Matrix {
        let dims = self.type_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for d in &dims {
            offsets.push(total);
            total += d;
        }
        let cols = total + dims.len();
        let mut x = Matrix::zeros(self.num_nodes(), cols);
        for (i, (f, &t)) in self.features.iter().zip(self.graph.node_types()).enumerate() {
            let row = x.row_mut(i);
            row[offsets[t]..offsets[t] + f.len()].copy_from_slice(f);
            row[total + t] = 1.0;
        }
        x
    }

    fn validate(&self) -> Result<()> {
        let node_type = self.graph.node_types();
        let dims = self.type_dims();
        for (i, f) in self.features.iter().enumerate() {
            let t = node_type[i];
            if f.len() != dims[t] {
                return Err(Error::Data(format!(
                    "node {i} has {} features but type {} uses {}",
                    f.len(),
                    self.schema.node_types[t],
                    dims[t]
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("node {i} has a non-finite feature")));
            }
        }
        for (i, l) in self.labels.iter().enumerate() {
            if l.is_some() && node_type[i] != self.target_type {
                return Err(Error::Data(format!("node {i} is labeled but is not of the target type")));
            }
        }
        let mut owner = HashMap::new();
        for (name, ids) in [("train", &self.splits.train), ("val", &self.splits.val), ("test", &self.splits.test)] {
            for &id in ids {
                if id >= self.num_nodes() {
                    return Err(Error::Data(format!("{name} split references unknown node {id}")));
                }
                if let Some(other) = owner.insert(id, name) {
                    return Err(Error::Data(format!("node {id} appears in both {other} and {name} splits")));
                }
                if node_type[id] != self.target_type {
                    return Err(Error::Data(format!("{name} split node {id} is not of the target type")));
                }
                if self.labels[id].is_none() {
                    return Err(Error::Data(format!("{name} split node {id} has no label")));
                }
            }
        }
        Ok(())
    }
}

fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} {s:?}")))
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let schema_path = dir.join("schema.json");
    let schema: Schema = fsutil::read_json(&schema_path)?;
    schema.validate()?;

    let nodes_path = dir.join("nodes.tsv");
    let text = fsutil::read_to_string(&nodes_path)?;
    let mut rows: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();
    for (line, fields) in tsv_lines(&text) {
        if fields.len() != 3 {
            return Err(Error::parse(&nodes_path, line, format!("expected 3 fields, found {}", fields.len())));
        }
        let id: usize = parse_field(&nodes_path, line, "node id", fields[0])?;
        let t = schema
            .node_type_id(fields[1].trim())
            .ok_or_else(|| Error::parse(&nodes_path, line, format!("unknown node type {:?}", fields[1])))?;
        let feats = if fields[2].trim().is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|v| {
                    let v: f64 = parse_field(&nodes_path, line, "feature", v)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::parse(&nodes_path, line, "non-finite feature"))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        };
        if rows.insert(id, (t, feats)).is_some() {
            return Err(Error::parse(&nodes_path, line, format!("duplicate node id {id}")));
        }
    }
    let n = rows.len();
    if let Some((&last, _)) = rows.last_key_value() {
        if last + 1 != n {
            return Err(Error::format(&nodes_path, format!("node ids must be 0..{n} without gaps")));
        }
    }
    let (node_type, features): (Vec<_>, Vec<_>) = rows.into_values().unzip();

    let edges_path = dir.join("edges.tsv");
    let text = fsutil::read_to_string(&edges_path)?;
    let mut edges = Vec::new();
    for (line, fields) in tsv_lines(&text) {
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(&edges_path, line, format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let src: usize = parse_field(&edges_path, line, "source id", fields[0])?;
        let dst: usize = parse_field(&edges_path, line, "target id", fields[1])?;
        for id in [src, dst] {
            if id >= n {
                return Err(Error::parse(&edges_path, line, format!("unknown node id {id}")));
            }
        }
        let r = schema
            .edge_type_id(fields[2].trim())
            .ok_or_else(|| Error::parse(&edges_path, line, format!("unknown edge type {:?}", fields[2])))?;
        let sig = &schema.edge_types[r];
        let (ts, td) = (&schema.node_types[node_type[src]], &schema.node_types[node_type[dst]]);
        if *ts != sig.src || *td != sig.dst {
            return Err(Error::parse(
                &edges_path,
                line,
                format!("edge {src} -> {dst} is {ts} -> {td} but {} expects {} -> {}", sig.name, sig.src, sig.dst),
            ));
        }
        let weight = match fields.get(3) {
            Some(w) => {
                let w: f64 = parse_field(&edges_path, line, "weight", w)?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::parse(&edges_path, line, "weight must be finite and >= 0"));
                }
                w
            }
            None => 1.0,
        };
        edges.push(Edge::weighted(src, dst, r, weight));
    }

    let labels_path = dir.join("labels.tsv");
    let text = fsutil::read_to_string(&labels_path)?;
    let mut labels = vec![None; n];
    for (line, fields) in tsv_lines(&text) {
        if fields.len() != 2 {
            return Err(Error::parse(&labels_path, line, format!("expected 2 fields, found {}", fields.len())));
        }
        let id: usize = parse_field(&labels_path, line, "node id", fields[0])?;
        let class: usize = parse_field(&labels_path, line, "class id", fields[1])?;
        let slot = labels
            .get_mut(id)
            .ok_or_else(|| Error::parse(&labels_path, line, format!("unknown node id {id}")))?;
        if slot.replace(class).is_some() {
            return Err(Error::parse(&labels_path, line, format!("node {id} labeled twice")));
        }
    }

    let splits: Splits = fsutil::read_json(&dir.join("splits.json"))?;
    DatasetBundle::new(schema, node_type, features, &edges, labels, splits)
}

/// Writes the five dataset files; each file is replaced atomically.
pub fn save_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fsutil::create_dir(dir)?;
    fsutil::write_json(&dir.join("schema.json"), &bundle.schema)?;

    let mut nodes = String::new();
    for (i, (f, &t)) in bundle.features.iter().zip(bundle.graph.node_types()).enumerate() {
        let _ = write!(nodes, "{i}\t{}\t", bundle.schema.node_types[t]);
        for (k, v) in f.iter().enumerate() {
            if k > 0 {
                nodes.push(',');
            }
            let _ = write!(nodes, "{v}");
        }
        nodes.push('\n');
    }
    fsutil::write_atomic(&dir.join("nodes.tsv"), nodes.as_bytes())?;

    let mut edges = String::new();
    for (r, a) in bundle.graph.adjacencies().iter().enumerate() {
        let name = &bundle.schema.edge_types[r].name;
        for (i, j, w) in a.iter() {
            if w == 1.0 {
                let _ = writeln!(edges, "{i}\t{j}\t{name}");
            } else {
                let _ = writeln!(edges, "{i}\t{j}\t{name}\t{w}");
            }
        }
    }
    fsutil::write_atomic(&dir.join("edges.tsv"), edges.as_bytes())?;

    let mut labels = String::new();
    for (i, l) in bundle.labels.iter().enumerate() {
        if let Some(c) = l {
            let _ = writeln!(labels, "{i}\t{c}");
        }
    }
    fsutil::write_atomic(&dir.join("labels.tsv"), labels.as_bytes())?;
    fsutil::write_json(&dir.join("splits.json"), &bundle.splits)
}
