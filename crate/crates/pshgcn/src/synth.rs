//! Heterogeneous stochastic-block graphs with a planted SOS filter.

use pshgcn_core::conv::apply_sos;
use pshgcn_core::rng::{stream, Rng, Stream};
use pshgcn_core::verify::standard_normal_vec;
use pshgcn_core::{Edge, Matrix, SosFilter, Word};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::config::OperatorChoice;
use crate::dataset::{DatasetBundle, EdgeTypeSchema, Schema, Splits};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthNodeType {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEdgeType {
    pub name: String,
    pub src: String,
    pub dst: String,
    /// Out-edges drawn per source node.
    pub degree: usize,
    /// Probability that an edge is forced to stay inside the source's class;
    /// otherwise the target is uniform over the destination type.
    pub homophily: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub node_types: Vec<SynthNodeType>,
    pub edge_types: Vec<SynthEdgeType>,
    pub target_type: String,
    pub num_classes: usize,
    pub latent_dim: usize,
    /// Standard deviation of the class means.
    pub class_separation: f64,
    /// Within-class standard deviation of the latents.
    pub latent_spread: f64,
    pub order: usize,
    /// Planted `g` as (word of edge-type names, weight); omitted words are 0.
    pub planted: Vec<(Vec<String>, f64)>,
    pub operator: OperatorChoice,
    /// Standard deviation of the observation noise added after the filter.
    pub noise: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// 2000 nodes, 3 node types, 4 edge types, 4 classes, planted order 2.
    fn default() -> Self {
        let nt = |name: &str, count| SynthNodeType { name: name.into(), count };
        let et = |name: &str, src: &str, dst: &str, degree, homophily| SynthEdgeType {
            name: name.into(),
            src: src.into(),
            dst: dst.into(),
            degree,
            homophily,
        };
        Self {
            node_types: vec![nt("paper", 1000), nt("author", 600), nt("subject", 400)],
            edge_types: vec![
                et("writes", "author", "paper", 5, 0.8),
                et("about", "subject", "paper", 8, 0.8),
                et("cites", "paper", "paper", 3, 0.0),
                et("studies", "author", "subject", 2, 0.8),
            ],
            target_type: "paper".into(),
            num_classes: 4,
            latent_dim: 16,
            class_separation: 1.0,
            latent_spread: 1.0,
            order: 2,
            planted: vec![
                (vec![], 1.0),
                (vec!["writes".into()], 0.5),
                (vec!["about".into()], 0.5),
                (vec!["studies".into()], 0.5),
            ],
            operator: OperatorChoice::NormalizedAdjacency,
            noise: 3.0,
            train_fraction: 0.24,
            val_fraction: 0.06,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn schema(&self) -> Schema {
        Schema {
            node_types: self.node_types.iter().map(|t| t.name.clone()).collect(),
            edge_types: self
                .edge_types
                .iter()
                .map(|e| EdgeTypeSchema {
                    name: e.name.clone(),
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                })
                .collect(),
            target_type: self.target_type.clone(),
            num_classes: Some(self.num_classes),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.node_types.iter().find(|t| t.count == 0) {
            return Err(Error::Data(format!("node type {} is empty", t.name)));
        }
        if self.num_classes == 0 {
            return Err(Error::Data("synthetic spec needs at least one class".into()));
        }
        if !(self.noise >= 0.0 && self.latent_spread >= 0.0 && self.class_separation >= 0.0) {
            return Err(Error::Data("noise and spreads must be >= 0".into()));
        }
        let fractions = [self.train_fraction, self.val_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || fractions.iter().sum::<f64>() > 1.0 {
            return Err(Error::Data("split fractions must lie in [0, 1] and sum to <= 1".into()));
        }
        if let Some(e) = self.edge_types.iter().find(|e| !(0.0..=1.0).contains(&e.homophily)) {
            return Err(Error::Data(format!("edge type {} homophily outside [0, 1]", e.name)));
        }
        Ok(())
    }

    fn planted_filter(&self, schema: &Schema) -> Result<SosFilter> {
        let mut words = Vec::new();
        let mut weights = Vec::new();
        for (names, w) in &self.planted {
            let ids = names
                .iter()
                .map(|n| {
                    schema
                        .edge_type_id(n)
                        .ok_or_else(|| Error::Data(format!("planted word uses unknown edge type {n}")))
                })
                .collect::<Result<Vec<_>>>()?;
            words.push(Word::new(ids));
            weights.push(*w);
        }
        Ok(SosFilter::new(schema.edge_types.len(), self.order, words, weights)?)
    }
}

/// Balanced classes, shuffled within each node type.
fn assign_classes(rng: &mut Rng, spec: &SynthSpec) -> Vec<usize> {
    let mut classes = Vec::new();
    for t in &spec.node_types {
        let mut c: Vec<usize> = (0..t.count).map(|k| k % spec.num_classes).collect();
        c.shuffle(rng);
        classes.extend(c);
    }
    classes
}

/// Samples a dataset; identical specs give bitwise-identical bundles.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<DatasetBundle> {
    Ok(generate_with_latents(spec)?.0)
}

/// [`generate_synthetic`] that also returns the `n × latent_dim` latents the
/// planted filter was applied to.
pub fn generate_with_latents(spec: &SynthSpec) -> Result<(DatasetBundle, Matrix)> {
    spec.validate()?;
    let schema = spec.schema();
    let planted = spec.planted_filter(&schema)?;
    let mut rng = stream(spec.seed, Stream::Data);

    let node_type: Vec<usize> = spec
        .node_types
        .iter()
        .enumerate()
        .flat_map(|(t, nt)| std::iter::repeat_n(t, nt.count))
        .collect();
    let n = node_type.len();
    let class = assign_classes(&mut rng, spec);

    let num_types = spec.node_types.len();
    let mut members = vec![vec![Vec::new(); spec.num_classes]; num_types];
    let mut by_type = vec![Vec::new(); num_types];
    for i in 0..n {
        members[node_type[i]][class[i]].push(i);
        by_type[node_type[i]].push(i);
    }
    let mut edges = Vec::new();
    for (r, e) in spec.edge_types.iter().enumerate() {
        let src = schema.node_type_id(&e.src).ok_or_else(|| Error::Data(format!("unknown type {}", e.src)))?;
        let dst = schema.node_type_id(&e.dst).ok_or_else(|| Error::Data(format!("unknown type {}", e.dst)))?;
        for &i in &by_type[src] {
            for _ in 0..e.degree {
                let same = &members[dst][class[i]];
                let pool = if !same.is_empty() && rng.random_bool(e.homophily) {
                    same
                } else {
                    &by_type[dst]
                };
                edges.push(Edge::new(i, pool[rng.random_range(0..pool.len())], r));
            }
        }
    }

    let d = spec.latent_dim;
    let means = standard_normal_vec(&mut rng, spec.num_classes * d);
    let spread = standard_normal_vec(&mut rng, n * d);
    let latents = Matrix::from_fn(n, d, |i, k| {
        spec.class_separation * means[class[i] * d + k] + spec.latent_spread * spread[i * d + k]
    });
    let graph = pshgcn_core::HeteroGraph::build(num_types, node_type.clone(), schema.signatures()?, &edges)?;
    let ops = graph.operators(spec.operator.into())?;
    let mut observed = apply_sos(&planted, &ops, &latents)?;
    if spec.noise > 0.0 {
        let noise = standard_normal_vec(&mut rng, n * d);
        for (y, z) in observed.as_mut_slice().iter_mut().zip(noise) {
            *y += spec.noise * z;
        }
    }

    let target = schema.node_type_id(&spec.target_type).ok_or_else(|| {
        Error::Data(format!("target type {} is not a node type", spec.target_type))
    })?;
    let labels = (0..n).map(|i| (node_type[i] == target).then_some(class[i])).collect();
    let mut targets = by_type[target].clone();
    targets.shuffle(&mut rng);
    let m = targets.len();
    let n_train = (spec.train_fraction * m as f64).round() as usize;
    let n_val = ((spec.val_fraction * m as f64).round() as usize).min(m - n_train);
    let mut take = |k: usize| {
        let mut part: Vec<usize> = targets.drain(..k).collect();
        part.sort_unstable();
        part
    };
    let splits = Splits {
        train: take(n_train),
        val: take(n_val),
        test: take(m - n_train - n_val),
    };
    let features = (0..n).map(|i| observed.row(i).to_vec()).collect();
    let bundle = DatasetBundle::new(schema, node_type, features, &edges, labels, splits)?;
    Ok((bundle, latents))
}
