#![allow(dead_code)]

use pshgcn_core::graph::{EdgeSignature, OperatorKind, OperatorSet};
use pshgcn_core::rng::{stream, Rng, Stream};
use pshgcn_core::verify::{random_filter, random_hetero_graph, standard_normal_vec};
use pshgcn_core::words::enumerate_words;
use pshgcn_core::{HeteroGraph, Matrix, SosFilter};
use rand::Rng as _;

pub struct Instance {
    pub graph: HeteroGraph,
    pub ops: OperatorSet,
    pub filter: SosFilter,
    pub x: Matrix,
}

pub fn random_signatures(rng: &mut Rng, num_types: usize, alphabet: usize) -> Vec<EdgeSignature> {
    (0..alphabet)
        .map(|_| EdgeSignature::new(rng.random_range(0..num_types), rng.random_range(0..num_types)))
        .collect()
}

pub fn kind_from(rng: &mut Rng) -> OperatorKind {
    if rng.random_bool(0.5) {
        OperatorKind::NormalizedAdjacency
    } else {
        OperatorKind::Laplacian
    }
}

/// Random graph, operators (random kind), pruned filter with normal weights
/// and features with `d` columns.
pub fn instance(seed: u64, num_types: usize, alphabet: usize, n: usize, order: usize, d: usize) -> Instance {
    let mut rng = stream(seed, Stream::Data);
    let sigs = random_signatures(&mut rng, num_types, alphabet);
    let density = rng.random_range(0.05..0.4);
    let graph = random_hetero_graph(&mut rng, num_types, &sigs, n, density).unwrap();
    let kind = kind_from(&mut rng);
    let ops = graph.operators(kind).unwrap();
    let words = enumerate_words(alphabet, order, &ops.masks()).unwrap();
    let filter = random_filter(&mut rng, alphabet, order, words).unwrap();
    let x = Matrix::from_vec(n, d, standard_normal_vec(&mut rng, n * d)).unwrap();
    Instance { graph, ops, filter, x }
}

pub fn dblp_signatures() -> Vec<EdgeSignature> {
    // author 0, paper 1, term 2, venue 3
    vec![
        EdgeSignature::new(0, 1),
        EdgeSignature::new(1, 0),
        EdgeSignature::new(1, 2),
        EdgeSignature::new(2, 1),
        EdgeSignature::new(1, 3),
        EdgeSignature::new(3, 1),
    ]
}

pub fn acm_signatures() -> Vec<EdgeSignature> {
    // paper 0, author 1, subject 2
    vec![
        EdgeSignature::new(0, 0),
        EdgeSignature::new(0, 1),
        EdgeSignature::new(1, 0),
        EdgeSignature::new(0, 2),
        EdgeSignature::new(2, 0),
    ]
}
