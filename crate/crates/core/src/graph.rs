//! Heterogeneous graphs, per-edge-type sub-graphs and their shift operators.
//!
//! Edge type `r` induces an `n × n` adjacency `A_r`. Its shift operator is the
//! out-degree row-normalized `Â_r = D_r⁻¹ A_r`, or the Laplacian `I − Â_r`.
//! Rows of sinks (zero out-degree) stay all-zero. Every operator carries a
//! node-type mask that over-approximates which (source type, target type)
//! blocks can hold nonzeros; products of masks drive structural pruning in
//! [`crate::words`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{CsrMatrix, Matrix};
use crate::{Error, Result};

/// `(source node type, target node type)` of an edge type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeSignature {
    pub src_type: usize,
    pub dst_type: usize,
}

impl EdgeSignature {
    pub const fn new(src_type: usize, dst_type: usize) -> Self {
        Self { src_type, dst_type }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub edge_type: usize,
    pub weight: f64,
}

impl Edge {
    /// Unit-weight edge.
    pub const fn new(src: usize, dst: usize, edge_type: usize) -> Self {
        Self {
            src,
            dst,
            edge_type,
            weight: 1.0,
        }
    }

    pub const fn weighted(src: usize, dst: usize, edge_type: usize, weight: f64) -> Self {
        Self {
            src,
            dst,
            edge_type,
            weight,
        }
    }
}

/// Node-typed graph with one adjacency matrix per edge type.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    node_type: Vec<usize>,
    num_node_types: usize,
    signatures: Vec<EdgeSignature>,
    adjacency: Vec<CsrMatrix>,
}

impl HeteroGraph {
    /// Builds one adjacency per declared edge type. Duplicate edges are
    /// merged by summing their weights.
    pub fn build(
        num_node_types: usize,
        node_type: Vec<usize>,
        signatures: Vec<EdgeSignature>,
        edges: &[Edge],
    ) -> Result<Self> {
        let n = node_type.len();
        if let Some(&t) = node_type.iter().find(|&&t| t >= num_node_types) {
            return Err(Error::InvalidValue(format!(
                "node type {t} outside [0, {num_node_types})"
            )));
        }
        for (r, sig) in signatures.iter().enumerate() {
            if sig.src_type >= num_node_types || sig.dst_type >= num_node_types {
                return Err(Error::InvalidValue(format!(
                    "edge type {r} signature ({}, {}) references an unknown node type",
                    sig.src_type, sig.dst_type
                )));
            }
        }
        if signatures.len() > u16::MAX as usize {
            return Err(Error::InvalidValue("more than 65535 edge types".into()));
        }

        let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); signatures.len()];
        for (index, e) in edges.iter().enumerate() {
            for node in [e.src, e.dst] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            let Some(sig) = signatures.get(e.edge_type) else {
                return Err(Error::UnknownEdgeType {
                    index,
                    src: e.src,
                    dst: e.dst,
                    edge_type: e.edge_type,
                });
            };
            if node_type[e.src] != sig.src_type || node_type[e.dst] != sig.dst_type {
                return Err(Error::SignatureViolation {
                    index,
                    src: e.src,
                    dst: e.dst,
                    edge_type: e.edge_type,
                    expected_src: sig.src_type,
                    expected_dst: sig.dst_type,
                    found_src: node_type[e.src],
                    found_dst: node_type[e.dst],
                });
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::InvalidValue(format!(
                    "edge #{index} has weight {}; weights must be finite and >= 0",
                    e.weight
                )));
            }
            triplets[e.edge_type].push((e.src, e.dst, e.weight));
        }

        let adjacency = triplets
            .iter()
            .map(|t| CsrMatrix::from_triplets(n, n, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            node_type,
            num_node_types,
            signatures,
            adjacency,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_type.len()
    }

    pub fn num_node_types(&self) -> usize {
        self.num_node_types
    }

    pub fn num_edge_types(&self) -> usize {
        self.signatures.len()
    }

    pub fn node_types(&self) -> &[usize] {
        &self.node_type
    }

    pub fn signatures(&self) -> &[EdgeSignature] {
        &self.signatures
    }

    pub fn adjacency(&self, r: usize) -> &CsrMatrix {
        &self.adjacency[r]
    }

    pub fn adjacencies(&self) -> &[CsrMatrix] {
        &self.adjacency
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(CsrMatrix::nnz).sum()
    }

    /// Shift operators of the requested kind, with cached transposes.
    pub fn operators(&self, kind: OperatorKind) -> Result<OperatorSet> {
        let ops = (0..self.num_edge_types())
            .map(|r| {
                let norm = ShiftOperator::normalized(&self.adjacency[r], self.signatures[r], self.num_node_types)?;
                match kind {
                    OperatorKind::NormalizedAdjacency => Ok(norm),
                    OperatorKind::Laplacian => norm.laplacian(),
                    OperatorKind::TransposedNormalizedAdjacency => Ok(norm.transpose()),
                    OperatorKind::TransposedLaplacian => Ok(norm.laplacian()?.transpose()),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorSet::new(ops, self.node_type.clone(), self.num_node_types)
    }
}

/// Boolean `|T_v| × |T_v|` block-support matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeMask {
    size: usize,
    bits: Vec<bool>,
}

impl TypeMask {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            bits: vec![false; size * size],
        }
    }

    pub fn full(size: usize) -> Self {
        Self {
            size,
            bits: vec![true; size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::empty(size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    /// Mask with a single true cell.
    pub fn block(size: usize, src_type: usize, dst_type: usize) -> Self {
        let mut m = Self::empty(size);
        m.set(src_type, dst_type, true);
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> bool {
        self.bits[s * self.size + t]
    }

    pub fn set(&mut self, s: usize, t: usize, v: bool) {
        self.bits[s * self.size + t] = v;
    }

    pub fn is_zero(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::empty(self.size);
        for s in 0..self.size {
            for t in 0..self.size {
                m.set(t, s, self.get(s, t));
            }
        }
        m
    }

    pub fn with_diagonal(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.size {
            m.set(i, i, true);
        }
        m
    }

    /// Boolean matrix product.
    pub fn product(&self, rhs: &TypeMask) -> Result<TypeMask> {
        if self.size != rhs.size {
            return Err(Error::DimensionMismatch(format!(
                "type masks of size {} and {}",
                self.size, rhs.size
            )));
        }
        let n = self.size;
        let mut out = Self::empty(n);
        for s in 0..n {
            for k in 0..n {
                if !self.get(s, k) {
                    continue;
                }
                for t in 0..n {
                    if rhs.get(k, t) {
                        out.set(s, t, true);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    NormalizedAdjacency,
    Laplacian,
    TransposedNormalizedAdjacency,
    TransposedLaplacian,
}

impl OperatorKind {
    pub fn transposed(self) -> Self {
        match self {
            Self::NormalizedAdjacency => Self::TransposedNormalizedAdjacency,
            Self::TransposedNormalizedAdjacency => Self::NormalizedAdjacency,
            Self::Laplacian => Self::TransposedLaplacian,
            Self::TransposedLaplacian => Self::Laplacian,
        }
    }
}

/// A sparse `n × n` operator `P_r` and its node-type support mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    pub matrix: CsrMatrix,
    pub kind: OperatorKind,
    pub type_mask: TypeMask,
}

impl ShiftOperator {
    /// Row-normalizes `A_r` by its out-degrees. Zero rows stay zero.
    pub fn normalized(adjacency: &CsrMatrix, signature: EdgeSignature, num_node_types: usize) -> Result<Self> {
        if adjacency.n_rows() != adjacency.n_cols() {
            return Err(Error::DimensionMismatch("adjacency must be square".into()));
        }
        if let Some((row, col, value)) = adjacency.iter().find(|&(_, _, v)| v < 0.0) {
            return Err(Error::NegativeEntry { row, col, value });
        }
        let mut matrix = adjacency.clone();
        for i in 0..matrix.n_rows() {
            let vals = matrix.row_mut_values(i);
            let sum: f64 = vals.iter().sum();
            if sum > 0.0 {
                vals.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self {
            matrix,
            kind: OperatorKind::NormalizedAdjacency,
            type_mask: TypeMask::block(num_node_types, signature.src_type, signature.dst_type),
        })
    }

    /// `I − Â`; the mask gains its diagonal.
    pub fn laplacian(&self) -> Result<Self> {
        if self.kind != OperatorKind::NormalizedAdjacency {
            return Err(Error::InvalidValue(format!(
                "laplacian needs a normalized adjacency, got {:?}",
                self.kind
            )));
        }
        let n = self.matrix.n_rows();
        let mut triplets: Vec<(usize, usize, f64)> = self.matrix.iter().map(|(i, j, v)| (i, j, -v)).collect();
        triplets.extend((0..n).map(|i| (i, i, 1.0)));
        Ok(Self {
            matrix: CsrMatrix::from_triplets(n, n, &triplets)?,
            kind: OperatorKind::Laplacian,
            type_mask: self.type_mask.with_diagonal(),
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            kind: self.kind.transposed(),
            type_mask: self.type_mask.transpose(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// The operator alphabet `P_0..P_{R−1}` plus materialized transposes.
///
/// Ids `0..R` address the operators, ids `R..2R` their transposes.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    ops: Vec<ShiftOperator>,
    transposes: Vec<ShiftOperator>,
    node_type: Vec<usize>,
    num_node_types: usize,
}

impl OperatorSet {
    pub fn new(ops: Vec<ShiftOperator>, node_type: Vec<usize>, num_node_types: usize) -> Result<Self> {
        let n = node_type.len();
        for (r, op) in ops.iter().enumerate() {
            if op.matrix.n_rows() != n || op.matrix.n_cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "operator {r} is {}x{}, graph has {n} nodes",
                    op.matrix.n_rows(),
                    op.matrix.n_cols()
                )));
            }
            if op.type_mask.size() != num_node_types {
                return Err(Error::DimensionMismatch(format!(
                    "operator {r} mask has size {}, expected {num_node_types}",
                    op.type_mask.size()
                )));
            }
        }
        let transposes = ops.iter().map(ShiftOperator::transpose).collect();
        Ok(Self {
            ops,
            transposes,
            node_type,
            num_node_types,
        })
    }

    /// Alphabet size `R` (not counting transposes).
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_type.len()
    }

    pub fn num_node_types(&self) -> usize {
        self.num_node_types
    }

    pub fn node_types(&self) -> &[usize] {
        &self.node_type
    }

    pub fn operators(&self) -> &[ShiftOperator] {
        &self.ops
    }

    /// Operator for an extended-alphabet id.
    pub fn get(&self, id: usize) -> &ShiftOperator {
        let r = self.ops.len();
        if id < r {
            &self.ops[id]
        } else {
            &self.transposes[id - r]
        }
    }

    /// Masks of `P_0..P_{R−1}`.
    pub fn masks(&self) -> Vec<TypeMask> {
        self.ops.iter().map(|o| o.type_mask.clone()).collect()
    }

    /// Masks of the extended alphabet `P_0..P_{R−1}, P_0ᵀ..P_{R−1}ᵀ`.
    pub fn extended_masks(&self) -> Vec<TypeMask> {
        self.ops
            .iter()
            .chain(&self.transposes)
            .map(|o| o.type_mask.clone())
            .collect()
    }

    pub fn dense(&self, id: usize) -> Matrix {
        self.get(id).matrix.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(rows: &[&[f64]]) -> CsrMatrix {
        CsrMatrix::from_dense(&Matrix::from_rows(rows).unwrap())
    }

    #[test]
    fn single_edge_builds_single_entry() {
        let g = HeteroGraph::build(2, vec![0, 1], vec![EdgeSignature::new(0, 1)], &[Edge::new(0, 1, 0)]).unwrap();
        assert_eq!(g.adjacency(0).to_dense(), Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());
    }

    #[test]
    fn empty_edge_list_gives_zero_matrices() {
        let sigs = vec![EdgeSignature::new(0, 1), EdgeSignature::new(1, 0)];
        let g = HeteroGraph::build(2, vec![0, 1, 1], sigs, &[]).unwrap();
        assert_eq!(g.num_edge_types(), 2);
        assert!(g.adjacencies().iter().all(|a| a.nnz() == 0 && a.n_rows() == 3));
    }

    #[test]
    fn duplicates_merge_by_weight() {
        let g = HeteroGraph::build(
            1,
            vec![0, 0],
            vec![EdgeSignature::new(0, 0)],
            &[Edge::new(0, 1, 0), Edge::weighted(0, 1, 0, 2.5)],
        )
        .unwrap();
        assert_eq!(g.adjacency(0).get(0, 1), 3.5);
    }

    #[test]
    fn signature_violation_names_the_edge() {
        let err = HeteroGraph::build(
            2,
            vec![0, 1],
            vec![EdgeSignature::new(0, 1)],
            &[Edge::new(0, 1, 0), Edge::new(1, 0, 0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::SignatureViolation { index: 1, src: 1, dst: 0, .. }));
    }

    #[test]
    fn unknown_edge_type_is_rejected() {
        let err = HeteroGraph::build(1, vec![0, 0], vec![EdgeSignature::new(0, 0)], &[Edge::new(0, 1, 3)]).unwrap_err();
        assert!(matches!(err, Error::UnknownEdgeType { edge_type: 3, .. }));
    }

    #[test]
    fn out_of_range_node_is_rejected() {
        let err = HeteroGraph::build(1, vec![0, 0], vec![EdgeSignature::new(0, 0)], &[Edge::new(0, 2, 0)]).unwrap_err();
        assert_eq!(err, Error::NodeOutOfRange { node: 2, n: 2 });
    }

    #[test]
    fn normalize_examples() {
        let sig = EdgeSignature::new(0, 0);
        let op = ShiftOperator::normalized(&csr(&[&[0.0, 2.0], &[0.0, 0.0]]), sig, 1).unwrap();
        assert_eq!(op.matrix.to_dense(), Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());

        let op = ShiftOperator::normalized(&csr(&[&[0.0, 1.0, 1.0], &[0.0; 3], &[0.0; 3]]), sig, 1).unwrap();
        assert_eq!(
            op.matrix.to_dense(),
            Matrix::from_rows(&[&[0.0, 0.5, 0.5], &[0.0; 3], &[0.0; 3]]).unwrap()
        );
        assert_eq!(op.type_mask.count(), 1);
    }

    #[test]
    fn normalize_rejects_negative_entries() {
        let err = ShiftOperator::normalized(&csr(&[&[0.0, -1.0], &[0.0, 0.0]]), EdgeSignature::new(0, 0), 1).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: 0, col: 1, .. }));
    }

    #[test]
    fn laplacian_examples() {
        let sig = EdgeSignature::new(0, 1);
        let op = ShiftOperator::normalized(&csr(&[&[0.0, 1.0], &[0.0, 0.0]]), sig, 2).unwrap();
        let lap = op.laplacian().unwrap();
        assert_eq!(lap.matrix.to_dense(), Matrix::from_rows(&[&[1.0, -1.0], &[0.0, 1.0]]).unwrap());
        assert!(lap.type_mask.get(0, 0) && lap.type_mask.get(1, 1) && lap.type_mask.get(0, 1));

        let zero = ShiftOperator::normalized(&CsrMatrix::zeros(3, 3), sig, 2).unwrap();
        assert_eq!(zero.laplacian().unwrap().matrix.to_dense(), Matrix::identity(3));

        let op = ShiftOperator::normalized(&csr(&[&[0.0, 1.0, 1.0], &[0.0; 3], &[0.0; 3]]), sig, 2).unwrap();
        assert_eq!(
            op.laplacian().unwrap().matrix.to_dense(),
            Matrix::from_rows(&[&[1.0, -0.5, -0.5], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap()
        );
        assert!(op.laplacian().unwrap().laplacian().is_err());
    }

    #[test]
    fn transpose_examples() {
        let op = ShiftOperator::normalized(&csr(&[&[0.0, 1.0], &[0.0, 0.0]]), EdgeSignature::new(0, 1), 2).unwrap();
        let t = op.transpose();
        assert_eq!(t.matrix.to_dense(), Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap());
        assert_eq!(t.kind, OperatorKind::TransposedNormalizedAdjacency);
        assert!(t.type_mask.get(1, 0) && !t.type_mask.get(0, 1));

        let sym = csr(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(sym.transpose(), sym);
    }

    #[test]
    fn mask_product_detects_disconnected_types() {
        let ap = TypeMask::block(2, 0, 1);
        let pa = TypeMask::block(2, 1, 0);
        assert!(ap.product(&ap).unwrap().is_zero());
        assert!(!ap.product(&pa).unwrap().is_zero());
        assert!(ap.product(&TypeMask::full(3)).is_err());
    }
}
