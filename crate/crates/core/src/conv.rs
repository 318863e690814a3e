//! Applying polynomial filters to node features.
//!
//! A word `(r1, …, rk)` acts as `P_r1(P_r2(⋯(P_rk X)))`, so words sharing a
//! suffix share partial products. [`SuffixTrie`] lays the suffix-closure of a
//! word set out in canonical order; each non-empty node costs exactly one
//! sparse product against its parent's value, which gives the `O(C·K·m·d)`
//! bound.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::graph::OperatorSet;
use crate::linalg::{CsrMatrix, Matrix};
use crate::words::{ExpandedFilter, ExpansionPlan, SosFilter, Word};
use crate::{Error, Result};

/// Suffix-closed word set with parent links.
#[derive(Debug, Clone)]
pub struct SuffixTrie {
    nodes: Vec<Word>,
    parent: Vec<usize>,
}

impl SuffixTrie {
    pub fn new(words: &[Word]) -> Self {
        let mut closure: BTreeSet<Word> = BTreeSet::new();
        closure.insert(Word::empty());
        for w in words {
            for start in 0..w.len() {
                closure.insert(Word::from(&w.ops()[start..]));
            }
        }
        let nodes: Vec<Word> = closure.into_iter().collect();
        // Canonical order puts every suffix before the words extending it.
        let parent = nodes
            .iter()
            .map(|w| {
                if w.is_empty() {
                    usize::MAX
                } else {
                    nodes.binary_search(&w.suffix()).expect("suffix-closed")
                }
            })
            .collect();
        Self { nodes, parent }
    }

    pub fn nodes(&self) -> &[Word] {
        &self.nodes
    }

    pub fn index_of(&self, word: &Word) -> Option<usize> {
        self.nodes.binary_search(word).ok()
    }

    /// Sparse products performed by [`SuffixTrie::evaluate`].
    pub fn product_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Value of every trie node applied to `x`, aligned with [`Self::nodes`].
    pub fn evaluate(&self, ops: &OperatorSet, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.rows() != ops.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} rows, graph has {} nodes",
                x.rows(),
                ops.num_nodes()
            )));
        }
        let limit = 2 * ops.len();
        let mut values: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for (i, w) in self.nodes.iter().enumerate() {
            if w.is_empty() {
                values.push(x.clone());
                continue;
            }
            let head = w.ops()[0];
            if head >= limit {
                return Err(Error::DimensionMismatch(format!(
                    "word {w} uses operator {head}, alphabet has {} (with transposes)",
                    limit
                )));
            }
            let v = ops.get(head).matrix.spmm(&values[self.parent[i]])?;
            if !v.is_finite() {
                return Err(Error::NonFinite("propagation"));
            }
            values.push(v);
        }
        Ok(values)
    }
}

fn check_filter(filter: &SosFilter, ops: &OperatorSet) -> Result<()> {
    if filter.alphabet() != ops.len() {
        return Err(Error::DimensionMismatch(format!(
            "filter alphabet {} vs {} operators",
            filter.alphabet(),
            ops.len()
        )));
    }
    Ok(())
}

/// Per-word values `P_u X` (or `P_uᵀ X` when `transposed`), aligned with the
/// filter's words.
pub fn word_values(filter: &SosFilter, ops: &OperatorSet, x: &Matrix, transposed: bool) -> Result<(Vec<Matrix>, usize)> {
    check_filter(filter, ops)?;
    let words: Vec<Word> = if transposed {
        filter
            .words()
            .iter()
            .map(|w| w.transpose_reverse(filter.alphabet()))
            .collect()
    } else {
        filter.words().to_vec()
    };
    let trie = SuffixTrie::new(&words);
    let mut values: Vec<Option<Matrix>> = trie.evaluate(ops, x)?.into_iter().map(Some).collect();
    let per_word = words
        .iter()
        .map(|w| {
            let i = trie.index_of(w).expect("word in its own trie");
            values[i].take().expect("filter words are unique")
        })
        .collect();
    Ok((per_word, trie.product_count()))
}

fn combine(weights: &[f64], values: &[Matrix], rows: usize, cols: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(rows, cols);
    for (w, v) in weights.iter().zip(values) {
        if *w != 0.0 {
            out.axpy(*w, v);
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("filter output"));
    }
    Ok(out)
}

/// Counters from one filter application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PropagationStats {
    pub sparse_products: usize,
}

/// `g(P) X`.
pub fn apply_g(filter: &SosFilter, ops: &OperatorSet, x: &Matrix) -> Result<Matrix> {
    apply_g_with_stats(filter, ops, x).map(|(y, _)| y)
}

pub fn apply_g_with_stats(filter: &SosFilter, ops: &OperatorSet, x: &Matrix) -> Result<(Matrix, PropagationStats)> {
    let (values, products) = word_values(filter, ops, x, false)?;
    let y = combine(filter.weights(), &values, x.rows(), x.cols())?;
    Ok((y, PropagationStats { sparse_products: products }))
}

/// `g(P)ᵀ X`, using each word reversed over the transposed operators.
pub fn apply_gt(filter: &SosFilter, ops: &OperatorSet, x: &Matrix) -> Result<Matrix> {
    let (values, _) = word_values(filter, ops, x, true)?;
    combine(filter.weights(), &values, x.rows(), x.cols())
}

/// `g(P)ᵀ g(P) X`.
pub fn apply_sos(filter: &SosFilter, ops: &OperatorSet, x: &Matrix) -> Result<Matrix> {
    apply_gt(filter, ops, &apply_g(filter, ops, x)?)
}

/// Precomputed `P_word X` for a set of words over the extended alphabet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropagationStore {
    pub n: usize,
    pub d: usize,
    pub entries: BTreeMap<Word, Matrix>,
}

impl PropagationStore {
    pub fn get(&self, word: &Word) -> Result<&Matrix> {
        self.entries.get(word).ok_or_else(|| Error::MissingWord(word.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, word: Word, value: Matrix) -> Result<()> {
        if value.shape() != (self.n, self.d) {
            return Err(Error::DimensionMismatch(format!(
                "store holds {}x{} matrices, got {}x{}",
                self.n,
                self.d,
                value.rows(),
                value.cols()
            )));
        }
        self.entries.insert(word, value);
        Ok(())
    }
}

/// Stores `P_word X` for every word in `words` (and their suffixes), each
/// obtained from its suffix with one sparse product.
pub fn precompute_propagations(
    ops: &OperatorSet,
    x: &Matrix,
    words: &[Word],
    max_words: Option<usize>,
) -> Result<PropagationStore> {
    let trie = SuffixTrie::new(words);
    if let Some(cap) = max_words {
        if trie.nodes().len() > cap {
            return Err(Error::BudgetExceeded {
                count: trie.nodes().len(),
                cap,
            });
        }
    }
    let values = trie.evaluate(ops, x)?;
    Ok(PropagationStore {
        n: x.rows(),
        d: x.cols(),
        entries: trie.nodes().iter().cloned().zip(values).collect(),
    })
}

/// Words the decoupled path needs for filters over `filter_words`: the
/// structural support of `gᵀg` when `sos`, otherwise the words themselves.
pub fn decoupled_words(ops: &OperatorSet, filter_words: &[Word], sos: bool) -> Result<Vec<Word>> {
    if sos {
        Ok(ExpansionPlan::new(ops.len(), filter_words, &ops.masks())?.terms)
    } else {
        Ok(filter_words.to_vec())
    }
}

/// `Y[rows] = Σ c_word · store[word][rows]`.
pub fn decoupled_forward(expanded: &ExpandedFilter, store: &PropagationStore, rows: Option<&[usize]>) -> Result<Matrix> {
    let out_rows = rows.map_or(store.n, <[usize]>::len);
    if let Some(rows) = rows {
        if let Some(&r) = rows.iter().find(|&&r| r >= store.n) {
            return Err(Error::NodeOutOfRange { node: r, n: store.n });
        }
    }
    let mut y = Matrix::zeros(out_rows, store.d);
    for (word, &c) in &expanded.terms {
        let value = store.get(word)?;
        match rows {
            None => y.axpy(c, value),
            Some(rows) => {
                for (k, &r) in rows.iter().enumerate() {
                    for (o, &v) in y.row_mut(k).iter_mut().zip(value.row(r)) {
                        *o += c * v;
                    }
                }
            }
        }
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("decoupled propagation"));
    }
    Ok(y)
}

/// MHGCN comparison filter `(Σ β_r A_r)^K X`, as `K` rounds of weighted
/// sparse products.
pub fn mhgcn_filter(betas: &[f64], adjacency: &[CsrMatrix], order: usize, x: &Matrix) -> Result<Matrix> {
    if order == 0 {
        return Err(Error::InvalidValue("MHGCN order must be >= 1".into()));
    }
    if betas.len() != adjacency.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} betas for {} edge types",
            betas.len(),
            adjacency.len()
        )));
    }
    let mut y = x.clone();
    for _ in 0..order {
        let mut next = Matrix::zeros(x.rows(), x.cols());
        for (&beta, a) in betas.iter().zip(adjacency) {
            a.spmm_acc(beta, &y, &mut next)?;
        }
        y = next;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use alloc::vec;

    use super::*;
    use crate::graph::{EdgeSignature, ShiftOperator};

    fn two_node_ops() -> OperatorSet {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        let op = ShiftOperator::normalized(&a, EdgeSignature::new(0, 1), 2).unwrap();
        OperatorSet::new(vec![op], vec![0, 1], 2).unwrap()
    }

    #[test]
    fn identity_filter_returns_input() {
        let ops = two_node_ops();
        let f = SosFilter::identity(1, 2, vec![Word::empty(), Word::from(vec![0])]).unwrap();
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(apply_g(&f, &ops, &x).unwrap(), x);
        assert_eq!(apply_sos(&f, &ops, &x).unwrap(), x);
    }

    #[test]
    fn single_word_filter() {
        let ops = two_node_ops();
        let f = SosFilter::new(1, 1, vec![Word::from(vec![0])], vec![1.0]).unwrap();
        let y = apply_g(&f, &ops, &Matrix::column(&[0.0, 1.0])).unwrap();
        assert_eq!(y, Matrix::column(&[1.0, 0.0]));
        // P₁ᵀP₁ (a, b)ᵀ = (0, b)ᵀ.
        let y = apply_sos(&f, &ops, &Matrix::column(&[3.0, 5.0])).unwrap();
        assert_eq!(y, Matrix::column(&[0.0, 5.0]));
    }

    #[test]
    fn filter_alphabet_must_match() {
        let ops = two_node_ops();
        let f = SosFilter::identity(2, 1, vec![Word::empty()]).unwrap();
        assert!(apply_g(&f, &ops, &Matrix::zeros(2, 1)).is_err());
        let f = SosFilter::identity(1, 1, vec![Word::empty()]).unwrap();
        assert!(matches!(apply_g(&f, &ops, &Matrix::zeros(3, 1)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn non_finite_features_fail_loudly() {
        let ops = two_node_ops();
        let f = SosFilter::new(1, 1, vec![Word::from(vec![0])], vec![1.0]).unwrap();
        let x = Matrix::column(&[0.0, f64::INFINITY]);
        assert_eq!(apply_g(&f, &ops, &x).unwrap_err(), Error::NonFinite("propagation"));
    }

    #[test]
    fn store_examples() {
        let ops = two_node_ops();
        let x = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let store = precompute_propagations(&ops, &x, &[Word::from(vec![0])], None).unwrap();
        assert_eq!(store.get(&Word::empty()).unwrap(), &x);
        assert_eq!(store.get(&Word::from(vec![0])).unwrap(), &Matrix::from_rows(&[&[2.0], &[0.0]]).unwrap());
        assert!(matches!(
            precompute_propagations(&ops, &x, &[Word::from(vec![0, 1])], Some(2)),
            Err(Error::BudgetExceeded { count: 3, cap: 2 })
        ));
    }

    #[test]
    fn decoupled_missing_word_is_named() {
        let store = PropagationStore { n: 2, d: 1, entries: BTreeMap::new() };
        let mut e = ExpandedFilter::default();
        e.terms.insert(Word::from(vec![1, 0]), 1.0);
        assert_eq!(
            decoupled_forward(&e, &store, None).unwrap_err(),
            Error::MissingWord(Word::from(vec![1, 0]))
        );
    }

    #[test]
    fn mhgcn_examples() {
        let a1 = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        let a2 = CsrMatrix::from_triplets(2, 2, &[(1, 0, 2.0)]).unwrap();
        let x = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let y = mhgcn_filter(&[1.0, 0.0], &[a1.clone(), a2], 1, &x).unwrap();
        assert_eq!(y, a1.spmm(&x).unwrap());
        let y = mhgcn_filter(&[1.0], core::slice::from_ref(&a1), 2, &x).unwrap();
        assert_eq!(y, Matrix::zeros(2, 1));
        assert!(mhgcn_filter(&[1.0], core::slice::from_ref(&a1), 0, &x).is_err());
        assert!(mhgcn_filter(&[1.0, 2.0], &[a1], 1, &x).is_err());
    }
}
