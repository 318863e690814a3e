//! Noncommutative monomial words, structural pruning, and `gᵀg` expansion.
//!
//! A word `(r1, …, rk)` denotes the product `P_r1 P_r2 ⋯ P_rk`; the empty word
//! is the identity. Over the extended alphabet, ids `R..2R` stand for
//! `P_0ᵀ..P_{R−1}ᵀ`. Words are ordered length-first, then lexicographically,
//! which is the canonical order used for weight vectors and serialization.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::graph::TypeMask;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(ops: Vec<usize>) -> Self {
        Self(ops)
    }

    pub fn ops(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The word without its first (outermost) operator.
    pub fn suffix(&self) -> Word {
        Word(self.0[1..].to_vec())
    }

    /// `(r1..rk) ↦ (rkᵀ..r1ᵀ)` for a word over the base alphabet of size `alphabet`.
    pub fn transpose_reverse(&self, alphabet: usize) -> Word {
        Word(
            self.0
                .iter()
                .rev()
                .map(|&r| if r < alphabet { r + alphabet } else { r - alphabet })
                .collect(),
        )
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut ops = self.0.clone();
        ops.extend_from_slice(&other.0);
        Word(ops)
    }

    /// Boolean mask of the product; identity for the empty word.
    pub fn mask(&self, masks: &[TypeMask], num_node_types: usize) -> Result<TypeMask> {
        let mut acc = TypeMask::identity(num_node_types);
        for &r in &self.0 {
            let m = masks.get(r).ok_or_else(|| {
                Error::DimensionMismatch(format!("word uses operator {r}, only {} masks", masks.len()))
            })?;
            acc = acc.product(m)?;
        }
        Ok(acc)
    }
}

impl From<Vec<usize>> for Word {
    fn from(ops: Vec<usize>) -> Self {
        Self(ops)
    }
}

impl From<&[usize]> for Word {
    fn from(ops: &[usize]) -> Self {
        Self(ops.to_vec())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str("]")
    }
}

/// Number of words of length `0..=K` over `R` symbols, `(R^{K+1} − 1)/(R − 1)`.
pub fn count_all_words(alphabet: usize, order: usize) -> Result<u64> {
    if alphabet == 0 {
        return Err(Error::InvalidValue("alphabet size must be >= 1".into()));
    }
    let overflow = Error::Overflow { alphabet, order };
    if alphabet == 1 {
        return u64::try_from(order)
            .ok()
            .and_then(|k| k.checked_add(1))
            .filter(|&c| c <= 1 << 63)
            .ok_or(overflow);
    }
    let r = alphabet as u64;
    let mut total: u64 = 0;
    let mut power: u64 = 1;
    for k in 0..=order {
        total = total.checked_add(power).ok_or(overflow.clone())?;
        if k < order {
            power = power.checked_mul(r).ok_or(overflow.clone())?;
        }
    }
    if total > 1 << 63 {
        return Err(overflow);
    }
    Ok(total)
}

/// Words of length `≤ order` whose mask product is not all-false, in
/// canonical order. Retained sets are prefix- and suffix-closed, so the
/// breadth-first extension below is exhaustive.
pub fn enumerate_words(alphabet: usize, order: usize, masks: &[TypeMask]) -> Result<Vec<Word>> {
    if masks.len() != alphabet {
        return Err(Error::DimensionMismatch(format!(
            "{} masks for an alphabet of {alphabet}",
            masks.len()
        )));
    }
    let size = masks.first().map_or(1, TypeMask::size);
    if let Some(bad) = masks.iter().find(|m| m.size() != size) {
        return Err(Error::DimensionMismatch(format!(
            "mask of size {} among masks of size {size}",
            bad.size()
        )));
    }
    let identity = TypeMask::identity(size);
    if identity.is_zero() {
        return Ok(Vec::new());
    }
    let mut out = vec![Word::empty()];
    let mut frontier = vec![(Word::empty(), identity)];
    for _ in 0..order {
        let mut next = Vec::new();
        for (word, mask) in &frontier {
            for (r, m) in masks.iter().enumerate() {
                let prod = mask.product(m)?;
                if !prod.is_zero() {
                    let mut ops = word.0.clone();
                    ops.push(r);
                    next.push((Word(ops), prod));
                }
            }
        }
        out.extend(next.iter().map(|(w, _)| w.clone()));
        frontier = next;
    }
    out.sort();
    Ok(out)
}

/// Word-count bookkeeping for the `O(C·K·m·d)` cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermBudget {
    pub total_words: u64,
    pub retained_words: usize,
    pub max_edges: usize,
}

impl TermBudget {
    pub fn new(alphabet: usize, order: usize, retained_words: usize, max_edges: usize) -> Result<Self> {
        let total_words = count_all_words(alphabet, order)?;
        if retained_words as u64 > total_words {
            return Err(Error::InvalidValue(format!(
                "{retained_words} retained words exceed the {total_words} possible"
            )));
        }
        Ok(Self {
            total_words,
            retained_words,
            max_edges,
        })
    }
}

/// The polynomial `g = w₀I + Σ w_word · P_word`, stored on retained words only.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    alphabet: usize,
    order: usize,
    words: Vec<Word>,
    weights: Vec<f64>,
}

impl SosFilter {
    /// `words` may come in any order; they are sorted canonically together
    /// with their weights.
    pub fn new(alphabet: usize, order: usize, words: Vec<Word>, weights: Vec<f64>) -> Result<Self> {
        if words.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} words but {} weights",
                words.len(),
                weights.len()
            )));
        }
        for w in &words {
            if w.len() > order {
                return Err(Error::InvalidValue(format!("word {w} is longer than order {order}")));
            }
            if let Some(&r) = w.ops().iter().find(|&&r| r >= alphabet) {
                return Err(Error::InvalidValue(format!("word {w} uses operator {r} >= {alphabet}")));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("filter weights"));
        }
        let mut pairs: Vec<(Word, f64)> = words.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if pairs.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidValue("duplicate word in filter".into()));
        }
        let (words, weights) = pairs.into_iter().unzip();
        Ok(Self {
            alphabet,
            order,
            words,
            weights,
        })
    }

    /// `g = I` on the given word set.
    pub fn identity(alphabet: usize, order: usize, words: Vec<Word>) -> Result<Self> {
        let weights = words.iter().map(|w| if w.is_empty() { 1.0 } else { 0.0 }).collect();
        Self::new(alphabet, order, words, weights)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::DimensionMismatch("filter weight count".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("filter weights"));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    pub fn weight(&self, word: &Word) -> f64 {
        self.words.binary_search(word).map_or(0.0, |i| self.weights[i])
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Coefficient form of `gᵀg` over the extended alphabet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpandedFilter {
    pub alphabet: usize,
    pub terms: BTreeMap<Word, f64>,
}

impl ExpandedFilter {
    pub fn coefficient(&self, word: &Word) -> f64 {
        self.terms.get(word).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// One `(u, v)` pair of `g`-words and the expanded word `uᵀ ++ v` it feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTerm {
    pub term: usize,
    pub left: usize,
    pub right: usize,
}

/// Weight-independent support of `gᵀg`: every structurally nonzero expanded
/// word and the `(u, v)` pairs that produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPlan {
    pub alphabet: usize,
    pub terms: Vec<Word>,
    pub pairs: Vec<PairTerm>,
}

impl ExpansionPlan {
    /// `masks` are the base-alphabet masks; transposed masks are derived.
    pub fn new(alphabet: usize, words: &[Word], masks: &[TypeMask]) -> Result<Self> {
        if masks.len() != alphabet {
            return Err(Error::DimensionMismatch(format!(
                "{} masks for an alphabet of {alphabet}",
                masks.len()
            )));
        }
        let size = masks.first().map_or(1, TypeMask::size);
        let word_masks = words
            .iter()
            .map(|w| w.mask(masks, size))
            .collect::<Result<Vec<_>>>()?;
        let mut index: BTreeMap<Word, usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for (i, u) in words.iter().enumerate() {
            let ut = word_masks[i].transpose();
            for (j, v) in words.iter().enumerate() {
                if ut.product(&word_masks[j])?.is_zero() {
                    continue;
                }
                let word = u.transpose_reverse(alphabet).concat(v);
                index.entry(word.clone()).or_insert(0);
                raw.push((word, i, j));
            }
        }
        let terms: Vec<Word> = index.keys().cloned().collect();
        for (k, w) in terms.iter().enumerate() {
            *index.get_mut(w).unwrap() = k;
        }
        let pairs = raw
            .into_iter()
            .map(|(w, left, right)| PairTerm {
                term: index[&w],
                left,
                right,
            })
            .collect();
        Ok(Self { alphabet, terms, pairs })
    }

    /// Coefficients `c_t = Σ_{(u,v) → t} w_u w_v`, aligned with `terms`.
    pub fn coefficients(&self, weights: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.terms.len()];
        for p in &self.pairs {
            c[p.term] += weights[p.left] * weights[p.right];
        }
        c
    }
}

/// Expands `gᵀg`. Structurally zero words and exactly-zero coefficients are
/// dropped.
pub fn expand_sos(filter: &SosFilter, masks: &[TypeMask]) -> Result<ExpandedFilter> {
    let plan = ExpansionPlan::new(filter.alphabet, &filter.words, masks)?;
    let coefficients = plan.coefficients(&filter.weights);
    let terms = plan
        .terms
        .into_iter()
        .zip(coefficients)
        .filter(|&(_, c)| c != 0.0)
        .collect();
    Ok(ExpandedFilter {
        alphabet: filter.alphabet,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(ops: &[usize]) -> Word {
        Word::from(ops)
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_all_words(2, 2).unwrap(), 7);
        assert_eq!(count_all_words(1, 3).unwrap(), 4);
        assert_eq!(count_all_words(3, 2).unwrap(), 13);
        assert_eq!(count_all_words(5, 0).unwrap(), 1);
    }

    #[test]
    fn count_overflow_is_explicit() {
        assert!(matches!(count_all_words(2, 63), Err(Error::Overflow { .. })));
        assert!(matches!(count_all_words(1000, 10), Err(Error::Overflow { .. })));
        assert_eq!(count_all_words(2, 62).unwrap(), (1u64 << 63) - 1);
        assert!(count_all_words(0, 1).is_err());
    }

    #[test]
    fn canonical_order_is_length_first() {
        let mut v = vec![w(&[1, 0]), w(&[2]), w(&[]), w(&[0, 1]), w(&[0])];
        v.sort();
        assert_eq!(v, vec![w(&[]), w(&[0]), w(&[2]), w(&[0, 1]), w(&[1, 0])]);
    }

    #[test]
    fn all_true_masks_keep_everything() {
        let masks = vec![TypeMask::full(2); 2];
        let words = enumerate_words(2, 2, &masks).unwrap();
        assert_eq!(
            words,
            vec![w(&[]), w(&[0]), w(&[1]), w(&[0, 0]), w(&[0, 1]), w(&[1, 0]), w(&[1, 1])]
        );
    }

    #[test]
    fn author_paper_pruning() {
        // 0 = author, 1 = paper; op 0 = AP, op 1 = PA.
        let masks = vec![TypeMask::block(2, 0, 1), TypeMask::block(2, 1, 0)];
        let words = enumerate_words(2, 2, &masks).unwrap();
        assert_eq!(words, vec![w(&[]), w(&[0]), w(&[1]), w(&[0, 1]), w(&[1, 0])]);
    }

    #[test]
    fn mask_dimension_mismatch_is_rejected() {
        let masks = vec![TypeMask::full(2), TypeMask::full(3)];
        assert!(enumerate_words(2, 1, &masks).is_err());
        assert!(enumerate_words(3, 1, &masks).is_err());
    }

    #[test]
    fn expand_single_operator_filter() {
        let f = SosFilter::new(1, 1, vec![w(&[]), w(&[0])], vec![2.0, 3.0]).unwrap();
        let e = expand_sos(&f, &[TypeMask::full(1)]).unwrap();
        let expected: BTreeMap<Word, f64> =
            [(w(&[]), 4.0), (w(&[0]), 6.0), (w(&[1]), 6.0), (w(&[1, 0]), 9.0)].into_iter().collect();
        assert_eq!(e.terms, expected);
    }

    #[test]
    fn expand_identity_and_zero_filters() {
        let masks = vec![TypeMask::full(1); 2];
        let words = enumerate_words(2, 2, &masks).unwrap();
        let id = SosFilter::identity(2, 2, words.clone()).unwrap();
        let e = expand_sos(&id, &masks).unwrap();
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.coefficient(&Word::empty()), 1.0);

        let zero = SosFilter::new(2, 2, words.clone(), vec![0.0; words.len()]).unwrap();
        assert!(expand_sos(&zero, &masks).unwrap().is_empty());
    }

    #[test]
    fn expansion_drops_structurally_zero_pairs() {
        // AP then APᵀ: (AP)ᵀ·AP has mask (paper, paper); AP·AP is pruned already.
        let masks = vec![TypeMask::block(2, 0, 1), TypeMask::block(2, 1, 0)];
        let words = enumerate_words(2, 1, &masks).unwrap();
        let plan = ExpansionPlan::new(2, &words, &masks).unwrap();
        // uᵀ v for u = [0] (AP), v = [1] (PA): mask (AP)ᵀ·PA = (p,a)·(p,a) = 0.
        assert!(!plan.terms.contains(&w(&[2, 1])));
        assert!(plan.terms.contains(&w(&[2, 0])));
    }

    #[test]
    fn filter_validation() {
        assert!(SosFilter::new(2, 1, vec![w(&[0, 1])], vec![1.0]).is_err());
        assert!(SosFilter::new(2, 2, vec![w(&[2])], vec![1.0]).is_err());
        assert!(SosFilter::new(2, 2, vec![w(&[0])], vec![f64::NAN]).is_err());
        assert!(SosFilter::new(2, 2, vec![w(&[0]), w(&[0])], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn budget_counts() {
        let b = TermBudget::new(2, 2, 5, 10).unwrap();
        assert_eq!(b.total_words, 7);
        assert!(TermBudget::new(2, 2, 8, 10).is_err());
    }
}
