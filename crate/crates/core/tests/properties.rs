mod common;

use common::{instance, random_signatures};
use pshgcn_core::conv::{apply_g, apply_gt, apply_sos, precompute_propagations};
use pshgcn_core::graph::OperatorKind;
use pshgcn_core::rng::{stream, Stream};
use pshgcn_core::verify::{
    all_words, check_psd, decoupling_equivalence, dense_filter, dense_g, dense_word, random_hetero_graph,
    standard_normal_vec,
};
use pshgcn_core::words::{count_all_words, enumerate_words, expand_sos, ExpansionPlan};
use pshgcn_core::{Matrix, TypeMask, Word};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (u64, usize, usize, usize, usize)> {
    (any::<u64>(), 1usize..=3, 1usize..=4, 4usize..=24, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_rows_sum_to_one_or_zero(seed in any::<u64>(), types in 1usize..=3, r in 1usize..=4, n in 3usize..=40) {
        let mut rng = stream(seed, Stream::Data);
        let sigs = random_signatures(&mut rng, types, r);
        let g = random_hetero_graph(&mut rng, types, &sigs, n, 0.3).unwrap();
        let ops = g.operators(OperatorKind::NormalizedAdjacency).unwrap();
        for op in ops.operators() {
            for s in op.matrix.row_sums() {
                prop_assert!((s - 1.0).abs() <= 1e-12 || s.abs() <= 1e-12, "row sum {s}");
            }
        }
    }

    #[test]
    fn stored_nonzeros_respect_type_masks(seed in any::<u64>(), types in 1usize..=3, r in 1usize..=4, n in 3usize..=50) {
        let mut rng = stream(seed, Stream::Data);
        let sigs = random_signatures(&mut rng, types, r);
        let g = random_hetero_graph(&mut rng, types, &sigs, n, 0.3).unwrap();
        let nt = g.node_types();
        for kind in [OperatorKind::NormalizedAdjacency, OperatorKind::Laplacian] {
            let ops = g.operators(kind).unwrap();
            for id in 0..2 * ops.len() {
                let op = ops.get(id);
                for (i, j, v) in op.matrix.iter() {
                    if v != 0.0 {
                        prop_assert!(op.type_mask.get(nt[i], nt[j]));
                    }
                }
            }
        }
    }

    #[test]
    fn laplacian_plus_adjacency_is_identity_and_transpose_involutes(seed in any::<u64>(), n in 3usize..=30) {
        let mut rng = stream(seed, Stream::Data);
        let sigs = random_signatures(&mut rng, 2, 2);
        let g = random_hetero_graph(&mut rng, 2, &sigs, n, 0.3).unwrap();
        let a = g.operators(OperatorKind::NormalizedAdjacency).unwrap();
        let l = g.operators(OperatorKind::Laplacian).unwrap();
        for r in 0..2 {
            let mut sum = a.dense(r);
            sum.axpy(1.0, &l.dense(r));
            prop_assert!(sum.max_abs_diff(&Matrix::identity(n)) <= 1e-15);
            let op = a.get(r);
            prop_assert_eq!(&op.transpose().transpose().matrix, &op.matrix);
            prop_assert_eq!(a.dense(r + 2), a.dense(r).transpose());
        }
    }

    #[test]
    fn mask_product_over_approximates_word_support((seed, types, r, n, k) in dims()) {
        let mut rng = stream(seed, Stream::Data);
        let sigs = random_signatures(&mut rng, types, r);
        let g = random_hetero_graph(&mut rng, types, &sigs, n, 0.3).unwrap();
        let ops = g.operators(OperatorKind::NormalizedAdjacency).unwrap();
        let masks = ops.extended_masks();
        let nt = g.node_types();
        for word in all_words(2 * r, k.min(2)) {
            let mask = word.mask(&masks, types).unwrap();
            let dense = dense_word(&word, &ops).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if dense[(i, j)] != 0.0 {
                        prop_assert!(mask.get(nt[i], nt[j]), "word {word} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn expanded_filter_equals_dense_gtg((seed, types, r, n, k) in dims()) {
        let inst = instance(seed, types, r, n, k, 1);
        let expanded = expand_sos(&inst.filter, &inst.ops.masks()).unwrap();
        let mut h = Matrix::zeros(n, n);
        for (word, &c) in &expanded.terms {
            h.axpy(c, &dense_word(word, &inst.ops).unwrap());
        }
        let oracle = dense_filter(&inst.filter, &inst.ops).unwrap();
        prop_assert!(h.max_abs_diff(&oracle) <= 1e-10 * oracle.max_abs().max(1.0));
    }

    #[test]
    fn sos_output_is_psd_symmetric_and_linear((seed, types, r, n, k) in dims()) {
        let inst = instance(seed, types, r, n, k, 2);
        let h = dense_filter(&inst.filter, &inst.ops).unwrap();
        prop_assert!(h.max_abs_diff(&h.transpose()) <= 1e-12 * h.max_abs().max(1.0));
        prop_assert!(check_psd(&h, None).unwrap().is_psd);

        let y = apply_sos(&inst.filter, &inst.ops, &inst.x).unwrap();
        for c in 0..2 {
            let q: f64 = (0..n).map(|i| inst.x[(i, c)] * y[(i, c)]).sum();
            prop_assert!(q >= -1e-9 * y.max_abs().max(1.0));
        }
        let mut rng = stream(seed ^ 1, Stream::Data);
        let x2 = Matrix::from_vec(n, 2, standard_normal_vec(&mut rng, 2 * n)).unwrap();
        let mut combo = inst.x.scaled(2.0);
        combo.axpy(-3.0, &x2);
        let mut expect = y.scaled(2.0);
        expect.axpy(-3.0, &apply_sos(&inst.filter, &inst.ops, &x2).unwrap());
        let got = apply_sos(&inst.filter, &inst.ops, &combo).unwrap();
        prop_assert!(got.max_abs_diff(&expect) <= 1e-10 * expect.max_abs().max(1.0));
    }

    #[test]
    fn decoupled_matches_direct((seed, types, r, n, k) in dims()) {
        let inst = instance(seed, types, r, n, k, 3);
        let diff = decoupling_equivalence(&inst.ops, &inst.filter, &inst.x).unwrap();
        let scale = inst.x.max_abs().max(1.0) * inst.filter.weights().iter().map(|w| w.abs()).sum::<f64>().powi(2);
        prop_assert!(diff <= 1e-10 * scale.max(1.0), "diff {diff}");
    }

    #[test]
    fn trie_matches_naive_products((seed, types, r, n, k) in dims()) {
        let inst = instance(seed, types, r, n, k, 2);
        let g = apply_g(&inst.filter, &inst.ops, &inst.x).unwrap();
        let g_dense = dense_g(&inst.filter, &inst.ops).unwrap().matmul(&inst.x).unwrap();
        prop_assert!(g.max_abs_diff(&g_dense) <= 1e-12 * g_dense.max_abs().max(1.0));
        let gt = apply_gt(&inst.filter, &inst.ops, &inst.x).unwrap();
        let gt_dense = dense_g(&inst.filter, &inst.ops).unwrap().t_matmul(&inst.x).unwrap();
        prop_assert!(gt.max_abs_diff(&gt_dense) <= 1e-12 * gt_dense.max_abs().max(1.0));
    }

    #[test]
    fn store_matches_direct_word_products(seed in any::<u64>(), n in 4usize..=30, k in 1usize..=2) {
        let inst = instance(seed, 2, 3, n, k, 2);
        let plan = ExpansionPlan::new(3, inst.filter.words(), &inst.ops.masks()).unwrap();
        let store = precompute_propagations(&inst.ops, &inst.x, &plan.terms, None).unwrap();
        for word in &plan.terms {
            let direct = dense_word(word, &inst.ops).unwrap().matmul(&inst.x).unwrap();
            prop_assert!(store.get(word).unwrap().max_abs_diff(&direct) <= 1e-12 * direct.max_abs().max(1.0));
        }
    }

    #[test]
    fn retained_words_are_closed_and_nonzero_masks((seed, types, r, n, k) in dims()) {
        let mut rng = stream(seed, Stream::Data);
        let sigs = random_signatures(&mut rng, types, r);
        let g = random_hetero_graph(&mut rng, types, &sigs, n.max(types), 0.3).unwrap();
        let ops = g.operators(OperatorKind::NormalizedAdjacency).unwrap();
        let masks = ops.masks();
        let words = enumerate_words(r, k, &masks).unwrap();
        prop_assert!(words.windows(2).all(|w| w[0] < w[1]));
        for w in &words {
            prop_assert!(w.is_empty() || !w.mask(&masks, types).unwrap().is_zero());
            if !w.is_empty() {
                prop_assert!(words.binary_search(&Word::from(&w.ops()[1..])).is_ok());
                prop_assert!(words.binary_search(&Word::from(&w.ops()[..w.len() - 1])).is_ok());
            }
        }
        let total = count_all_words(r, k).unwrap();
        prop_assert!(words.len() as u64 <= total);
    }
}

#[test]
fn count_matches_enumeration_without_pruning() {
    for r in 1..=5 {
        for k in 0..=5 {
            let full = vec![TypeMask::full(1); r];
            let n = enumerate_words(r, k, &full).unwrap().len() as u64;
            assert_eq!(count_all_words(r, k).unwrap(), n, "R={r} K={k}");
            assert_eq!(all_words(r, k).len() as u64, n);
        }
    }
    assert_eq!(count_all_words(2, 2).unwrap(), 7);
}
