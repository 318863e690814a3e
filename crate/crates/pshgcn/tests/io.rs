use std::fs;
use std::path::{Path, PathBuf};

use pshgcn::checkpoint::{decode_checkpoint, encode_checkpoint, header_for, load_checkpoint, save_checkpoint, RunInfo, Scores};
use pshgcn::config::{ModeChoice, OperatorChoice};
use pshgcn::dataset::{load_dataset, save_dataset};
use pshgcn::store::{decode_word, encode_word, load_store, save_store};
use pshgcn::synth::{generate_synthetic, generate_with_latents, SynthEdgeType, SynthNodeType, SynthSpec};
use pshgcn::Error;
use pshgcn_core::conv::{decoupled_words, precompute_propagations};
use pshgcn_core::nn::{init_model, ModelConfig};
use pshgcn_core::words::enumerate_words;
use pshgcn_core::{Matrix, OperatorKind, Word};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn small_spec(seed: u64) -> SynthSpec {
    let mut s = SynthSpec::default();
    for t in &mut s.node_types {
        t.count /= 10;
    }
    s.seed = seed;
    s
}

fn copy_fixture(to: &Path) {
    fs::create_dir_all(to).unwrap();
    for f in ["schema.json", "nodes.tsv", "edges.tsv", "labels.tsv", "splits.json"] {
        fs::copy(fixture().join(f), to.join(f)).unwrap();
    }
}

#[test]
fn toy_fixture_loads() {
    let b = load_dataset(&fixture()).unwrap();
    assert_eq!(b.num_nodes(), 2);
    assert_eq!(b.graph.num_edge_types(), 1);
    assert_eq!(b.graph.adjacency(0).to_dense(), Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());
    assert_eq!(b.type_dims(), vec![2, 1]);
    assert_eq!(b.labels, vec![None, Some(1)]);
    // [author block (2) | paper block (1) | type indicators (2)]
    assert_eq!(
        b.aligned_features(),
        Matrix::from_rows(&[&[1.0, 0.5, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.25, 0.0, 1.0]]).unwrap()
    );
}

#[test]
fn unknown_node_in_edges_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    fs::write(dir.path().join("edges.tsv"), "# header comment\n0\t1\twrites\n0\t7\twrites\n").unwrap();
    match load_dataset(dir.path()).unwrap_err() {
        Error::Parse { path, line, message } => {
            assert!(path.ends_with("edges.tsv"));
            assert_eq!(line, 3);
            assert!(message.contains('7'), "{message}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn signature_violation_and_bad_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    fs::write(dir.path().join("edges.tsv"), "1\t0\twrites\n").unwrap();
    assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Parse { line: 1, .. }));
    fs::write(dir.path().join("edges.tsv"), "0\t1\tcites\n").unwrap();
    assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Parse { line: 1, .. }));

    copy_fixture(dir.path());
    fs::write(dir.path().join("nodes.tsv"), "0\tauthor\t1.0,x\n1\tpaper\t0.25\n").unwrap();
    assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Parse { line: 1, .. }));
    fs::write(dir.path().join("nodes.tsv"), "0\tauthor\t1.0\n1\tpaper\t0.25\n2\tauthor\t1.0,2.0\n").unwrap();
    assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Data(_)));

    copy_fixture(dir.path());
    fs::remove_file(dir.path().join("labels.tsv")).unwrap();
    let e = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn overlapping_splits_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    fs::write(dir.path().join("splits.json"), r#"{"train": [1], "val": [], "test": [1]}"#).unwrap();
    let e = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(&e, Error::Data(m) if m.contains("both")), "{e}");
    fs::write(dir.path().join("splits.json"), r#"{"train": [0], "val": [], "test": []}"#).unwrap();
    assert!(load_dataset(dir.path()).is_err());
}

#[test]
fn synth_save_load_round_trip_is_bitwise() {
    let b = generate_synthetic(&small_spec(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&b, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back, b);
    for (x, y) in b.features.iter().flatten().zip(back.features.iter().flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    // Saving again produces identical files.
    let dir2 = tempfile::tempdir().unwrap();
    save_dataset(&back, dir2.path()).unwrap();
    for f in ["schema.json", "nodes.tsv", "edges.tsv", "labels.tsv", "splits.json"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(dir2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn synth_is_deterministic_and_splits_follow_proportions() {
    let a = generate_synthetic(&SynthSpec::default()).unwrap();
    let b = generate_synthetic(&SynthSpec::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.num_nodes(), 2000);
    assert_eq!(a.graph.num_node_types(), 3);
    assert_eq!(a.graph.num_edge_types(), 4);
    assert_eq!(a.num_classes, 4);
    assert_eq!((a.splits.train.len(), a.splits.val.len(), a.splits.test.len()), (240, 60, 700));
    let c = generate_synthetic(&SynthSpec { seed: 1, ..SynthSpec::default() }).unwrap();
    assert_ne!(a.features, c.features);
}

#[test]
fn identity_plant_without_noise_reproduces_latents() {
    let mut spec = SynthSpec {
        node_types: vec![SynthNodeType { name: "a".into(), count: 20 }],
        edge_types: vec![SynthEdgeType {
            name: "r".into(),
            src: "a".into(),
            dst: "a".into(),
            degree: 2,
            homophily: 0.5,
        }],
        target_type: "a".into(),
        num_classes: 2,
        latent_dim: 3,
        class_separation: 1.0,
        latent_spread: 0.5,
        order: 1,
        planted: vec![(vec![], 1.0)],
        operator: OperatorChoice::NormalizedAdjacency,
        noise: 0.0,
        train_fraction: 0.5,
        val_fraction: 0.25,
        seed: 5,
    };
    let (bundle, latents) = generate_with_latents(&spec).unwrap();
    for (i, f) in bundle.features.iter().enumerate() {
        assert_eq!(f.as_slice(), latents.row(i));
    }
    spec.noise = 0.5;
    let (noisy, same) = generate_with_latents(&spec).unwrap();
    assert_eq!(same, latents);
    assert_ne!(noisy.features, bundle.features);
}

#[test]
fn empty_node_type_is_infeasible() {
    let mut s = SynthSpec::default();
    s.node_types[1].count = 0;
    assert!(matches!(generate_synthetic(&s), Err(Error::Data(_))));
}

#[test]
fn store_round_trip_and_corruption() {
    let b = generate_synthetic(&small_spec(1)).unwrap();
    let ops = b.graph.operators(OperatorKind::NormalizedAdjacency).unwrap();
    let x = b.aligned_features();
    let words = enumerate_words(ops.len(), 2, &ops.masks()).unwrap();
    let needed = decoupled_words(&ops, &words, true).unwrap();
    let store = precompute_propagations(&ops, &x, &needed, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_store(&store, ops.len(), OperatorChoice::NormalizedAdjacency, dir.path()).unwrap();
    let (index, back) = load_store(dir.path()).unwrap();
    assert_eq!(back, store);
    assert_eq!(index.entries.len(), store.len());

    let w = Word::from(vec![4, 1]);
    let m = Matrix::from_rows(&[&[1.5, -2.0], &[0.0, 3.25]]).unwrap();
    let bytes = encode_word(&w, &m).unwrap();
    assert_eq!(&bytes[..4], b"PSHG");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes.len(), 4 + 2 + 8 + 4 + 2 + 2 * 2 + 8 * 4);
    assert_eq!(decode_word(Path::new("w"), &bytes).unwrap(), (w, m));
    assert!(decode_word(Path::new("w"), &bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_word(Path::new("w"), &bad).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let words = vec![Word::empty(), Word::from(vec![0])];
    let model = init_model(5, 1, words, ModelConfig::with_defaults(3, 1), 4).unwrap();
    let header = header_for(
        &model,
        RunInfo {
            type_dims: vec![2, 1],
            operator: OperatorChoice::Laplacian,
            mode: ModeChoice::Full,
            seed: 4,
            best_epoch: 7,
            val: Scores { macro_f1: 0.5, micro_f1: 0.75 },
            test: Scores { macro_f1: 0.25, micro_f1: 0.125 },
        },
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    save_checkpoint(&path, &header, &model).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.header, header);
    assert_eq!(back.model, model);

    let bytes = encode_checkpoint(&header, &model).unwrap();
    assert!(decode_checkpoint(&path, &bytes[..bytes.len() - 8]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_checkpoint(&path, &extra).is_err());
}
