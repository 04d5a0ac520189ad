mod common;

use common::*;
use std::collections::HashSet;
use treedec::model::{read_checkpoint, write_checkpoint, TreeDecoderModel};
use treedec::search::{
    generalized_beam_search, generate_response, partial_log_likelihood, SearchConfig,
};
use treedec::{FullTree, EOB};

fn eob_heavy(vocab: usize, seed: u64, bias: f64) -> TreeDecoderModel {
    let mut m = tiny_model(vocab, 3, 1.0, seed);
    for head in &mut m.params.child_heads {
        head.out_b[EOB] += bias;
    }
    m
}

#[test]
fn capped_mass_approaches_one_when_branches_close() {
    let trees = enumerate_capped_trees(4, 3, 2);
    for seed in 0..3 {
        let m = eob_heavy(4, seed, 12.0);
        let x = m.encode(&[2, 3, 2]).unwrap();
        let mut mass = m.tree_log_likelihood(&x, &FullTree::eob()).unwrap().exp();
        for t in &trees {
            mass += m.tree_log_likelihood(&x, t).unwrap().exp();
        }
        assert!(mass > 0.999 && mass <= 1.0 + 1e-9, "mass {mass}");
    }
}

#[test]
fn search_results_carry_exact_scores() {
    for seed in 0..5 {
        let m = eob_heavy(6, seed, 2.0);
        let x = m.encode(&[4, 5]).unwrap();
        let config = SearchConfig {
            global_beam: 8,
            local_beam: 4,
            ..SearchConfig::default()
        };
        let out = generalized_beam_search(&m, &x, &config).unwrap();
        assert!(!out.trees.is_empty());
        let mut seen = HashSet::new();
        for pair in out.trees.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
        for t in &out.trees {
            assert!(seen.insert(t.tree.clone()), "duplicate result");
            t.tree.validate(3).unwrap();
            let exact = m.tree_log_likelihood(&x, &t.tree).unwrap();
            assert!((exact - t.score).abs() < 1e-9);
            assert_eq!(partial_log_likelihood(&m, &x, &t.tree).unwrap(), exact);
        }
    }
}

#[test]
fn node_cap_bounds_every_result() {
    let m = eob_heavy(6, 11, 0.5);
    let x = m.encode(&[2]).unwrap();
    let config = SearchConfig {
        node_cap: 10,
        ..SearchConfig::default()
    };
    let out = generalized_beam_search(&m, &x, &config).unwrap();
    assert!(out.trees.iter().all(|t| t.tree.node_count() <= 10));
}

#[test]
fn wider_beams_never_lower_the_best_score() {
    for seed in 0..5 {
        let m = eob_heavy(5, 20 + seed, 2.0);
        let x = m.encode(&[2, 4]).unwrap();
        let best = |g, l| {
            let config = SearchConfig {
                global_beam: g,
                local_beam: l,
                max_depth: Some(2),
                ..SearchConfig::default()
            };
            generalized_beam_search(&m, &x, &config).unwrap().trees[0].score
        };
        assert!(best(125, 125) >= best(1, 1) - 1e-12);
    }
}

#[test]
fn generation_flattens_trees() {
    let m = eob_heavy(6, 3, 2.0);
    let gen = generate_response(&m, &[2, 3], &SearchConfig::default()).unwrap();
    for r in &gen.responses {
        assert_eq!(r.tokens, r.tree.flatten());
        assert!(!r.tokens.contains(&EOB));
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let m = tiny_model(7, 3, 0.3, 42);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    write_checkpoint(&m, 99, std::fs::File::create(&path).unwrap()).unwrap();
    let (back, fingerprint) = read_checkpoint(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(fingerprint, 99);
    assert_eq!(back.params, m.params);
    let mut r = rng(1);
    let tree = random_padded_tree(&mut r, 7, 4);
    let post = [2, 5, 6];
    assert_eq!(
        back.instance_log_likelihood(&post, &tree.to_ternary())
            .unwrap(),
        m.instance_log_likelihood(&post, &tree.to_ternary())
            .unwrap()
    );
}

#[test]
fn gradients_match_finite_differences_on_larger_trees() {
    let mut r = rng(77);
    for seed in 0..2 {
        let m = tiny_model(6, 3, 0.4, seed);
        let tree = random_padded_tree(&mut r, 6, 7);
        // near-zero entries drown in roundoff, so they are compared at 1e-4
        let (err, _) = gradient_check(&m, &[2, 3, 4, 5], &tree, 1e-4, 1e-4);
        assert!(err <= 1e-5, "relative error {err}");
    }
}
