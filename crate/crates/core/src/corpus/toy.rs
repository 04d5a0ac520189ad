//! Template grammar producing post/response pairs with known projective
//! parses, so training and generation can run without an external parser.

use super::Pair;
use crate::tree::random::seeded_rng;
use crate::tree::DependencyTree;
use rand::seq::SliceRandom;

const VERBS: [&str; 6] = ["like", "eat", "cook", "buy", "grow", "sell"];
const OBJECTS: [(&str, &str); 8] = [
    ("apples", "red"),
    ("beans", "green"),
    ("carrots", "crunchy"),
    ("lemons", "sour"),
    ("onions", "sharp"),
    ("peaches", "sweet"),
    ("pears", "soft"),
    ("plums", "ripe"),
];

/// Number of distinct pairs the grammar can produce.
pub const TEMPLATE_PAIRS: usize = 4 * VERBS.len() * OBJECTS.len();

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_owned).collect()
}

/// 1-based heads as in CoNLL-U, 0 for the root.
fn parse(sentence: &str, heads: &[usize]) -> DependencyTree<String> {
    let heads = heads.iter().map(|&h| h.checked_sub(1)).collect();
    DependencyTree::new(words(sentence), heads).expect("template parses are valid trees")
}

fn instantiate(template: usize, verb: &str, object: &str, adj: &str) -> Pair {
    let (post, response, heads): (String, String, &[usize]) = match template {
        0 => (
            format!("do you {verb} {object} ?"),
            format!("yes i {verb} {object}"),
            &[3, 3, 0, 3],
        ),
        1 => (
            format!("why do you {verb} {object} ?"),
            format!("because {object} are {adj}"),
            &[4, 4, 4, 0],
        ),
        2 => (
            format!("do your friends {verb} {object} ?"),
            format!("they really {verb} the {adj} {object}"),
            &[3, 3, 0, 6, 6, 3],
        ),
        _ => (
            format!("would you {verb} some {object} ?"),
            format!("{object} make me happy"),
            &[2, 0, 4, 2],
        ),
    };
    Pair {
        post: words(&post),
        response: parse(&response, heads),
    }
}

/// `n` distinct pairs, chosen by a seeded shuffle of the full grammar.
/// Panics if `n` exceeds [`TEMPLATE_PAIRS`].
pub fn toy_corpus(n: usize, seed: u64) -> Vec<Pair> {
    assert!(
        n <= TEMPLATE_PAIRS,
        "the toy grammar has only {TEMPLATE_PAIRS} pairs"
    );
    let mut all = Vec::with_capacity(TEMPLATE_PAIRS);
    for template in 0..4 {
        for verb in VERBS {
            for (object, adj) in OBJECTS {
                all.push(instantiate(template, verb, object, adj));
            }
        }
    }
    all.shuffle(&mut seeded_rng(seed));
    all.truncate(n);
    all
}
