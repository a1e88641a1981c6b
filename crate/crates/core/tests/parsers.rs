use std::fs;
use std::path::Path;

use proptest::prelude::*;
use skein::{LinkExpr, Triangulation};

fn corpus(target: &str) -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut seeds: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| fs::read_to_string(e.unwrap().path()).unwrap())
        .collect();
    seeds.sort();
    seeds
}

fn check_tvtri(text: &str) {
    if let Ok(tri) = Triangulation::parse(text) {
        for t in 0..tri.num_tetrahedra() {
            let _ = tri.tetra_edge_labels(t);
        }
        let again = Triangulation::parse(&tri.to_string()).expect("serialized triangulation parses");
        assert_eq!(tri, again);
    }
}

fn check_link(text: &str) {
    if let Ok(link) = LinkExpr::parse(text) {
        assert_eq!(LinkExpr::parse(&link.to_string()).unwrap(), link);
    }
}

#[test]
fn corpus_seeds() {
    let tvtri = corpus("parse_tvtri");
    assert!(tvtri.iter().filter(|s| Triangulation::parse(s).is_ok()).count() >= 2);
    tvtri.iter().chain(&corpus("tvtri_roundtrip")).for_each(|s| check_tvtri(s));
    let links = corpus("parse_link_expr");
    assert!(links.iter().any(|s| LinkExpr::parse(s).is_err()));
    links.iter().for_each(|s| check_link(s));
}

fn mutated(seeds: Vec<String>) -> impl Strategy<Value = String> {
    (prop::sample::select(seeds), any::<prop::sample::Index>(), any::<prop::sample::Index>(), ".{0,8}").prop_map(
        |(seed, a, b, insert)| {
            let chars: Vec<char> = seed.chars().collect();
            let (mut i, mut j) = (a.index(chars.len() + 1), b.index(chars.len() + 1));
            if i > j {
                std::mem::swap(&mut i, &mut j);
            }
            chars[..i].iter().chain(insert.chars().collect::<Vec<_>>().iter()).chain(&chars[j..]).collect()
        },
    )
}

proptest! {
    #[test]
    fn tvtri_parser_survives_mutation(text in mutated(corpus("parse_tvtri"))) {
        check_tvtri(&text);
    }

    #[test]
    fn tvtri_parser_survives_noise(text in "\\PC{0,200}") {
        check_tvtri(&text);
    }

    #[test]
    fn link_parser_survives_mutation(text in mutated(corpus("parse_link_expr"))) {
        check_link(&text);
    }

    #[test]
    fn link_parser_survives_noise(text in "[a-z0-9_(),+\\- ]{0,60}") {
        check_link(&text);
    }
}
