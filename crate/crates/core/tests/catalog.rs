use psi_core::catalog::{bundled_examples, example_ids, list_bundled_examples, Provenance};
use psi_core::graph::build_model;
use psi_core::inference::DiscretizationConfig;

#[test]
fn every_bundled_expectation_holds() {
    let mut failures = Vec::new();
    for ex in bundled_examples() {
        for o in ex.check(&DiscretizationConfig::default()) {
            if !o.pass {
                failures.push(format!("{} {}: {:?} not in {:?} ({:?})", ex.id, o.key, o.value, o.range, o.message));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn manifests_are_well_formed() {
    for ex in bundled_examples() {
        assert!(!ex.expected.is_empty(), "{} has no expectations", ex.id);
        assert!(build_model(ex.spec.clone()).is_ok(), "{}", ex.id);
        for x in &ex.expected {
            assert!(x.range[0] <= x.range[1], "{} {}", ex.id, x.key);
            assert!(!x.source.is_empty(), "{} {}", ex.id, x.key);
            if let Some(t) = x.target {
                assert!(x.accepts(t) || x.provenance == Provenance::Paper, "{} {} target outside band", ex.id, x.key);
            }
        }
    }
}

#[test]
fn listing_matches_ids() {
    let listed: Vec<&str> = list_bundled_examples().iter().map(|e| e.id).collect();
    assert_eq!(listed, example_ids().collect::<Vec<_>>());
    assert!(list_bundled_examples().iter().all(|e| !e.title.is_empty()));
}
