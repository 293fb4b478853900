mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parasched::validator::{verify, ProblemCode};

#[test]
fn clean_graphs_have_no_findings() {
    for (k, dag) in common::valid_graphs().iter().enumerate() {
        assert!(verify(dag).is_empty(), "graph {k}: {:?}", verify(dag));
    }
}

#[test]
fn every_injected_fault_is_found() {
    let graphs = common::valid_graphs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for code in [ProblemCode::P1, ProblemCode::P2, ProblemCode::P3] {
        assert_eq!(common::detected(&mut rng, &graphs, code, 100), 100, "{code}");
    }
}
