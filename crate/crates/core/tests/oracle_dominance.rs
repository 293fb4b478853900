use parasched::dag::{critical_path, parse_dag_text};
use parasched::oracle::{optimal_makespan, DEFAULT_NODE_LIMIT};
use parasched::random::{random_dag_seeded, RandomDagConfig};
use parasched::scheduler::{schedule, validate_plan};

#[test]
fn oracle_never_beaten_by_scheduler() {
    let mut ratios = vec![];
    for seed in 0..300u64 {
        let dag = random_dag_seeded(seed, &RandomDagConfig::with_max_nodes(8));
        let plan = schedule(&dag).unwrap();
        let best = optimal_makespan(&dag, DEFAULT_NODE_LIMIT).unwrap();
        assert!(validate_plan(&best.witness, &dag).is_empty(), "seed {seed}: {:?}", validate_plan(&best.witness, &dag));
        assert!(best.optimal_makespan <= plan.makespan, "seed {seed}");
        assert!(critical_path(&dag) <= best.optimal_makespan, "seed {seed}");
        ratios.push(plan.makespan as f64 / best.optimal_makespan as f64);
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    let over = ratios.iter().filter(|&&r| r > 1.5).count();
    assert!(over <= 30, "worst ratio {worst:.3}, over 1.5: {over}/300");
}

#[test]
fn deadlock_fixture() {
    let dag = parse_dag_text(include_str!("../../../fixtures/deadlock_dag.txt")).unwrap();
    let plan = schedule(&dag).unwrap();
    assert_eq!(plan.rollbacks, 1);
    assert!(validate_plan(&plan, &dag).is_empty());
    let best = optimal_makespan(&dag, DEFAULT_NODE_LIMIT).unwrap();
    assert_eq!(plan.makespan, 25);
    assert_eq!(best.optimal_makespan, 25);
}
