use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ethnum::U256;
use proptest::prelude::*;

use super::eval::{EvalContext, Evaluated};
use super::workers::usable_ops;
use super::*;
use crate::lang::{parse, NodeId, NodePath};
use crate::mutate::{apply, EditOp, OpTag, Position, Replacement};
use crate::testgen::{generate_tests, record_transactions, CallSpec, Scenario, Value, DEFAULT_TEST_TIMEOUT};
use crate::vm::Address;

const REFUND: &str = "contract Refund { mapping(address => uint) bal;
    function deposit() payable { bal[msg.sender] = msg.value; }
    function refund() { uint a = bal[msg.sender]; bal[msg.sender] = 0; msg.sender.send(a); } }";

const CLEAN: &str = "contract Clean { uint x; function set(uint v) { x = v; } }";

fn call(caller: u64, value: u64, f: &str, args: Vec<Value>) -> CallSpec {
    CallSpec { caller: Address::from_u64(caller), value: U256::from(value), function: f.into(), args, gas_limit: None }
}

fn suite(c: &Contract, calls: Vec<CallSpec>) -> Vec<TestCase> {
    let scenario = Scenario {
        contract_address: Address::from_u64(0xc0),
        contract_balance: U256::from(100u64),
        accounts: [(Address::from_u64(0xa1), Value::Uint(U256::from(1000u64)))].into(),
        calls,
        ..Scenario::default()
    };
    let vm = VmConfig::default();
    let log = record_transactions(c, &scenario, &vm).unwrap();
    generate_tests(c, &log, DEFAULT_TEST_TIMEOUT, &vm).tests
}

fn refund_tests(c: &Contract) -> Vec<TestCase> {
    suite(c, vec![call(0xa1, 7, "deposit", vec![]), call(0xa1, 0, "refund", vec![]), call(0xa1, 0, "refund", vec![])])
}

fn quick(seed: u64) -> SearchConfig {
    SearchConfig { seed, deterministic: true, max_bound: Duration::from_secs(60), ..SearchConfig::default() }
}

fn brute_fronts(objs: &[Vec<u64>]) -> Vec<usize> {
    let n = objs.len();
    let mut rank = vec![0usize; n];
    let mut level = 0;
    while rank.contains(&0) {
        level += 1;
        let front: Vec<usize> = (0..n)
            .filter(|&i| rank[i] == 0)
            .filter(|&i| !(0..n).any(|j| rank[j] == 0 && j != i && pareto_dominates(&objs[j], &objs[i])))
            .collect();
        for i in front {
            rank[i] = level;
        }
    }
    rank
}

proptest! {
    #[test]
    fn fronts_match_brute_force(objs in prop::collection::vec(prop::collection::vec(0u64..5, 2), 1..32)) {
        prop_assert_eq!(pareto_fronts(&objs), brute_fronts(&objs));
    }

    #[test]
    fn three_objective_fronts_match_brute_force(objs in prop::collection::vec(prop::collection::vec(0u64..4, 3), 1..24)) {
        prop_assert_eq!(pareto_fronts(&objs), brute_fronts(&objs));
    }
}

#[test]
fn eight_point_population() {
    let objs: Vec<Vec<u64>> =
        [[1, 5], [2, 3], [4, 1], [2, 4], [3, 3], [5, 5], [4, 2], [1, 6]].iter().map(|p| p.to_vec()).collect();
    assert_eq!(pareto_fronts(&objs), vec![1, 1, 1, 2, 2, 3, 2, 2]);
    assert_eq!(pareto_fronts(&objs), brute_fronts(&objs));
}

#[test]
fn crowding_marks_boundaries_infinite() {
    let objs: Vec<Vec<u64>> = vec![vec![0, 4], vec![1, 2], vec![2, 1], vec![4, 0]];
    let d = crowding_distance(&objs, &[0, 1, 2, 3]);
    assert!(d[0].is_infinite() && d[3].is_infinite());
    assert!((d[1] - (2.0 / 4.0 + 3.0 / 4.0)).abs() < 1e-9);
}

fn cand(vuln: u32, fail: u32, dist: u32, tag: u64) -> Candidate {
    let c = parse(&format!("contract T{tag} {{ uint x; }}")).unwrap();
    let mut k = Candidate::original(&c);
    k.fitness = FitnessVector { vuln_count: vuln, fail_count: fail, gas_level: 0, mut_distance: dist };
    k
}

#[test]
fn selection_keeps_small_populations_and_valid_candidates() {
    let t = CostTable::default();
    let pop = vec![cand(2, 0, 1, 1), cand(0, 0, 3, 2), cand(1, 1, 1, 3)];
    let out = nsga2_select(pop.clone(), 10, true, &t);
    assert_eq!(out.len(), 3);
    assert!(out[0].fitness.is_valid());
    let pop: Vec<Candidate> =
        (0..12).map(|i| cand((i % 4) as u32 + 1, (i % 3) as u32, 1, i)).chain([cand(0, 0, 2, 99)]).collect();
    let out = nsga2_select(pop, 4, false, &t);
    assert_eq!(out.len(), 4);
    assert!(out.iter().any(|c| c.fitness.is_valid()));
}

#[test]
fn dominating_candidate_is_in_front_one() {
    let pop = vec![cand(1, 2, 1, 1), cand(1, 1, 1, 2)];
    assert_eq!(front_ranks(&pop, true), vec![2, 1]);
}

#[test]
fn usable_operators_per_space() {
    use OpTag::*;
    assert_eq!(usable_ops(SpaceId::S1, &[]), vec![M]);
    assert!(usable_ops(SpaceId::S4, &[]).is_empty());
    assert_eq!(usable_ops(SpaceId::S4, &[R]), vec![M]);
    assert_eq!(usable_ops(SpaceId::S4, &[R, M]), vec![M, R]);
    assert!(usable_ops(SpaceId::S1, &[R]).is_empty());
    assert!(usable_ops(SpaceId::S7, &[R]).is_empty());
    assert_eq!(usable_ops(SpaceId::S7, &[R, I]), vec![M]);
}

#[test]
fn original_has_detector_count_and_no_failures() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    assert_eq!(tests.len(), 3);
    let f = eval(&c, &Patch::empty(&c), &VulnKind::repairable(), &tests, &VmConfig::default());
    assert_eq!((f.vuln_count, f.fail_count, f.mut_distance), (1, 0, 0));
}

fn send_stmt_path(c: &Contract) -> NodePath {
    c.function_body_path(c.function_index("refund").unwrap()).child(2)
}

#[test]
fn golden_fix_is_valid_and_breaking_edit_fails_tests() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let kinds = VulnKind::repairable();
    let wrap = EditOp::Replace { site: NodeId::new(send_stmt_path(&c), 0), with: Replacement::RequireWrap };
    let p = Patch::empty(&c).extended(wrap);
    let fixed = apply(&p, &c).unwrap();
    let f = eval(&fixed, &p, &kinds, &tests, &VmConfig::default());
    assert_eq!((f.vuln_count, f.fail_count, f.mut_distance), (0, 0, 1));
    // Zeroing before the read refunds nothing.
    let body = c.function_body_path(c.function_index("refund").unwrap());
    let mv = EditOp::Move {
        src: NodeId::new(body.child(1), 0),
        anchor: NodeId::new(body.child(0), 0),
        position: Position::Before,
    };
    let p = Patch::empty(&c).extended(mv);
    let broken = apply(&p, &c).unwrap();
    assert!(eval(&broken, &p, &kinds, &tests, &VmConfig::default()).fail_count >= 1);
}

#[test]
fn plausibility_respects_the_gas_bound() {
    let c = parse(REFUND).unwrap();
    let wrap = EditOp::Replace { site: NodeId::new(send_stmt_path(&c), 0), with: Replacement::RequireWrap };
    let p = Patch::empty(&c).extended(wrap);
    let mut k = Candidate::new(p.clone(), apply(&p, &c).unwrap(), Some(SpaceId::S2), 1, None);
    k.fitness = FitnessVector { vuln_count: 0, fail_count: 0, gas_level: 0, mut_distance: 1 };
    let t = CostTable::default();
    assert!(filter_plausible(&mut [cand(1, 0, 0, 1)], None, &t, DEFAULT_TRIP_CAP).is_empty());
    assert_eq!(filter_plausible(&mut [k.clone()], None, &t, DEFAULT_TRIP_CAP).len(), 1);
    assert_eq!(filter_plausible(&mut [k.clone()], Some(1_000_000), &t, DEFAULT_TRIP_CAP).len(), 1);
    assert!(filter_plausible(&mut [k], Some(100), &t, DEFAULT_TRIP_CAP).is_empty());
}

#[test]
fn repair_wraps_the_unchecked_send() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let r = repair(&c, &tests, &quick(7)).unwrap();
    assert_eq!(r.outcome, Outcome::PlausibleFound);
    assert!(!r.plausible.is_empty());
    assert_eq!(r.failed_verification, 0);
    assert_eq!(r.vulnerabilities_before["ED"], 1);
    assert_eq!(r.vulnerabilities_after.as_ref().unwrap()["ED"], 0);
    let kinds = VulnKind::repairable();
    for p in &r.plausible {
        verify_patch(&c, &p.patch, &kinds, &tests, &VmConfig::default(), None, DEFAULT_TRIP_CAP).unwrap();
    }
    assert!(r.plausible.iter().any(|p| p.source.contains("require(msg.sender.send(a))")));
    assert!(r.elapsed_ms.is_none());
}

#[test]
fn deterministic_reports_are_identical() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let a = serde_json::to_string(&repair(&c, &tests, &quick(3)).unwrap()).unwrap();
    let b = serde_json::to_string(&repair(&c, &tests, &quick(3)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clean_contract_needs_no_search() {
    let c = parse(CLEAN).unwrap();
    let r = repair(&c, &[], &quick(1)).unwrap();
    assert_eq!(r.outcome, Outcome::NoVulnerabilities);
    assert_eq!(r.stats.candidates_generated, 0);
}

#[test]
fn expired_budget_reports_timeout() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let stop = Arc::new(AtomicBool::new(true));
    let cfg = SearchConfig { stop: Some(stop), ..quick(1) };
    let r = repair(&c, &tests, &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::Timeout);
    assert!(r.plausible.is_empty());
}

#[test]
fn parallel_race_accepts_one_candidate_per_request() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let cfg = SearchConfig { deterministic: false, ..quick(5) };
    let r = repair(&c, &tests, &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::PlausibleFound, "{:?}", r.stats);
    assert!(r.stats.candidates_generated <= r.stats.requests);
    let per_space: usize = r.stats.per_space.values().map(|s| s.generated).sum();
    assert_eq!(per_space, r.stats.candidates_generated);
    assert!(r.elapsed_ms.is_some());
}

#[test]
fn urs_fixes_a_one_edit_subject() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let r = repair(&c, &tests, &SearchConfig { mode: Mode::Urs, ..quick(7) }).unwrap();
    assert_eq!(r.outcome, Outcome::PlausibleFound);
    assert!(r.plausible.iter().all(|p| p.mutation_distance == 1));
}

#[test]
fn worker_on_untypeable_mutants_exhausts() {
    // Every edit of an empty function body yields a duplicate or nothing.
    let c = parse("contract E { function f() { } }").unwrap();
    let mut g = super::workers::Generator::new(SpaceId::S1, Arc::new(c.clone()), VulnKind::repairable(), 0);
    let base = Candidate::original(&c);
    let mut steps = 0;
    loop {
        match g.step(&base) {
            super::workers::Step::Exhausted => break,
            super::workers::Step::Produced(_) => panic!("no move exists"),
            super::workers::Step::Rejected => steps += 1,
        }
        assert!(steps < 1000);
    }
}

#[test]
fn gmax_discards_dominated_candidates_with_vulnerabilities() {
    let c = parse(REFUND).unwrap();
    let tests = refund_tests(&c);
    let kinds = VulnKind::repairable();
    let vm = VmConfig::default();
    let t = CostTable::default();
    // Stand-in for the g_max holder: the unpatched contract's formula.
    let g = crate::gas::expected_gas_formula(&c, &t, None).unwrap();
    // A costlier mutant that keeps the vulnerability.
    let body = c.function_body_path(c.function_index("refund").unwrap());
    let ins = EditOp::Insert {
        stmt: crate::lang::parse_stmt("bal[msg.sender] = 0;").unwrap(),
        anchor: NodeId::new(body.child(2), 0),
        position: Position::After,
    };
    let q = Patch::empty(&c).extended(ins);
    let costly = Candidate::new(q.clone(), apply(&q, &c).unwrap(), Some(SpaceId::S3), 1, None);
    let gmax = Mutex::new(Some(g));
    let mut ctx = EvalContext {
        kinds: &kinds,
        tests: &tests,
        vm: &vm,
        costs: &t,
        bound: None,
        trip_cap: DEFAULT_TRIP_CAP,
        short_circuit: false,
        parallel: false,
        gmax: Some(&gmax),
    };
    assert!(matches!(ctx.evaluate(costly.clone()), Evaluated::Discarded));
    ctx.gmax = None;
    assert!(matches!(ctx.evaluate(costly), Evaluated::Done(_)));
}
