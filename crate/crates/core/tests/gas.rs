use std::collections::BTreeMap;

use ethnum::U256;
use gasrepair::gas::*;
use gasrepair::lang::{parse, typecheck, Contract};
use gasrepair::mutate::{OpTag, Patch, Sampler};
use gasrepair::testgen::{CallSpec, TransactionRecord, Value};
use gasrepair::vm::*;
use proptest::prelude::*;

const USER: u64 = 0xa1;
const CONTRACT: u64 = 0xc0;

fn addr(v: u64) -> Address {
    Address::from_u64(v)
}

fn run(c: &Contract, s: &WorldState, f: &str, args: Vec<u64>) -> ExecutionResult {
    let env = ExecutionEnv::new(addr(USER), f, args.into_iter().map(U256::from).collect());
    execute(c, s, &env, &VmConfig::default()).unwrap()
}

/// Formula value at the trip counts the execution actually took.
fn formula_at_trace(paths: &[Path], f: &str, r: &ExecutionResult) -> u64 {
    let (i, trips) = match_trace(paths, f, &r.trace).expect("trace follows an enumerated path");
    path_gas_formula(&paths[i], &CostTable::default()).eval_u64(&trips).expect("integral gas")
}

const COUNTER: &str = "contract Counter { uint s;
    function bump(uint k) { uint i = 0; while (i < k) { s = s + 1; i = i + 1; } } }";

#[test]
fn loop_formula_matches_interpreter_at_several_trip_counts() {
    let c = parse(COUNTER).unwrap();
    let paths = enumerate_paths(&c).unwrap();
    assert_eq!(paths.len(), 1);
    let f = path_gas_formula(&paths[0], &CostTable::default());
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    for n in [0u64, 1, 2, 5] {
        let r = run(&c, &s, "bump", vec![n]);
        assert_eq!(r.status, Status::Success);
        let at: BTreeMap<String, i128> = [("n1".to_string(), n as i128)].into();
        assert_eq!(f.eval_u64(&at), Some(r.gas_used), "n = {n}");
    }
}

const BRANCHY: &str = "contract Branchy { uint x; mapping(address => uint) m;
    function f(uint a, uint b) {
        require(a > 0);
        if (a > b) { x = a - b; m[msg.sender] = a; } else { x = b + 1; }
    }
    function g(uint a) returns (uint) { if (a == 7) { return 1; } return a + 2; } }";

#[test]
fn loop_free_expected_formula_is_the_mean_over_one_input_per_path() {
    let c = parse(BRANCHY).unwrap();
    let paths = enumerate_paths(&c).unwrap();
    assert_eq!(paths.len(), 5);
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let inputs = [("f", vec![0, 0]), ("f", vec![5, 1]), ("f", vec![1, 5]), ("g", vec![7]), ("g", vec![3])];
    let mut covered = vec![false; paths.len()];
    let mut total = 0u64;
    for (f, args) in inputs {
        let r = run(&c, &s, f, args);
        let (i, _) = match_trace(&paths, f, &r.trace).unwrap();
        assert!(!covered[i]);
        covered[i] = true;
        total += r.gas_used;
    }
    let e = expected_gas_formula(&c, &CostTable::default(), None).unwrap();
    assert!(e.is_constant());
    assert_eq!(e.constant_term(), Rational::new(total as i128, 5));
}

#[test]
fn lifespan_is_the_sum_of_independent_replays() {
    let c = parse(BRANCHY).unwrap();
    let cfg = VmConfig::default();
    assert_eq!(lifespan_gas(&c, &[], &cfg).unwrap(), 0);
    let mut s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let mut log = Vec::new();
    let mut expected = 0;
    for (a, b) in [(3u64, 1u64), (1, 9), (0, 2), (4, 4), (8, 2)] {
        let call = CallSpec {
            caller: addr(USER),
            value: U256::ZERO,
            function: "f".into(),
            args: vec![Value::Uint(U256::from(a)), Value::Uint(U256::from(b))],
            gas_limit: None,
        };
        let r = execute(&c, &s, &call.to_env(&c).unwrap(), &cfg).unwrap();
        expected += r.gas_used;
        log.push(TransactionRecord {
            pre_state: s.clone(),
            call,
            post_state: r.post_state.clone(),
            return_value: None,
            status: r.status,
            gas_used: r.gas_used,
        });
        s = r.post_state;
    }
    assert_eq!(lifespan_gas(&c, &log[..1], &cfg).unwrap(), log[0].gas_used);
    assert_eq!(lifespan_gas(&c, &log, &cfg).unwrap(), expected);
    let paths = enumerate_paths(&c).unwrap();
    let w = path_weights_from_log(&c, &paths, &log, &cfg).unwrap();
    assert_eq!(w.iter().copied().fold(Rational::from_integer(0), |a, b| a + b), Rational::from_integer(1));
    // One require failure out of five transactions.
    let revert = paths.iter().position(|p| p.end == PathEnd::Revert).unwrap();
    assert_eq!(w[revert], Rational::new(1, 5));
    assert!(expected_gas_formula(&c, &CostTable::default(), Some(&w)).is_ok());
}

#[test]
fn bound_boundary_agrees_with_interpreter() {
    let c = parse(BRANCHY).unwrap();
    let t = CostTable::default();
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    // The branch storing to x and m is the most expensive path.
    let max = run(&c, &s, "f", vec![5, 1]).gas_used;
    assert_eq!(check_gas_bound(&c, max, &t, DEFAULT_TRIP_CAP).unwrap(), BoundCheck::WithinBound);
    assert!(matches!(check_gas_bound(&c, max - 1, &t, DEFAULT_TRIP_CAP).unwrap(), BoundCheck::Exceeds { .. }));
}

const WALLET: &str = "contract Wallet { mapping(address => uint) bal; uint total;
    function deposit() payable { bal[msg.sender] = bal[msg.sender] + msg.value; total = total + msg.value; }
    function withdraw(uint amount) {
        require(bal[msg.sender] >= amount);
        if (amount > 0) { require(msg.sender.send(amount)); }
        bal[msg.sender] = bal[msg.sender] - amount;
        total = total - amount;
    } }";

#[test]
fn reduced_comparison_equals_full_comparison_on_mutants() {
    let t = CostTable::default();
    let mut checked = 0;
    for src in [WALLET, BRANCHY, COUNTER] {
        let c = parse(src).unwrap();
        let full_old = expected_gas_formula(&c, &t, None).unwrap();
        for op in [OpTag::M, OpTag::R, OpTag::I] {
            let mut s = Sampler::new(c.clone(), Patch::empty(&c), vec![], 9);
            for _ in 0..60 {
                let Some(m) = s.next(op) else { break };
                if typecheck(&m.contract).is_err() {
                    continue;
                }
                let Ok(full_new) = expected_gas_formula(&m.contract, &t, None) else { continue };
                let full = compare_dominance(&full_old, &full_new);
                assert_eq!(reduced_compare(&c, &m.contract, &t).unwrap(), full, "{}", m.contract.name);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

proptest! {
    #[test]
    fn formulas_match_interpreter_on_random_inputs(a in 0u64..20, b in 0u64..20, k in 0u64..6) {
        let c = parse(BRANCHY).unwrap();
        let paths = enumerate_paths(&c).unwrap();
        let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
        for (f, args) in [("f", vec![a, b]), ("g", vec![a])] {
            let r = run(&c, &s, f, args);
            prop_assert_eq!(formula_at_trace(&paths, f, &r), r.gas_used);
        }
        let c = parse(COUNTER).unwrap();
        let paths = enumerate_paths(&c).unwrap();
        let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
        let r = run(&c, &s, "bump", vec![k]);
        prop_assert_eq!(formula_at_trace(&paths, "bump", &r), r.gas_used);
    }
}
