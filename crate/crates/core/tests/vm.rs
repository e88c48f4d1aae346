use ethnum::U256;
use gasrepair::lang::parse;
use gasrepair::vm::*;
use proptest::prelude::*;

fn u(v: u64) -> U256 {
    U256::from(v)
}

const USER: u64 = 0xa1;
const ATTACKER: u64 = 0xbad;
const CONTRACT: u64 = 0xc0;

fn addr(v: u64) -> Address {
    Address::from_u64(v)
}

#[test]
fn return_zero_costs_hand_summed_table_entries() {
    let c = parse("contract R { function f() returns (uint) { return 0; } }").unwrap();
    let cfg = VmConfig { record_steps: true, ..Default::default() };
    let t = &cfg.costs;
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let r = execute(&c, &s, &ExecutionEnv::new(addr(USER), "f", vec![]), &cfg).unwrap();
    assert_eq!(r.status, Status::Success);
    assert_eq!(r.return_value, Some(U256::ZERO));
    assert_eq!(r.gas_used, t.call + t.block + t.literal + t.ret);
}

#[test]
fn add_step_and_empty_block() {
    let t = CostTable::default();
    assert_eq!(t.instruction_gas(OpKind::Add), 3);
    let c = parse("contract E { function f() { if (true) { } } function g() { } }").unwrap();
    let cfg = VmConfig::default();
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let f = execute(&c, &s, &ExecutionEnv::new(addr(USER), "f", vec![]), &cfg).unwrap();
    let g = execute(&c, &s, &ExecutionEnv::new(addr(USER), "g", vec![]), &cfg).unwrap();
    // The empty then-block itself adds nothing beyond the condition and branch.
    assert_eq!(f.gas_used - g.gas_used, t.literal + t.branch);
}

#[test]
fn storage_write_zero_and_nonzero() {
    let c = parse("contract S { uint x; function z() { x = 0; } function n() { x = 7; } }").unwrap();
    let cfg = VmConfig::default();
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let z = execute(&c, &s, &ExecutionEnv::new(addr(USER), "z", vec![]), &cfg).unwrap();
    let n = execute(&c, &s, &ExecutionEnv::new(addr(USER), "n", vec![]), &cfg).unwrap();
    assert_eq!(n.gas_used - z.gas_used, 68 - 4);
    assert_eq!(n.post_state.load(&Slot::var("x")), u(7));
}

const FIG2: &str = "contract F2 { uint s;
    function run() { bool a = true; while (a) { s = s + 1; a = s < 3; } } }";
const FIG2_MUT: &str = "contract F2 { uint s;
    function run() { bool a = true; a = false; while (a) { s = s + 1; a = s < 3; } } }";

#[test]
fn fig2_insertion_lowers_gas() {
    let cfg = VmConfig::default();
    let (c, m) = (parse(FIG2).unwrap(), parse(FIG2_MUT).unwrap());
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let env = ExecutionEnv::new(addr(USER), "run", vec![]);
    let a = execute(&c, &s, &env, &cfg).unwrap();
    let b = execute(&m, &s, &env, &cfg).unwrap();
    assert_eq!(a.status, Status::Success);
    assert_eq!(b.status, Status::Success);
    assert!(b.gas_used < a.gas_used);
}

#[test]
fn fig3_move_out_of_loop_runs_out_of_gas() {
    let orig = parse("contract F3 { uint x; function run() { x = 0; while (x <= 100) { x = x + 2; } } }").unwrap();
    let moved = parse("contract F3 { uint x; function run() { x = 0; while (x <= 100) { } x = x + 2; } }").unwrap();
    let cfg = VmConfig::default();
    let s = WorldState::deploy(&orig, addr(CONTRACT), U256::ZERO);
    for limit in [50_000u64, 1_000_000, 5_000_000] {
        let env = ExecutionEnv::new(addr(USER), "run", vec![]).with_gas_limit(limit);
        let r = execute(&moved, &s, &env, &cfg).unwrap();
        assert_eq!(r.status, Status::OutOfGas);
        assert_eq!(r.gas_used, limit);
        assert_eq!(r.post_state, s);
    }
    let r = execute(&orig, &s, &ExecutionEnv::new(addr(USER), "run", vec![]), &cfg).unwrap();
    assert_eq!(r.status, Status::Success);
}

const BANK: &str = "contract Bank { mapping(address => uint) balances;
    function deposit() payable { balances[msg.sender] = balances[msg.sender] + msg.value; }
    function withdraw() {
        uint amount = balances[msg.sender];
        require(amount > 0);
        require(msg.sender.send(amount));
        balances[msg.sender] = 0;
    } }";
const BANK_FIXED: &str = "contract Bank { mapping(address => uint) balances;
    function deposit() payable { balances[msg.sender] = balances[msg.sender] + msg.value; }
    function withdraw() {
        uint amount = balances[msg.sender];
        require(amount > 0);
        balances[msg.sender] = 0;
        require(msg.sender.send(amount));
    } }";

fn funded_bank(c: &gasrepair::lang::Contract) -> WorldState {
    let mut s = WorldState::deploy(c, addr(CONTRACT), u(0));
    s.set_balance(addr(USER), u(1000));
    s.set_balance(addr(ATTACKER), u(100));
    let cfg = VmConfig::default();
    for (who, amt) in [(USER, 500u64), (ATTACKER, 100)] {
        let env = ExecutionEnv::new(addr(who), "deposit", vec![]).with_value(u(amt));
        s = execute(c, &s, &env, &cfg).unwrap().post_state;
    }
    s
}

#[test]
fn adversary_drains_vulnerable_bank() {
    let c = parse(BANK).unwrap();
    let s = funded_bank(&c);
    let adv = AdversaryConfig::new(addr(ATTACKER), "withdraw", vec![]);
    let cfg = VmConfig { adversary: Some(adv), ..Default::default() };
    let r = execute(&c, &s, &ExecutionEnv::new(addr(ATTACKER), "withdraw", vec![]), &cfg).unwrap();
    assert_eq!(r.status, Status::Success);
    let gained = r.post_state.balance(addr(ATTACKER)) - s.balance(addr(ATTACKER));
    assert!(gained > u(100), "attacker withdrew {gained}");
    // Nested calls are bounded by the depth cap: 1 + 4 withdrawals of 100.
    assert_eq!(gained, u(500));
}

#[test]
fn adversary_disabled_is_plain_transfer() {
    let c = parse(BANK).unwrap();
    let s = funded_bank(&c);
    let r = execute(&c, &s, &ExecutionEnv::new(addr(ATTACKER), "withdraw", vec![]), &VmConfig::default()).unwrap();
    assert_eq!(r.post_state.balance(addr(ATTACKER)) - s.balance(addr(ATTACKER)), u(100));
}

#[test]
fn fixed_bank_resists_adversary() {
    let c = parse(BANK_FIXED).unwrap();
    let s = funded_bank(&c);
    let adv = AdversaryConfig::new(addr(ATTACKER), "withdraw", vec![]);
    let cfg = VmConfig { adversary: Some(adv), ..Default::default() };
    let r = execute(&c, &s, &ExecutionEnv::new(addr(ATTACKER), "withdraw", vec![]), &cfg).unwrap();
    assert_eq!(r.post_state.balance(addr(ATTACKER)) - s.balance(addr(ATTACKER)), u(100));
}

#[test]
fn require_failure_rolls_back_but_reports_gas() {
    let c = parse("contract Q { uint x; function f(uint a) { x = 5; require(a > 1); } }").unwrap();
    let s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    let r = execute(&c, &s, &ExecutionEnv::new(addr(USER), "f", vec![u(0)]), &VmConfig::default()).unwrap();
    assert_eq!(r.status, Status::RequireFailed);
    assert_eq!(r.post_state, s);
    assert!(r.gas_used > 21_000);
}

#[test]
fn non_payable_rejects_value_and_unknown_function_errors() {
    let c = parse("contract P { function f() { } }").unwrap();
    let mut s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    s.set_balance(addr(USER), u(10));
    let env = ExecutionEnv::new(addr(USER), "f", vec![]).with_value(u(1));
    assert_eq!(execute(&c, &s, &env, &VmConfig::default()).unwrap().status, Status::RequireFailed);
    let env = ExecutionEnv::new(addr(USER), "g", vec![]);
    assert!(matches!(execute(&c, &s, &env, &VmConfig::default()), Err(ExecError::UnknownFunction(_))));
}

#[test]
fn flags_overflow_and_unchecked_send() {
    let c = parse("contract O { uint t; function f(uint a) { t = t + a; msg.sender.send(1); } }").unwrap();
    let mut s = WorldState::deploy(&c, addr(CONTRACT), U256::ZERO);
    s.store(Slot::var("t"), U256::MAX);
    let r = execute(&c, &s, &ExecutionEnv::new(addr(USER), "f", vec![u(2)]), &VmConfig::default()).unwrap();
    assert_eq!(r.post_state.load(&Slot::var("t")), u(1));
    assert!(r.flags.iter().any(|f| matches!(f, Flag::OverflowWrapped(_))));
    assert!(r.flags.iter().any(|f| matches!(f, Flag::UncheckedSendFailed(_))));
}

#[test]
fn gas_is_the_sum_of_step_costs() {
    let c = parse(BANK).unwrap();
    let s = funded_bank(&c);
    let cfg = VmConfig { record_steps: true, ..Default::default() };
    for (who, f) in [(USER, "withdraw"), (ATTACKER, "withdraw"), (0x99, "withdraw")] {
        let r = execute(&c, &s, &ExecutionEnv::new(addr(who), f, vec![]), &cfg).unwrap();
        let sum: u64 = r.steps.iter().map(|k| cfg.costs.instruction_gas(*k)).sum();
        assert_eq!(sum, r.gas_used);
    }
}

proptest! {
    #[test]
    fn determinism_conservation_and_gas_monotonicity(
        deposit in 0u64..1000, withdraw_first in any::<bool>(), extra in 0u64..100_000
    ) {
        let c = parse(BANK).unwrap();
        let mut s = WorldState::deploy(&c, addr(CONTRACT), u(0));
        s.set_balance(addr(USER), u(1000));
        let cfg = VmConfig::default();
        let envs = [
            ExecutionEnv::new(addr(USER), "deposit", vec![]).with_value(u(deposit)),
            ExecutionEnv::new(addr(USER), "withdraw", vec![]),
        ];
        let order: Vec<&ExecutionEnv> = if withdraw_first { vec![&envs[1], &envs[0], &envs[1]] } else { vec![&envs[0], &envs[1]] };
        for env in order {
            let a = execute(&c, &s, env, &cfg).unwrap();
            let b = execute(&c, &s, env, &cfg).unwrap();
            prop_assert_eq!(&a.post_state, &b.post_state);
            prop_assert_eq!(a.gas_used, b.gas_used);
            prop_assert_eq!(a.post_state.total_balance(), s.total_balance());
            if a.status == Status::Success {
                let bigger = env.clone().with_gas_limit(env.gas_limit + extra);
                let r = execute(&c, &s, &bigger, &cfg).unwrap();
                prop_assert_eq!(r.status, Status::Success);
                prop_assert_eq!(r.gas_used, a.gas_used);
                prop_assert_eq!(&r.post_state, &a.post_state);
                let tight = env.clone().with_gas_limit(a.gas_used);
                prop_assert_eq!(execute(&c, &s, &tight, &cfg).unwrap().status, Status::Success);
            }
            s = a.post_state;
        }
    }
}
