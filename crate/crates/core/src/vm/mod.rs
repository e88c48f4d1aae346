//! Gas-metered interpreter for MiniSol over a simple world-state model.

mod cost;
mod interp;
mod state;

use ethnum::U256;
use serde::{Deserialize, Serialize};

pub use cost::{CostTable, CostTableError, OpKind, DEFAULT_COST_TABLE};
pub use interp::{
    execute, frame_words, is_static_zero, AdversaryConfig, ExecError, ExecutionEnv, ExecutionResult, Flag, Status,
    TraceEvent, VmConfig, DEFAULT_GAS_LIMIT, DEFAULT_REENTRY_DEPTH,
};
pub use state::{opt_u256_dec, parse_u256, u256_dec, Account, Address, Slot, WorldState};

use crate::lang::Contract;
use crate::testgen::{TestCase, Value};

/// First observable on which a test run diverged from its recorded expectation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mismatch", rename_all = "snake_case")]
pub enum Mismatch {
    Execution {
        message: String,
    },
    Status {
        expected: Status,
        actual: Status,
    },
    Return {
        expected: Option<Value>,
        actual: Option<Value>,
    },
    Balance {
        account: Address,
        #[serde(with = "u256_dec")]
        expected: U256,
        #[serde(with = "u256_dec")]
        actual: U256,
    },
    Storage {
        slot: Slot,
        #[serde(with = "u256_dec")]
        expected: U256,
        #[serde(with = "u256_dec")]
        actual: U256,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TestOutcome {
    Pass,
    Fail(Mismatch),
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, TestOutcome::Pass)
    }
}

/// Replays the test's call from its pre-state slice and compares status,
/// return value and every captured balance and storage slot.
pub fn run_test(c: &Contract, t: &TestCase, cfg: &VmConfig) -> TestOutcome {
    run_test_with_result(c, t, cfg).0
}

pub fn run_test_with_result(c: &Contract, t: &TestCase, cfg: &VmConfig) -> (TestOutcome, Option<ExecutionResult>) {
    let rec = &t.record;
    let env = match rec.call.to_env(c) {
        Ok(env) => env,
        Err(message) => return (TestOutcome::Fail(Mismatch::Execution { message }), None),
    };
    let res = match execute(c, &rec.pre_state, &env, cfg) {
        Ok(r) => r,
        Err(e) => return (TestOutcome::Fail(Mismatch::Execution { message: e.to_string() }), None),
    };
    let outcome = compare(c, t, &res);
    (outcome, Some(res))
}

fn compare(c: &Contract, t: &TestCase, res: &ExecutionResult) -> TestOutcome {
    let rec = &t.record;
    if res.status != rec.status {
        return TestOutcome::Fail(Mismatch::Status { expected: rec.status, actual: res.status });
    }
    let actual_ret = c
        .function(&rec.call.function)
        .and_then(|f| f.returns.as_ref())
        .and_then(|ty| res.return_value.map(|v| Value::typed(ty, v)));
    if actual_ret.as_ref().map(Value::raw) != rec.return_value.as_ref().map(Value::raw) {
        return TestOutcome::Fail(Mismatch::Return { expected: rec.return_value, actual: actual_ret });
    }
    for (addr, acc) in &rec.post_state.accounts {
        let actual = res.post_state.balance(*addr);
        if actual != acc.balance {
            return TestOutcome::Fail(Mismatch::Balance { account: *addr, expected: acc.balance, actual });
        }
    }
    if let Some(acc) = rec.post_state.accounts.get(&rec.post_state.contract) {
        for (slot, expected) in &acc.storage {
            let actual = res.post_state.load(slot);
            if actual != *expected {
                return TestOutcome::Fail(Mismatch::Storage { slot: slot.clone(), expected: *expected, actual });
            }
        }
    }
    TestOutcome::Pass
}
