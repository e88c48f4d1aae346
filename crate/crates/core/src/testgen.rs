//! Regression tests from transaction logs: record scenarios into transaction
//! records, then replay them against the original contract to keep the
//! reproducible ones as test cases.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use ethnum::U256;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lang::{Contract, Type};
use crate::vm::{
    execute, parse_u256, run_test_with_result, u256_dec, Account, Address, ExecutionEnv, ExecutionResult, Mismatch,
    Slot, Status, TestOutcome, VmConfig, WorldState, DEFAULT_GAS_LIMIT,
};

pub const DEFAULT_TEST_TIMEOUT: Duration = Duration::from_secs(5);

/// A typed call argument or return value. In JSON, uints are decimal strings,
/// addresses are `0x` hex strings and bools are JSON booleans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Value {
    Uint(U256),
    Bool(bool),
    Address(Address),
}

impl Value {
    pub fn raw(&self) -> U256 {
        match self {
            Value::Uint(v) => *v,
            Value::Bool(b) => U256::from(*b as u8),
            Value::Address(a) => a.0,
        }
    }

    pub fn typed(ty: &Type, raw: U256) -> Value {
        match ty {
            Type::Bool => Value::Bool(raw != U256::ZERO),
            Type::Address => Value::Address(Address(raw)),
            _ => Value::Uint(raw),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Uint(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Address(a) => write!(f, "{a}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Uint(v) => s.serialize_str(&v.to_string()),
            Value::Address(a) => s.serialize_str(&a.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(b) => Ok(Value::Bool(b)),
            Raw::Num(n) => Ok(Value::Uint(U256::from(n))),
            Raw::Str(s) => {
                let v = parse_u256(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid value `{s}`")))?;
                if s.starts_with("0x") || s.starts_with("0X") {
                    Ok(Value::Address(Address(v)))
                } else {
                    Ok(Value::Uint(v))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSpec {
    pub caller: Address,
    #[serde(with = "u256_dec", default)]
    pub value: U256,
    pub function: String,
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_limit: Option<u64>,
}

impl CallSpec {
    pub fn to_env(&self, c: &Contract) -> Result<ExecutionEnv, String> {
        let f = c.function(&self.function).ok_or_else(|| format!("unknown function `{}`", self.function))?;
        if f.params.len() != self.args.len() {
            return Err(format!("function `{}` expects {} arguments, got {}", f.name, f.params.len(), self.args.len()));
        }
        for (p, a) in f.params.iter().zip(&self.args) {
            let ok = match (&p.ty, a) {
                (Type::Bool, Value::Bool(_)) => true,
                (Type::Bool, _) => false,
                (_, Value::Bool(_)) => false,
                _ => true,
            };
            if !ok {
                return Err(format!("argument `{}` has the wrong type", p.name));
            }
        }
        Ok(ExecutionEnv {
            caller: self.caller,
            value: self.value,
            function: self.function.clone(),
            args: self.args.iter().map(Value::raw).collect(),
            gas_limit: self.gas_limit.unwrap_or(DEFAULT_GAS_LIMIT),
        })
    }

    /// Re-types the arguments according to the callee's signature.
    fn typed(&self, c: &Contract) -> CallSpec {
        let mut out = self.clone();
        if let Some(f) = c.function(&self.function) {
            for (p, a) in f.params.iter().zip(out.args.iter_mut()) {
                *a = Value::typed(&p.ty, a.raw());
            }
        }
        out
    }
}

/// One observed transaction: the touched slice of the world state before and
/// after, the call, and its outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub pre_state: WorldState,
    pub call: CallSpec,
    pub post_state: WorldState,
    #[serde(default)]
    pub return_value: Option<Value>,
    pub status: Status,
    #[serde(default)]
    pub gas_used: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    /// Index of the source transaction in the log.
    pub source: usize,
    #[serde(flatten)]
    pub record: TransactionRecord,
}

/// Fixture accounts and a call sequence to record.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub contract_address: Address,
    #[serde(with = "u256_dec", default)]
    pub contract_balance: U256,
    /// Initial storage overrides on top of the state-variable initializers.
    #[serde(default)]
    pub storage: BTreeMap<String, Value>,
    /// Initial balances of externally owned accounts.
    #[serde(default)]
    pub accounts: BTreeMap<Address, Value>,
    #[serde(default)]
    pub calls: Vec<CallSpec>,
}

impl Scenario {
    pub fn initial_state(&self, c: &Contract) -> WorldState {
        let mut s = WorldState::deploy(c, self.contract_address, self.contract_balance);
        for (slot, v) in &self.storage {
            s.store(Slot(slot.clone()), v.raw());
        }
        for (a, v) in &self.accounts {
            s.set_balance(*a, v.raw());
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TestgenError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("scenario call {index}: {message}")]
    BadCall { index: usize, message: String },
}

fn slice(
    state: &WorldState,
    accounts: &std::collections::BTreeSet<Address>,
    slots: &std::collections::BTreeSet<Slot>,
) -> WorldState {
    let mut out = WorldState::new(state.contract);
    for a in accounts {
        out.accounts.insert(*a, Account { balance: state.balance(*a), storage: BTreeMap::new() });
    }
    let contract = out.accounts.entry(state.contract).or_default();
    contract.balance = state.balance(state.contract);
    for s in slots {
        contract.storage.insert(s.clone(), state.load(s));
    }
    out
}

fn record_of(c: &Contract, pre: &WorldState, call: &CallSpec, res: &ExecutionResult) -> TransactionRecord {
    let ret_ty = c.function(&call.function).and_then(|f| f.returns.clone());
    TransactionRecord {
        pre_state: slice(pre, &res.touched_accounts, &res.touched_slots),
        call: call.typed(c),
        post_state: slice(&res.post_state, &res.touched_accounts, &res.touched_slots),
        return_value: ret_ty.zip(res.return_value).map(|(t, v)| Value::typed(&t, v)),
        status: res.status,
        gas_used: res.gas_used,
    }
}

/// Executes the scenario's calls in order on an evolving state, recording the
/// touched slice of each transaction. Reverted calls are recorded too.
pub fn record_transactions(
    c: &Contract,
    scenario: &Scenario,
    cfg: &VmConfig,
) -> Result<Vec<TransactionRecord>, TestgenError> {
    let mut state = scenario.initial_state(c);
    let mut out = Vec::with_capacity(scenario.calls.len());
    for (index, call) in scenario.calls.iter().enumerate() {
        let env = call.to_env(c).map_err(|message| TestgenError::BadCall { index, message })?;
        let res = execute(c, &state, &env, cfg).map_err(|e| TestgenError::BadCall { index, message: e.to_string() })?;
        out.push(record_of(c, &state, call, &res));
        state = res.post_state;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discard {
    pub source: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GeneratedSuite {
    pub tests: Vec<TestCase>,
    pub discarded: Vec<Discard>,
}

/// Replays every record on `c`; records that reproduce their recorded
/// outcome within `timeout` become tests, the rest are discarded with a reason.
pub fn generate_tests(c: &Contract, log: &[TransactionRecord], timeout: Duration, cfg: &VmConfig) -> GeneratedSuite {
    let results: Vec<Result<TestCase, Discard>> = log
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let t = TestCase { id: format!("t{i}"), source: i, record: rec.clone() };
            let start = Instant::now();
            let (outcome, _) = run_test_with_result(c, &t, cfg);
            let elapsed = start.elapsed();
            if elapsed > timeout {
                return Err(Discard { source: i, reason: format!("replay took {} ms", elapsed.as_millis()) });
            }
            match outcome {
                TestOutcome::Pass => Ok(t),
                TestOutcome::Fail(Mismatch::Execution { message }) => Err(Discard { source: i, reason: message }),
                TestOutcome::Fail(m) => Err(Discard { source: i, reason: format!("replay mismatch: {m:?}") }),
            }
        })
        .collect();
    let mut suite = GeneratedSuite::default();
    for r in results {
        match r {
            Ok(t) => suite.tests.push(t),
            Err(d) => suite.discarded.push(d),
        }
    }
    suite
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, TestgenError> {
    let f = std::fs::File::open(path)?;
    parse_jsonl(std::io::BufReader::new(f))
}

pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>, TestgenError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| TestgenError::Json { line: i + 1, message: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = Vec::new();
    write_jsonl(&mut out, items).expect("writing to memory");
    String::from_utf8(out).expect("json is utf-8")
}

pub fn write_jsonl<T: Serialize>(w: &mut impl Write, items: &[T]) -> std::io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut *w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
