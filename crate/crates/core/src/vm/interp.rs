use std::collections::{BTreeSet, HashMap};

use ethnum::U256;
use serde::{Deserialize, Serialize};

use super::cost::{CostTable, OpKind};
use super::state::{Address, Slot, WorldState};
use crate::lang::*;

pub const DEFAULT_GAS_LIMIT: u64 = 1_000_000;
pub const DEFAULT_REENTRY_DEPTH: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionEnv {
    pub caller: Address,
    pub value: U256,
    pub function: String,
    pub args: Vec<U256>,
    pub gas_limit: u64,
}

impl ExecutionEnv {
    pub fn new(caller: Address, function: &str, args: Vec<U256>) -> Self {
        ExecutionEnv { caller, value: U256::ZERO, function: function.to_string(), args, gas_limit: DEFAULT_GAS_LIMIT }
    }

    pub fn with_value(mut self, value: U256) -> Self {
        self.value = value;
        self
    }

    pub fn with_gas_limit(mut self, limit: u64) -> Self {
        self.gas_limit = limit;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    RequireFailed,
    OutOfGas,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    OverflowWrapped(NodePath),
    UncheckedSendFailed(NodePath),
}

/// Control-flow observations, tagged with the call depth they occurred at
/// (0 = the transaction's own call).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Call { function: String, depth: u32 },
    Stmt { path: NodePath, iters: Vec<u32>, depth: u32 },
    Branch { path: NodePath, taken: bool, depth: u32 },
    LoopExit { path: NodePath, trips: u32, depth: u32 },
    Send { path: NodePath, success: bool, depth: u32 },
}

impl TraceEvent {
    pub fn depth(&self) -> u32 {
        match self {
            TraceEvent::Call { depth, .. }
            | TraceEvent::Stmt { depth, .. }
            | TraceEvent::Branch { depth, .. }
            | TraceEvent::LoopExit { depth, .. }
            | TraceEvent::Send { depth, .. } => *depth,
        }
    }
}

/// A reentrancy attacker: whenever the contract sends to `address`, the
/// attacker calls back into `function` with `args` (value 0), up to `max_depth`
/// nested calls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdversaryConfig {
    pub address: Address,
    pub function: String,
    pub args: Vec<U256>,
    pub max_depth: u32,
}

impl AdversaryConfig {
    pub fn new(address: Address, function: &str, args: Vec<U256>) -> Self {
        AdversaryConfig { address, function: function.to_string(), args, max_depth: DEFAULT_REENTRY_DEPTH }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VmConfig {
    pub costs: CostTable,
    pub adversary: Option<AdversaryConfig>,
    /// Keep the per-step gas ledger in [`ExecutionResult::steps`].
    pub record_steps: bool,
}

#[derive(Clone, Debug)]
pub struct ExecutionResult {
    pub post_state: WorldState,
    pub return_value: Option<U256>,
    pub gas_used: u64,
    pub status: Status,
    pub flags: BTreeSet<Flag>,
    pub trace: Vec<TraceEvent>,
    pub steps: Vec<OpKind>,
    /// Accounts whose balance was read or written, including caller and contract.
    pub touched_accounts: BTreeSet<Address>,
    /// Contract storage slots read or written.
    pub touched_slots: BTreeSet<Slot>,
    /// Storage writes whose value was zero at run time although the written
    /// expression is not a literal zero (priced differently from the static model).
    pub dynamic_zero_stores: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{function}` expects {expected} arguments, got {got}")]
    Arity { function: String, expected: usize, got: usize },
}

enum Halt {
    Revert,
    OutOfGas,
}

enum Flow {
    Next,
    Return(Option<U256>),
}

struct Frame {
    locals: HashMap<String, U256>,
    caller: Address,
    value: U256,
    iters: Vec<u32>,
    depth: u32,
}

struct Machine<'a> {
    contract: &'a Contract,
    cfg: &'a VmConfig,
    state: WorldState,
    gas_used: u64,
    gas_limit: u64,
    flags: BTreeSet<Flag>,
    trace: Vec<TraceEvent>,
    steps: Vec<OpKind>,
    touched_accounts: BTreeSet<Address>,
    touched_slots: BTreeSet<Slot>,
    dynamic_zero_stores: u32,
}

/// Number of memory words in the frame of function `f`: one per parameter and
/// one per local declaration anywhere in its body.
pub fn frame_words(f: &Function) -> u64 {
    fn decls(b: &Block) -> u64 {
        b.stmts
            .iter()
            .map(|s| match s {
                Stmt::VarDecl { .. } => 1,
                Stmt::If { then_block, else_block, .. } => decls(then_block) + else_block.as_ref().map_or(0, decls),
                Stmt::While { body, .. } => decls(body),
                _ => 0,
            })
            .sum()
    }
    f.params.len() as u64 + decls(&f.body)
}

/// Runs one transaction. Effects are committed only on success; on failure
/// the post-state equals the pre-state, but gas is still reported.
pub fn execute(
    c: &Contract,
    state: &WorldState,
    env: &ExecutionEnv,
    cfg: &VmConfig,
) -> Result<ExecutionResult, ExecError> {
    let fi = c.function_index(&env.function).ok_or_else(|| ExecError::UnknownFunction(env.function.clone()))?;
    let f = &c.functions[fi];
    if f.params.len() != env.args.len() {
        return Err(ExecError::Arity { function: f.name.clone(), expected: f.params.len(), got: env.args.len() });
    }
    let mut m = Machine {
        contract: c,
        cfg,
        state: state.clone(),
        gas_used: 0,
        gas_limit: env.gas_limit,
        flags: BTreeSet::new(),
        trace: Vec::new(),
        steps: Vec::new(),
        touched_accounts: BTreeSet::new(),
        touched_slots: BTreeSet::new(),
        dynamic_zero_stores: 0,
    };
    m.touched_accounts.insert(env.caller);
    m.touched_accounts.insert(state.contract);
    let outcome = m.call(fi, env.caller, env.value, &env.args, 0);
    let (status, return_value, post_state) = match outcome {
        Ok(v) => (Status::Success, v, std::mem::take(&mut m.state)),
        Err(Halt::Revert) => (Status::RequireFailed, None, state.clone()),
        Err(Halt::OutOfGas) => {
            m.gas_used = env.gas_limit;
            (Status::OutOfGas, None, state.clone())
        }
    };
    Ok(ExecutionResult {
        post_state,
        return_value,
        gas_used: m.gas_used,
        status,
        flags: m.flags,
        trace: m.trace,
        steps: m.steps,
        touched_accounts: m.touched_accounts,
        touched_slots: m.touched_slots,
        dynamic_zero_stores: m.dynamic_zero_stores,
    })
}

impl<'a> Machine<'a> {
    fn charge(&mut self, kind: OpKind) -> Result<(), Halt> {
        let g = self.cfg.costs.instruction_gas(kind);
        if self.gas_used + g > self.gas_limit {
            return Err(Halt::OutOfGas);
        }
        self.gas_used += g;
        if self.cfg.record_steps {
            self.steps.push(kind);
        }
        Ok(())
    }

    fn call(
        &mut self,
        fi: usize,
        caller: Address,
        value: U256,
        args: &[U256],
        depth: u32,
    ) -> Result<Option<U256>, Halt> {
        let c = self.contract;
        let f = &c.functions[fi];
        self.charge(OpKind::Call)?;
        self.charge(OpKind::Memory { words: frame_words(f) })?;
        self.trace.push(TraceEvent::Call { function: f.name.clone(), depth });
        if value > U256::ZERO {
            if !f.payable {
                return Err(Halt::Revert);
            }
            let contract = self.state.contract;
            if !self.state.transfer(caller, contract, value) {
                return Err(Halt::Revert);
            }
        }
        let mut frame = Frame {
            locals: f.params.iter().map(|p| p.name.clone()).zip(args.iter().copied()).collect(),
            caller,
            value,
            iters: Vec::new(),
            depth,
        };
        let body = c.function_body_path(fi);
        match self.block(&f.body, &body, &mut frame)? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(f.returns.as_ref().map(|_| U256::ZERO)),
        }
    }

    fn block(&mut self, b: &Block, path: &NodePath, fr: &mut Frame) -> Result<Flow, Halt> {
        self.charge(OpKind::Block)?;
        for (i, s) in b.stmts.iter().enumerate() {
            let sp = path.child(i);
            self.trace.push(TraceEvent::Stmt { path: sp.clone(), iters: fr.iters.clone(), depth: fr.depth });
            if let Flow::Return(v) = self.stmt(s, &sp, fr)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt, sp: &NodePath, fr: &mut Frame) -> Result<Flow, Halt> {
        match s {
            Stmt::VarDecl { name, init, .. } => {
                let v = match init {
                    Some(e) => self.eval(e, &sp.child(0), fr)?,
                    None => U256::ZERO,
                };
                self.charge(OpKind::LocalStore)?;
                fr.locals.insert(name.clone(), v);
            }
            Stmt::Assign { target, value } => match target {
                LValue::Var(name) => {
                    let v = self.eval(value, &sp.child(0), fr)?;
                    if fr.locals.contains_key(name) {
                        self.charge(OpKind::LocalStore)?;
                        fr.locals.insert(name.clone(), v);
                    } else {
                        self.sstore(Slot::var(name), v, value)?;
                    }
                }
                LValue::Index { name, key } => {
                    let k = self.eval(key, &sp.child(0), fr)?;
                    let v = self.eval(value, &sp.child(1), fr)?;
                    self.sstore(Slot::entry(name, k), v, value)?;
                }
            },
            Stmt::If { cond, then_block, else_block } => {
                let taken = self.eval(cond, &sp.child(0), fr)? != U256::ZERO;
                self.charge(OpKind::Branch)?;
                self.trace.push(TraceEvent::Branch { path: sp.clone(), taken, depth: fr.depth });
                if taken {
                    return self.block(then_block, &sp.child(1), fr);
                } else if let Some(e) = else_block {
                    return self.block(e, &sp.child(2), fr);
                }
            }
            Stmt::While { cond, body } => {
                self.charge(OpKind::LoopEntry)?;
                fr.iters.push(0);
                let mut trips = 0u32;
                loop {
                    *fr.iters.last_mut().expect("loop counter") = trips;
                    let taken = self.eval(cond, &sp.child(0), fr)? != U256::ZERO;
                    self.charge(OpKind::Branch)?;
                    self.trace.push(TraceEvent::Branch { path: sp.clone(), taken, depth: fr.depth });
                    if !taken {
                        break;
                    }
                    if let Flow::Return(v) = self.block(body, &sp.child(1), fr)? {
                        fr.iters.pop();
                        return Ok(Flow::Return(v));
                    }
                    self.charge(OpKind::Jump)?;
                    trips += 1;
                }
                fr.iters.pop();
                self.trace.push(TraceEvent::LoopExit { path: sp.clone(), trips, depth: fr.depth });
            }
            Stmt::Require(cond) => {
                let ok = self.eval(cond, &sp.child(0), fr)? != U256::ZERO;
                self.charge(OpKind::Branch)?;
                self.trace.push(TraceEvent::Branch { path: sp.clone(), taken: ok, depth: fr.depth });
                if !ok {
                    return Err(Halt::Revert);
                }
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e, &sp.child(0), fr)?),
                    None => None,
                };
                self.charge(OpKind::Return)?;
                return Ok(Flow::Return(v));
            }
            Stmt::Expr(e) => {
                let v = self.eval(e, &sp.child(0), fr)?;
                self.charge(OpKind::Pop)?;
                if matches!(e, Expr::Send { .. }) && v == U256::ZERO {
                    self.flags.insert(Flag::UncheckedSendFailed(sp.child(0)));
                }
            }
        }
        Ok(Flow::Next)
    }

    fn sstore(&mut self, slot: Slot, v: U256, written: &Expr) -> Result<(), Halt> {
        let zero = v == U256::ZERO;
        if zero && !is_static_zero(written) {
            self.dynamic_zero_stores += 1;
        }
        self.charge(OpKind::SStore { zero })?;
        self.touched_slots.insert(slot.clone());
        self.state.store(slot, v);
        Ok(())
    }

    fn load(&mut self, slot: Slot) -> U256 {
        let v = self.state.load(&slot);
        self.touched_slots.insert(slot);
        v
    }

    fn eval(&mut self, e: &Expr, path: &NodePath, fr: &mut Frame) -> Result<U256, Halt> {
        Ok(match e {
            Expr::Int(v) => {
                self.charge(OpKind::Literal)?;
                *v
            }
            Expr::Bool(b) => {
                self.charge(OpKind::Literal)?;
                U256::from(*b as u8)
            }
            Expr::Var(name) => {
                if let Some(v) = fr.locals.get(name) {
                    let v = *v;
                    self.charge(OpKind::LocalLoad)?;
                    v
                } else {
                    self.charge(OpKind::StateLoad)?;
                    self.load(Slot::var(name))
                }
            }
            Expr::Index { name, key } => {
                let k = self.eval(key, &path.child(0), fr)?;
                self.charge(OpKind::MappingLoad)?;
                self.load(Slot::entry(name, k))
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, &path.child(0), fr)?;
                let b = self.eval(rhs, &path.child(1), fr)?;
                self.charge(OpKind::of_binop(*op))?;
                let bool_val = |x: bool| U256::from(x as u8);
                match op {
                    BinOp::Add => {
                        let (r, o) = a.overflowing_add(b);
                        self.wrap_flag(o, path);
                        r
                    }
                    BinOp::Sub => {
                        let (r, o) = a.overflowing_sub(b);
                        self.wrap_flag(o, path);
                        r
                    }
                    BinOp::Mul => {
                        let (r, o) = a.overflowing_mul(b);
                        self.wrap_flag(o, path);
                        r
                    }
                    BinOp::Div => a.checked_div(b).unwrap_or(U256::ZERO),
                    BinOp::Lt => bool_val(a < b),
                    BinOp::Le => bool_val(a <= b),
                    BinOp::Gt => bool_val(a > b),
                    BinOp::Ge => bool_val(a >= b),
                    BinOp::Eq => bool_val(a == b),
                    BinOp::Ne => bool_val(a != b),
                    BinOp::And => bool_val(a != U256::ZERO && b != U256::ZERO),
                    BinOp::Or => bool_val(a != U256::ZERO || b != U256::ZERO),
                }
            }
            Expr::Not(inner) => {
                let v = self.eval(inner, &path.child(0), fr)?;
                self.charge(OpKind::Not)?;
                U256::from((v == U256::ZERO) as u8)
            }
            Expr::MsgSender => {
                self.charge(OpKind::MsgSender)?;
                fr.caller.0
            }
            Expr::MsgValue => {
                self.charge(OpKind::MsgValue)?;
                fr.value
            }
            Expr::Balance(a) => {
                let addr = Address(self.eval(a, &path.child(0), fr)?);
                self.charge(OpKind::Balance)?;
                self.touched_accounts.insert(addr);
                self.state.balance(addr)
            }
            Expr::Send { target, amount } => {
                let to = Address(self.eval(target, &path.child(0), fr)?);
                let amt = self.eval(amount, &path.child(1), fr)?;
                self.charge(OpKind::Send)?;
                self.touched_accounts.insert(to);
                let from = self.state.contract;
                let ok = self.state.transfer(from, to, amt);
                self.trace.push(TraceEvent::Send { path: path.clone(), success: ok, depth: fr.depth });
                if ok {
                    self.reenter(to, fr.depth)?;
                }
                U256::from(ok as u8)
            }
        })
    }

    fn wrap_flag(&mut self, wrapped: bool, path: &NodePath) {
        if wrapped {
            self.flags.insert(Flag::OverflowWrapped(path.clone()));
        }
    }

    fn reenter(&mut self, to: Address, depth: u32) -> Result<(), Halt> {
        let Some(adv) = self.cfg.adversary.as_ref() else { return Ok(()) };
        if adv.address != to || depth >= adv.max_depth {
            return Ok(());
        }
        let Some(fi) = self.contract.function_index(&adv.function) else { return Ok(()) };
        if self.contract.functions[fi].params.len() != adv.args.len() {
            return Ok(());
        }
        let snapshot = self.state.clone();
        let args = adv.args.clone();
        match self.call(fi, adv.address, U256::ZERO, &args, depth + 1) {
            Ok(_) => Ok(()),
            Err(Halt::Revert) => {
                self.state = snapshot;
                Ok(())
            }
            Err(Halt::OutOfGas) => Err(Halt::OutOfGas),
        }
    }
}

/// Whether `e` is a literal that always evaluates to zero.
pub fn is_static_zero(e: &Expr) -> bool {
    matches!(e, Expr::Int(v) if *v == U256::ZERO) || matches!(e, Expr::Bool(false))
}
