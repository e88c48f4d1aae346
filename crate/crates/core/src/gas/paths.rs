use std::collections::{BTreeMap, BTreeSet};

use ethnum::U256;

use super::formula::{GasFormula, Rational};
use super::GasError;
use crate::lang::nav::{all_nodes, NodeRef};
use crate::lang::*;
use crate::vm::{frame_words, CostTable, OpKind, TraceEvent};

pub const DEFAULT_PATH_CAP: usize = 512;

/// Outcome recorded for a straight-line segment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plain,
    Branch(bool),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LoopExit {
    /// The condition eventually fails and execution continues after the loop.
    Normal,
    /// The final iteration leaves the function through this body path.
    Terminal(Vec<Segment>),
    /// The condition can never fail.
    Diverges,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Segment {
    Step {
        path: NodePath,
        label: String,
        outcome: Outcome,
        steps: Vec<OpKind>,
    },
    Loop {
        path: NodePath,
        label: String,
        /// Trip-count variable; absent when no iteration can complete.
        var: Option<String>,
        /// Condition evaluation plus its branch, paid once per test.
        cond: Vec<OpKind>,
        /// Body path repeated on every completed iteration.
        body: Vec<Segment>,
        exit: LoopExit,
        /// Nothing in the body can change the condition.
        unbounded: bool,
    },
}

impl Segment {
    pub fn path(&self) -> &NodePath {
        match self {
            Segment::Step { path, .. } | Segment::Loop { path, .. } => path,
        }
    }

    /// Statement text of the segment (without the decision taken).
    pub fn label(&self) -> &str {
        match self {
            Segment::Step { label, .. } | Segment::Loop { label, .. } => label,
        }
    }

    /// Normalized label sequence (statement text and decisions), independent
    /// of node positions.
    pub fn labels(&self, out: &mut Vec<String>) {
        self.labels_where(&|_| true, out)
    }

    /// As [`Segment::labels`], leaving out statements rejected by `keep`.
    pub fn labels_where(&self, keep: &dyn Fn(&str) -> bool, out: &mut Vec<String>) {
        let kept = keep(self.label());
        match self {
            Segment::Step { label, outcome: Outcome::Plain, .. } if kept => out.push(label.clone()),
            Segment::Step { label, outcome: Outcome::Branch(b), .. } if kept => out.push(format!("{label} => {b}")),
            Segment::Step { .. } => {}
            Segment::Loop { label, var, body, exit, .. } => {
                if kept {
                    out.push(format!("{label} [{}]", var.as_deref().unwrap_or("-")));
                }
                out.push("{".into());
                body.iter().for_each(|s| s.labels_where(keep, out));
                out.push("}".into());
                match exit {
                    LoopExit::Normal => out.push("exit".into()),
                    LoopExit::Diverges => out.push("diverges".into()),
                    LoopExit::Terminal(t) => {
                        out.push("last {".into());
                        t.iter().for_each(|s| s.labels_where(keep, out));
                        out.push("}".into());
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathEnd {
    Fallthrough,
    Return,
    Revert,
    Diverges,
}

/// One execution path of a function, with loops summarized symbolically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub function: String,
    pub segments: Vec<Segment>,
    pub end: PathEnd,
}

impl Path {
    pub fn labels(&self) -> Vec<String> {
        self.labels_where(&|_| true)
    }

    pub fn labels_where(&self, keep: &dyn Fn(&str) -> bool) -> Vec<String> {
        let mut out = vec![format!("function {}", self.function)];
        self.segments.iter().for_each(|s| s.labels_where(keep, &mut out));
        out
    }

    /// Trip variables in order of appearance.
    pub fn vars(&self) -> Vec<String> {
        fn walk(segs: &[Segment], out: &mut Vec<String>) {
            for s in segs {
                if let Segment::Loop { var, body, exit, .. } = s {
                    out.extend(var.iter().cloned());
                    walk(body, out);
                    if let LoopExit::Terminal(t) = exit {
                        walk(t, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.segments, &mut out);
        out.dedup();
        out
    }

    /// Trip variables whose loop has no way to stop iterating.
    pub fn unbounded_vars(&self) -> Vec<String> {
        fn walk(segs: &[Segment], out: &mut Vec<String>) {
            for s in segs {
                if let Segment::Loop { var, body, exit, unbounded, .. } = s {
                    if *unbounded {
                        out.extend(var.iter().cloned());
                    }
                    walk(body, out);
                    if let LoopExit::Terminal(t) = exit {
                        walk(t, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.segments, &mut out);
        out
    }
}

/// Trip variable names `n1, n2, ...` for every loop, in document order.
pub fn loop_vars(c: &Contract) -> BTreeMap<NodePath, String> {
    all_nodes(c)
        .into_iter()
        .filter(|(_, n)| matches!(n, NodeRef::Stmt(Stmt::While { .. })))
        .enumerate()
        .map(|(i, (p, _))| (p, format!("n{}", i + 1)))
        .collect()
}

pub fn enumerate_paths(c: &Contract) -> Result<Vec<Path>, GasError> {
    enumerate_paths_with_cap(c, DEFAULT_PATH_CAP)
}

/// All paths of all functions, functions in declaration order.
pub fn enumerate_paths_with_cap(c: &Contract, cap: usize) -> Result<Vec<Path>, GasError> {
    let vars = loop_vars(c);
    let mut out = Vec::new();
    for (fi, f) in c.functions.iter().enumerate() {
        let mut locals: BTreeSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
        collect_decls(&f.body, &mut locals);
        let mut en = Enum { vars: &vars, locals, cap, function: &f.name };
        let body = c.function_body_path(fi);
        let prologue = Segment::Step {
            path: body.clone(),
            label: format!("call {} [{} words]", f.name, frame_words(f)),
            outcome: Outcome::Plain,
            steps: vec![OpKind::Call, OpKind::Memory { words: frame_words(f) }, OpKind::Block],
        };
        for alt in en.block(&f.body, &body)? {
            let mut segments = vec![prologue.clone()];
            segments.extend(alt.segs);
            let end = match alt.end {
                End::Continue => PathEnd::Fallthrough,
                End::Return => PathEnd::Return,
                End::Revert => PathEnd::Revert,
                End::Diverge => PathEnd::Diverges,
            };
            out.push(Path { function: f.name.clone(), segments, end });
            if out.len() > cap {
                return Err(GasError::PathExplosion { function: f.name.clone(), cap });
            }
        }
    }
    Ok(out)
}

fn collect_decls(b: &Block, out: &mut BTreeSet<String>) {
    for s in &b.stmts {
        match s {
            Stmt::VarDecl { name, .. } => {
                out.insert(name.clone());
            }
            Stmt::If { then_block, else_block, .. } => {
                collect_decls(then_block, out);
                if let Some(e) = else_block {
                    collect_decls(e, out);
                }
            }
            Stmt::While { body, .. } => collect_decls(body, out),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    Continue,
    Return,
    Revert,
    Diverge,
}

#[derive(Clone)]
struct Alt {
    segs: Vec<Segment>,
    end: End,
}

struct Enum<'a> {
    vars: &'a BTreeMap<NodePath, String>,
    locals: BTreeSet<String>,
    cap: usize,
    function: &'a str,
}

impl Enum<'_> {
    fn explode(&self) -> GasError {
        GasError::PathExplosion { function: self.function.to_string(), cap: self.cap }
    }

    fn block(&mut self, b: &Block, path: &NodePath) -> Result<Vec<Alt>, GasError> {
        let mut cur = vec![Alt { segs: Vec::new(), end: End::Continue }];
        for (i, s) in b.stmts.iter().enumerate() {
            let alts = self.stmt(s, &path.child(i))?;
            let mut next = Vec::new();
            for p in cur {
                if p.end != End::Continue {
                    next.push(p);
                    continue;
                }
                for a in &alts {
                    let mut segs = p.segs.clone();
                    segs.extend(a.segs.iter().cloned());
                    next.push(Alt { segs, end: a.end });
                }
                if next.len() > self.cap {
                    return Err(self.explode());
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    fn expr(&self, e: &Expr, out: &mut Vec<OpKind>) {
        match e {
            Expr::Int(_) | Expr::Bool(_) => out.push(OpKind::Literal),
            Expr::Var(n) => out.push(if self.locals.contains(n) { OpKind::LocalLoad } else { OpKind::StateLoad }),
            Expr::Index { key, .. } => {
                self.expr(key, out);
                out.push(OpKind::MappingLoad);
            }
            Expr::Binary { op, lhs, rhs } => {
                self.expr(lhs, out);
                self.expr(rhs, out);
                out.push(OpKind::of_binop(*op));
            }
            Expr::Not(x) => {
                self.expr(x, out);
                out.push(OpKind::Not);
            }
            Expr::MsgSender => out.push(OpKind::MsgSender),
            Expr::MsgValue => out.push(OpKind::MsgValue),
            Expr::Balance(x) => {
                self.expr(x, out);
                out.push(OpKind::Balance);
            }
            Expr::Send { target, amount } => {
                self.expr(target, out);
                self.expr(amount, out);
                out.push(OpKind::Send);
            }
        }
    }

    fn steps(&self, parts: &[&Expr], tail: &[OpKind]) -> Vec<OpKind> {
        let mut v = Vec::new();
        for e in parts {
            self.expr(e, &mut v);
        }
        v.extend_from_slice(tail);
        v
    }

    fn stmt(&mut self, s: &Stmt, path: &NodePath) -> Result<Vec<Alt>, GasError> {
        let label = stmt_to_string(s);
        let step = |steps: Vec<OpKind>, outcome: Outcome| Segment::Step {
            path: path.clone(),
            label: label.clone(),
            outcome,
            steps,
        };
        let one = |seg: Segment, end: End| Ok(vec![Alt { segs: vec![seg], end }]);
        match s {
            Stmt::VarDecl { init, .. } => {
                let parts: Vec<&Expr> = init.iter().collect();
                one(step(self.steps(&parts, &[OpKind::LocalStore]), Outcome::Plain), End::Continue)
            }
            Stmt::Assign { target: LValue::Var(n), value } => {
                let store = if self.locals.contains(n) {
                    OpKind::LocalStore
                } else {
                    OpKind::SStore { zero: crate::vm::is_static_zero(value) }
                };
                one(step(self.steps(&[value], &[store]), Outcome::Plain), End::Continue)
            }
            Stmt::Assign { target: LValue::Index { key, .. }, value } => {
                let store = OpKind::SStore { zero: crate::vm::is_static_zero(value) };
                one(step(self.steps(&[key, value], &[store]), Outcome::Plain), End::Continue)
            }
            Stmt::Expr(e) => one(step(self.steps(&[e], &[OpKind::Pop]), Outcome::Plain), End::Continue),
            Stmt::Return(e) => {
                let parts: Vec<&Expr> = e.iter().collect();
                one(step(self.steps(&parts, &[OpKind::Return]), Outcome::Plain), End::Return)
            }
            Stmt::Require(cond) => {
                let steps = self.steps(&[cond], &[OpKind::Branch]);
                let mut out = Vec::new();
                for ok in feasible(cond) {
                    let end = if ok { End::Continue } else { End::Revert };
                    out.push(Alt { segs: vec![step(steps.clone(), Outcome::Branch(ok))], end });
                }
                Ok(out)
            }
            Stmt::If { cond, then_block, else_block } => {
                let mut out = Vec::new();
                for taken in feasible(cond) {
                    let block = if taken { Some((then_block, 1)) } else { else_block.as_ref().map(|b| (b, 2)) };
                    let mut steps = self.steps(&[cond], &[OpKind::Branch]);
                    match block {
                        None => out.push(Alt { segs: vec![step(steps, Outcome::Branch(taken))], end: End::Continue }),
                        Some((b, idx)) => {
                            steps.push(OpKind::Block);
                            let head = step(steps, Outcome::Branch(taken));
                            for a in self.block(b, &path.child(idx))? {
                                let mut segs = vec![head.clone()];
                                segs.extend(a.segs);
                                out.push(Alt { segs, end: a.end });
                            }
                        }
                    }
                }
                if out.len() > self.cap {
                    return Err(self.explode());
                }
                Ok(out)
            }
            Stmt::While { cond, body } => self.while_loop(cond, body, path, label),
        }
    }

    fn while_loop(&mut self, cond: &Expr, body: &Block, path: &NodePath, label: String) -> Result<Vec<Alt>, GasError> {
        let cond_steps = self.steps(&[cond], &[OpKind::Branch]);
        let var = self.vars.get(path).cloned();
        let constant = const_truth(cond);
        let mk = |var: Option<String>, body: Vec<Segment>, exit: LoopExit, unbounded: bool| Segment::Loop {
            path: path.clone(),
            label: label.clone(),
            var,
            cond: cond_steps.clone(),
            body,
            exit,
            unbounded,
        };
        if constant == Some(false) {
            return Ok(vec![Alt { segs: vec![mk(None, vec![], LoopExit::Normal, false)], end: End::Continue }]);
        }
        let alts = self.block(body, &path.child(1))?;
        let unbounded = constant == Some(true) || !body_affects(cond, body);
        let (cont, term): (Vec<Alt>, Vec<Alt>) = alts.into_iter().partition(|a| a.end == End::Continue);
        let mut out = Vec::new();
        for c in &cont {
            if constant == Some(true) {
                out.push(Alt {
                    segs: vec![mk(var.clone(), c.segs.clone(), LoopExit::Diverges, true)],
                    end: End::Diverge,
                });
            } else {
                out.push(Alt {
                    segs: vec![mk(var.clone(), c.segs.clone(), LoopExit::Normal, unbounded)],
                    end: End::Continue,
                });
            }
        }
        if cont.is_empty() && constant != Some(true) {
            out.push(Alt { segs: vec![mk(None, vec![], LoopExit::Normal, false)], end: End::Continue });
        }
        for t in &term {
            if cont.is_empty() {
                out.push(Alt { segs: vec![mk(None, vec![], LoopExit::Terminal(t.segs.clone()), false)], end: t.end });
            }
            for c in &cont {
                let seg = mk(var.clone(), c.segs.clone(), LoopExit::Terminal(t.segs.clone()), unbounded);
                out.push(Alt { segs: vec![seg], end: t.end });
            }
        }
        if out.len() > self.cap {
            return Err(self.explode());
        }
        Ok(out)
    }
}

/// Branch outcomes that are not ruled out by a constant condition.
fn feasible(cond: &Expr) -> Vec<bool> {
    match const_truth(cond) {
        Some(b) => vec![b],
        None => vec![true, false],
    }
}

/// Truth value of a condition built only from literals.
pub fn const_truth(e: &Expr) -> Option<bool> {
    const_eval(e).map(|v| v != U256::ZERO)
}

fn const_eval(e: &Expr) -> Option<U256> {
    let b = |x: bool| U256::from(x as u8);
    Some(match e {
        Expr::Int(v) => *v,
        Expr::Bool(x) => b(*x),
        Expr::Not(x) => b(const_eval(x)? == U256::ZERO),
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (const_eval(lhs)?, const_eval(rhs)?);
            match op {
                BinOp::Add => l.wrapping_add(r),
                BinOp::Sub => l.wrapping_sub(r),
                BinOp::Mul => l.wrapping_mul(r),
                BinOp::Div => l.checked_div(r).unwrap_or(U256::ZERO),
                BinOp::Lt => b(l < r),
                BinOp::Le => b(l <= r),
                BinOp::Gt => b(l > r),
                BinOp::Ge => b(l >= r),
                BinOp::Eq => b(l == r),
                BinOp::Ne => b(l != r),
                BinOp::And => b(l != U256::ZERO && r != U256::ZERO),
                BinOp::Or => b(l != U256::ZERO || r != U256::ZERO),
            }
        }
        _ => return None,
    })
}

/// Whether executing `body` can change the value of `cond`.
fn body_affects(cond: &Expr, body: &Block) -> bool {
    let read: BTreeSet<&str> = cond.names().into_iter().collect();
    let reads_balance = expr_any(cond, &|e| matches!(e, Expr::Balance(_)));
    fn walk(b: &Block, read: &BTreeSet<&str>, bal: bool) -> bool {
        b.stmts.iter().any(|s| {
            let sends = |e: &Expr| bal && e.contains_send();
            match s {
                Stmt::VarDecl { name, init, .. } => read.contains(name.as_str()) || init.as_ref().is_some_and(sends),
                Stmt::Assign { target, value } => read.contains(target.name()) || sends(value),
                Stmt::If { cond, then_block, else_block } => {
                    sends(cond)
                        || walk(then_block, read, bal)
                        || else_block.as_ref().is_some_and(|e| walk(e, read, bal))
                }
                Stmt::While { cond, body } => sends(cond) || walk(body, read, bal),
                Stmt::Require(e) | Stmt::Expr(e) => sends(e),
                Stmt::Return(_) => false,
            }
        })
    }
    walk(body, &read, reads_balance)
}

fn expr_any(e: &Expr, f: &dyn Fn(&Expr) -> bool) -> bool {
    f(e) || e.children().iter().any(|c| expr_any(c, f))
}

fn steps_gas(steps: &[OpKind], tbl: &CostTable) -> GasFormula {
    GasFormula::constant(Rational::from_integer(steps.iter().map(|k| tbl.instruction_gas(*k) as i128).sum::<i128>()))
}

fn segments_formula(segs: &[Segment], tbl: &CostTable) -> GasFormula {
    segs.iter().map(|s| segment_formula(s, tbl)).sum()
}

fn segment_formula(s: &Segment, tbl: &CostTable) -> GasFormula {
    match s {
        Segment::Step { steps, .. } => steps_gas(steps, tbl),
        Segment::Loop { var, cond, body, exit, .. } => {
            let entry = steps_gas(&[OpKind::LoopEntry], tbl);
            let test = steps_gas(cond, tbl);
            let block = steps_gas(&[OpKind::Block], tbl);
            let last = match exit {
                LoopExit::Terminal(t) => &block + &segments_formula(t, tbl),
                LoopExit::Normal | LoopExit::Diverges => GasFormula::zero(),
            };
            match var {
                None => entry + test + last,
                Some(v) => {
                    let n = GasFormula::var(v);
                    let iter = &(&block + &segments_formula(body, tbl)) + &steps_gas(&[OpKind::Jump], tbl);
                    let tests = &test * &(&n + &GasFormula::constant(1));
                    entry + tests + &iter * &n + last
                }
            }
        }
    }
}

/// Symbolic gas of one path: the sum of its step costs, loop bodies scaled
/// by their trip variables.
pub fn path_gas_formula(p: &Path, tbl: &CostTable) -> GasFormula {
    segments_formula(&p.segments, tbl)
}

/// Finds the path a depth-0 execution trace followed, and the trip count of
/// each loop variable on it.
pub fn match_trace(paths: &[Path], function: &str, trace: &[TraceEvent]) -> Option<(usize, BTreeMap<String, i128>)> {
    let branches: Vec<(&NodePath, bool)> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Branch { path, taken, depth: 0 } => Some((path, *taken)),
            _ => None,
        })
        .collect();
    for (i, p) in paths.iter().enumerate() {
        if p.function != function {
            continue;
        }
        let mut pos = 0;
        let mut trips = BTreeMap::new();
        if match_segs(&p.segments, &branches, &mut pos, &mut trips) && pos == branches.len() {
            return Some((i, trips));
        }
    }
    None
}

fn match_segs(segs: &[Segment], ev: &[(&NodePath, bool)], pos: &mut usize, trips: &mut BTreeMap<String, i128>) -> bool {
    for s in segs {
        match s {
            Segment::Step { outcome: Outcome::Plain, .. } => {}
            Segment::Step { path, outcome: Outcome::Branch(b), .. } => match ev.get(*pos) {
                Some((p, t)) if *p == path && t == b => *pos += 1,
                _ => return false,
            },
            Segment::Loop { path, var, body, exit, .. } => {
                let mut n = 0i128;
                loop {
                    let Some((p, taken)) = ev.get(*pos) else {
                        // Trace ends inside the loop: only a diverging loop fits.
                        if *exit == LoopExit::Diverges {
                            break;
                        }
                        return false;
                    };
                    if *p != path {
                        return false;
                    }
                    *pos += 1;
                    if !taken {
                        if *exit != LoopExit::Normal {
                            return false;
                        }
                        break;
                    }
                    let save = (*pos, trips.clone());
                    if var.is_some() && match_segs(body, ev, pos, trips) {
                        n += 1;
                        continue;
                    }
                    (*pos, *trips) = save;
                    if let LoopExit::Terminal(t) = exit {
                        if match_segs(t, ev, pos, trips) {
                            break;
                        }
                    }
                    return false;
                }
                if let Some(v) = var {
                    trips.insert(v.clone(), n);
                } else if n > 0 {
                    return false;
                }
            }
        }
    }
    true
}
