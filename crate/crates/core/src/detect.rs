//! Static detectors for exception disorder (ED), reentrancy (RE), integer
//! overflow (IO) and transaction-order dependence (TOD).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lang::nav::{all_nodes, NodeRef};
use crate::lang::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VulnKind {
    ED,
    RE,
    IO,
    TOD,
}

impl VulnKind {
    pub const ALL: [VulnKind; 4] = [VulnKind::ED, VulnKind::RE, VulnKind::IO, VulnKind::TOD];

    pub fn all() -> BTreeSet<VulnKind> {
        Self::ALL.into_iter().collect()
    }

    /// Kinds the repair search targets by default.
    pub fn repairable() -> BTreeSet<VulnKind> {
        [VulnKind::ED, VulnKind::RE, VulnKind::IO].into_iter().collect()
    }

    pub fn parse_list(s: &str) -> Result<BTreeSet<VulnKind>, String> {
        let kinds: BTreeSet<VulnKind> =
            s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect::<Result<_, _>>()?;
        if kinds.is_empty() {
            return Err("empty vulnerability kind list".into());
        }
        Ok(kinds)
    }
}

impl fmt::Display for VulnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for VulnKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ED" => Ok(VulnKind::ED),
            "RE" => Ok(VulnKind::RE),
            "IO" => Ok(VulnKind::IO),
            "TOD" => Ok(VulnKind::TOD),
            _ => Err(format!("unknown vulnerability kind `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnEntry {
    pub kind: VulnKind,
    pub location: NodePath,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnReport {
    pub entries: Vec<VulnEntry>,
}

impl VulnReport {
    fn from_entries(mut entries: Vec<VulnEntry>) -> Self {
        entries.sort();
        entries.dedup_by(|a, b| a.kind == b.kind && a.location == b.location);
        VulnReport { entries }
    }

    /// The vulnerability-count objective.
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_of(&self, kind: VulnKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn counts(&self) -> BTreeMap<VulnKind, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.kind).or_insert(0) += 1;
        }
        m
    }

    pub fn locations(&self) -> Vec<NodePath> {
        self.entries.iter().map(|e| e.location.clone()).collect()
    }
}

pub fn detect_all(c: &Contract, targeted: &BTreeSet<VulnKind>) -> VulnReport {
    let mut entries = Vec::new();
    for k in targeted {
        entries.extend(match k {
            VulnKind::ED => detect_ed(c),
            VulnKind::RE => detect_re(c),
            VulnKind::IO => detect_io(c),
            VulnKind::TOD => detect_tod(c),
        });
    }
    VulnReport::from_entries(entries)
}

fn entry(kind: VulnKind, location: NodePath, note: String) -> VulnEntry {
    VulnEntry { kind, location, note }
}

/// Condition-expression path of a statement, if it has one.
fn cond_path(s: &Stmt, sp: &NodePath) -> Option<NodePath> {
    match s {
        Stmt::If { .. } | Stmt::While { .. } | Stmt::Require(_) => Some(sp.child(0)),
        _ => None,
    }
}

// ---------------------------------------------------------------- ED

/// Sends whose boolean result is neither used in a condition nor stored in a
/// local that a later condition tests.
pub fn detect_ed(c: &Contract) -> Vec<VulnEntry> {
    let nodes = all_nodes(c);
    let mut conds: Vec<(NodePath, &Expr)> = Vec::new();
    for (p, n) in &nodes {
        if let NodeRef::Stmt(s) = n {
            if let Some(cp) = cond_path(s, p) {
                let e = match s {
                    Stmt::If { cond, .. } | Stmt::While { cond, .. } | Stmt::Require(cond) => cond,
                    _ => unreachable!(),
                };
                conds.push((cp, e));
            }
        }
    }
    let mut out = Vec::new();
    for (p, n) in &nodes {
        let NodeRef::Expr(Expr::Send { .. }) = n else { continue };
        if conds.iter().any(|(cp, _)| p.starts_with(cp)) {
            continue;
        }
        if let Some(var) = bound_local(c, p) {
            let tested_later = conds.iter().any(|(cp, e)| cp > p && e.names().contains(&var.as_str()));
            if tested_later {
                continue;
            }
        }
        out.push(entry(VulnKind::ED, p.clone(), "send result is not checked".into()));
    }
    out
}

/// If the send at `p` is the whole right-hand side of a declaration or an
/// assignment to a plain variable, that variable's name.
fn bound_local(c: &Contract, p: &NodePath) -> Option<String> {
    let parent = p.parent()?;
    match nav::stmt_at(c, &parent)? {
        Stmt::VarDecl { name, .. } if p.last() == Some(0) => Some(name.clone()),
        Stmt::Assign { target: LValue::Var(name), .. } if p.last() == Some(0) => Some(name.clone()),
        _ => None,
    }
}

// ---------------------------------------------------------------- RE

#[derive(Clone, Default)]
struct ReState {
    /// Pending sends and the state names read before each.
    pending: BTreeMap<NodePath, BTreeSet<String>>,
    reads: BTreeSet<String>,
}

impl ReState {
    fn merge(a: Option<ReState>, b: Option<ReState>) -> Option<ReState> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(mut a), Some(b)) => {
                for (k, v) in b.pending {
                    a.pending.entry(k).or_default().extend(v);
                }
                a.reads.extend(b.reads);
                Some(a)
            }
        }
    }
}

struct ReWalker<'a> {
    state_names: BTreeSet<&'a str>,
    found: BTreeMap<NodePath, String>,
}

impl<'a> ReWalker<'a> {
    fn expr_effects(&self, e: &Expr, path: &NodePath, st: &mut ReState, extra_reads: &BTreeSet<String>) {
        let mut sends = Vec::new();
        collect_sends(e, path, &mut sends);
        for sp in sends {
            let mut r = st.reads.clone();
            r.extend(extra_reads.iter().cloned());
            st.pending.entry(sp).or_default().extend(r);
        }
    }

    fn reads_of(&self, exprs: &[&Expr]) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in exprs {
            for n in e.names() {
                if self.state_names.contains(n) {
                    out.insert(n.to_string());
                }
            }
        }
        out
    }

    fn write(&mut self, name: &str, st: &ReState) {
        if !self.state_names.contains(name) {
            return;
        }
        for (send, reads) in &st.pending {
            if reads.contains(name) {
                self.found
                    .entry(send.clone())
                    .or_insert_with(|| format!("state `{name}` is written after the external call"));
            }
        }
    }

    /// Reads of the whole statement count as happening before its sends.
    fn simple(&mut self, exprs: &[(&Expr, NodePath)], write: Option<&str>, st: &mut ReState) {
        let es: Vec<&Expr> = exprs.iter().map(|(e, _)| *e).collect();
        let reads = self.reads_of(&es);
        for (e, p) in exprs {
            self.expr_effects(e, p, st, &reads);
        }
        st.reads.extend(reads);
        if let Some(w) = write {
            self.write(w, st);
        }
    }

    fn block(&mut self, b: &Block, path: &NodePath, st: Option<ReState>) -> Option<ReState> {
        let mut cur = st;
        for (i, s) in b.stmts.iter().enumerate() {
            let sp = path.child(i);
            let mut state = cur?;
            cur = match s {
                Stmt::VarDecl { init, .. } => {
                    if let Some(e) = init {
                        self.simple(&[(e, sp.child(0))], None, &mut state);
                    }
                    Some(state)
                }
                Stmt::Assign { target, value } => {
                    match target {
                        LValue::Var(n) => self.simple(&[(value, sp.child(0))], Some(n), &mut state),
                        LValue::Index { name, key } => {
                            self.simple(&[(key, sp.child(0)), (value, sp.child(1))], Some(name), &mut state)
                        }
                    }
                    Some(state)
                }
                Stmt::Require(e) | Stmt::Expr(e) => {
                    self.simple(&[(e, sp.child(0))], None, &mut state);
                    Some(state)
                }
                Stmt::Return(e) => {
                    if let Some(e) = e {
                        self.simple(&[(e, sp.child(0))], None, &mut state);
                    }
                    None
                }
                Stmt::If { cond, then_block, else_block } => {
                    self.simple(&[(cond, sp.child(0))], None, &mut state);
                    let t = self.block(then_block, &sp.child(1), Some(state.clone()));
                    let e = match else_block {
                        Some(eb) => self.block(eb, &sp.child(2), Some(state)),
                        None => Some(state),
                    };
                    ReState::merge(t, e)
                }
                Stmt::While { cond, body } => {
                    self.simple(&[(cond, sp.child(0))], None, &mut state);
                    let once = self.block(body, &sp.child(1), Some(state.clone()));
                    let mut again = ReState::merge(Some(state.clone()), once);
                    if let Some(a) = again.as_mut() {
                        self.simple(&[(cond, sp.child(0))], None, a);
                    }
                    let twice = self.block(body, &sp.child(1), again.clone());
                    let mut out = ReState::merge(again, twice);
                    if let Some(o) = out.as_mut() {
                        self.simple(&[(cond, sp.child(0))], None, o);
                    }
                    out
                }
            };
        }
        cur
    }
}

fn collect_sends(e: &Expr, path: &NodePath, out: &mut Vec<NodePath>) {
    for (i, ch) in e.children().into_iter().enumerate() {
        collect_sends(ch, &path.child(i), out);
    }
    if matches!(e, Expr::Send { .. }) {
        out.push(path.clone());
    }
}

/// Sends followed, on some path through the same function, by a write to
/// state that was read before the send.
pub fn detect_re(c: &Contract) -> Vec<VulnEntry> {
    let mut w =
        ReWalker { state_names: c.state_vars.iter().map(|v| v.name.as_str()).collect(), found: BTreeMap::new() };
    for (fi, f) in c.functions.iter().enumerate() {
        w.block(&f.body, &c.function_body_path(fi), Some(ReState::default()));
    }
    w.found.into_iter().map(|(p, note)| entry(VulnKind::RE, p, note)).collect()
}

// ---------------------------------------------------------------- IO

fn conjuncts(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Binary { op: BinOp::And, lhs, rhs } => {
            let mut v = conjuncts(lhs);
            v.extend(conjuncts(rhs));
            v
        }
        _ => vec![e.clone()],
    }
}

fn bin(op: BinOp, a: &Expr, b: &Expr) -> Expr {
    Expr::binary(op, a.clone(), b.clone())
}

fn is_int(e: &Expr, v: u64) -> bool {
    matches!(e, Expr::Int(n) if *n == ethnum::U256::from(v))
}

fn mentions(fact: &Expr, killed: &Killed) -> bool {
    match killed {
        Killed::Var(name) => fact.names().contains(&name.as_str()),
        Killed::Entry(name, key) => contains_index(fact, name, key),
    }
}

fn contains_index(e: &Expr, name: &str, key: &Expr) -> bool {
    if let Expr::Index { name: n, key: k } = e {
        if n == name && **k == *key {
            return true;
        }
    }
    e.children().into_iter().any(|c| contains_index(c, name, key))
}

enum Killed {
    Var(String),
    Entry(String, Expr),
}

/// Guard conditions that rule out wrap-around of `a op b`.
pub fn overflow_guards(op: BinOp, a: &Expr, b: &Expr) -> Vec<Expr> {
    match op {
        BinOp::Add => {
            let mut g = Vec::new();
            for sum in [bin(BinOp::Add, a, b), bin(BinOp::Add, b, a)] {
                for x in [a, b] {
                    g.push(bin(BinOp::Ge, &sum, x));
                    g.push(bin(BinOp::Le, x, &sum));
                    g.push(bin(BinOp::Gt, &sum, x));
                    g.push(bin(BinOp::Lt, x, &sum));
                }
            }
            g
        }
        BinOp::Sub => vec![bin(BinOp::Le, b, a), bin(BinOp::Ge, a, b), bin(BinOp::Lt, b, a), bin(BinOp::Gt, a, b)],
        BinOp::Mul => {
            let prod = bin(BinOp::Mul, a, b);
            let mut g = Vec::new();
            for (x, y) in [(a, b), (b, a)] {
                let zero = bin(BinOp::Eq, x, &Expr::int(0));
                let check = bin(BinOp::Eq, &bin(BinOp::Div, &prod, x), y);
                g.push(bin(BinOp::Or, &zero, &check));
            }
            g
        }
        _ => Vec::new(),
    }
}

/// The canonical guard the repair inserts before `a op b`.
pub fn canonical_guard(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    overflow_guards(op, a, b).into_iter().next()
}

fn guarded(op: BinOp, a: &Expr, b: &Expr, facts: &[Expr]) -> bool {
    let guards = overflow_guards(op, a, b);
    if guards.iter().any(|g| facts.contains(g)) {
        return true;
    }
    // `v + 1` cannot wrap when `v` is known to be below something.
    if op == BinOp::Add {
        for (v, one) in [(a, b), (b, a)] {
            if is_int(one, 1) {
                let bounded = facts.iter().any(|f| match f {
                    Expr::Binary { op: BinOp::Lt, lhs, .. } => **lhs == *v,
                    Expr::Binary { op: BinOp::Gt, rhs, .. } => **rhs == *v,
                    _ => false,
                });
                if bounded {
                    return true;
                }
            }
        }
    }
    false
}

fn trivially_safe(op: BinOp, a: &Expr, b: &Expr) -> bool {
    if a.is_literal() && b.is_literal() {
        return true;
    }
    match op {
        BinOp::Add => is_int(a, 0) || is_int(b, 0),
        BinOp::Sub => is_int(b, 0),
        BinOp::Mul => is_int(a, 0) || is_int(b, 0) || is_int(a, 1) || is_int(b, 1),
        _ => true,
    }
}

struct IoWalker {
    found: Vec<VulnEntry>,
}

impl IoWalker {
    fn check_expr(&mut self, e: &Expr, path: &NodePath, facts: &[Expr]) {
        for (i, ch) in e.children().into_iter().enumerate() {
            self.check_expr(ch, &path.child(i), facts);
        }
        if let Expr::Binary { op, lhs, rhs } = e {
            if op.can_overflow() && !trivially_safe(*op, lhs, rhs) && !guarded(*op, lhs, rhs, facts) {
                self.found.push(entry(
                    VulnKind::IO,
                    path.clone(),
                    format!("unguarded `{}` may wrap around", op.symbol()),
                ));
            }
        }
    }

    fn kill(facts: &mut Vec<Expr>, k: &Killed) {
        facts.retain(|f| !mentions(f, k));
    }

    fn killed_in(b: &Block, out: &mut Vec<Killed>) {
        for s in &b.stmts {
            match s {
                Stmt::VarDecl { name, .. } => out.push(Killed::Var(name.clone())),
                Stmt::Assign { target: LValue::Var(n), .. } => out.push(Killed::Var(n.clone())),
                Stmt::Assign { target: LValue::Index { name, key }, .. } => {
                    out.push(Killed::Entry(name.clone(), key.clone()))
                }
                Stmt::If { then_block, else_block, .. } => {
                    Self::killed_in(then_block, out);
                    if let Some(e) = else_block {
                        Self::killed_in(e, out);
                    }
                }
                Stmt::While { body, .. } => Self::killed_in(body, out),
                _ => {}
            }
        }
    }

    /// Returns the facts holding at the end of the block, `None` if every
    /// path through it returns or reverts.
    fn block(&mut self, b: &Block, path: &NodePath, facts: Vec<Expr>) -> Option<Vec<Expr>> {
        let mut facts = facts;
        for (i, s) in b.stmts.iter().enumerate() {
            let sp = path.child(i);
            match s {
                Stmt::VarDecl { name, init, .. } => {
                    if let Some(e) = init {
                        self.check_expr(e, &sp.child(0), &facts);
                    }
                    Self::kill(&mut facts, &Killed::Var(name.clone()));
                }
                Stmt::Assign { target, value } => match target {
                    LValue::Var(n) => {
                        self.check_expr(value, &sp.child(0), &facts);
                        Self::kill(&mut facts, &Killed::Var(n.clone()));
                    }
                    LValue::Index { name, key } => {
                        self.check_expr(key, &sp.child(0), &facts);
                        self.check_expr(value, &sp.child(1), &facts);
                        Self::kill(&mut facts, &Killed::Entry(name.clone(), key.clone()));
                    }
                },
                Stmt::Require(cond) => {
                    // Arithmetic inside a require is the guard itself.
                    for c in conjuncts(cond) {
                        if !facts.contains(&c) {
                            facts.push(c);
                        }
                    }
                }
                Stmt::Expr(e) => self.check_expr(e, &sp.child(0), &facts),
                Stmt::Return(e) => {
                    if let Some(e) = e {
                        self.check_expr(e, &sp.child(0), &facts);
                    }
                    return None;
                }
                Stmt::If { cond, then_block, else_block } => {
                    self.check_expr(cond, &sp.child(0), &facts);
                    let mut tf = facts.clone();
                    for c in conjuncts(cond) {
                        if !tf.contains(&c) {
                            tf.push(c);
                        }
                    }
                    let t = self.block(then_block, &sp.child(1), tf);
                    let e = match else_block {
                        Some(eb) => self.block(eb, &sp.child(2), facts.clone()),
                        None => Some(facts.clone()),
                    };
                    facts = match (t, e) {
                        (None, None) => return None,
                        (Some(x), None) | (None, Some(x)) => x,
                        (Some(x), Some(y)) => x.into_iter().filter(|f| y.contains(f)).collect(),
                    };
                }
                Stmt::While { cond, body } => {
                    let mut killed = Vec::new();
                    Self::killed_in(body, &mut killed);
                    let mut pre = facts.clone();
                    for k in &killed {
                        Self::kill(&mut pre, k);
                    }
                    self.check_expr(cond, &sp.child(0), &pre);
                    let mut bf = pre.clone();
                    for c in conjuncts(cond) {
                        if !bf.contains(&c) {
                            bf.push(c);
                        }
                    }
                    self.block(body, &sp.child(1), bf);
                    facts = pre;
                }
            }
        }
        Some(facts)
    }
}

/// Unguarded `+`, `-` and `*` outside require conditions.
pub fn detect_io(c: &Contract) -> Vec<VulnEntry> {
    let mut w = IoWalker { found: Vec::new() };
    for (fi, f) in c.functions.iter().enumerate() {
        w.block(&f.body, &c.function_body_path(fi), Vec::new());
    }
    w.found
}

// ---------------------------------------------------------------- TOD

fn assigned_names_in(b: &Block, path: &NodePath, out: &mut Vec<(String, NodePath, Option<Expr>)>) {
    for (i, s) in b.stmts.iter().enumerate() {
        let sp = path.child(i);
        match s {
            Stmt::VarDecl { name, init, .. } => out.push((name.clone(), sp, init.clone())),
            Stmt::Assign { target: LValue::Var(n), value } => out.push((n.clone(), sp, Some(value.clone()))),
            Stmt::If { then_block, else_block, .. } => {
                assigned_names_in(then_block, &sp.child(1), out);
                if let Some(e) = else_block {
                    assigned_names_in(e, &sp.child(2), out);
                }
            }
            Stmt::While { body, .. } => assigned_names_in(body, &sp.child(1), out),
            _ => {}
        }
    }
}

/// Scalar state variables written by one function and used to compute a send
/// target or amount in another.
pub fn detect_tod(c: &Contract) -> Vec<VulnEntry> {
    let scalars: BTreeSet<&str> = c.state_vars.iter().filter(|v| !v.ty.is_mapping()).map(|v| v.name.as_str()).collect();
    let mut writes: BTreeMap<&str, Vec<(usize, NodePath)>> = BTreeMap::new();
    let mut send_reads: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    let nodes = all_nodes(c);
    for (fi, f) in c.functions.iter().enumerate() {
        let mut assigns = Vec::new();
        assigned_names_in(&f.body, &c.function_body_path(fi), &mut assigns);
        for (name, sp, _) in &assigns {
            if let Some(v) = scalars.get(name.as_str()) {
                writes.entry(v).or_default().push((fi, sp.clone()));
            }
        }
        let body = c.function_body_path(fi);
        for (p, n) in &nodes {
            let NodeRef::Expr(Expr::Send { target, amount }) = n else { continue };
            if !p.starts_with(&body) {
                continue;
            }
            let mut used: BTreeSet<&str> = BTreeSet::new();
            for e in [&**target, &**amount] {
                for name in e.names() {
                    if let Some(v) = scalars.get(name) {
                        used.insert(v);
                    }
                    // One level through a local initialized or assigned from state.
                    for (local, _, init) in &assigns {
                        if local == name {
                            if let Some(init) = init {
                                for n2 in init.names() {
                                    if let Some(v) = scalars.get(n2) {
                                        used.insert(v);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            for v in used {
                send_reads.entry(v).or_default().insert(fi);
            }
        }
    }
    let mut out = Vec::new();
    for (v, readers) in &send_reads {
        let Some(ws) = writes.get(v) else { continue };
        let conflict = ws.iter().any(|(wf, _)| readers.iter().any(|rf| rf != wf));
        if conflict {
            let first = ws.iter().map(|(_, p)| p).min().expect("nonempty").clone();
            out.push(entry(
                VulnKind::TOD,
                first,
                format!("send depends on `{v}`, which another transaction may change first"),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(src: &str, k: VulnKind) -> usize {
        let c = parse(src).unwrap();
        assert!(typecheck(&c).is_ok(), "{:?}", typecheck(&c));
        detect_all(&c, &[k].into_iter().collect()).count()
    }

    #[test]
    fn ed_cases() {
        assert_eq!(count("contract A { function f() { msg.sender.send(1); } }", VulnKind::ED), 1);
        assert_eq!(count("contract A { function f() { require(msg.sender.send(1)); } }", VulnKind::ED), 0);
        assert_eq!(
            count(
                "contract A { function f() { bool ok = msg.sender.send(1); if (!ok) { require(false); } } }",
                VulnKind::ED
            ),
            0
        );
        assert_eq!(count("contract A { function f() { bool ok = msg.sender.send(1); } }", VulnKind::ED), 1);
    }

    #[test]
    fn re_cases() {
        let bad = "contract B { mapping(address => uint) b;
            function w() { uint a = b[msg.sender]; msg.sender.send(a); b[msg.sender] = 0; } }";
        let good = "contract B { mapping(address => uint) b;
            function w() { uint a = b[msg.sender]; b[msg.sender] = 0; msg.sender.send(a); } }";
        assert_eq!(count(bad, VulnKind::RE), 1);
        assert_eq!(count(good, VulnKind::RE), 0);
        let in_branch = "contract B { mapping(address => uint) b;
            function w() { if (msg.sender.send(b[msg.sender])) { b[msg.sender] = 0; } } }";
        assert_eq!(count(in_branch, VulnKind::RE), 1);
        let returns_first = "contract B { mapping(address => uint) b;
            function w() { require(msg.sender.send(b[msg.sender])); return; } }";
        assert_eq!(count(returns_first, VulnKind::RE), 0);
    }

    #[test]
    fn io_cases() {
        assert_eq!(count("contract C { uint t; function f(uint a) { t = t + a; } }", VulnKind::IO), 1);
        assert_eq!(
            count("contract C { uint t; function f(uint a) { require(t + a >= t); t = t + a; } }", VulnKind::IO),
            0
        );
        assert_eq!(count("contract C { uint t; function f(uint a) { require(a <= t); t = t - a; } }", VulnKind::IO), 0);
        assert_eq!(
            count("contract C { uint t; function f(uint a) { require(t + a >= t); t = 1; t = t + a; } }", VulnKind::IO),
            1
        );
        assert_eq!(count("contract C { uint t; function f(uint a) { if (a <= t) { t = t - a; } } }", VulnKind::IO), 0);
        assert_eq!(
            count("contract C { uint t; function f() { uint i = 0; while (i < 10) { i = i + 1; } } }", VulnKind::IO),
            0
        );
        assert_eq!(
            count(
                "contract C { uint t; function f(uint a) { require(a == 0 || a * t / a == t); t = a * t; } }",
                VulnKind::IO
            ),
            0
        );
    }

    #[test]
    fn tod_cases() {
        let src = "contract D { uint price; address owner;
            function setPrice(uint p) { require(msg.sender == owner); price = p; }
            function buy() payable { require(msg.value >= price); require(owner.send(price)); } }";
        assert_eq!(count(src, VulnKind::TOD), 1);
        assert_eq!(count("contract D { uint p; function f(uint a) { p = a; } }", VulnKind::TOD), 0);
    }

    #[test]
    fn restriction_is_monotone() {
        let src = "contract M { uint t; function f(uint a) { t = t + a; msg.sender.send(a); } }";
        let c = parse(src).unwrap();
        let ed = detect_all(&c, &[VulnKind::ED].into_iter().collect());
        let all = detect_all(&c, &VulnKind::all());
        assert_eq!(ed.count(), 1);
        assert!(ed.entries.iter().all(|e| all.entries.contains(e)));
        assert_eq!(all.count_of(VulnKind::IO), 1);
    }
}
