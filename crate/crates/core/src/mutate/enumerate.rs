use std::collections::{BTreeMap, BTreeSet};

use super::{EditOp, OpTag, Position, Replacement};
use crate::detect::canonical_guard;
use crate::lang::nav::{self, all_nodes, NodeRef};
use crate::lang::scope::{walk_contract, Scope, Visitor};
use crate::lang::*;

/// A candidate edit with its fault-localization tier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub tier: u8,
    pub edit: EditOp,
}

#[derive(Clone, Debug, Default)]
struct Snapshot {
    values: Vec<(String, Type)>,
    mappings: Vec<(String, Type, Type)>,
}

impl Snapshot {
    fn of(scope: &Scope) -> Self {
        Snapshot {
            values: scope.values().into_iter().map(|(n, t, _)| (n.to_string(), t.clone())).collect(),
            mappings: scope.mappings().into_iter().map(|(n, k, v)| (n.to_string(), k.clone(), v.clone())).collect(),
        }
    }

    fn knows(&self, name: &str) -> bool {
        self.values.iter().any(|(n, _)| n == name) || self.mappings.iter().any(|(n, _, _)| n == name)
    }
}

#[derive(Default)]
struct Collector {
    stmts: Vec<(NodePath, Snapshot)>,
    blocks: Vec<(NodePath, Snapshot)>,
    exprs: Vec<(NodePath, Expr, Option<Type>, Snapshot)>,
}

impl Visitor for Collector {
    fn block(&mut self, path: &NodePath, _b: &Block, scope: &Scope) {
        self.blocks.push((path.clone(), Snapshot::of(scope)));
    }

    fn stmt(&mut self, path: &NodePath, _s: &Stmt, scope: &Scope) {
        self.stmts.push((path.clone(), Snapshot::of(scope)));
    }

    fn expr(&mut self, path: &NodePath, e: &Expr, scope: &Scope) {
        let ty = infer(e, path, scope).ok();
        self.exprs.push((path.clone(), e.clone(), ty, Snapshot::of(scope)));
    }
}

/// Every edit of operator `op` applicable to `c`, in canonical order
/// (tier, then document order). Ids carry `generation`.
pub fn enumerate_edits(c: &Contract, op: OpTag, generation: u32, hints: &[NodePath]) -> Vec<Candidate> {
    let sites = mutable_sites(c, hints, generation);
    let stmt_tier: BTreeMap<NodePath, u8> = sites.statements.iter().map(|s| (s.id.path.clone(), s.tier)).collect();
    let block_tier: BTreeMap<NodePath, u8> = sites.blocks.iter().map(|s| (s.id.path.clone(), s.tier)).collect();
    let expr_tier: BTreeMap<NodePath, u8> = sites.expressions.iter().map(|s| (s.id.path.clone(), s.tier)).collect();
    let mut col = Collector::default();
    walk_contract(c, &mut col);
    let id = |p: &NodePath| NodeId::new(p.clone(), generation);
    let vocab = Vocab::of(c);

    let mut out: Vec<Candidate> = Vec::new();
    match op {
        OpTag::M => {
            for site in &sites.statements {
                let src = &site.id.path;
                let f = nav::function_of(c, src);
                let anchors = col
                    .stmts
                    .iter()
                    .map(|(p, _)| (p, true))
                    .chain(col.blocks.iter().map(|(p, _)| (p, false)))
                    .filter(|(p, _)| nav::function_of(c, p) == f && !p.starts_with(src));
                let mut anchors: Vec<(&NodePath, bool)> = anchors.collect();
                anchors.sort();
                for (a, _) in anchors {
                    for pos in [Position::Before, Position::After] {
                        out.push(Candidate {
                            tier: site.tier,
                            edit: EditOp::Move { src: id(src), anchor: id(a), position: pos },
                        });
                    }
                }
            }
        }
        OpTag::R => {
            for (path, e, ty, snap) in &col.exprs {
                let Some(ty) = ty else { continue };
                let tier = expr_tier.get(path).copied().unwrap_or(2);
                for alt in replacements(e, ty, snap, &vocab) {
                    out.push(Candidate {
                        tier,
                        edit: EditOp::Replace { site: id(path), with: Replacement::Expr(alt) },
                    });
                }
            }
            for (path, snap) in &col.stmts {
                let Some(Stmt::Expr(e)) = nav::stmt_at(c, path) else { continue };
                let scope_ok = e.names().iter().all(|n| snap.knows(n));
                if scope_ok
                    && matches!(e, Expr::Send { .. } | Expr::Not(_) | Expr::Binary { .. } | Expr::Bool(_))
                    && expr_is_bool(e)
                {
                    let tier = stmt_tier.get(path).copied().unwrap_or(2);
                    out.push(Candidate {
                        tier,
                        edit: EditOp::Replace { site: id(path), with: Replacement::RequireWrap },
                    });
                }
            }
        }
        OpTag::I => {
            let templates = function_templates(c);
            for (path, snap) in &col.stmts {
                let tier = stmt_tier.get(path).copied().unwrap_or(2);
                let fi = nav::function_of(c, path).expect("statement inside a function");
                let mut after = snap.clone();
                if let Some(Stmt::VarDecl { name, ty, .. }) = nav::stmt_at(c, path) {
                    after.values.push((name.clone(), ty.clone()));
                }
                for (pos, sn) in [(Position::Before, snap), (Position::After, &after)] {
                    for s in insert_statements(&templates[fi], sn, &vocab) {
                        out.push(Candidate { tier, edit: EditOp::Insert { stmt: s, anchor: id(path), position: pos } });
                    }
                }
            }
            for (path, snap) in &col.blocks {
                let tier = block_tier.get(path).copied().unwrap_or(2);
                let fi = nav::function_of(c, path).expect("block inside a function");
                for s in insert_statements(&templates[fi], snap, &vocab) {
                    out.push(Candidate {
                        tier,
                        edit: EditOp::Insert { stmt: s, anchor: id(path), position: Position::Before },
                    });
                }
            }
        }
    }
    out.sort_by_key(|c| c.tier);
    out
}

fn expr_is_bool(e: &Expr) -> bool {
    match e {
        Expr::Send { .. } | Expr::Not(_) | Expr::Bool(_) => true,
        Expr::Binary { op, .. } => !op.is_arithmetic(),
        _ => false,
    }
}

/// Environment reads the contract already uses; synthesized code draws on
/// these only.
struct Vocab {
    sender: bool,
    value: bool,
}

impl Vocab {
    fn of(c: &Contract) -> Self {
        let mut v = Vocab { sender: false, value: false };
        for (_, n) in all_nodes(c) {
            match n {
                NodeRef::Expr(Expr::MsgSender) => v.sender = true,
                NodeRef::Expr(Expr::MsgValue) => v.value = true,
                NodeRef::Stmt(Stmt::Assign { target: LValue::Index { key: Expr::MsgSender, .. }, .. }) => {
                    v.sender = true
                }
                _ => {}
            }
        }
        v
    }
}

fn replacements(e: &Expr, ty: &Type, snap: &Snapshot, vocab: &Vocab) -> Vec<Expr> {
    let mut alts: Vec<Expr> = Vec::new();
    if let Expr::Binary { op, lhs, rhs } = e {
        for sib in op.siblings() {
            if sib != op {
                alts.push(Expr::Binary { op: *sib, lhs: lhs.clone(), rhs: rhs.clone() });
            }
        }
        alts.push(Expr::Binary { op: *op, lhs: rhs.clone(), rhs: lhs.clone() });
    }
    for (n, t) in &snap.values {
        if t == ty {
            alts.push(Expr::Var(n.clone()));
        }
    }
    match ty {
        Type::Uint => {
            alts.push(Expr::int(0));
            alts.push(Expr::int(1));
            if vocab.value {
                alts.push(Expr::MsgValue);
            }
        }
        Type::Bool => {
            alts.push(Expr::Bool(true));
            alts.push(Expr::Bool(false));
            match e {
                Expr::Not(inner) => alts.push((**inner).clone()),
                _ => alts.push(Expr::negate(e.clone())),
            }
        }
        Type::Address if vocab.sender => alts.push(Expr::MsgSender),
        _ => {}
    }
    for (m, k, v) in &snap.mappings {
        if v == ty && *k == Type::Address && vocab.sender {
            alts.push(Expr::Index { name: m.clone(), key: Box::new(Expr::MsgSender) });
        }
    }
    let mut seen = BTreeSet::new();
    alts.retain(|a| a != e && seen.insert(expr_to_string(a)));
    alts
}

/// Statement templates drawn from one function: overflow guards for its
/// arithmetic and its existing conditions.
struct Templates {
    requires: Vec<Expr>,
}

fn function_templates(c: &Contract) -> Vec<Templates> {
    let nodes = all_nodes(c);
    c.functions
        .iter()
        .enumerate()
        .map(|(fi, _)| {
            let body = c.function_body_path(fi);
            let mut requires = Vec::new();
            for (p, n) in &nodes {
                if !p.starts_with(&body) {
                    continue;
                }
                match n {
                    NodeRef::Expr(Expr::Binary { op, lhs, rhs }) if op.can_overflow() => {
                        if let Some(g) = canonical_guard(*op, lhs, rhs) {
                            requires.push(g);
                        }
                    }
                    NodeRef::Stmt(Stmt::If { cond, .. }) | NodeRef::Stmt(Stmt::While { cond, .. }) => {
                        requires.push(cond.clone())
                    }
                    NodeRef::Stmt(Stmt::Require(cond)) if !cond.contains_send() => requires.push(cond.clone()),
                    _ => {}
                }
            }
            Templates { requires }
        })
        .collect()
}

fn insert_statements(t: &Templates, snap: &Snapshot, vocab: &Vocab) -> Vec<Stmt> {
    let mut out = Vec::new();
    for (n, ty) in &snap.values {
        let values: Vec<Expr> = match ty {
            Type::Uint => vec![Expr::int(0), Expr::int(1)],
            Type::Bool => vec![Expr::Bool(false), Expr::Bool(true)],
            Type::Address if vocab.sender => vec![Expr::MsgSender],
            _ => vec![],
        };
        for v in values {
            out.push(Stmt::Assign { target: LValue::Var(n.clone()), value: v });
        }
    }
    for (m, k, v) in &snap.mappings {
        if *k == Type::Address && *v == Type::Uint && vocab.sender {
            out.push(Stmt::Assign {
                target: LValue::Index { name: m.clone(), key: Expr::MsgSender },
                value: Expr::int(0),
            });
        }
    }
    for g in &t.requires {
        if g.names().iter().all(|n| snap.knows(n)) {
            out.push(Stmt::Require(g.clone()));
        }
    }
    for (n, ty) in &snap.values {
        if *ty == Type::Bool {
            out.push(Stmt::Require(Expr::var(n)));
            out.push(Stmt::Require(Expr::negate(Expr::var(n))));
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|s| seen.insert(stmt_to_string(s)));
    out
}
