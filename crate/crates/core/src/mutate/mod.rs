//! Move/Insert/Replace mutation operators, patches as edit chains, the tree
//! diff metric and the seven operator-set search spaces.

mod diff;
mod enumerate;
mod patch_json;
mod sampler;
mod space;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::nav::{self, NodeRef};
use crate::lang::*;

pub use diff::{diff, to_tree, tree_distance, Tree};
pub use enumerate::{enumerate_edits, Candidate as EditCandidate};
pub use sampler::{Sampled, Sampler};
pub use space::{space_validity, SpaceId, Validity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpTag {
    M,
    R,
    I,
}

impl fmt::Display for OpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Before,
    After,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Replacement {
    Expr(Expr),
    /// Turns the expression statement `e;` at the site into `require(e);`.
    RequireWrap,
}

/// One edit. Anchors may be statements (insert before/after) or blocks
/// (`Before` = at the head, `After` = at the end).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EditOp {
    Move { src: NodeId, anchor: NodeId, position: Position },
    Insert { stmt: Stmt, anchor: NodeId, position: Position },
    Replace { site: NodeId, with: Replacement },
}

impl EditOp {
    pub fn tag(&self) -> OpTag {
        match self {
            EditOp::Move { .. } => OpTag::M,
            EditOp::Insert { .. } => OpTag::I,
            EditOp::Replace { .. } => OpTag::R,
        }
    }

    fn generation(&self) -> u32 {
        match self {
            EditOp::Move { src, .. } => src.generation,
            EditOp::Insert { anchor, .. } => anchor.generation,
            EditOp::Replace { site, .. } => site.generation,
        }
    }

    fn ids(&self) -> Vec<&NodeId> {
        match self {
            EditOp::Move { src, anchor, .. } => vec![src, anchor],
            EditOp::Insert { anchor, .. } => vec![anchor],
            EditOp::Replace { site, .. } => vec![site],
        }
    }

    /// Short human-readable description against the tree it applies to.
    pub fn describe(&self, c: &Contract) -> String {
        let stmt_text = |id: &NodeId| match nav::resolve(c, &id.path) {
            Some(NodeRef::Stmt(s)) => stmt_to_string(s),
            Some(NodeRef::Block(_)) => "{block}".to_string(),
            Some(NodeRef::Expr(e)) => expr_to_string(e),
            _ => "?".to_string(),
        };
        let pos = |p: &Position| match p {
            Position::Before => "before",
            Position::After => "after",
        };
        match self {
            EditOp::Move { src, anchor, position } => {
                format!("move `{}` {} `{}`", stmt_text(src), pos(position), stmt_text(anchor))
            }
            EditOp::Insert { stmt, anchor, position } => {
                format!("insert `{}` {} `{}`", stmt_to_string(stmt), pos(position), stmt_text(anchor))
            }
            EditOp::Replace { site, with: Replacement::Expr(e) } => {
                format!("replace `{}` with `{}`", stmt_text(site), expr_to_string(e))
            }
            EditOp::Replace { site, with: Replacement::RequireWrap } => {
                format!("wrap `{}` in require", stmt_text(site))
            }
        }
    }
}

/// An edit chain relative to the original contract.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Patch {
    pub base: ContractHash,
    pub edits: Vec<EditOp>,
}

impl Patch {
    pub fn empty(base: &Contract) -> Self {
        Patch { base: base.content_hash(), edits: Vec::new() }
    }

    pub fn operator_trace(&self) -> Vec<OpTag> {
        self.edits.iter().map(EditOp::tag).collect()
    }

    /// Generation tag the next appended edit must carry.
    pub fn next_generation(&self) -> u32 {
        self.edits.len() as u32
    }

    pub fn extended(&self, e: EditOp) -> Patch {
        let mut p = self.clone();
        p.edits.push(e);
        p
    }
}

/// Number of mutation operations accumulated since the original contract.
pub fn mutation_distance(p: &Patch) -> usize {
    p.operator_trace().len()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("patch base {expected} does not match contract {actual}")]
    BaseMismatch { expected: String, actual: String },
    #[error("edit {index} refers to generation {found}, expected {expected}")]
    Stale { index: usize, expected: u32, found: u32 },
    #[error("edit {index}: node {path} does not resolve")]
    Unresolved { index: usize, path: NodePath },
    #[error("edit {index}: {reason}")]
    Invalid { index: usize, reason: String },
}

/// Applies the edits left to right. Edit `k` must use node ids of generation `k`.
pub fn apply(p: &Patch, base: &Contract) -> Result<Contract, ApplyError> {
    let h = base.content_hash();
    if h != p.base {
        return Err(ApplyError::BaseMismatch { expected: p.base.short(), actual: h.short() });
    }
    apply_chain(base, &p.edits).map(|mut v| v.pop().expect("chain includes base"))
}

/// All intermediate contracts of the edit chain, starting with `base`.
pub fn apply_chain(base: &Contract, edits: &[EditOp]) -> Result<Vec<Contract>, ApplyError> {
    let mut out = vec![base.clone()];
    for (k, e) in edits.iter().enumerate() {
        let next = apply_edit(out.last().expect("nonempty"), e, k)?;
        out.push(next);
    }
    Ok(out)
}

/// Applies one edit whose ids must be of generation `k`.
pub fn apply_edit(c: &Contract, e: &EditOp, k: usize) -> Result<Contract, ApplyError> {
    if e.generation() as usize != k {
        return Err(ApplyError::Stale { index: k, expected: k as u32, found: e.generation() });
    }
    for id in e.ids() {
        if nav::resolve(c, &id.path).is_none() || nav::function_of(c, &id.path).is_none() {
            return Err(ApplyError::Unresolved { index: k, path: id.path.clone() });
        }
    }
    let invalid = |reason: &str| ApplyError::Invalid { index: k, reason: reason.to_string() };
    let mut out = c.clone();
    match e {
        EditOp::Replace { site, with: Replacement::Expr(new) } => {
            let slot =
                nav::expr_mut(&mut out, &site.path).ok_or_else(|| invalid("replace site is not an expression"))?;
            *slot = new.clone();
        }
        EditOp::Replace { site, with: Replacement::RequireWrap } => {
            let slot = nav::stmt_mut(&mut out, &site.path).ok_or_else(|| invalid("wrap site is not a statement"))?;
            let Stmt::Expr(inner) = slot else { return Err(invalid("wrap site is not an expression statement")) };
            *slot = Stmt::Require(inner.clone());
        }
        EditOp::Insert { stmt, anchor, position } => {
            let (block, index) = insertion_point(c, &anchor.path, *position).ok_or_else(|| invalid("bad anchor"))?;
            let b = nav::block_mut(&mut out, &block).expect("insertion block resolves");
            b.stmts.insert(index, stmt.clone());
        }
        EditOp::Move { src, anchor, position } => {
            let s = nav::stmt_at(c, &src.path).ok_or_else(|| invalid("move source is not a statement"))?.clone();
            if src.path == anchor.path {
                return Err(invalid("move source equals its anchor"));
            }
            if anchor.path.starts_with(&src.path) {
                return Err(invalid("move anchor lies inside the moved statement"));
            }
            if nav::function_of(c, &src.path) != nav::function_of(c, &anchor.path) {
                return Err(invalid("move crosses functions"));
            }
            let (block, index) = insertion_point(c, &anchor.path, *position).ok_or_else(|| invalid("bad anchor"))?;
            let src_block = src.path.parent().expect("statement has a parent block");
            let src_index = src.path.last().expect("statement index");
            nav::block_mut(&mut out, &src_block).expect("source block").stmts.remove(src_index);
            let block = adjust_after_remove(&block, &src_block, src_index);
            let index = if block == src_block && index > src_index { index - 1 } else { index };
            nav::block_mut(&mut out, &block).expect("target block").stmts.insert(index, s);
        }
    }
    Ok(out)
}

/// Block path and index at which an insertion relative to `anchor` lands.
pub fn insertion_point(c: &Contract, anchor: &NodePath, position: Position) -> Option<(NodePath, usize)> {
    match nav::resolve(c, anchor)? {
        NodeRef::Stmt(_) => {
            let block = anchor.parent()?;
            let i = anchor.last()?;
            Some((block, if position == Position::Before { i } else { i + 1 }))
        }
        NodeRef::Block(b) => Some((anchor.clone(), if position == Position::Before { 0 } else { b.stmts.len() })),
        _ => None,
    }
}

/// Rewrites `path` to account for removing statement `index` from `block`.
fn adjust_after_remove(path: &NodePath, block: &NodePath, index: usize) -> NodePath {
    if path.len() > block.len() && path.starts_with(block) {
        let k = block.len();
        let mut v = path.0.clone();
        if v[k] as usize > index {
            v[k] -= 1;
        }
        NodePath(v)
    } else {
        path.clone()
    }
}
