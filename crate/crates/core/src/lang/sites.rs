use super::ast::*;
use super::nav::{all_nodes, enclosing_stmt, function_of, NodeRef};

/// A mutation site with its fault-localization tier (0 = most suspicious).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub id: NodeId,
    pub tier: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MutableSites {
    /// Move sources and Insert anchors.
    pub statements: Vec<Site>,
    /// Blocks, usable as head anchors for insertion (including empty bodies).
    pub blocks: Vec<Site>,
    /// Replace targets.
    pub expressions: Vec<Site>,
}

impl MutableSites {
    pub fn statement_ids(&self) -> Vec<NodeId> {
        self.statements.iter().map(|s| s.id.clone()).collect()
    }

    pub fn expression_ids(&self) -> Vec<NodeId> {
        self.expressions.iter().map(|s| s.id.clone()).collect()
    }
}

/// Catalogs the mutable sites of `c`, ordered hinted-first then by document
/// order. Tiers: 0 = statements enclosing a hint (innermost first) and the
/// expressions inside them, 1 = other sites in a function holding a hint,
/// 2 = everything else.
pub fn mutable_sites(c: &Contract, hints: &[NodePath], generation: u32) -> MutableSites {
    let hinted_stmts: Vec<NodePath> = hints.iter().filter_map(|h| enclosing_stmt(c, h)).collect();
    let hinted_fns: Vec<usize> = hints.iter().filter_map(|h| function_of(c, h)).collect();

    let mut statements = Vec::new();
    let mut blocks = Vec::new();
    let mut expressions = Vec::new();
    for (path, node) in all_nodes(c) {
        let Some(fi) = function_of(c, &path) else { continue };
        let in_fn = hinted_fns.contains(&fi);
        match node {
            NodeRef::Stmt(_) => {
                let contains_hint = hinted_stmts.iter().any(|h| h.starts_with(&path));
                let tier = if contains_hint {
                    0
                } else if in_fn {
                    1
                } else {
                    2
                };
                statements.push((tier, path));
            }
            NodeRef::Block(_) => {
                let tier = if in_fn { 1 } else { 2 };
                blocks.push((tier, path));
            }
            NodeRef::Expr(_) => {
                let inside = hinted_stmts.iter().any(|h| path.starts_with(h));
                let tier = if inside {
                    0
                } else if in_fn {
                    1
                } else {
                    2
                };
                expressions.push((tier, path));
            }
            _ => {}
        }
    }
    // Innermost enclosing statements come first within tier 0.
    statements.sort_by(|(ta, pa), (tb, pb)| {
        ta.cmp(tb).then_with(|| if *ta == 0 { pb.len().cmp(&pa.len()) } else { std::cmp::Ordering::Equal })
    });
    blocks.sort_by_key(|(t, _)| *t);
    expressions.sort_by_key(|(t, _)| *t);
    let mk = |v: Vec<(u8, NodePath)>| {
        v.into_iter().map(|(tier, path)| Site { id: NodeId::new(path, generation), tier }).collect()
    };
    MutableSites { statements: mk(statements), blocks: mk(blocks), expressions: mk(expressions) }
}
