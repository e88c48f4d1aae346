//! Resolution of [`NodePath`]s to tree nodes.

use super::ast::*;

#[derive(Clone, Copy, Debug)]
pub enum NodeRef<'a> {
    Contract(&'a Contract),
    StateVar(&'a StateVar),
    Function(&'a Function),
    Block(&'a Block),
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

pub enum NodeMut<'a> {
    Contract(&'a mut Contract),
    StateVar(&'a mut StateVar),
    Function(&'a mut Function),
    Block(&'a mut Block),
    Stmt(&'a mut Stmt),
    Expr(&'a mut Expr),
}

impl<'a> NodeRef<'a> {
    pub fn child(self, i: usize) -> Option<NodeRef<'a>> {
        match self {
            NodeRef::Contract(c) => {
                let n = c.state_vars.len();
                if i < n {
                    Some(NodeRef::StateVar(&c.state_vars[i]))
                } else {
                    c.functions.get(i - n).map(NodeRef::Function)
                }
            }
            NodeRef::StateVar(v) => v.init.as_ref().filter(|_| i == 0).map(NodeRef::Expr),
            NodeRef::Function(f) => (i == 0).then_some(NodeRef::Block(&f.body)),
            NodeRef::Block(b) => b.stmts.get(i).map(NodeRef::Stmt),
            NodeRef::Stmt(s) => stmt_child(s, i),
            NodeRef::Expr(e) => e.children().get(i).copied().map(NodeRef::Expr),
        }
    }

    pub fn as_stmt(self) -> Option<&'a Stmt> {
        match self {
            NodeRef::Stmt(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_expr(self) -> Option<&'a Expr> {
        match self {
            NodeRef::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_block(self) -> Option<&'a Block> {
        match self {
            NodeRef::Block(b) => Some(b),
            _ => None,
        }
    }
}

fn stmt_child(s: &Stmt, i: usize) -> Option<NodeRef<'_>> {
    match (s, i) {
        (Stmt::VarDecl { init: Some(e), .. }, 0) => Some(NodeRef::Expr(e)),
        (Stmt::Assign { target: LValue::Var(_), value }, 0) => Some(NodeRef::Expr(value)),
        (Stmt::Assign { target: LValue::Index { key, .. }, .. }, 0) => Some(NodeRef::Expr(key)),
        (Stmt::Assign { target: LValue::Index { .. }, value }, 1) => Some(NodeRef::Expr(value)),
        (Stmt::If { cond, .. }, 0) | (Stmt::While { cond, .. }, 0) => Some(NodeRef::Expr(cond)),
        (Stmt::If { then_block, .. }, 1) => Some(NodeRef::Block(then_block)),
        (Stmt::If { else_block: Some(b), .. }, 2) => Some(NodeRef::Block(b)),
        (Stmt::While { body, .. }, 1) => Some(NodeRef::Block(body)),
        (Stmt::Require(e), 0) | (Stmt::Expr(e), 0) | (Stmt::Return(Some(e)), 0) => Some(NodeRef::Expr(e)),
        _ => None,
    }
}

impl<'a> NodeMut<'a> {
    pub fn child(self, i: usize) -> Option<NodeMut<'a>> {
        match self {
            NodeMut::Contract(c) => {
                let n = c.state_vars.len();
                if i < n {
                    Some(NodeMut::StateVar(&mut c.state_vars[i]))
                } else {
                    c.functions.get_mut(i - n).map(NodeMut::Function)
                }
            }
            NodeMut::StateVar(v) => {
                if i == 0 {
                    v.init.as_mut().map(NodeMut::Expr)
                } else {
                    None
                }
            }
            NodeMut::Function(f) => (i == 0).then_some(NodeMut::Block(&mut f.body)),
            NodeMut::Block(b) => b.stmts.get_mut(i).map(NodeMut::Stmt),
            NodeMut::Stmt(s) => stmt_child_mut(s, i),
            NodeMut::Expr(e) => e.children_mut().into_iter().nth(i).map(NodeMut::Expr),
        }
    }
}

fn stmt_child_mut(s: &mut Stmt, i: usize) -> Option<NodeMut<'_>> {
    match (s, i) {
        (Stmt::VarDecl { init: Some(e), .. }, 0) => Some(NodeMut::Expr(e)),
        (Stmt::Assign { target: LValue::Var(_), value }, 0) => Some(NodeMut::Expr(value)),
        (Stmt::Assign { target: LValue::Index { key, .. }, .. }, 0) => Some(NodeMut::Expr(key)),
        (Stmt::Assign { target: LValue::Index { .. }, value }, 1) => Some(NodeMut::Expr(value)),
        (Stmt::If { cond, .. }, 0) | (Stmt::While { cond, .. }, 0) => Some(NodeMut::Expr(cond)),
        (Stmt::If { then_block, .. }, 1) => Some(NodeMut::Block(then_block)),
        (Stmt::If { else_block: Some(b), .. }, 2) => Some(NodeMut::Block(b)),
        (Stmt::While { body, .. }, 1) => Some(NodeMut::Block(body)),
        (Stmt::Require(e), 0) | (Stmt::Expr(e), 0) | (Stmt::Return(Some(e)), 0) => Some(NodeMut::Expr(e)),
        _ => None,
    }
}

pub fn resolve<'a>(c: &'a Contract, path: &NodePath) -> Option<NodeRef<'a>> {
    let mut cur = NodeRef::Contract(c);
    for &i in &path.0 {
        cur = cur.child(i as usize)?;
    }
    Some(cur)
}

pub fn resolve_mut<'a>(c: &'a mut Contract, path: &NodePath) -> Option<NodeMut<'a>> {
    let mut cur = NodeMut::Contract(c);
    for &i in &path.0 {
        cur = cur.child(i as usize)?;
    }
    Some(cur)
}

pub fn stmt_at<'a>(c: &'a Contract, path: &NodePath) -> Option<&'a Stmt> {
    resolve(c, path)?.as_stmt()
}

pub fn expr_at<'a>(c: &'a Contract, path: &NodePath) -> Option<&'a Expr> {
    resolve(c, path)?.as_expr()
}

pub fn block_at<'a>(c: &'a Contract, path: &NodePath) -> Option<&'a Block> {
    resolve(c, path)?.as_block()
}

pub fn block_mut<'a>(c: &'a mut Contract, path: &NodePath) -> Option<&'a mut Block> {
    match resolve_mut(c, path)? {
        NodeMut::Block(b) => Some(b),
        _ => None,
    }
}

pub fn stmt_mut<'a>(c: &'a mut Contract, path: &NodePath) -> Option<&'a mut Stmt> {
    match resolve_mut(c, path)? {
        NodeMut::Stmt(s) => Some(s),
        _ => None,
    }
}

pub fn expr_mut<'a>(c: &'a mut Contract, path: &NodePath) -> Option<&'a mut Expr> {
    match resolve_mut(c, path)? {
        NodeMut::Expr(e) => Some(e),
        _ => None,
    }
}

/// Index of the function containing `path`, if any.
pub fn function_of(c: &Contract, path: &NodePath) -> Option<usize> {
    let first = *path.0.first()? as usize;
    first.checked_sub(c.state_vars.len()).filter(|&j| j < c.functions.len())
}

/// Every node path in preorder, paired with the node.
pub fn all_nodes(c: &Contract) -> Vec<(NodePath, NodeRef<'_>)> {
    let mut out = Vec::new();
    collect(NodeRef::Contract(c), NodePath::root(), &mut out);
    out
}

fn collect<'a>(n: NodeRef<'a>, path: NodePath, out: &mut Vec<(NodePath, NodeRef<'a>)>) {
    out.push((path.clone(), n));
    let mut i = 0;
    while let Some(ch) = n.child(i) {
        collect(ch, path.child(i), out);
        i += 1;
    }
}

/// The innermost statement path that is `path` or one of its ancestors.
pub fn enclosing_stmt(c: &Contract, path: &NodePath) -> Option<NodePath> {
    let mut p = Some(path.clone());
    while let Some(cur) = p {
        if matches!(resolve(c, &cur), Some(NodeRef::Stmt(_))) {
            return Some(cur);
        }
        p = cur.parent();
    }
    None
}
