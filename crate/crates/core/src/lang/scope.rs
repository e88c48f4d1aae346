//! Scope-aware traversal of function bodies.

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    State,
    Param,
    Local,
}

/// Names visible at a program point.
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    pub state: &'a [StateVar],
    pub params: &'a [Param],
    pub locals: Vec<(String, Type)>,
}

impl<'a> Scope<'a> {
    pub fn new(c: &'a Contract, f: &'a Function) -> Self {
        Scope { state: &c.state_vars, params: &f.params, locals: Vec::new() }
    }

    pub fn lookup(&self, name: &str) -> Option<(&Type, VarKind)> {
        if let Some((_, t)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Some((t, VarKind::Local));
        }
        if let Some(p) = self.params.iter().find(|p| p.name == name) {
            return Some((&p.ty, VarKind::Param));
        }
        self.state.iter().find(|v| v.name == name).map(|v| (&v.ty, VarKind::State))
    }

    /// Visible non-mapping variables, in declaration order (state, params, locals).
    pub fn values(&self) -> Vec<(&str, &Type, VarKind)> {
        let mut out: Vec<(&str, &Type, VarKind)> = Vec::new();
        for v in self.state {
            if !v.ty.is_mapping() {
                out.push((&v.name, &v.ty, VarKind::State));
            }
        }
        for p in self.params {
            out.push((&p.name, &p.ty, VarKind::Param));
        }
        for (n, t) in &self.locals {
            out.push((n, t, VarKind::Local));
        }
        out
    }

    pub fn mappings(&self) -> Vec<(&str, &Type, &Type)> {
        self.state
            .iter()
            .filter_map(|v| match &v.ty {
                Type::Mapping(k, val) => Some((v.name.as_str(), &**k, &**val)),
                _ => None,
            })
            .collect()
    }
}

pub trait Visitor {
    fn function(&mut self, _index: usize, _f: &Function) {}
    fn block(&mut self, _path: &NodePath, _block: &Block, _scope: &Scope) {}
    /// Called with the scope in force just before `stmt` executes.
    fn stmt(&mut self, _path: &NodePath, _stmt: &Stmt, _scope: &Scope) {}
    fn expr(&mut self, _path: &NodePath, _expr: &Expr, _scope: &Scope) {}
}

pub fn walk_contract<V: Visitor>(c: &Contract, v: &mut V) {
    for i in 0..c.functions.len() {
        walk_function(c, i, v);
    }
}

pub fn walk_function<V: Visitor>(c: &Contract, index: usize, v: &mut V) {
    let f = &c.functions[index];
    v.function(index, f);
    let mut scope = Scope::new(c, f);
    walk_block(&f.body, &c.function_body_path(index), &mut scope, v);
}

fn walk_block<V: Visitor>(b: &Block, path: &NodePath, scope: &mut Scope, v: &mut V) {
    v.block(path, b, scope);
    let mark = scope.locals.len();
    for (i, s) in b.stmts.iter().enumerate() {
        let sp = path.child(i);
        v.stmt(&sp, s, scope);
        match s {
            Stmt::VarDecl { name, ty, init } => {
                if let Some(e) = init {
                    walk_expr(e, &sp.child(0), scope, v);
                }
                scope.locals.push((name.clone(), ty.clone()));
            }
            Stmt::Assign { target, value } => match target {
                LValue::Var(_) => walk_expr(value, &sp.child(0), scope, v),
                LValue::Index { key, .. } => {
                    walk_expr(key, &sp.child(0), scope, v);
                    walk_expr(value, &sp.child(1), scope, v);
                }
            },
            Stmt::If { cond, then_block, else_block } => {
                walk_expr(cond, &sp.child(0), scope, v);
                walk_block(then_block, &sp.child(1), scope, v);
                if let Some(e) = else_block {
                    walk_block(e, &sp.child(2), scope, v);
                }
            }
            Stmt::While { cond, body } => {
                walk_expr(cond, &sp.child(0), scope, v);
                walk_block(body, &sp.child(1), scope, v);
            }
            Stmt::Require(e) | Stmt::Expr(e) => walk_expr(e, &sp.child(0), scope, v),
            Stmt::Return(e) => {
                if let Some(e) = e {
                    walk_expr(e, &sp.child(0), scope, v);
                }
            }
        }
    }
    scope.locals.truncate(mark);
}

fn walk_expr<V: Visitor>(e: &Expr, path: &NodePath, scope: &Scope, v: &mut V) {
    v.expr(path, e, scope);
    for (i, c) in e.children().into_iter().enumerate() {
        walk_expr(c, &path.child(i), scope, v);
    }
}
