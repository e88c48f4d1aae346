use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use super::scope::{walk_contract, Scope, Visitor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub path: NodePath,
    pub message: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for TypeError {}

fn err(path: &NodePath, message: impl Into<String>) -> TypeError {
    TypeError { path: path.clone(), message: message.into() }
}

/// Infers the type of `e` located at `path` under `scope`.
pub fn infer(e: &Expr, path: &NodePath, scope: &Scope) -> Result<Type, TypeError> {
    match e {
        Expr::Int(_) => Ok(Type::Uint),
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::MsgSender => Ok(Type::Address),
        Expr::MsgValue => Ok(Type::Uint),
        Expr::Var(name) => match scope.lookup(name) {
            Some((t, _)) if t.is_mapping() => Err(err(path, format!("mapping `{name}` used as a value"))),
            Some((t, _)) => Ok(t.clone()),
            None => Err(err(path, format!("unknown name `{name}`"))),
        },
        Expr::Index { name, key } => {
            let Some((t, _)) = scope.lookup(name) else {
                return Err(err(path, format!("unknown name `{name}`")));
            };
            let Type::Mapping(k, v) = t.clone() else {
                return Err(err(path, format!("`{name}` is not a mapping")));
            };
            expect(key, &path.child(0), scope, &k)?;
            Ok(*v)
        }
        Expr::Binary { op, lhs, rhs } => {
            let (lp, rp) = (path.child(0), path.child(1));
            if op.is_arithmetic() {
                expect(lhs, &lp, scope, &Type::Uint)?;
                expect(rhs, &rp, scope, &Type::Uint)?;
                Ok(Type::Uint)
            } else if op.is_relational() {
                expect(lhs, &lp, scope, &Type::Uint)?;
                expect(rhs, &rp, scope, &Type::Uint)?;
                Ok(Type::Bool)
            } else if op.is_equality() {
                let lt = infer(lhs, &lp, scope)?;
                expect(rhs, &rp, scope, &lt)?;
                Ok(Type::Bool)
            } else {
                expect(lhs, &lp, scope, &Type::Bool)?;
                expect(rhs, &rp, scope, &Type::Bool)?;
                Ok(Type::Bool)
            }
        }
        Expr::Not(inner) => {
            expect(inner, &path.child(0), scope, &Type::Bool)?;
            Ok(Type::Bool)
        }
        Expr::Balance(a) => {
            expect(a, &path.child(0), scope, &Type::Address)?;
            Ok(Type::Uint)
        }
        Expr::Send { target, amount } => {
            expect(target, &path.child(0), scope, &Type::Address)?;
            expect(amount, &path.child(1), scope, &Type::Uint)?;
            Ok(Type::Bool)
        }
    }
}

fn expect(e: &Expr, path: &NodePath, scope: &Scope, want: &Type) -> Result<(), TypeError> {
    let got = infer(e, path, scope)?;
    if &got == want {
        Ok(())
    } else {
        Err(err(path, format!("expected {want}, found {got}")))
    }
}

struct Checker {
    errors: Vec<TypeError>,
    returns: Option<Type>,
}

impl Checker {
    fn check(&mut self, r: Result<(), TypeError>) {
        if let Err(e) = r {
            self.errors.push(e);
        }
    }
}

impl Visitor for Checker {
    fn function(&mut self, _index: usize, f: &Function) {
        self.returns = f.returns.clone();
    }

    fn stmt(&mut self, path: &NodePath, stmt: &Stmt, scope: &Scope) {
        let c0 = path.child(0);
        let r = match stmt {
            Stmt::VarDecl { name, ty, init } => {
                if scope.lookup(name).is_some() {
                    Err(err(path, format!("`{name}` shadows an existing name")))
                } else if ty.is_mapping() {
                    Err(err(path, "local mappings are not supported"))
                } else if let Some(e) = init {
                    expect(e, &c0, scope, ty)
                } else {
                    Ok(())
                }
            }
            Stmt::Assign { target, value } => match target {
                LValue::Var(name) => match scope.lookup(name) {
                    None => Err(err(path, format!("unknown name `{name}`"))),
                    Some((t, _)) if t.is_mapping() => Err(err(path, format!("cannot assign to mapping `{name}`"))),
                    Some((t, _)) => {
                        let t = t.clone();
                        expect(value, &c0, scope, &t)
                    }
                },
                LValue::Index { name, key } => match scope.lookup(name) {
                    Some((Type::Mapping(k, v), _)) => {
                        let (k, v) = ((**k).clone(), (**v).clone());
                        expect(key, &c0, scope, &k).and_then(|_| expect(value, &path.child(1), scope, &v))
                    }
                    Some(_) => Err(err(path, format!("`{name}` is not a mapping"))),
                    None => Err(err(path, format!("unknown name `{name}`"))),
                },
            },
            Stmt::If { cond, .. } | Stmt::While { cond, .. } | Stmt::Require(cond) => {
                expect(cond, &c0, scope, &Type::Bool)
            }
            Stmt::Return(e) => match (&self.returns, e) {
                (None, None) => Ok(()),
                (Some(t), Some(e)) => {
                    let t = t.clone();
                    expect(e, &c0, scope, &t)
                }
                (None, Some(_)) => Err(err(path, "function does not return a value")),
                (Some(t), None) => Err(err(path, format!("missing return value of type {t}"))),
            },
            Stmt::Expr(e) => infer(e, &c0, scope).map(|_| ()),
        };
        self.check(r);
    }
}

/// The compilability predicate: name resolution, typing and declaration rules.
pub fn typecheck(c: &Contract) -> Result<(), Vec<TypeError>> {
    let mut errors = Vec::new();
    let mut names = BTreeSet::new();
    for (i, v) in c.state_vars.iter().enumerate() {
        let p = NodePath(vec![i as u32]);
        if !names.insert(v.name.as_str()) {
            errors.push(err(&p, format!("duplicate state variable `{}`", v.name)));
        }
        if let Some(init) = &v.init {
            let ok = matches!((&v.ty, init), (Type::Uint | Type::Address, Expr::Int(_)) | (Type::Bool, Expr::Bool(_)));
            if !ok {
                errors.push(err(&p.child(0), "state initializer must be a literal of the declared type"));
            }
        }
    }
    let mut fnames = BTreeSet::new();
    for (j, f) in c.functions.iter().enumerate() {
        let p = NodePath(vec![(c.state_vars.len() + j) as u32]);
        if !fnames.insert(f.name.as_str()) {
            errors.push(err(&p, format!("duplicate function `{}`", f.name)));
        }
        let mut pnames = BTreeSet::new();
        for prm in &f.params {
            if !pnames.insert(prm.name.as_str()) {
                errors.push(err(&p, format!("duplicate parameter `{}`", prm.name)));
            }
            if names.contains(prm.name.as_str()) {
                errors.push(err(&p, format!("parameter `{}` shadows a state variable", prm.name)));
            }
            if prm.ty.is_mapping() {
                errors.push(err(&p, "mapping parameters are not supported"));
            }
        }
    }
    let mut checker = Checker { errors: Vec::new(), returns: None };
    walk_contract(c, &mut checker);
    errors.extend(checker.errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub fn is_compilable(c: &Contract) -> bool {
    typecheck(c).is_ok()
}
