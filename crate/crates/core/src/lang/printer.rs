use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(c: &Contract) -> String {
    let mut out = String::new();
    writeln!(out, "contract {} {{", c.name).unwrap();
    for v in &c.state_vars {
        out.push_str(INDENT);
        write!(out, "{} {}", v.ty, v.name).unwrap();
        if let Some(init) = &v.init {
            write!(out, " = {}", expr_to_string(init)).unwrap();
        }
        out.push_str(";\n");
    }
    for (i, f) in c.functions.iter().enumerate() {
        if i > 0 || !c.state_vars.is_empty() {
            out.push('\n');
        }
        print_function(&mut out, f);
    }
    out.push_str("}\n");
    out
}

fn print_function(out: &mut String, f: &Function) {
    let params: Vec<String> = f.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    write!(out, "{INDENT}function {}({})", f.name, params.join(", ")).unwrap();
    if f.payable {
        out.push_str(" payable");
    }
    if let Some(r) = &f.returns {
        write!(out, " returns ({r})").unwrap();
    }
    out.push_str(" {\n");
    print_stmts(out, &f.body, 2);
    writeln!(out, "{INDENT}}}").unwrap();
}

fn print_stmts(out: &mut String, b: &Block, depth: usize) {
    for s in &b.stmts {
        print_stmt(out, s, depth);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    match s {
        Stmt::If { cond, then_block, else_block } => {
            writeln!(out, "{pad}if ({}) {{", expr_to_string(cond)).unwrap();
            print_stmts(out, then_block, depth + 1);
            match else_block {
                Some(e) => {
                    writeln!(out, "{pad}}} else {{").unwrap();
                    print_stmts(out, e, depth + 1);
                    writeln!(out, "{pad}}}").unwrap();
                }
                None => writeln!(out, "{pad}}}").unwrap(),
            }
        }
        Stmt::While { cond, body } => {
            writeln!(out, "{pad}while ({}) {{", expr_to_string(cond)).unwrap();
            print_stmts(out, body, depth + 1);
            writeln!(out, "{pad}}}").unwrap();
        }
        _ => writeln!(out, "{pad}{}", simple_stmt_to_string(s)).unwrap(),
    }
}

/// One-line rendering of a statement; compound statements show only their header.
pub fn stmt_to_string(s: &Stmt) -> String {
    match s {
        Stmt::If { cond, else_block, .. } => {
            let tail = if else_block.is_some() { " { ... } else { ... }" } else { " { ... }" };
            format!("if ({}){tail}", expr_to_string(cond))
        }
        Stmt::While { cond, .. } => format!("while ({}) {{ ... }}", expr_to_string(cond)),
        _ => simple_stmt_to_string(s),
    }
}

/// Full multi-line rendering of a statement at indentation zero.
pub fn stmt_to_source(s: &Stmt) -> String {
    let mut out = String::new();
    print_stmt(&mut out, s, 0);
    out.trim_end().to_string()
}

fn simple_stmt_to_string(s: &Stmt) -> String {
    match s {
        Stmt::VarDecl { name, ty, init } => match init {
            Some(e) => format!("{ty} {name} = {};", expr_to_string(e)),
            None => format!("{ty} {name};"),
        },
        Stmt::Assign { target, value } => {
            format!("{} = {};", lvalue_to_string(target), expr_to_string(value))
        }
        Stmt::Require(e) => format!("require({});", expr_to_string(e)),
        Stmt::Return(None) => "return;".to_string(),
        Stmt::Return(Some(e)) => format!("return {};", expr_to_string(e)),
        Stmt::Expr(e) => format!("{};", expr_to_string(e)),
        Stmt::If { .. } | Stmt::While { .. } => stmt_to_string(s),
    }
}

pub fn lvalue_to_string(l: &LValue) -> String {
    match l {
        LValue::Var(n) => n.clone(),
        LValue::Index { name, key } => format!("{name}[{}]", expr_to_string(key)),
    }
}

const PREC_UNARY: u8 = 7;
const PREC_POSTFIX: u8 = 8;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Not(_) => PREC_UNARY,
        _ => PREC_POSTFIX,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let parens = expr_prec(e) < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Int(v) => write!(out, "{v}").unwrap(),
        Expr::Bool(b) => write!(out, "{b}").unwrap(),
        Expr::Var(n) => out.push_str(n),
        Expr::Index { name, key } => {
            write!(out, "{name}[").unwrap();
            write_expr(out, key, 0);
            out.push(']');
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            write_expr(out, lhs, p);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, rhs, p + 1);
        }
        Expr::Not(inner) => {
            out.push('!');
            write_expr(out, inner, PREC_UNARY);
        }
        Expr::MsgSender => out.push_str("msg.sender"),
        Expr::MsgValue => out.push_str("msg.value"),
        Expr::Balance(a) => {
            out.push_str("balance(");
            write_expr(out, a, 0);
            out.push(')');
        }
        Expr::Send { target, amount } => {
            write_expr(out, target, PREC_POSTFIX);
            out.push_str(".send(");
            write_expr(out, amount, 0);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}
