use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Kw, Tok, Token};
use super::ParseError;

/// Source line of every statement, state variable and function in a parsed
/// contract. Lookups for other nodes resolve to the nearest recorded ancestor.
#[derive(Clone, Debug, Default)]
pub struct SourceMap {
    lines: BTreeMap<NodePath, usize>,
}

impl SourceMap {
    pub fn line_of(&self, path: &NodePath) -> Option<usize> {
        let mut p = Some(path.clone());
        while let Some(cur) = p {
            if let Some(l) = self.lines.get(&cur) {
                return Some(*l);
            }
            p = cur.parent();
        }
        None
    }
}

pub fn parse(src: &str) -> Result<Contract, ParseError> {
    parse_with_source_map(src).map(|(c, _)| c)
}

pub fn parse_with_source_map(src: &str) -> Result<(Contract, SourceMap), ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, stmt_lines: Vec::new() };
    let (contract, var_lines, fn_lines) = p.contract()?;
    let mut lines = BTreeMap::new();
    for (i, l) in var_lines.iter().enumerate() {
        lines.insert(NodePath(vec![i as u32]), *l);
    }
    let mut stmt_lines = p.stmt_lines.into_iter();
    for (j, l) in fn_lines.iter().enumerate() {
        let fpath = NodePath(vec![(contract.state_vars.len() + j) as u32]);
        lines.insert(fpath.clone(), *l);
        record_block(&contract.functions[j].body, &fpath.child(0), &mut stmt_lines, &mut lines);
    }
    Ok((contract, SourceMap { lines }))
}

fn record_block(b: &Block, path: &NodePath, it: &mut impl Iterator<Item = usize>, out: &mut BTreeMap<NodePath, usize>) {
    for (i, s) in b.stmts.iter().enumerate() {
        let sp = path.child(i);
        if let Some(l) = it.next() {
            out.insert(sp.clone(), l);
        }
        match s {
            Stmt::If { then_block, else_block, .. } => {
                record_block(then_block, &sp.child(1), it, out);
                if let Some(e) = else_block {
                    record_block(e, &sp.child(2), it, out);
                }
            }
            Stmt::While { body, .. } => record_block(body, &sp.child(1), it, out),
            _ => {}
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    stmt_lines: Vec<usize>,
}

type ContractParts = (Contract, Vec<usize>, Vec<usize>);

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError::new(t.line, t.col, msg)
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Kw(k) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", Self::describe(self.peek()))))
        }
    }

    fn eat_kw(&mut self, k: Kw) -> bool {
        if *self.peek() == Tok::Kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: Kw) -> Result<(), ParseError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            let name = format!("{k:?}").to_lowercase();
            Err(self.error(format!("expected `{name}`, found {}", Self::describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            t => Err(self.error(format!("expected identifier, found {}", Self::describe(&t)))),
        }
    }

    fn contract(&mut self) -> Result<ContractParts, ParseError> {
        self.expect_kw(Kw::Contract)?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut state_vars = Vec::new();
        let mut functions = Vec::new();
        let mut var_lines = Vec::new();
        let mut fn_lines = Vec::new();
        while !self.eat_sym("}") {
            let line = self.here().line;
            if self.eat_kw(Kw::Function) {
                functions.push(self.function()?);
                fn_lines.push(line);
            } else if self.at_type() {
                let ty = self.ty(true)?;
                let vname = self.ident()?;
                let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
                self.expect_sym(";")?;
                state_vars.push(StateVar { name: vname, ty, init });
                var_lines.push(line);
            } else {
                return Err(
                    self.error(format!("expected state variable or function, found {}", Self::describe(self.peek())))
                );
            }
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error("trailing input after contract"));
        }
        Ok((Contract { name, state_vars, functions }, var_lines, fn_lines))
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Tok::Kw(Kw::Uint | Kw::Bool | Kw::Address | Kw::Mapping))
    }

    fn ty(&mut self, allow_mapping: bool) -> Result<Type, ParseError> {
        match self.peek() {
            Tok::Kw(Kw::Uint) => {
                self.advance();
                Ok(Type::Uint)
            }
            Tok::Kw(Kw::Bool) => {
                self.advance();
                Ok(Type::Bool)
            }
            Tok::Kw(Kw::Address) => {
                self.advance();
                Ok(Type::Address)
            }
            Tok::Kw(Kw::Mapping) if allow_mapping => {
                self.advance();
                self.expect_sym("(")?;
                let k = self.ty(false)?;
                self.expect_sym("=>")?;
                let v = self.ty(true)?;
                self.expect_sym(")")?;
                Ok(Type::Mapping(Box::new(k), Box::new(v)))
            }
            Tok::Kw(Kw::Mapping) => Err(self.error("mapping type not allowed here")),
            t => Err(self.error(format!("expected type, found {}", Self::describe(t)))),
        }
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.eat_sym(")") {
            loop {
                let ty = self.ty(false)?;
                let pname = self.ident()?;
                params.push(Param { name: pname, ty });
                if self.eat_sym(")") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        let payable = self.eat_kw(Kw::Payable);
        let returns = if self.eat_kw(Kw::Returns) {
            self.expect_sym("(")?;
            let t = self.ty(false)?;
            self.expect_sym(")")?;
            Some(t)
        } else {
            None
        };
        let body = self.block()?;
        Ok(Function { name, params, returns, body, payable })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.eat_sym("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unexpected end of input, expected `}`"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        // Recorded before the body so nested statements follow their parent.
        self.stmt_lines.push(self.here().line);
        self.stmt_inner()
    }

    fn stmt_inner(&mut self) -> Result<Stmt, ParseError> {
        if self.at_type() {
            let ty = self.ty(false)?;
            let name = self.ident()?;
            let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
            self.expect_sym(";")?;
            return Ok(Stmt::VarDecl { name, ty, init });
        }
        if self.eat_kw(Kw::If) {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then_block = self.block()?;
            let else_block = if self.eat_kw(Kw::Else) {
                if *self.peek() == Tok::Kw(Kw::If) {
                    let nested = self.stmt()?;
                    Some(Block { stmts: vec![nested] })
                } else {
                    Some(self.block()?)
                }
            } else {
                None
            };
            return Ok(Stmt::If { cond, then_block, else_block });
        }
        if self.eat_kw(Kw::While) {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw(Kw::Require) {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(Stmt::Require(cond));
        }
        if self.eat_kw(Kw::Return) {
            if self.eat_sym(";") {
                return Ok(Stmt::Return(None));
            }
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Return(Some(e)));
        }
        let start = self.here().clone();
        let e = self.expr()?;
        if self.eat_sym("=") {
            let target = match e {
                Expr::Var(n) => LValue::Var(n),
                Expr::Index { name, key } => LValue::Index { name, key: *key },
                _ => return Err(ParseError::new(start.line, start.col, "invalid assignment target")),
            };
            let value = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Assign { target, value });
        }
        self.expect_sym(";")?;
        Ok(Stmt::Expr(e))
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop_at(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop_at() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            return Ok(Expr::negate(self.unary()?));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            if *self.peek() == Tok::Sym(".") && *self.peek_at(1) == Tok::Kw(Kw::Send) {
                self.advance();
                self.advance();
                self.expect_sym("(")?;
                let amount = self.expr()?;
                self.expect_sym(")")?;
                e = Expr::Send { target: Box::new(e), amount: Box::new(amount) };
            } else if *self.peek() == Tok::Sym("[") {
                let Expr::Var(name) = e else {
                    return Err(self.error("only named mappings can be indexed"));
                };
                self.advance();
                let key = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::Index { name, key: Box::new(key) };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::Kw(Kw::True) => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Kw(Kw::False) => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Kw(Kw::Msg) => {
                self.advance();
                self.expect_sym(".")?;
                let field = self.ident()?;
                match field.as_str() {
                    "sender" => Ok(Expr::MsgSender),
                    "value" => Ok(Expr::MsgValue),
                    _ => Err(self.error(format!("unknown field `msg.{field}`"))),
                }
            }
            Tok::Kw(Kw::Balance) => {
                self.advance();
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::Balance(Box::new(e)))
            }
            Tok::Ident(name) => {
                self.advance();
                Ok(Expr::Var(name))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            t => Err(self.error(format!("expected expression, found {}", Self::describe(&t)))),
        }
    }
}

/// Parses a single statement (used for synthesized-statement text in patches).
pub fn parse_stmt(src: &str) -> Result<Stmt, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, stmt_lines: Vec::new() };
    let s = p.stmt()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("trailing input after statement"));
    }
    Ok(s)
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, stmt_lines: Vec::new() };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("trailing input after expression"));
    }
    Ok(e)
}
