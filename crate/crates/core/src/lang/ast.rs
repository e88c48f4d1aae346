//! Abstract syntax tree for MiniSol.
//!
//! Nodes carry no source positions: two trees are structurally equal exactly
//! when `==` holds. Node identity is positional (see [`NodePath`]).

use std::fmt;

use ethnum::U256;
use serde::{Deserialize, Serialize};

/// Value types plus the storage-only mapping type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Uint,
    Bool,
    Address,
    Mapping(Box<Type>, Box<Type>),
}

impl Type {
    pub fn is_mapping(&self) -> bool {
        matches!(self, Type::Mapping(..))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Uint => f.write_str("uint"),
            Type::Bool => f.write_str("bool"),
            Type::Address => f.write_str("address"),
            Type::Mapping(k, v) => write!(f, "mapping({k} => {v})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ARITHMETIC: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];
    pub const RELATIONAL: [BinOp; 4] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];
    pub const EQUALITY: [BinOp; 2] = [BinOp::Eq, BinOp::Ne];
    pub const LOGICAL: [BinOp; 2] = [BinOp::And, BinOp::Or];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        Self::ARITHMETIC.contains(&self)
    }

    pub fn is_relational(self) -> bool {
        Self::RELATIONAL.contains(&self)
    }

    pub fn is_equality(self) -> bool {
        Self::EQUALITY.contains(&self)
    }

    pub fn is_logical(self) -> bool {
        Self::LOGICAL.contains(&self)
    }

    /// Operators that may wrap around on uint operands.
    pub fn can_overflow(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    /// The other operators of the same family (used for operator substitution).
    pub fn siblings(self) -> &'static [BinOp] {
        if self.is_arithmetic() {
            &Self::ARITHMETIC
        } else if self.is_relational() || self.is_equality() {
            &[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne]
        } else {
            &Self::LOGICAL
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(U256),
    Bool(bool),
    Var(String),
    Index {
        name: String,
        key: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    MsgSender,
    MsgValue,
    Balance(Box<Expr>),
    /// `target.send(amount)`; evaluates to the success flag and never throws.
    Send {
        target: Box<Expr>,
        amount: Box<Expr>,
    },
}

impl Expr {
    pub fn int(v: u64) -> Expr {
        Expr::Int(U256::from(v))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Bool(_))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::MsgSender | Expr::MsgValue => vec![],
            Expr::Index { key, .. } => vec![key],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Not(e) | Expr::Balance(e) => vec![e],
            Expr::Send { target, amount } => vec![target, amount],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::MsgSender | Expr::MsgValue => vec![],
            Expr::Index { key, .. } => vec![key],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Not(e) | Expr::Balance(e) => vec![e],
            Expr::Send { target, amount } => vec![target, amount],
        }
    }

    /// Names read by this expression (variables and mappings), in evaluation order.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(n) => out.push(n),
            Expr::Index { name, key } => {
                key.collect_names(out);
                out.push(name);
            }
            _ => {
                for c in self.children() {
                    c.collect_names(out);
                }
            }
        }
    }

    pub fn contains_send(&self) -> bool {
        matches!(self, Expr::Send { .. }) || self.children().iter().any(|c| c.contains_send())
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Index { name: String, key: Expr },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index { name: n, .. } => n,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    VarDecl { name: String, ty: Type, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    Require(Expr),
    Return(Option<Expr>),
    Expr(Expr),
}

impl Stmt {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Stmt::VarDecl { .. } => "decl",
            Stmt::Assign { .. } => "assign",
            Stmt::If { .. } => "if",
            Stmt::While { .. } => "while",
            Stmt::Require(_) => "require",
            Stmt::Return(_) => "return",
            Stmt::Expr(_) => "expr",
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(self, Stmt::If { .. } | Stmt::While { .. })
    }

    pub fn size(&self) -> usize {
        let exprs: usize = match self {
            Stmt::VarDecl { init, .. } => init.as_ref().map_or(0, Expr::size),
            Stmt::Assign { target, value } => {
                value.size()
                    + match target {
                        LValue::Index { key, .. } => key.size(),
                        LValue::Var(_) => 0,
                    }
            }
            Stmt::If { cond, then_block, else_block } => {
                cond.size() + block_size(then_block) + else_block.as_ref().map_or(0, block_size)
            }
            Stmt::While { cond, body } => cond.size() + block_size(body),
            Stmt::Require(e) | Stmt::Expr(e) => e.size(),
            Stmt::Return(e) => e.as_ref().map_or(0, Expr::size),
        };
        1 + exprs
    }
}

pub(crate) fn block_size(b: &Block) -> usize {
    1 + b.stmts.iter().map(Stmt::size).sum::<usize>()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Option<Type>,
    pub body: Block,
    pub payable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateVar {
    pub name: String,
    pub ty: Type,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Contract {
    pub name: String,
    pub state_vars: Vec<StateVar>,
    pub functions: Vec<Function>,
}

impl Contract {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    /// Path of the body block of function `index`.
    pub fn function_body_path(&self, index: usize) -> NodePath {
        NodePath(vec![(self.state_vars.len() + index) as u32, 0])
    }

    /// Content hash of the canonical pretty-printed form.
    pub fn content_hash(&self) -> ContractHash {
        use sha2::{Digest, Sha256};
        let text = crate::lang::pretty_print(self);
        let digest = Sha256::digest(text.as_bytes());
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&digest);
        ContractHash(bytes)
    }

    /// Total number of AST nodes.
    pub fn size(&self) -> usize {
        let vars: usize = self.state_vars.iter().map(|v| 1 + v.init.as_ref().map_or(0, Expr::size)).sum();
        let funcs: usize = self.functions.iter().map(|f| 1 + block_size(&f.body)).sum();
        1 + vars + funcs
    }
}

/// SHA-256 of a contract's canonical text.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContractHash(pub [u8; 32]);

impl ContractHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..6])
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(ContractHash(arr))
    }
}

impl fmt::Debug for ContractHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContractHash({})", self.short())
    }
}

impl fmt::Display for ContractHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for ContractHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContractHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ContractHash::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad contract hash"))
    }
}

/// Child-index path from the contract root.
///
/// Child order: contract = state vars then functions; state var = [init];
/// function = [body]; block = statements; statements and expressions list
/// their sub-blocks and operands left to right (an indexed assignment
/// target contributes its key expression before the value).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodePath(pub Vec<u32>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, i: usize) -> NodePath {
        let mut v = self.0.clone();
        v.push(i as u32);
        NodePath(v)
    }

    pub fn parent(&self) -> Option<NodePath> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodePath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().map(|&i| i as usize)
    }

    pub fn starts_with(&self, prefix: &NodePath) -> bool {
        self.0.starts_with(&prefix.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("/"))
    }
}

/// A node reference valid for one tree generation (number of edits applied
/// since the original contract).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub path: NodePath,
    pub generation: u32,
}

impl NodeId {
    pub fn new(path: NodePath, generation: u32) -> Self {
        NodeId { path, generation }
    }
}
