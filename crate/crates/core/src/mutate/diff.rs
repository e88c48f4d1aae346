use crate::lang::*;

/// Labeled ordered tree used for structural comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub label: String,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Tree { label: label.into(), children: Vec::new() }
    }

    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Self {
        Tree { label: label.into(), children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
}

pub fn to_tree(c: &Contract) -> Tree {
    let mut kids: Vec<Tree> = c
        .state_vars
        .iter()
        .map(|v| Tree::node(format!("state {}: {}", v.name, v.ty), v.init.iter().map(expr_tree).collect()))
        .collect();
    for f in &c.functions {
        let params: Vec<String> = f.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        let ret = f.returns.as_ref().map(|t| format!(" returns {t}")).unwrap_or_default();
        let pay = if f.payable { " payable" } else { "" };
        kids.push(Tree::node(
            format!("function {}({}){}{}", f.name, params.join(", "), ret, pay),
            vec![block_tree(&f.body)],
        ));
    }
    Tree::node(format!("contract {}", c.name), kids)
}

pub(crate) fn block_tree(b: &Block) -> Tree {
    Tree::node("block", b.stmts.iter().map(stmt_tree).collect())
}

pub(crate) fn stmt_tree(s: &Stmt) -> Tree {
    match s {
        Stmt::VarDecl { name, ty, init } => {
            Tree::node(format!("decl {ty} {name}"), init.iter().map(expr_tree).collect())
        }
        Stmt::Assign { target: LValue::Var(n), value } => Tree::node(format!("assign {n}"), vec![expr_tree(value)]),
        Stmt::Assign { target: LValue::Index { name, key }, value } => {
            Tree::node(format!("assign {name}[]"), vec![expr_tree(key), expr_tree(value)])
        }
        Stmt::If { cond, then_block, else_block } => {
            let mut kids = vec![expr_tree(cond), block_tree(then_block)];
            kids.extend(else_block.iter().map(block_tree));
            Tree::node("if", kids)
        }
        Stmt::While { cond, body } => Tree::node("while", vec![expr_tree(cond), block_tree(body)]),
        Stmt::Require(e) => Tree::node("require", vec![expr_tree(e)]),
        Stmt::Return(e) => Tree::node("return", e.iter().map(expr_tree).collect()),
        Stmt::Expr(e) => Tree::node("expr", vec![expr_tree(e)]),
    }
}

pub(crate) fn expr_tree(e: &Expr) -> Tree {
    let label = match e {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(n) => n.clone(),
        Expr::Index { name, .. } => format!("{name}[]"),
        Expr::Binary { op, .. } => op.symbol().to_string(),
        Expr::Not(_) => "!".into(),
        Expr::MsgSender => "msg.sender".into(),
        Expr::MsgValue => "msg.value".into(),
        Expr::Balance(_) => "balance".into(),
        Expr::Send { .. } => "send".into(),
    };
    Tree::node(label, e.children().into_iter().map(expr_tree).collect())
}

/// Top-down edit distance between two trees: a relabeled node costs 1, and
/// children are aligned in order, with unmatched subtrees costing their size.
pub fn tree_distance(a: &Tree, b: &Tree) -> usize {
    let relabel = usize::from(a.label != b.label);
    let (n, m) = (a.children.len(), b.children.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        dp[i][0] = dp[i - 1][0] + a.children[i - 1].size();
    }
    for j in 1..=m {
        dp[0][j] = dp[0][j - 1] + b.children[j - 1].size();
    }
    for i in 1..=n {
        for j in 1..=m {
            let del = dp[i - 1][j] + a.children[i - 1].size();
            let ins = dp[i][j - 1] + b.children[j - 1].size();
            let sub = dp[i - 1][j - 1] + tree_distance(&a.children[i - 1], &b.children[j - 1]);
            dp[i][j] = del.min(ins).min(sub);
        }
    }
    relabel + dp[n][m]
}

/// Structural distance between two contracts; 0 iff they are equal.
pub fn diff(a: &Contract, b: &Contract) -> usize {
    tree_distance(&to_tree(a), &to_tree(b))
}
