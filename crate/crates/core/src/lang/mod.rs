//! The MiniSol contract language: syntax tree, parser, printer, type checker
//! and the catalog of mutable sites.

pub mod ast;
mod lexer;
pub mod nav;
mod parser;
mod printer;
pub mod scope;
mod sites;
mod typeck;

use std::fmt;

pub use ast::*;
pub use lexer::is_reserved;
pub use parser::{parse, parse_expr, parse_stmt, parse_with_source_map, SourceMap};
pub use printer::{expr_to_string, lvalue_to_string, pretty_print, stmt_to_source, stmt_to_string};
pub use sites::{mutable_sites, MutableSites, Site};
pub use typeck::{infer, is_compilable, typecheck, TypeError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
contract Commercial {
    address partyA;
    address partyB;
    address owner;
    bool paidA;
    bool paidB;
    uint price = 100;

    function transferA() payable {
        require(msg.sender == partyA);
        require(msg.value == price);
        paidA = true;
    }

    function transferB() payable {
        require(msg.sender == partyB);
        require(msg.value == price);
        paidB = true;
    }

    function finalize() {
        require(paidA && paidB);
        owner = partyA;
        require(partyB.send(price));
        paidA = false;
        paidB = false;
    }

    function abortA() {
        require(paidA && !paidB);
        paidA = false;
        require(partyA.send(price));
    }

    function abortB() {
        require(paidB && !paidA);
        paidB = false;
        require(partyB.send(price));
    }
}
"#;

    #[test]
    fn parses_five_function_contract() {
        let c = parse(FIG1).unwrap();
        assert_eq!(c.functions.len(), 5);
        assert!(typecheck(&c).is_ok());
    }

    #[test]
    fn empty_contract() {
        let c = parse("contract X {}").unwrap();
        assert!(c.functions.is_empty() && c.state_vars.is_empty());
        assert_eq!(parse(&pretty_print(&c)).unwrap(), c);
    }

    #[test]
    fn loop_program_has_one_while() {
        let c = parse("contract L { uint s; function f() { bool a = true; while (a) { s = s + 1; a = false; } } }")
            .unwrap();
        let whiles = c.functions[0].body.stmts.iter().filter(|s| matches!(s, Stmt::While { .. })).count();
        assert_eq!(whiles, 1);
    }

    #[test]
    fn round_trip_and_precedence() {
        let src = "contract P { uint x; function f(uint a, uint b) returns (bool) { x = a - (b - 1) * 2 / (a + b); return !(a < b) && (a == b || b != 0); } }";
        let c = parse(src).unwrap();
        let text = pretty_print(&c);
        assert_eq!(parse(&text).unwrap(), c);
        assert!(text.contains("x = a - (b - 1) * 2 / (a + b);"));
        assert!(text.contains("return !(a < b) && (a == b || b != 0);"));
    }

    #[test]
    fn parse_error_reports_position() {
        let e = parse("contract X {\n  function f() {\n    x = ;\n  }\n}").unwrap_err();
        assert_eq!((e.line, e.col), (3, 9));
    }

    #[test]
    fn bool_into_uint_rejected_at_assign() {
        let c = parse("contract T { uint x; function f() { x = true; } }").unwrap();
        let errs = typecheck(&c).unwrap_err();
        assert!(errs[0].path.starts_with(&NodePath(vec![1, 0, 0])));
    }

    #[test]
    fn use_before_declaration_rejected() {
        let c = parse("contract T { uint x; function f() { x = y; uint y = 1; } }").unwrap();
        assert!(typecheck(&c).is_err());
    }

    #[test]
    fn shadowing_rejected() {
        let c = parse("contract T { uint x; function f() { uint x = 1; } }").unwrap();
        assert!(typecheck(&c).is_err());
        let c = parse("contract T { function f(uint a) { if (true) { uint a = 1; } } }").unwrap();
        assert!(typecheck(&c).is_err());
    }

    #[test]
    fn sibling_block_locals_are_independent() {
        let c = parse("contract T { function f() { if (true) { uint a = 1; } else { uint a = 2; } } }").unwrap();
        assert!(typecheck(&c).is_ok());
    }

    #[test]
    fn source_map_lines() {
        let src =
            "contract S {\n  uint x;\n  function f() {\n    x = 1;\n    if (x == 1) {\n      x = 2;\n    }\n  }\n}";
        let (c, map) = parse_with_source_map(src).unwrap();
        let body = c.function_body_path(0);
        assert_eq!(map.line_of(&body.child(0)), Some(4));
        assert_eq!(map.line_of(&body.child(1).child(1).child(0)), Some(6));
        assert_eq!(map.line_of(&body.child(1).child(0)), Some(5));
    }

    #[test]
    fn empty_bodies_have_block_sites_only() {
        let c = parse("contract E { function f() { } function g() { } }").unwrap();
        let s = mutable_sites(&c, &[], 0);
        assert!(s.statements.is_empty() && s.expressions.is_empty());
        assert_eq!(s.blocks.len(), 2);
    }

    #[test]
    fn else_if_chains_parse() {
        let c = parse("contract E { uint x; function f(uint a) { if (a == 0) { x = 1; } else if (a == 1) { x = 2; } else { x = 3; } } }").unwrap();
        assert!(typecheck(&c).is_ok());
        assert_eq!(parse(&pretty_print(&c)).unwrap(), c);
    }
}
