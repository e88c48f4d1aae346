use ethnum::U256;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(U256),
    Kw(Kw),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kw {
    Contract,
    Function,
    Payable,
    Returns,
    Uint,
    Bool,
    Address,
    Mapping,
    If,
    Else,
    While,
    Require,
    Return,
    True,
    False,
    Msg,
    Balance,
    Send,
}

const KEYWORDS: &[(&str, Kw)] = &[
    ("contract", Kw::Contract),
    ("function", Kw::Function),
    ("payable", Kw::Payable),
    ("returns", Kw::Returns),
    ("uint", Kw::Uint),
    ("uint256", Kw::Uint),
    ("bool", Kw::Bool),
    ("address", Kw::Address),
    ("mapping", Kw::Mapping),
    ("if", Kw::If),
    ("else", Kw::Else),
    ("while", Kw::While),
    ("require", Kw::Require),
    ("return", Kw::Return),
    ("true", Kw::True),
    ("false", Kw::False),
    ("msg", Kw::Msg),
    ("balance", Kw::Balance),
    ("send", Kw::Send),
];

// Longest symbols first so that maximal munch works by linear scan.
const SYMBOLS: &[&str] = &[
    "=>", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-",
    "*", "/", "!",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.iter().any(|(k, _)| *k == word)
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(sl, sc, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|(k, _)| *k == word) {
                Some((_, kw)) => Tok::Kw(*kw),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, line: sl, col: sc });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let hex = c == '0' && matches!(chars.get(i + 1), Some('x') | Some('X'));
            if hex {
                bump!();
                bump!();
            }
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().filter(|&&ch| ch != '_').collect();
            let parsed = if hex { U256::from_str_radix(&text[2..], 16) } else { U256::from_str_radix(&text, 10) };
            let value = parsed.map_err(|_| ParseError::new(sl, sc, format!("invalid integer literal `{text}`")))?;
            out.push(Token { tok: Tok::Int(value), line: sl, col: sc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Sym(sym), line: sl, col: sc });
            }
            None => return Err(ParseError::new(sl, sc, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_use_maximal_munch() {
        let toks = tokenize("a<=b => !=").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("<="),
                Tok::Ident("b".into()),
                Tok::Sym("=>"),
                Tok::Sym("!="),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("// hi\n/* a\n b */ x").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("x".into()));
        assert_eq!((toks[0].line, toks[0].col), (3, 7));
    }

    #[test]
    fn hex_literal() {
        let toks = tokenize("0xff 1_000").unwrap();
        assert_eq!(toks[0].tok, Tok::Int(U256::from(255u32)));
        assert_eq!(toks[1].tok, Tok::Int(U256::from(1000u32)));
    }

    #[test]
    fn literal_too_large_is_error() {
        let big = format!("{}0", U256::MAX);
        assert!(tokenize(&big).is_err());
    }
}
