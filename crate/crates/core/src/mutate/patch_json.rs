//! JSON form of patches: paths as `/i/j/k` strings, statements and
//! expressions as MiniSol source text.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{EditOp, OpTag, Patch, Position, Replacement};
use crate::lang::*;

#[derive(Serialize, Deserialize)]
struct PatchJson {
    base: String,
    trace: Vec<OpTag>,
    edits: Vec<EditJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum EditJson {
    Move {
        src: String,
        anchor: String,
        position: Position,
        generation: u32,
    },
    Insert {
        stmt: String,
        anchor: String,
        position: Position,
        generation: u32,
    },
    Replace {
        site: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<String>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        require_wrap: bool,
        generation: u32,
    },
}

fn parse_path(s: &str) -> Result<NodePath, String> {
    let rest = s.strip_prefix('/').ok_or_else(|| format!("path `{s}` must start with /"))?;
    if rest.is_empty() {
        return Ok(NodePath::root());
    }
    rest.split('/')
        .map(|p| p.parse::<u32>().map_err(|_| format!("bad path component `{p}` in `{s}`")))
        .collect::<Result<Vec<_>, _>>()
        .map(NodePath)
}

impl From<&EditOp> for EditJson {
    fn from(e: &EditOp) -> Self {
        match e {
            EditOp::Move { src, anchor, position } => EditJson::Move {
                src: src.path.to_string(),
                anchor: anchor.path.to_string(),
                position: *position,
                generation: src.generation,
            },
            EditOp::Insert { stmt, anchor, position } => EditJson::Insert {
                stmt: stmt_to_source(stmt),
                anchor: anchor.path.to_string(),
                position: *position,
                generation: anchor.generation,
            },
            EditOp::Replace { site, with } => EditJson::Replace {
                site: site.path.to_string(),
                expr: match with {
                    Replacement::Expr(x) => Some(expr_to_string(x)),
                    Replacement::RequireWrap => None,
                },
                require_wrap: matches!(with, Replacement::RequireWrap),
                generation: site.generation,
            },
        }
    }
}

impl TryFrom<EditJson> for EditOp {
    type Error = String;

    fn try_from(e: EditJson) -> Result<Self, String> {
        let id = |p: &str, g| parse_path(p).map(|p| NodeId::new(p, g));
        Ok(match e {
            EditJson::Move { src, anchor, position, generation } => {
                EditOp::Move { src: id(&src, generation)?, anchor: id(&anchor, generation)?, position }
            }
            EditJson::Insert { stmt, anchor, position, generation } => EditOp::Insert {
                stmt: parse_stmt(&stmt).map_err(|e| format!("statement `{stmt}`: {e}"))?,
                anchor: id(&anchor, generation)?,
                position,
            },
            EditJson::Replace { site, expr, require_wrap, generation } => {
                let with = match (expr, require_wrap) {
                    (Some(x), false) => {
                        Replacement::Expr(parse_expr(&x).map_err(|e| format!("expression `{x}`: {e}"))?)
                    }
                    (None, true) => Replacement::RequireWrap,
                    _ => return Err("replace needs exactly one of `expr` or `require_wrap`".into()),
                };
                EditOp::Replace { site: id(&site, generation)?, with }
            }
        })
    }
}

impl Serialize for Patch {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PatchJson {
            base: self.base.to_hex(),
            trace: self.operator_trace(),
            edits: self.edits.iter().map(EditJson::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Patch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = PatchJson::deserialize(d)?;
        let base = ContractHash::from_hex(&j.base).ok_or_else(|| D::Error::custom("bad base hash"))?;
        let edits: Vec<EditOp> =
            j.edits.into_iter().map(EditOp::try_from).collect::<Result<_, _>>().map_err(D::Error::custom)?;
        let trace: Vec<OpTag> = edits.iter().map(EditOp::tag).collect();
        if trace != j.trace {
            return Err(D::Error::custom("operator trace does not match the edits"));
        }
        Ok(Patch { base, edits })
    }
}
