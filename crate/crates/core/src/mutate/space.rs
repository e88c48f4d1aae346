use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{apply_chain, OpTag, Patch};
use crate::lang::Contract;

/// The seven mutually exclusive search spaces, one per nonempty operator set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpaceId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
}

impl SpaceId {
    pub const ALL: [SpaceId; 7] =
        [SpaceId::S1, SpaceId::S2, SpaceId::S3, SpaceId::S4, SpaceId::S5, SpaceId::S6, SpaceId::S7];

    pub fn ops(self) -> &'static [OpTag] {
        use OpTag::*;
        match self {
            SpaceId::S1 => &[M],
            SpaceId::S2 => &[R],
            SpaceId::S3 => &[I],
            SpaceId::S4 => &[M, R],
            SpaceId::S5 => &[M, I],
            SpaceId::S6 => &[R, I],
            SpaceId::S7 => &[M, R, I],
        }
    }

    /// The space whose operator set equals the set of tags in `trace`.
    pub fn of_trace(trace: &[OpTag]) -> Option<SpaceId> {
        let set: BTreeSet<OpTag> = trace.iter().copied().collect();
        SpaceId::ALL.into_iter().find(|s| s.ops().iter().copied().collect::<BTreeSet<_>>() == set)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Accept,
    Reject,
}

/// Accepts `p` in space `s` iff its operator trace uses exactly the operators
/// of `s` and every contract along the edit chain differs from all earlier ones.
pub fn space_validity(s: SpaceId, p: &Patch, base: &Contract) -> Validity {
    if p.base != base.content_hash() || SpaceId::of_trace(&p.operator_trace()) != Some(s) {
        return Validity::Reject;
    }
    let Ok(chain) = apply_chain(base, &p.edits) else { return Validity::Reject };
    let mut seen = BTreeSet::new();
    for c in &chain {
        if !seen.insert(c.content_hash()) {
            return Validity::Reject;
        }
    }
    Validity::Accept
}
