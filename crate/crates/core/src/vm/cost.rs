use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lang::BinOp;

pub const DEFAULT_COST_TABLE: &str = include_str!("default_costs.toml");

/// Gas price of every step kind the interpreter charges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub add: u64,
    pub sub: u64,
    pub mul: u64,
    pub div: u64,
    pub compare: u64,
    pub logic: u64,
    pub not: u64,
    pub literal: u64,
    pub local_load: u64,
    pub state_load: u64,
    pub mapping_load: u64,
    pub msg_sender: u64,
    pub msg_value: u64,
    pub balance: u64,
    pub send: u64,
    pub local_store: u64,
    pub sstore_zero: u64,
    pub sstore_nonzero: u64,
    pub branch: u64,
    pub loop_entry: u64,
    pub jump: u64,
    #[serde(rename = "return")]
    pub ret: u64,
    pub pop: u64,
    pub call: u64,
    pub block: u64,
    pub memory_word: u64,
    /// Divisor of the quadratic memory term `words^2 / divisor`; 0 disables it.
    pub memory_quadratic_divisor: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CostTableError {
    #[error("cannot read cost table: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid cost table: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cost `{0}` must be positive")]
    NonPositive(&'static str),
}

impl Default for CostTable {
    fn default() -> Self {
        toml::from_str(DEFAULT_COST_TABLE).expect("embedded cost table is valid")
    }
}

/// One priced step of execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Compare,
    Logic,
    Not,
    Literal,
    LocalLoad,
    StateLoad,
    MappingLoad,
    MsgSender,
    MsgValue,
    Balance,
    Send,
    LocalStore,
    SStore {
        zero: bool,
    },
    Branch,
    LoopEntry,
    Jump,
    Return,
    Pop,
    Call,
    Block,
    /// Frame memory allocation of the given number of words.
    Memory {
        words: u64,
    },
}

impl OpKind {
    pub fn of_binop(op: BinOp) -> OpKind {
        match op {
            BinOp::Add => OpKind::Add,
            BinOp::Sub => OpKind::Sub,
            BinOp::Mul => OpKind::Mul,
            BinOp::Div => OpKind::Div,
            BinOp::And | BinOp::Or => OpKind::Logic,
            _ => OpKind::Compare,
        }
    }
}

impl CostTable {
    pub fn from_toml(text: &str) -> Result<Self, CostTableError> {
        let t: CostTable = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, CostTableError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), CostTableError> {
        let checks: [(&'static str, u64); 25] = [
            ("add", self.add),
            ("sub", self.sub),
            ("mul", self.mul),
            ("div", self.div),
            ("compare", self.compare),
            ("logic", self.logic),
            ("not", self.not),
            ("literal", self.literal),
            ("local_load", self.local_load),
            ("state_load", self.state_load),
            ("mapping_load", self.mapping_load),
            ("msg_sender", self.msg_sender),
            ("msg_value", self.msg_value),
            ("balance", self.balance),
            ("send", self.send),
            ("local_store", self.local_store),
            ("sstore_zero", self.sstore_zero),
            ("sstore_nonzero", self.sstore_nonzero),
            ("branch", self.branch),
            ("loop_entry", self.loop_entry),
            ("jump", self.jump),
            ("return", self.ret),
            ("pop", self.pop),
            ("call", self.call),
            ("memory_word", self.memory_word),
        ];
        for (name, v) in checks {
            if v == 0 {
                return Err(CostTableError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("cost table serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Memory expansion cost of a frame of `words` words.
    pub fn memory_cost(&self, words: u64) -> u64 {
        let quad = (words * words).checked_div(self.memory_quadratic_divisor).unwrap_or(0);
        self.memory_word * words + quad
    }

    /// Gas charged for a single step.
    pub fn instruction_gas(&self, kind: OpKind) -> u64 {
        match kind {
            OpKind::Add => self.add,
            OpKind::Sub => self.sub,
            OpKind::Mul => self.mul,
            OpKind::Div => self.div,
            OpKind::Compare => self.compare,
            OpKind::Logic => self.logic,
            OpKind::Not => self.not,
            OpKind::Literal => self.literal,
            OpKind::LocalLoad => self.local_load,
            OpKind::StateLoad => self.state_load,
            OpKind::MappingLoad => self.mapping_load,
            OpKind::MsgSender => self.msg_sender,
            OpKind::MsgValue => self.msg_value,
            OpKind::Balance => self.balance,
            OpKind::Send => self.send,
            OpKind::LocalStore => self.local_store,
            OpKind::SStore { zero: true } => self.sstore_zero,
            OpKind::SStore { zero: false } => self.sstore_nonzero,
            OpKind::Branch => self.branch,
            OpKind::LoopEntry => self.loop_entry,
            OpKind::Jump => self.jump,
            OpKind::Return => self.ret,
            OpKind::Pop => self.pop,
            OpKind::Call => self.call,
            OpKind::Block => self.block,
            OpKind::Memory { words } => self.memory_cost(words),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_anchors() {
        let t = CostTable::default();
        assert_eq!(t.instruction_gas(OpKind::Add), 3);
        assert_eq!(t.instruction_gas(OpKind::SStore { zero: true }), 4);
        assert_eq!(t.instruction_gas(OpKind::SStore { zero: false }), 68);
        assert_eq!(t.instruction_gas(OpKind::Block), 0);
        assert_eq!(t.instruction_gas(OpKind::Memory { words: 4 }), 12);
    }

    #[test]
    fn round_trips_through_toml() {
        let t = CostTable::default();
        let text = toml::to_string(&t).unwrap();
        assert_eq!(CostTable::from_toml(&text).unwrap(), t);
        assert_eq!(t.hash().len(), 64);
    }

    #[test]
    fn rejects_zero_and_unknown_keys() {
        let text = DEFAULT_COST_TABLE.replace("add = 3", "add = 0");
        assert!(matches!(CostTable::from_toml(&text), Err(CostTableError::NonPositive("add"))));
        let text = format!("{DEFAULT_COST_TABLE}\nbogus = 1\n");
        assert!(CostTable::from_toml(&text).is_err());
    }

    #[test]
    fn quadratic_memory_term() {
        let t = CostTable { memory_quadratic_divisor: 512, ..CostTable::default() };
        assert_eq!(t.memory_cost(64), 3 * 64 + 8);
    }
}
