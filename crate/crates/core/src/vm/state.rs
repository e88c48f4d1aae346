use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ethnum::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lang::{Contract, Expr};

/// Parses a decimal or `0x`-prefixed hexadecimal unsigned integer.
pub fn parse_u256(s: &str) -> Option<U256> {
    let s = s.trim();
    if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        U256::from_str_radix(h, 16).ok()
    } else {
        U256::from_str_radix(s, 10).ok()
    }
}

/// Serde adapter rendering `U256` as a decimal string.
pub mod u256_dec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &U256, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<U256, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Num(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) => parse_u256(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid integer `{s}`"))),
            Raw::Num(n) => Ok(U256::from(n)),
        }
    }
}

/// Serde adapter for `Option<U256>`.
pub mod opt_u256_dec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<U256>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<U256>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| parse_u256(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid integer `{s}`"))))
            .transpose()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub U256);

impl Address {
    pub fn from_u64(v: u64) -> Self {
        Address(U256::from(v))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:040x}", self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_u256(s).map(Address).ok_or_else(|| format!("invalid address `{s}`"))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Storage slot name: `var` for scalars, `map[key]` (decimal key) for mapping entries.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Slot(pub String);

impl Slot {
    pub fn var(name: &str) -> Self {
        Slot(name.to_string())
    }

    pub fn entry(name: &str, key: U256) -> Self {
        Slot(format!("{name}[{key}]"))
    }

    /// The state variable this slot belongs to.
    pub fn var_name(&self) -> &str {
        self.0.split('[').next().unwrap_or(&self.0)
    }
}

impl fmt::Debug for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    #[serde(with = "u256_dec")]
    pub balance: U256,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "storage_dec")]
    pub storage: BTreeMap<Slot, U256>,
}

mod storage_dec {
    use super::*;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Slot, U256>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&str, String> = m.iter().map(|(k, v)| (k.0.as_str(), v.to_string())).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Slot, U256>, D::Error> {
        let raw: BTreeMap<String, String> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                parse_u256(&v)
                    .map(|v| (Slot(k), v))
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid integer `{v}`")))
            })
            .collect()
    }
}

/// Balances and storage of all accounts plus the address of the contract
/// under execution. Missing accounts, balances and slots read as zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub contract: Address,
    pub accounts: BTreeMap<Address, Account>,
}

impl WorldState {
    pub fn new(contract: Address) -> Self {
        WorldState { contract, accounts: BTreeMap::new() }
    }

    /// Fresh state with `c` deployed at `contract` holding `balance`, storage
    /// set from the state variable initializers.
    pub fn deploy(c: &Contract, contract: Address, balance: U256) -> Self {
        let mut s = WorldState::new(contract);
        s.set_balance(contract, balance);
        for v in &c.state_vars {
            let value = match &v.init {
                Some(Expr::Int(n)) => *n,
                Some(Expr::Bool(true)) => U256::ONE,
                _ => continue,
            };
            s.store(Slot::var(&v.name), value);
        }
        s
    }

    pub fn balance(&self, a: Address) -> U256 {
        self.accounts.get(&a).map_or(U256::ZERO, |acc| acc.balance)
    }

    pub fn set_balance(&mut self, a: Address, v: U256) {
        self.accounts.entry(a).or_default().balance = v;
    }

    pub fn load(&self, slot: &Slot) -> U256 {
        self.accounts.get(&self.contract).and_then(|acc| acc.storage.get(slot)).copied().unwrap_or(U256::ZERO)
    }

    pub fn store(&mut self, slot: Slot, v: U256) {
        self.accounts.entry(self.contract).or_default().storage.insert(slot, v);
    }

    /// Moves `amount` from `from` to `to`; false (and no change) if `from` lacks funds.
    pub fn transfer(&mut self, from: Address, to: Address, amount: U256) -> bool {
        let fb = self.balance(from);
        if fb < amount {
            return false;
        }
        self.set_balance(from, fb - amount);
        let tb = self.balance(to);
        self.set_balance(to, tb.wrapping_add(amount));
        true
    }

    /// Sum of all balances; `None` if it does not fit in 256 bits.
    pub fn total_balance(&self) -> Option<U256> {
        self.accounts.values().try_fold(U256::ZERO, |acc, a| acc.checked_add(a.balance))
    }
}
