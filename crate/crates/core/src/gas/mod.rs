//! Symbolic gas: path enumeration, per-path and expected gas formulas, the
//! dominance relation between formulas, dominance levels, the reduced
//! old/new comparison and gas-bound checks.

mod dominance;
mod formula;
mod paths;
mod reduce;

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::lang::Contract;
use crate::testgen::TransactionRecord;
use crate::vm::{execute, CostTable, VmConfig};

pub use dominance::{
    compare_dominance, compare_polynomials, dominance_levels, to_polynomial, DominanceVerdict, Polynomial,
    SubstitutionBinding,
};
pub use formula::{GasFormula, Monomial, Rational, Term};
pub use paths::{
    const_truth, enumerate_paths, enumerate_paths_with_cap, loop_vars, match_trace, path_gas_formula, LoopExit,
    Outcome, Path, PathEnd, Segment, DEFAULT_PATH_CAP,
};
pub use reduce::{classify_path_sets, classify_paths, reduced_compare, PathClassification};

pub const DEFAULT_TRIP_CAP: i128 = 1024;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GasError {
    #[error("function `{function}` pushes the path count above the cap of {cap}")]
    PathExplosion { function: String, cap: usize },
    #[error("expected {expected} path weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("path weights sum to {0}, not 1")]
    WeightSum(String),
    #[error("transaction {index} does not replay: {message}")]
    Replay { index: usize, message: String },
}

/// Expected gas: the sum of path formulas weighted by path probability
/// (uniform when `weights` is `None`).
pub fn expected_from_paths(
    paths: &[Path],
    tbl: &CostTable,
    weights: Option<&[Rational]>,
) -> Result<GasFormula, GasError> {
    if paths.is_empty() {
        return Ok(GasFormula::zero());
    }
    let uniform: Vec<Rational>;
    let w = match weights {
        Some(w) => {
            if w.len() != paths.len() {
                return Err(GasError::WeightCount { expected: paths.len(), got: w.len() });
            }
            let total: Rational = w.iter().copied().fold(Rational::zero(), |a, b| a + b);
            if !total.is_one() {
                return Err(GasError::WeightSum(total.to_string()));
            }
            w
        }
        None => {
            uniform = vec![Rational::new(1, paths.len() as i128); paths.len()];
            &uniform
        }
    };
    Ok(paths.iter().zip(w).map(|(p, wi)| path_gas_formula(p, tbl).scale(*wi)).sum())
}

pub fn expected_gas_formula(
    c: &Contract,
    tbl: &CostTable,
    weights: Option<&[Rational]>,
) -> Result<GasFormula, GasError> {
    expected_from_paths(&enumerate_paths(c)?, tbl, weights)
}

/// Total gas of replaying a transaction log on `c`.
pub fn lifespan_gas(c: &Contract, log: &[TransactionRecord], cfg: &VmConfig) -> Result<u64, GasError> {
    let mut total = 0u64;
    for (index, rec) in log.iter().enumerate() {
        let env = rec.call.to_env(c).map_err(|message| GasError::Replay { index, message })?;
        let r =
            execute(c, &rec.pre_state, &env, cfg).map_err(|e| GasError::Replay { index, message: e.to_string() })?;
        total += r.gas_used;
    }
    Ok(total)
}

/// Path probabilities estimated from how often the log's transactions follow
/// each path. Falls back to uniform weights when no transaction matches.
pub fn path_weights_from_log(
    c: &Contract,
    paths: &[Path],
    log: &[TransactionRecord],
    cfg: &VmConfig,
) -> Result<Vec<Rational>, GasError> {
    let mut counts = vec![0i128; paths.len()];
    for (index, rec) in log.iter().enumerate() {
        let env = rec.call.to_env(c).map_err(|message| GasError::Replay { index, message })?;
        let r =
            execute(c, &rec.pre_state, &env, cfg).map_err(|e| GasError::Replay { index, message: e.to_string() })?;
        if let Some((i, _)) = match_trace(paths, &env.function, &r.trace) {
            counts[i] += 1;
        }
    }
    let total: i128 = counts.iter().sum();
    if total == 0 {
        return Ok(vec![Rational::new(1, paths.len().max(1) as i128); paths.len()]);
    }
    Ok(counts.into_iter().map(|n| Rational::new(n, total)).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundCheck {
    WithinBound,
    /// `gas` is `None` when a loop on the path can iterate forever.
    Exceeds {
        function: String,
        path: usize,
        witness: BTreeMap<String, i128>,
        gas: Option<u64>,
    },
}

/// Checks every path's formula, maximized over trip counts in `0..=trip_cap`,
/// against the inclusive bound `limit`.
pub fn check_gas_bound(c: &Contract, limit: u64, tbl: &CostTable, trip_cap: i128) -> Result<BoundCheck, GasError> {
    let paths = enumerate_paths(c)?;
    for (i, p) in paths.iter().enumerate() {
        let unbounded = p.unbounded_vars();
        if !unbounded.is_empty() {
            let witness = unbounded.into_iter().map(|v| (v, trip_cap + 1)).collect();
            return Ok(BoundCheck::Exceeds { function: p.function.clone(), path: i, witness, gas: None });
        }
        let f = path_gas_formula(p, tbl);
        let vars = f.variables();
        let (max, witness) = maximize(&f, &vars, trip_cap);
        if max > Rational::from_integer(limit as i128) {
            let gas = Some(max.to_integer().try_into().unwrap_or(u64::MAX));
            return Ok(BoundCheck::Exceeds { function: p.function.clone(), path: i, witness, gas });
        }
    }
    Ok(BoundCheck::WithinBound)
}

/// Maximum over the corners of the box `[0, cap]^vars`; exact for formulas
/// that are linear in each variable separately.
fn maximize(f: &GasFormula, vars: &[String], cap: i128) -> (Rational, BTreeMap<String, i128>) {
    if vars.len() > 16 {
        let at: BTreeMap<String, i128> = vars.iter().map(|v| (v.clone(), cap)).collect();
        return (f.eval(&at).unwrap_or_else(Rational::zero), at);
    }
    let mut best: Option<(Rational, BTreeMap<String, i128>)> = None;
    for mask in 0u32..(1 << vars.len()) {
        let at: BTreeMap<String, i128> =
            vars.iter().enumerate().map(|(i, v)| (v.clone(), if mask >> i & 1 == 1 { cap } else { 0 })).collect();
        let v = f.eval(&at).unwrap_or_else(Rational::zero);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, at));
        }
    }
    best.expect("at least one corner")
}

#[cfg(test)]
mod tests;
