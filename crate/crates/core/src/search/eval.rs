use std::collections::BTreeSet;
use std::sync::Mutex;

use rayon::prelude::*;

use super::{Candidate, FitnessVector};
use crate::detect::{detect_all, VulnKind};
use crate::gas::{check_gas_bound, compare_dominance, expected_gas_formula, BoundCheck, DominanceVerdict, GasFormula};
use crate::lang::{typecheck, Contract};
use crate::mutate::{apply, mutation_distance, Patch};
use crate::testgen::TestCase;
use crate::vm::{run_test, run_test_with_result, CostTable, VmConfig};

/// Full fitness of a candidate contract: targeted vulnerabilities remaining,
/// failing tests and edit count. The gas level is left at 0 until selection.
pub fn eval(
    contract: &Contract,
    patch: &Patch,
    kinds: &BTreeSet<VulnKind>,
    tests: &[TestCase],
    vm: &VmConfig,
) -> FitnessVector {
    let vuln_count = detect_all(contract, kinds).count() as u32;
    let fail_count = tests.par_iter().filter(|t| !run_test(contract, t, vm).passed()).count() as u32;
    FitnessVector { vuln_count, fail_count, gas_level: 0, mut_distance: mutation_distance(patch) as u32 }
}

/// Candidates with no targeted vulnerability, no failing test and, when a
/// bound is given, no path that can exceed it.
pub fn filter_plausible(
    pop: &mut [Candidate],
    bound: Option<u64>,
    costs: &CostTable,
    trip_cap: i128,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for c in pop.iter_mut() {
        if c.fitness.is_valid() && within_bound(c, bound, costs, trip_cap) {
            out.push(c.clone());
        }
    }
    out
}

pub(crate) fn within_bound(c: &mut Candidate, bound: Option<u64>, costs: &CostTable, trip_cap: i128) -> bool {
    let Some(limit) = bound else { return true };
    *c.bound_ok.get_or_insert_with(|| {
        matches!(check_gas_bound(&c.contract, limit, costs, trip_cap), Ok(BoundCheck::WithinBound))
    })
}

pub(crate) struct EvalContext<'a> {
    pub kinds: &'a BTreeSet<VulnKind>,
    pub tests: &'a [TestCase],
    pub vm: &'a VmConfig,
    pub costs: &'a CostTable,
    pub bound: Option<u64>,
    pub trip_cap: i128,
    /// Stop at the first remaining vulnerability or failing test.
    pub short_circuit: bool,
    pub parallel: bool,
    /// Expected-gas formula of the cheapest plausible patch so far, when
    /// early discard is enabled.
    pub gmax: Option<&'a Mutex<Option<GasFormula>>>,
}

#[allow(clippy::large_enum_variant)]
pub(crate) enum Evaluated {
    Done(Candidate),
    Discarded,
}

impl EvalContext<'_> {
    fn failing(&self, c: &Contract) -> u32 {
        if self.short_circuit {
            return self.tests.iter().any(|t| !run_test(c, t, self.vm).passed()) as u32;
        }
        if self.parallel {
            self.tests.par_iter().filter(|t| !run_test(c, t, self.vm).passed()).count() as u32
        } else {
            self.tests.iter().filter(|t| !run_test(c, t, self.vm).passed()).count() as u32
        }
    }

    fn dominated_by_gmax(&self, c: &mut Candidate) -> bool {
        let Some(cell) = self.gmax else { return false };
        let Some(g) = cell.lock().expect("gmax lock").clone() else { return false };
        if c.formula.is_none() {
            c.formula = expected_gas_formula(&c.contract, self.costs, None).ok();
        }
        c.formula.as_ref().is_some_and(|f| compare_dominance(&g, f) == DominanceVerdict::ADominatesB)
    }

    fn offer_gmax(&self, c: &mut Candidate) {
        let Some(cell) = self.gmax else { return };
        if !c.fitness.is_valid() || !within_bound(c, self.bound, self.costs, self.trip_cap) {
            return;
        }
        if c.formula.is_none() {
            c.formula = expected_gas_formula(&c.contract, self.costs, None).ok();
        }
        let Some(f) = c.formula.clone() else { return };
        let mut g = cell.lock().expect("gmax lock");
        let cheaper = match g.as_ref() {
            None => true,
            Some(cur) => compare_dominance(&f, cur) == DominanceVerdict::ADominatesB,
        };
        if cheaper {
            *g = Some(f);
        }
    }

    /// Evaluates one candidate. With early discard on, a candidate that
    /// still has vulnerabilities and whose expected gas is dominated by the
    /// current g_max is dropped before its tests run.
    pub(crate) fn evaluate(&self, mut c: Candidate) -> Evaluated {
        let vuln_count = detect_all(&c.contract, self.kinds).count() as u32;
        c.fitness =
            FitnessVector { vuln_count, fail_count: 0, gas_level: 0, mut_distance: mutation_distance(&c.patch) as u32 };
        if vuln_count > 0 && self.dominated_by_gmax(&mut c) {
            return Evaluated::Discarded;
        }
        if self.short_circuit && vuln_count > 0 {
            return Evaluated::Done(c);
        }
        c.fitness.fail_count = self.failing(&c.contract);
        self.offer_gmax(&mut c);
        Evaluated::Done(c)
    }

    pub(crate) fn evaluate_batch(&self, batch: Vec<Candidate>) -> Vec<Evaluated> {
        if self.parallel {
            batch.into_par_iter().map(|c| self.evaluate(c)).collect()
        } else {
            batch.into_iter().map(|c| self.evaluate(c)).collect()
        }
    }
}

/// Independent check of a finished patch against the original contract.
/// Returns the patched contract and its mean gas over the tests.
pub fn verify_patch(
    original: &Contract,
    patch: &Patch,
    kinds: &BTreeSet<VulnKind>,
    tests: &[TestCase],
    vm: &VmConfig,
    bound: Option<u64>,
    trip_cap: i128,
) -> Result<(Contract, f64), String> {
    let c = apply(patch, original).map_err(|e| format!("patch does not apply: {e}"))?;
    typecheck(&c).map_err(|e| format!("patched contract does not type check: {} error(s)", e.len()))?;
    let v = detect_all(&c, kinds);
    if !v.is_empty() {
        return Err(format!("{} targeted vulnerabilities remain", v.count()));
    }
    let mut total = 0u128;
    for t in tests {
        let (outcome, res) = run_test_with_result(&c, t, vm);
        if !outcome.passed() {
            return Err(format!("test {} fails", t.id));
        }
        total += res.map_or(0, |r| r.gas_used as u128);
    }
    if let Some(limit) = bound {
        match check_gas_bound(&c, limit, &vm.costs, trip_cap) {
            Ok(BoundCheck::WithinBound) => {}
            Ok(BoundCheck::Exceeds { function, .. }) => return Err(format!("`{function}` can exceed the gas bound")),
            Err(e) => return Err(e.to_string()),
        }
    }
    let mean = if tests.is_empty() { 0.0 } else { total as f64 / tests.len() as f64 };
    Ok((c, mean))
}
