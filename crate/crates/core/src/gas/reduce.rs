use std::collections::BTreeSet;

use num_traits::Zero;

use super::dominance::{compare_dominance, compare_vectors, to_polynomial, DominanceVerdict, SubstitutionBinding};
use super::formula::{GasFormula, Rational};
use super::paths::{enumerate_paths, path_gas_formula, LoopExit, Path, Segment};
use super::{expected_from_paths, GasError};
use crate::lang::Contract;
use crate::vm::CostTable;

/// Partition of the paths of an old and a new contract.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathClassification {
    /// Pairs (old index, new index) of syntactically identical paths.
    pub joint: Vec<(usize, usize)>,
    /// Pairs (new index, old index): the new path differs from the old one
    /// only at statements that exist on one side only.
    pub repaired: Vec<(usize, usize)>,
    /// New paths with no counterpart.
    pub new: Vec<usize>,
    /// Old paths with no joint counterpart.
    pub removed: Vec<usize>,
}

fn collect_labels(segs: &[Segment], out: &mut BTreeSet<String>) {
    for s in segs {
        out.insert(s.label().to_string());
        if let Segment::Loop { body, exit, .. } = s {
            collect_labels(body, out);
            if let LoopExit::Terminal(t) = exit {
                collect_labels(t, out);
            }
        }
    }
}

fn function_labels(paths: &[Path], function: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in paths.iter().filter(|p| p.function == function) {
        collect_labels(&p.segments, &mut out);
    }
    out
}

pub fn classify_path_sets(old: &[Path], new: &[Path]) -> PathClassification {
    let mut res = PathClassification::default();
    let old_labels: Vec<Vec<String>> = old.iter().map(Path::labels).collect();
    let mut used = vec![false; old.len()];
    let mut unmatched_new = Vec::new();
    for (j, p) in new.iter().enumerate() {
        let l = p.labels();
        match (0..old.len()).find(|&i| !used[i] && old_labels[i] == l) {
            Some(i) => {
                used[i] = true;
                res.joint.push((i, j));
            }
            None => unmatched_new.push(j),
        }
    }
    res.removed = (0..old.len()).filter(|&i| !used[i]).collect();
    for j in unmatched_new {
        let f = &new[j].function;
        let (lo, ln) = (function_labels(old, f), function_labels(new, f));
        let reduced_new = new[j].labels_where(&|s| lo.contains(s));
        let partner = res
            .removed
            .iter()
            .copied()
            .find(|&i| old[i].function == *f && old[i].labels_where(&|s| ln.contains(s)) == reduced_new);
        match partner {
            Some(i) => res.repaired.push((j, i)),
            None => res.new.push(j),
        }
    }
    res
}

pub fn classify_paths(old: &Contract, new: &Contract) -> Result<PathClassification, GasError> {
    Ok(classify_path_sets(&enumerate_paths(old)?, &enumerate_paths(new)?))
}

/// Dominance of `old` versus `new` (A = old, B = new) under uniform weights,
/// computed from the paths unique to each side. Falls back to comparing the
/// full expected formulas when the path counts differ.
pub fn reduced_compare(old: &Contract, new: &Contract, tbl: &CostTable) -> Result<DominanceVerdict, GasError> {
    let (po, pn) = (enumerate_paths(old)?, enumerate_paths(new)?);
    if po.len() != pn.len() {
        let fa = expected_from_paths(&po, tbl, None)?;
        let fb = expected_from_paths(&pn, tbl, None)?;
        return Ok(compare_dominance(&fa, &fb));
    }
    let fo: Vec<GasFormula> = po.iter().map(|p| path_gas_formula(p, tbl)).collect();
    let fnew: Vec<GasFormula> = pn.iter().map(|p| path_gas_formula(p, tbl)).collect();
    // Joint paths must also agree on their formulas to cancel out.
    let cls = classify_path_sets(&po, &pn);
    let mut joint_old = vec![false; po.len()];
    let mut joint_new = vec![false; pn.len()];
    for &(i, j) in &cls.joint {
        if fo[i] == fnew[j] {
            joint_old[i] = true;
            joint_new[j] = true;
        }
    }
    let k = Rational::from_integer(po.len() as i128);
    let sum = |fs: &[GasFormula], skip: &[bool]| -> GasFormula {
        fs.iter()
            .zip(skip)
            .filter(|(_, s)| !**s)
            .map(|(f, _)| f.clone())
            .sum::<GasFormula>()
            .scale(Rational::from_integer(1) / k)
    };
    let diff_old = sum(&fo, &joint_old);
    let diff_new = sum(&fnew, &joint_new);
    let mut b = SubstitutionBinding::new();
    let (da, db) = (to_polynomial(&diff_old, &mut b), to_polynomial(&diff_new, &mut b));
    // Monomial counts of the full formulas: all coefficients are positive,
    // so the support of a sum is the union of the supports.
    let joint_support: BTreeSet<_> = fo
        .iter()
        .zip(&joint_old)
        .filter(|(_, j)| **j)
        .flat_map(|(f, _)| to_polynomial(f, &mut b).into_keys())
        .collect();
    let support = |d: &super::dominance::Polynomial| {
        let mut s = joint_support.clone();
        s.extend(d.iter().filter(|(_, c)| !c.is_zero()).map(|(m, _)| m.clone()));
        s.len()
    };
    if support(&da) != support(&db) {
        return Ok(DominanceVerdict::NoDominance);
    }
    Ok(compare_vectors(&da, &db))
}
