use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::formula::{GasFormula, Monomial, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DominanceVerdict {
    ADominatesB,
    BDominatesA,
    NoDominance,
}

impl DominanceVerdict {
    pub fn flip(self) -> Self {
        match self {
            DominanceVerdict::ADominatesB => DominanceVerdict::BDominatesA,
            DominanceVerdict::BDominatesA => DominanceVerdict::ADominatesB,
            DominanceVerdict::NoDominance => DominanceVerdict::NoDominance,
        }
    }
}

/// Maps each non-polynomial term body to a fresh variable, shared by all
/// formulas converted within one comparison.
#[derive(Clone, Debug, Default)]
pub struct SubstitutionBinding {
    map: BTreeMap<String, String>,
}

impl SubstitutionBinding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fresh variable for a canonical atom body, allocated on first use.
    pub fn var_for(&mut self, body: &str) -> String {
        let next = self.map.len() + 1;
        self.map.entry(body.to_string()).or_insert_with(|| format!("_y{next}")).clone()
    }

    pub fn bindings(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

/// A polynomial: monomial -> nonzero coefficient.
pub type Polynomial = BTreeMap<Monomial, Rational>;

/// Polynomial terms pass through; a term carrying an atom keeps its
/// coefficient and has the rest replaced by the bound fresh variable.
pub fn to_polynomial(f: &GasFormula, b: &mut SubstitutionBinding) -> Polynomial {
    let mut out = Polynomial::new();
    for t in f.terms() {
        let m = match &t.atom {
            None => t.monomial.clone(),
            Some(_) => {
                let mut m = Monomial::new();
                m.insert(b.var_for(&t.body_text()), 1);
                m
            }
        };
        let e = out.entry(m).or_insert_with(Rational::zero);
        *e += t.coef;
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Decision rules on two polynomials: differing numbers of monomials give no
/// dominance; otherwise the coefficient vectors aligned by monomial (missing
/// entries are 0) are compared componentwise.
pub fn compare_polynomials(a: &Polynomial, b: &Polynomial) -> DominanceVerdict {
    if a.len() != b.len() {
        return DominanceVerdict::NoDominance;
    }
    compare_vectors(a, b)
}

pub(crate) fn compare_vectors(a: &Polynomial, b: &Polynomial) -> DominanceVerdict {
    let keys: BTreeSet<&Monomial> = a.keys().chain(b.keys()).collect();
    let zero = Rational::zero();
    let (mut le, mut ge) = (true, true);
    for k in keys {
        let (x, y) = (a.get(k).unwrap_or(&zero), b.get(k).unwrap_or(&zero));
        le &= x <= y;
        ge &= x >= y;
    }
    match (le, ge) {
        (true, true) | (false, false) => DominanceVerdict::NoDominance,
        (true, false) => DominanceVerdict::ADominatesB,
        (false, true) => DominanceVerdict::BDominatesA,
    }
}

/// Gas dominance between two formulas under a fresh shared binding.
pub fn compare_dominance(fa: &GasFormula, fb: &GasFormula) -> DominanceVerdict {
    let mut b = SubstitutionBinding::new();
    let pa = to_polynomial(fa, &mut b);
    let pb = to_polynomial(fb, &mut b);
    compare_polynomials(&pa, &pb)
}

/// Non-dominated sorting: rank 1 for formulas no other formula dominates,
/// rank k for those dominated only by ranks below k.
pub fn dominance_levels(formulas: &[GasFormula]) -> Vec<usize> {
    let n = formulas.len();
    let mut b = SubstitutionBinding::new();
    let polys: Vec<Polynomial> = formulas.iter().map(|f| to_polynomial(f, &mut b)).collect();
    let mut dominated_by = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && compare_polynomials(&polys[j], &polys[i]) == DominanceVerdict::ADominatesB {
                dominated_by[i].push(j);
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut assigned = 0;
    let mut level = 1;
    while assigned < n {
        let front: Vec<usize> = (0..n)
            .filter(|&i| rank[i] == 0 && dominated_by[i].iter().all(|&j| rank[j] != 0 && rank[j] < level))
            .collect();
        if front.is_empty() {
            // Dominance cycles cannot occur for a partial order; guard anyway.
            for r in rank.iter_mut().filter(|r| **r == 0) {
                *r = level;
            }
            break;
        }
        for i in &front {
            rank[*i] = level;
        }
        assigned += front.len();
        level += 1;
    }
    rank
}
