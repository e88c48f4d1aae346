use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

/// Product of variables with exponents; empty = the constant monomial.
pub type Monomial = BTreeMap<String, u32>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub coef: Rational,
    pub monomial: Monomial,
    /// A non-polynomial factor kept as canonical text, e.g. `sin(x)`.
    pub atom: Option<String>,
}

type TermKey = (Vec<(String, u32)>, Option<String>);

impl Term {
    fn key(&self) -> TermKey {
        (self.monomial.iter().map(|(k, v)| (k.clone(), *v)).collect(), self.atom.clone())
    }

    pub fn degree(&self) -> u32 {
        self.monomial.values().sum()
    }

    /// The part of the term after the coefficient, as text (empty for constants).
    pub fn body_text(&self) -> String {
        let mut parts: Vec<String> =
            self.monomial.iter().map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") }).collect();
        parts.extend(self.atom.iter().cloned());
        parts.join("*")
    }
}

/// A gas formula: a sum of terms kept merged and canonically ordered.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GasFormula {
    terms: Vec<Term>,
}

impl GasFormula {
    pub fn zero() -> Self {
        GasFormula::default()
    }

    pub fn constant(c: impl Into<Rational>) -> Self {
        GasFormula::from_terms(vec![Term { coef: c.into(), monomial: Monomial::new(), atom: None }])
    }

    pub fn var(name: &str) -> Self {
        let mut m = Monomial::new();
        m.insert(name.to_string(), 1);
        GasFormula::from_terms(vec![Term { coef: Rational::one(), monomial: m, atom: None }])
    }

    pub fn atom(text: &str) -> Self {
        GasFormula::from_terms(vec![Term {
            coef: Rational::one(),
            monomial: Monomial::new(),
            atom: Some(text.to_string()),
        }])
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut merged: BTreeMap<TermKey, Term> = BTreeMap::new();
        for t in terms {
            let e = merged.entry(t.key()).or_insert_with(|| Term { coef: Rational::zero(), ..t.clone() });
            e.coef += t.coef;
        }
        let mut terms: Vec<Term> = merged.into_values().filter(|t| !t.coef.is_zero()).collect();
        // Constants go last; everything else in lexicographic order of its body.
        terms.sort_by(|a, b| {
            let (ka, kb) = (a.key(), b.key());
            (ka.0.is_empty() && ka.1.is_none()).cmp(&(kb.0.is_empty() && kb.1.is_none())).then(ka.cmp(&kb))
        });
        GasFormula { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Rational {
        self.terms.iter().find(|t| t.monomial.is_empty() && t.atom.is_none()).map_or_else(Rational::zero, |t| t.coef)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.monomial.is_empty() && t.atom.is_none())
    }

    pub fn variables(&self) -> Vec<String> {
        let mut v: Vec<String> = self.terms.iter().flat_map(|t| t.monomial.keys().cloned()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn scale(&self, k: Rational) -> Self {
        GasFormula::from_terms(self.terms.iter().map(|t| Term { coef: t.coef * k, ..t.clone() }).collect())
    }

    /// Replaces variable `name` by the constant `value`.
    pub fn substitute(&self, name: &str, value: i128) -> Self {
        GasFormula::from_terms(
            self.terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    if let Some(e) = t.monomial.remove(name) {
                        t.coef *= Rational::from_integer(value.pow(e));
                    }
                    t
                })
                .collect(),
        )
    }

    /// Value at a full assignment of the variables; `None` if an atom or an
    /// unassigned variable remains.
    pub fn eval(&self, vars: &BTreeMap<String, i128>) -> Option<Rational> {
        let mut sum = Rational::zero();
        for t in &self.terms {
            if t.atom.is_some() {
                return None;
            }
            let mut v = t.coef;
            for (name, e) in &t.monomial {
                v *= Rational::from_integer(vars.get(name)?.pow(*e));
            }
            sum += v;
        }
        Some(sum)
    }

    /// Integer value for an assignment, when it is a whole number.
    pub fn eval_u64(&self, vars: &BTreeMap<String, i128>) -> Option<u64> {
        let v = self.eval(vars)?;
        if v.is_integer() && !v.is_negative() {
            v.to_integer().to_u64()
        } else {
            None
        }
    }
}

impl Add for &GasFormula {
    type Output = GasFormula;

    fn add(self, rhs: &GasFormula) -> GasFormula {
        GasFormula::from_terms(self.terms.iter().chain(rhs.terms.iter()).cloned().collect())
    }
}

impl Add for GasFormula {
    type Output = GasFormula;

    fn add(self, rhs: GasFormula) -> GasFormula {
        &self + &rhs
    }
}

impl Mul for &GasFormula {
    type Output = GasFormula;

    fn mul(self, rhs: &GasFormula) -> GasFormula {
        let mut out = Vec::new();
        for a in &self.terms {
            for b in &rhs.terms {
                let mut m = a.monomial.clone();
                for (v, e) in &b.monomial {
                    *m.entry(v.clone()).or_insert(0) += e;
                }
                let atom = match (&a.atom, &b.atom) {
                    (None, None) => None,
                    (Some(x), None) | (None, Some(x)) => Some(x.clone()),
                    (Some(x), Some(y)) => {
                        let mut v = [x.as_str(), y.as_str()];
                        v.sort();
                        Some(v.join("*"))
                    }
                };
                out.push(Term { coef: a.coef * b.coef, monomial: m, atom });
            }
        }
        GasFormula::from_terms(out)
    }
}

impl std::iter::Sum for GasFormula {
    fn sum<I: Iterator<Item = GasFormula>>(iter: I) -> Self {
        iter.fold(GasFormula::zero(), |a, b| a + b)
    }
}

fn fmt_coef(c: &Rational) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for GasFormula {
    /// Canonical text, e.g. `10*n1 + 3*n1*n2 + 42`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let body = t.body_text();
            let neg = t.coef.is_negative();
            let mag = t.coef.abs();
            let text = if body.is_empty() {
                fmt_coef(&mag)
            } else if mag.is_one() {
                body
            } else {
                format!("{}*{}", fmt_coef(&mag), body)
            };
            match (i, neg) {
                (0, false) => write!(f, "{text}")?,
                (0, true) => write!(f, "-{text}")?,
                (_, false) => write!(f, " + {text}")?,
                (_, true) => write!(f, " - {text}")?,
            }
        }
        Ok(())
    }
}
