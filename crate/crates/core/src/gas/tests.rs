use proptest::prelude::*;

use super::*;
use crate::lang::{parse, NodePath};
use crate::vm::OpKind;

fn lin(coefs: &[(&str, i128)]) -> GasFormula {
    coefs
        .iter()
        .map(|(v, c)| {
            let k = Rational::from_integer(*c);
            if v.is_empty() {
                GasFormula::constant(k)
            } else {
                GasFormula::var(v).scale(k)
            }
        })
        .sum()
}

fn step_path(steps: Vec<OpKind>) -> Path {
    Path {
        function: "f".into(),
        segments: vec![Segment::Step { path: NodePath::root(), label: "s".into(), outcome: Outcome::Plain, steps }],
        end: PathEnd::Fallthrough,
    }
}

#[test]
fn canonical_text() {
    let f = &(&lin(&[("n1", 10), ("", 42)])
        + &(&GasFormula::var("n1") * &GasFormula::var("n2")).scale(Rational::from_integer(3)));
    assert_eq!(f.to_string(), "10*n1 + 3*n1*n2 + 42");
    assert_eq!(GasFormula::zero().to_string(), "0");
    assert_eq!(lin(&[("", 20)]).scale(Rational::new(1, 3)).to_string(), "20/3");
    assert_eq!((lin(&[("n", 2)]) + lin(&[("n", -2)])).terms().len(), 0);
}

#[test]
fn three_adds_and_empty_path() {
    let t = CostTable::default();
    assert_eq!(path_gas_formula(&step_path(vec![OpKind::Add; 3]), &t), GasFormula::constant(9));
    let empty = Path { function: "f".into(), segments: vec![], end: PathEnd::Fallthrough };
    assert!(path_gas_formula(&empty, &t).is_zero());
}

#[test]
fn expected_of_two_paths() {
    let t = CostTable::default();
    let a = step_path(vec![OpKind::Literal; 10]);
    let b = step_path(vec![OpKind::Literal; 10]);
    let c = step_path(vec![OpKind::Literal; 30]);
    let ab = expected_from_paths(&[a.clone(), b], &t, None).unwrap();
    assert_eq!(ab, path_gas_formula(&a, &t));
    // 10 literals cost 30, 30 literals cost 90: mean 60.
    assert_eq!(expected_from_paths(&[a.clone(), c.clone()], &t, None).unwrap(), GasFormula::constant(60));
    let w = [Rational::new(1, 4), Rational::new(3, 4)];
    assert_eq!(expected_from_paths(&[a.clone(), c.clone()], &t, Some(&w)).unwrap(), GasFormula::constant(75));
    assert!(matches!(
        expected_from_paths(&[a.clone(), c.clone()], &t, Some(&w[..1])),
        Err(GasError::WeightCount { .. })
    ));
    let bad = [Rational::new(1, 4), Rational::new(1, 4)];
    assert!(matches!(expected_from_paths(&[a, c], &t, Some(&bad)), Err(GasError::WeightSum(_))));
}

#[test]
fn path_counts() {
    let straight = parse("contract S { uint x; function f() { x = 1; x = 2; } }").unwrap();
    assert_eq!(enumerate_paths(&straight).unwrap().len(), 1);
    let one_if = parse("contract S { uint x; function f(uint a) { if (a > 1) { x = 1; } } }").unwrap();
    assert_eq!(enumerate_paths(&one_if).unwrap().len(), 2);
    let if_in_while = parse(
        "contract S { uint x; function f() { while (x < 9) { if (x > 4) { x = x + 2; } else { x = x + 1; } } } }",
    )
    .unwrap();
    let ps = enumerate_paths(&if_in_while).unwrap();
    assert_eq!(ps.len(), 2);
    assert!(ps.iter().all(|p| p.vars() == vec!["n1".to_string()]));
    let pruned =
        parse("contract S { uint x; function f() { if (true) { x = 1; } else { x = 2; } require(1 < 2); } }").unwrap();
    assert_eq!(enumerate_paths(&pruned).unwrap().len(), 1);
}

#[test]
fn require_failure_is_its_own_path() {
    let c = parse("contract R { uint x; function f(uint a) { require(a > 0); x = a; } }").unwrap();
    let ps = enumerate_paths(&c).unwrap();
    assert_eq!(ps.len(), 2);
    assert_eq!(ps.iter().filter(|p| p.end == PathEnd::Revert).count(), 1);
}

#[test]
fn path_explosion_is_reported() {
    let mut body = String::new();
    for i in 0..10 {
        body.push_str(&format!("if (a > {i}) {{ x = {i}; }} "));
    }
    let c = parse(&format!("contract P {{ uint x; function f(uint a) {{ {body} }} }}")).unwrap();
    assert!(matches!(enumerate_paths(&c), Err(GasError::PathExplosion { .. })));
    assert_eq!(enumerate_paths_with_cap(&c, 2048).unwrap().len(), 1024);
}

#[test]
fn fig2_loop_formula_is_linear() {
    let c =
        parse("contract F2 { uint s; function run() { bool a = true; while (a) { s = s + 1; a = s < 3; } } }").unwrap();
    let ps = enumerate_paths(&c).unwrap();
    assert_eq!(ps.len(), 1);
    let f = path_gas_formula(&ps[0], &CostTable::default());
    assert_eq!(f.variables(), vec!["n1".to_string()]);
    assert!(f.terms().iter().all(|t| t.degree() <= 1));
}

#[test]
fn nested_loops_multiply_variables() {
    let c = parse("contract N { uint x; uint y; function f() { while (x < 3) { y = 0; while (y < 3) { y = y + 1; } x = x + 1; } } }")
        .unwrap();
    let f = expected_gas_formula(&c, &CostTable::default(), None).unwrap();
    assert!(f.terms().iter().any(|t| t.degree() == 2));
    assert!(f.to_string().contains("n1*n2"));
}

#[test]
fn dominance_examples() {
    let f = lin(&[("n", 10), ("", 5)]);
    assert_eq!(compare_dominance(&f, &f), DominanceVerdict::NoDominance);
    assert_eq!(compare_dominance(&f, &lin(&[("n", 10), ("", 7)])), DominanceVerdict::ADominatesB);
    assert_eq!(
        compare_dominance(&lin(&[("n", 3), ("", 1)]), &lin(&[("n", 2), ("", 9)])),
        DominanceVerdict::NoDominance
    );
    // Differing monomial counts never dominate, even when one is pointwise smaller.
    assert_eq!(compare_dominance(&lin(&[("n", 5)]), &lin(&[("n", 5), ("", 1)])), DominanceVerdict::NoDominance);
}

#[test]
fn substitution_binding_is_shared() {
    let x2 = &GasFormula::var("x") * &GasFormula::var("x");
    let a = &x2 + &GasFormula::atom("sin(x)");
    let b = &(&x2 + &GasFormula::atom("cos(x)")) + &GasFormula::atom("sin(x)").scale(Rational::from_integer(3));
    let mut bind = SubstitutionBinding::new();
    let pa = to_polynomial(&a, &mut bind);
    let pb = to_polynomial(&b, &mut bind);
    let y = bind.bindings()["sin(x)"].clone();
    let z = bind.bindings()["cos(x)"].clone();
    assert_ne!(y, z);
    let mono = |v: &str, e: u32| std::iter::once((v.to_string(), e)).collect::<Monomial>();
    assert_eq!(pa[&mono("x", 2)], Rational::one());
    assert_eq!(pa[&mono(&y, 1)], Rational::one());
    assert_eq!(pb[&mono(&y, 1)], Rational::from_integer(3));
    assert_eq!(pb[&mono(&z, 1)], Rational::one());
    // A memory-style atom present in both formulas maps to one variable.
    let q = GasFormula::atom("m^2/512");
    let mut bind = SubstitutionBinding::new();
    let p1 = to_polynomial(&(&lin(&[("n", 2)]) + &q), &mut bind);
    let p2 = to_polynomial(&(&lin(&[("n", 3)]) + &q.scale(Rational::from_integer(2))), &mut bind);
    assert_eq!(bind.bindings().len(), 1);
    assert_eq!(p1.keys().collect::<Vec<_>>(), p2.keys().collect::<Vec<_>>());
    assert_eq!(compare_polynomials(&p1, &p2), DominanceVerdict::ADominatesB);
    // Pure polynomials pass through unchanged.
    let p = lin(&[("n", 4), ("", 2)]);
    assert_eq!(to_polynomial(&p, &mut SubstitutionBinding::new()).len(), 2);
}

#[test]
fn levels() {
    let same = vec![lin(&[("n", 1)]); 3];
    assert_eq!(dominance_levels(&same), vec![1, 1, 1]);
    let chain = vec![lin(&[("n", 5)]), lin(&[("n", 6)]), lin(&[("n", 7)])];
    assert_eq!(dominance_levels(&chain), vec![1, 2, 3]);
    let mixed = vec![lin(&[("n", 5), ("", 1)]), lin(&[("n", 5), ("", 1)]), lin(&[("n", 9)])];
    assert_eq!(dominance_levels(&mixed), vec![1, 1, 1]);
    let mixed2 = vec![lin(&[("n", 5), ("", 1)]), lin(&[("n", 5), ("", 1)]), lin(&[("n", 9), ("", 2)])];
    assert_eq!(dominance_levels(&mixed2), vec![1, 1, 2]);
}

#[test]
fn bound_checks() {
    let t = CostTable::default();
    let c = parse("contract B { uint x; function f() { x = 1; } }").unwrap();
    let max = path_gas_formula(&enumerate_paths(&c).unwrap()[0], &t).eval_u64(&Default::default()).unwrap();
    assert_eq!(check_gas_bound(&c, max, &t, DEFAULT_TRIP_CAP).unwrap(), BoundCheck::WithinBound);
    assert!(
        matches!(check_gas_bound(&c, max - 1, &t, DEFAULT_TRIP_CAP).unwrap(), BoundCheck::Exceeds { gas: Some(g), .. } if g == max)
    );
    let fig3 = parse("contract F3 { uint x; function run() { x = 0; while (x <= 100) { } x = x + 2; } }").unwrap();
    for limit in [1_000, 1_000_000_000u64] {
        match check_gas_bound(&fig3, limit, &t, DEFAULT_TRIP_CAP).unwrap() {
            BoundCheck::Exceeds { function, gas: None, witness, .. } => {
                assert_eq!(function, "run");
                assert!(witness.contains_key("n1"));
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn classification_examples() {
    let old = parse("contract K { uint x; function f(uint a) { if (a > 1) { x = 1; } else { x = 2; } } }").unwrap();
    let cls = classify_paths(&old, &old).unwrap();
    assert_eq!(cls.joint.len(), 2);
    assert!(cls.repaired.is_empty() && cls.new.is_empty());

    let new = parse("contract K { uint x; function f(uint a) { if (a > 1) { x = 3; } else { x = 2; } } }").unwrap();
    let cls = classify_paths(&old, &new).unwrap();
    assert_eq!(cls.joint.len(), 1);
    assert_eq!(cls.repaired.len(), 1);
    assert!(cls.new.is_empty());

    let konst = parse("contract K { uint x; function f(uint a) { if (true) { x = 1; } else { x = 2; } } }").unwrap();
    let cls = classify_paths(&konst, &old).unwrap();
    assert_eq!(cls.repaired.len(), 1);
    assert_eq!(cls.new.len(), 1);
}

#[test]
fn reduced_compare_on_small_patches() {
    let t = CostTable::default();
    let old = parse("contract K { uint x; function f(uint a) { if (a > 1) { x = a + 1; } else { x = 2; } } }").unwrap();
    assert_eq!(reduced_compare(&old, &old, &t).unwrap(), DominanceVerdict::NoDominance);
    let cheaper = parse("contract K { uint x; function f(uint a) { if (a > 1) { x = a; } else { x = 2; } } }").unwrap();
    let full = compare_dominance(
        &expected_gas_formula(&old, &t, None).unwrap(),
        &expected_gas_formula(&cheaper, &t, None).unwrap(),
    );
    assert_eq!(full, DominanceVerdict::BDominatesA);
    assert_eq!(reduced_compare(&old, &cheaper, &t).unwrap(), full);
}

fn arb_formula() -> impl Strategy<Value = GasFormula> {
    prop::collection::vec((0usize..4, 0i128..6), 1..4).prop_map(|terms| {
        terms
            .into_iter()
            .map(|(v, c)| {
                let k = Rational::from_integer(c);
                match v {
                    0 => GasFormula::constant(k),
                    1 => GasFormula::var("n").scale(k),
                    2 => GasFormula::var("m").scale(k),
                    _ => (&GasFormula::var("n") * &GasFormula::var("m")).scale(k),
                }
            })
            .sum()
    })
}

fn grid_le(a: &GasFormula, b: &GasFormula) -> (bool, bool) {
    let (mut le, mut lt) = (true, false);
    for n in (0..=100).step_by(5) {
        for m in (0..=100).step_by(5) {
            let at = [("n".to_string(), n), ("m".to_string(), m)].into_iter().collect();
            let (x, y) = (a.eval(&at).unwrap(), b.eval(&at).unwrap());
            le &= x <= y;
            lt |= x < y;
        }
    }
    (le, lt)
}

proptest! {
    #[test]
    fn dominance_is_a_strict_partial_order(a in arb_formula(), b in arb_formula(), c in arb_formula()) {
        prop_assert_eq!(compare_dominance(&a, &a), DominanceVerdict::NoDominance);
        prop_assert_eq!(compare_dominance(&a, &b), compare_dominance(&b, &a).flip());
        if compare_dominance(&a, &b) == DominanceVerdict::ADominatesB && compare_dominance(&b, &c) == DominanceVerdict::ADominatesB {
            prop_assert_eq!(compare_dominance(&a, &c), DominanceVerdict::ADominatesB);
        }
    }

    #[test]
    fn dominance_is_sound_on_a_grid(a in arb_formula(), b in arb_formula()) {
        if compare_dominance(&a, &b) == DominanceVerdict::ADominatesB {
            let (le, lt) = grid_le(&a, &b);
            prop_assert!(le && lt);
        }
    }

    #[test]
    fn levels_respect_dominance(fs in prop::collection::vec(arb_formula(), 1..8)) {
        let lv = dominance_levels(&fs);
        for i in 0..fs.len() {
            for j in 0..fs.len() {
                if compare_dominance(&fs[i], &fs[j]) == DominanceVerdict::ADominatesB {
                    prop_assert!(lv[i] < lv[j]);
                }
            }
        }
        prop_assert!(lv.contains(&1));
    }
}
