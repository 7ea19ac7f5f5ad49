use std::collections::BTreeMap;

use fforge::series::{rat, Parity, Rational, TruncatedSeries, VariableSpec};
use num_complex::Complex64;
use num_traits::Zero;
use proptest::prelude::*;

const ORDER: u32 = 5;

fn coeff() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| rat(n, d))
}

fn terms(vars: usize, max_degree: u32) -> impl Strategy<Value = Vec<(Vec<u32>, Rational)>> {
    prop::collection::vec((prop::collection::vec(0..=max_degree, vars), coeff()), 0..8)
        .prop_map(move |ts| ts.into_iter().filter(|(e, _)| e.iter().sum::<u32>() <= max_degree).collect())
}

fn even_series(vars: usize, max_degree: u32) -> impl Strategy<Value = TruncatedSeries> {
    terms(vars, max_degree)
        .prop_map(move |ts| TruncatedSeries::from_terms(VariableSpec::even(vars), ORDER, ts).unwrap())
}

/// Two variables, the second odd; odd exponents are capped at one.
fn mixed_series() -> impl Strategy<Value = TruncatedSeries> {
    terms(2, ORDER).prop_map(|ts| {
        let vars = VariableSpec::new(vec![Parity::Even, Parity::Odd]).unwrap();
        let ts = ts.into_iter().map(|(mut e, c)| {
            e[1] = e[1].min(1);
            (e, c)
        });
        TruncatedSeries::from_terms(vars, ORDER, ts).unwrap()
    })
}

/// Dense schoolbook product of even polynomials, truncated by total degree.
fn naive_product(f: &TruncatedSeries, g: &TruncatedSeries, order: u32) -> BTreeMap<Vec<u32>, Rational> {
    let mut out: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
    for (a, x) in f.terms() {
        for (b, y) in g.terms() {
            let e: Vec<u32> = a.exponents().iter().zip(b.exponents()).map(|(p, q)| p + q).collect();
            if e.iter().sum::<u32>() <= order {
                *out.entry(e).or_insert_with(Rational::zero) += x * y;
            }
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn as_map(f: &TruncatedSeries) -> BTreeMap<Vec<u32>, Rational> {
    f.terms().map(|(e, c)| (e.exponents().to_vec(), c.clone())).collect()
}

fn to_complex(r: &Rational) -> Complex64 {
    Complex64::new(fforge::series::rational_to_f64(r), 0.0)
}

proptest! {
    #[test]
    fn product_matches_schoolbook(f in even_series(3, ORDER), g in even_series(3, ORDER)) {
        prop_assert_eq!(as_map(&f.mul(&g).unwrap()), naive_product(&f, &g, ORDER));
    }

    #[test]
    fn even_product_is_commutative(f in even_series(3, ORDER), g in even_series(3, ORDER)) {
        prop_assert_eq!(f.mul(&g).unwrap(), g.mul(&f).unwrap());
    }

    #[test]
    fn product_is_associative_and_distributive(
        f in mixed_series(), g in mixed_series(), h in mixed_series()
    ) {
        let left = f.mul(&g).unwrap().mul(&h).unwrap();
        let right = f.mul(&g.mul(&h).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        let spread = f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap();
        prop_assert_eq!(f.mul(&g.add(&h).unwrap()).unwrap(), spread);
    }

    #[test]
    fn leibniz_rule(f in even_series(2, ORDER), g in even_series(2, ORDER), var in 0usize..2) {
        let lhs = f.mul(&g).unwrap().partial(var).unwrap();
        let rhs = f.partial(var).unwrap().mul(&g).unwrap()
            .add(&f.mul(&g.partial(var).unwrap()).unwrap()).unwrap();
        let order = lhs.order().min(rhs.order());
        prop_assert_eq!(lhs.truncate(order), rhs.truncate(order));
    }

    #[test]
    fn partials_commute(f in even_series(3, ORDER)) {
        let a = f.partial(0).unwrap().partial(2).unwrap();
        let b = f.partial(2).unwrap().partial(0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn antiderivative_inverts_partial(f in even_series(2, ORDER - 1), var in 0usize..2) {
        let f = f.truncate(ORDER - 1);
        let back = f.antiderivative(var).unwrap().partial(var).unwrap();
        prop_assert_eq!(back.truncate(ORDER - 1), f);
    }

    #[test]
    fn documents_round_trip(f in mixed_series()) {
        let back = TruncatedSeries::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(back.to_json(), f.to_json());
    }

    #[test]
    fn evaluation_is_multiplicative_below_the_order(
        f in even_series(2, 2), g in even_series(2, 2), x in -2.0f64..2.0, y in -2.0f64..2.0
    ) {
        let p = [Complex64::new(x, 0.0), Complex64::new(y, 0.0)];
        let fg = f.mul(&g).unwrap().eval_complex(&p).unwrap();
        let prod = f.eval_complex(&p).unwrap() * g.eval_complex(&p).unwrap();
        prop_assert!((fg - prod).norm() <= 1e-9 * (1.0 + prod.norm()));
        // Direct monomial sum as an independent evaluation.
        let direct: Complex64 = f.terms().map(|(e, c)| {
            to_complex(c) * p[0].powu(e.exponents()[0]) * p[1].powu(e.exponents()[1])
        }).sum();
        prop_assert!((f.eval_complex(&p).unwrap() - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }
}

#[test]
fn odd_product_sign() {
    let vars = VariableSpec::new(vec![Parity::Odd, Parity::Odd]).unwrap();
    let t = |v| TruncatedSeries::variable(vars.clone(), 3, v).unwrap();
    let xy = t(0).mul(&t(1)).unwrap();
    let yx = t(1).mul(&t(0)).unwrap();
    assert_eq!(xy, yx.neg());
    assert!(xy.add(&yx).unwrap().is_zero());
}
