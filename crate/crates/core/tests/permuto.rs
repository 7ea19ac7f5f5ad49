use std::collections::BTreeSet;

use fforge::permuto::*;
use fforge::potentials::VectorPotential;
use fforge::qcoh::{quantum_potential, solve_gw, QcohSetup};
use fforge::series::{int, rat, Parity, Rational, TruncatedSeries, VariableSpec};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ordered partitions by choosing the first block, then recursing.
fn brute_force(elements: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if elements.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for mask in 1u32..(1 << elements.len()) {
        let block: Vec<usize> = (0..elements.len()).filter(|i| mask >> i & 1 == 1).map(|i| elements[i]).collect();
        let rest: Vec<usize> = (0..elements.len()).filter(|i| mask >> i & 1 == 0).map(|i| elements[i]).collect();
        for mut tail in brute_force(&rest) {
            tail.insert(0, block.clone());
            out.push(tail);
        }
    }
    out
}

#[test]
fn enumeration_matches_brute_force() {
    for n in 1..=5 {
        let elements: Vec<usize> = (1..=n).collect();
        let oracle: BTreeSet<Vec<Vec<usize>>> = brute_force(&elements).into_iter().collect();
        let ours = enumerate_partitions(n).unwrap();
        let as_sets: BTreeSet<Vec<Vec<usize>>> = ours.iter().map(|p| p.parts().to_vec()).collect();
        assert_eq!(ours.len(), oracle.len());
        assert_eq!(as_sets, oracle);
        // Parts count is non-decreasing along the enumeration.
        assert!(ours.windows(2).all(|w| w[0].len() <= w[1].len()));
    }
}

#[test]
fn fan_counts() {
    let factorial = [1, 1, 2, 6, 24, 120, 720];
    for n in 1..=6 {
        let fan = build_fan(n).unwrap();
        assert_eq!(fan.cone_count() as u64, fubini(n));
        assert_eq!(fan.maximal_count(), factorial[n]);
    }
}

#[test]
fn good_families_round_trip() {
    for n in 1..=5 {
        for tau in enumerate_partitions(n).unwrap() {
            let family = good_family(&tau);
            assert_eq!(family.sigmas.len(), tau.len() - 1);
            assert_eq!(family.source().unwrap(), tau);
            assert_eq!(cone_of(&tau).dim(), tau.len() - 1);
        }
    }
}

fn generic_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<i64> {
    loop {
        let v: Vec<i64> = (0..n).map(|_| rng.random_range(-50..=50)).collect();
        let distinct: BTreeSet<i64> = v.iter().copied().collect();
        if distinct.len() == n {
            return v;
        }
    }
}

#[test]
fn generic_vectors_lie_in_exactly_one_maximal_cone() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [3, 4, 5] {
        let fan = build_fan(n).unwrap();
        for _ in 0..100 {
            let v = generic_vector(&mut rng, n);
            let location = locate(&v, &fan).unwrap();
            assert!(location.partition.is_maximal());
            assert!(location.coefficients.iter().all(|c| c > &Rational::zero()));
            assert_eq!(containing_maximal_cones(&v, &fan), vec![location.cone_index]);
        }
    }
}

#[test]
fn located_cone_reproduces_the_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fan = build_fan(4).unwrap();
    for _ in 0..50 {
        let v: Vec<i64> = (0..4).map(|_| rng.random_range(-3..=3)).collect();
        let location = locate(&v, &fan).unwrap();
        let cone = &fan.cones[location.cone_index];
        let target = normalize(&v);
        for i in 0..4 {
            let sum: Rational = cone.generators.iter().zip(&location.coefficients).map(|(g, c)| c * int(g[i])).sum();
            assert_eq!(sum, int(target[i]));
        }
    }
}

#[test]
fn small_fans_pass_the_face_check() {
    for n in 1..=4 {
        let report = verify_fan_faces(&build_fan(n).unwrap()).unwrap();
        assert!(report.passes(), "n={n}: {:?}", report.failure);
    }
    assert!(verify_fan_faces(&build_fan(5).unwrap()).is_err());
}

#[test]
fn concatenation_is_associative_and_graded() {
    let generators: Vec<HClass> =
        (1..=4).flat_map(|n| enumerate_partitions(n).unwrap()).map(HClass::generator).collect();
    for x in &generators {
        for y in &generators {
            if x.grade() + y.grade() > 6 {
                continue;
            }
            let xy = h_product(x, y);
            assert_eq!(xy.grade(), x.grade() + y.grade());
            for z in &generators {
                if x.grade() + y.grade() + z.grade() > 6 {
                    continue;
                }
                assert_eq!(h_product(&xy, z), h_product(x, &h_product(y, z)));
            }
        }
    }
}

fn even(d: usize) -> Vec<Parity> {
    vec![Parity::Even; d]
}

fn all_tuples(d: usize, len: usize) -> Vec<Vec<usize>> {
    (0..d.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let a = code % d;
                    code /= d;
                    a
                })
                .collect()
        })
        .collect()
}

#[test]
fn one_dimensional_correlators_give_the_exponential() {
    let mut family = CorrelatorFamily::new(even(1));
    for len in 1..=5 {
        family.insert(&vec![0; len], vec![vec![int(1)]]).unwrap();
    }
    let c = correlator_series(&family, 5).unwrap();
    let mut factorial = Rational::one();
    for k in 1..=5u32 {
        factorial *= int(k as i64);
        assert_eq!(c[0][0].coeff(&[k]), Rational::one() / factorial.clone());
    }
    assert!(c[0][0].constant_term().is_zero());
    assert!(flatness_check(&c).unwrap().is_zero());
}

#[test]
fn zero_correlators_give_zero() {
    let mut family = CorrelatorFamily::new(even(2));
    for len in 1..=3 {
        for t in all_tuples(2, len) {
            family.insert(&t, vec![vec![int(0); 2]; 2]).unwrap();
        }
    }
    let c = correlator_series(&family, 3).unwrap();
    assert!(c.iter().flatten().all(TruncatedSeries::is_zero));
}

#[test]
fn missing_and_bad_entries_are_reported() {
    let mut family = CorrelatorFamily::new(even(2));
    family.insert(&[0], vec![vec![int(1), int(0)], vec![int(0), int(1)]]).unwrap();
    assert!(matches!(correlator_series(&family, 1), Err(PermutoError::MissingEntry(_))));
    let mut odd = CorrelatorFamily::new(vec![Parity::Even, Parity::Odd]);
    let swap = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
    assert!(matches!(odd.insert(&[0], swap.clone()), Err(PermutoError::ParityViolation { .. })));
    odd.insert(&[1], swap.clone()).unwrap();
    assert!(matches!(
        odd.insert(&[1, 1], vec![vec![int(1), int(0)], vec![int(0), int(1)]]),
        Err(PermutoError::SymmetryViolation(_))
    ));
    // Odd labels anticommute: <D_1 D_0 D_1>-type swaps pick up a sign.
    let mut mixed = CorrelatorFamily::new(vec![Parity::Odd, Parity::Odd]);
    let m = vec![vec![int(2), int(0)], vec![int(0), int(3)]];
    mixed.insert(&[0, 1], m.clone()).unwrap();
    let swapped = mixed.get(&[1, 0]).unwrap();
    assert_eq!(swapped[0][0], int(-2));
}

#[test]
fn constant_algebra_correlators_assemble_by_hand() {
    // Q[t]/(t^2) in basis (1, t): L_0 = identity, L_1 = nilpotent shift.
    let l = [vec![vec![int(1), int(0)], vec![int(0), int(1)]], vec![vec![int(0), int(0)], vec![int(1), int(0)]]];
    let mat_mul = |x: &Vec<Vec<Rational>>, y: &Vec<Vec<Rational>>| -> Vec<Vec<Rational>> {
        (0..2).map(|i| (0..2).map(|j| (0..2).map(|k| &x[i][k] * &y[k][j]).sum()).collect()).collect()
    };
    let mut family = CorrelatorFamily::new(even(2));
    for len in 1..=3 {
        for t in all_tuples(2, len) {
            let product = t.iter().skip(1).fold(l[t[0]].clone(), |acc, &a| mat_mul(&acc, &l[a]));
            family.insert(&t, product).unwrap();
        }
    }
    let c = correlator_series(&family, 3).unwrap();
    // Diagonal: exp(x0) - 1 through degree 3.
    assert_eq!(c[0][0].coeff(&[1, 0]), int(1));
    assert_eq!(c[0][0].coeff(&[2, 0]), rat(1, 2));
    assert_eq!(c[0][0].coeff(&[3, 0]), rat(1, 6));
    assert!(c[0][0].coeff(&[0, 1]).is_zero());
    // Off-diagonal entry (1, 0): x1 exp(x0), so x1, x0 x1, x0^2 x1 / 2.
    assert_eq!(c[1][0].coeff(&[0, 1]), int(1));
    assert_eq!(c[1][0].coeff(&[1, 1]), int(1));
    assert_eq!(c[1][0].coeff(&[2, 1]), rat(1, 2));
    assert!(c[1][0].coeff(&[0, 2]).is_zero());
    assert!(c[0][1].is_zero());
    assert!(flatness_check(&c).unwrap().is_zero());
}

#[test]
fn nonzero_constant_term_is_rejected() {
    let vars = VariableSpec::even(1);
    let c = vec![vec![TruncatedSeries::one(vars, 3)]];
    assert!(matches!(flatness_check(&c), Err(PermutoError::NonzeroConstantTerm(0, 0))));
}

fn plane_vector_potential() -> VectorPotential {
    let setup = QcohSetup::new(2, 3).unwrap();
    let table = solve_gw(&setup).unwrap();
    quantum_potential(&setup, &table).unwrap().vector_potential().unwrap()
}

#[test]
fn flatness_agrees_with_oriented_associativity() {
    let c = plane_vector_potential();
    let flat = flatness_check(&c.connection_matrix().unwrap()).unwrap();
    let assoc = c.oriented_associativity_residual().unwrap();
    assert!(flat.is_zero() && assoc.is_zero());

    // Plant a cubic term in one component.
    let mut components = c.components().to_vec();
    let vars = components[0].vars().clone();
    let order = components[0].order();
    let bump = TruncatedSeries::monomial(vars, order, vec![0, 2, 1], int(1)).unwrap();
    components[1] = components[1].add(&bump).unwrap();
    let planted = VectorPotential::new(components).unwrap();
    let flat = flatness_check(&planted.connection_matrix().unwrap()).unwrap();
    let assoc = planted.oriented_associativity_residual().unwrap();
    assert!(!flat.is_zero() && !assoc.is_zero());
    assert_eq!(flat.first_defect_degree(), assoc.first_defect_degree());
}
