use proptest::prelude::*;

use fracdim_core::formulas::{
    convolution_dimension, lq_lower_bound, multiplicative_dependence, projection_dimension,
    similarity_dimension_ratios, Dependence,
};
use fracdim_core::lq::{alpha_min, lq_dimension, lq_dimension_homogeneous, solve_tau};
use fracdim_core::number::rational;
use fracdim_core::{Ifs, Literal, SymbolicMeasure, Word};

fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn exact_system(n: usize) -> impl Strategy<Value = Ifs<fracdim_core::Exact>> {
    prop::collection::vec((1i64..8, 2i64..9, -5i64..6, 1i64..7), n).prop_map(|maps| {
        let pairs: Vec<_> = maps
            .into_iter()
            .map(|(num, den, a, b)| (rational(num.min(den - 1), den), rational(a, b)))
            .collect();
        Ifs::exact(&pairs).unwrap()
    })
}

fn word(alphabet: usize, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..alphabet, 0..=max_len).prop_map(Word::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cocycle_law_is_exact(ifs in exact_system(3), u in word(3, 4), v in word(3, 4)) {
        let joined = ifs.word_map(&u.concat(&v)).unwrap();
        let split = ifs.word_map(&u).unwrap().compose(&ifs.word_map(&v).unwrap());
        prop_assert_eq!(joined, split);
    }

    #[test]
    fn bernoulli_cylinders_add_up(p in probability(3), w in word(3, 5)) {
        let mu = SymbolicMeasure::bernoulli(p).unwrap();
        let parent = mu.cylinder_mass(&w).unwrap();
        let children: f64 = (0..3).map(|s| mu.cylinder_mass(&w.concat(&Word::new(vec![s]))).unwrap()).sum();
        prop_assert!((parent - children).abs() <= 1e-14 * parent.max(1e-300));
    }

    #[test]
    fn markov_cylinders_add_up(rows in prop::collection::vec(probability(3), 3), w in word(3, 5)) {
        let mu = SymbolicMeasure::markov(rows).unwrap();
        let parent = mu.cylinder_mass(&w).unwrap();
        let children: f64 = (0..3).map(|s| mu.cylinder_mass(&w.concat(&Word::new(vec![s]))).unwrap()).sum();
        prop_assert!((parent - children).abs() <= 1e-13 * parent.max(1e-300));
    }

    #[test]
    fn lq_dimension_decreases_in_q(p in probability(4), r in prop::collection::vec(0.05f64..0.3, 4), q1 in 1.1f64..20.0, dq in 0.01f64..20.0) {
        let d1 = lq_dimension(&p, &r, q1).unwrap();
        let d2 = lq_dimension(&p, &r, q1 + dq).unwrap();
        prop_assert!(d2 <= d1 + 1e-10, "D({q1}) = {d1} < D({}) = {d2}", q1 + dq);
    }

    #[test]
    fn homogeneous_form_matches_general(p in probability(3), r in 0.05f64..0.3, q in 1.1f64..30.0) {
        let general = lq_dimension(&p, &[r; 3], q).unwrap();
        let closed = lq_dimension_homogeneous(&p, r, q).unwrap();
        prop_assert!((general - closed).abs() < 1e-10, "{general} vs {closed}");
    }

    #[test]
    fn blocking_leaves_tau_unchanged(p in probability(2), r in prop::collection::vec(0.1f64..0.45, 2), q in 1.1f64..10.0) {
        let mut pb = Vec::new();
        let mut rb = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                pb.push(p[i] * p[j]);
                rb.push(r[i] * r[j]);
            }
        }
        let single = solve_tau(&p, &r, q).unwrap().tau;
        let blocked = solve_tau(&pb, &rb, q).unwrap().tau;
        prop_assert!((single - blocked).abs() < 1e-9, "{single} vs {blocked}");
    }

    #[test]
    fn tau_residual_is_tiny(p in probability(5), r in prop::collection::vec(0.01f64..0.9, 5), q in 1.05f64..50.0) {
        let pt = solve_tau(&p, &r, q).unwrap();
        prop_assert!(pt.residual.abs() <= 1e-12, "{}", pt.residual);
    }

    #[test]
    fn alpha_min_cross_check_holds(p in probability(3), r in 0.05f64..0.3) {
        // Near-tied maximal weights are a documented cross-check error.
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sorted[1] <= 0.9 * sorted[0]);
        let am = alpha_min(&p, &[r; 3]).unwrap();
        prop_assert!((am.value - am.candidate).abs() <= 1e-6);
    }

    #[test]
    fn similarity_dimension_solves_moran(r in prop::collection::vec(0.01f64..0.6, 2..6)) {
        let s = similarity_dimension_ratios(&r).unwrap();
        let sum: f64 = r.iter().map(|x| x.powf(s)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum = {sum}");
    }

    #[test]
    fn projection_grows_with_entropy(h in 0.0f64..3.0, dh in 0.0f64..1.0, chi in -4.0f64..-0.1) {
        let a = projection_dimension(h, chi).unwrap();
        let b = projection_dimension(h + dh, chi).unwrap();
        prop_assert!(a <= b);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn lower_bound_sits_below_projection(p in probability(3), r in prop::collection::vec(0.05f64..0.3, 3)) {
        let mu = SymbolicMeasure::bernoulli(p).unwrap();
        let stats = mu.stats(&r).unwrap();
        let s = similarity_dimension_ratios(&r).unwrap();
        let reference: Vec<f64> = r.iter().map(|x| x.powf(s)).collect();
        let am = alpha_min(&reference, &r).unwrap();
        let lb = lq_lower_bound(stats.entropy_bits, stats.lyapunov_bits, s, am.value).unwrap();
        prop_assert!(lb.bound <= stats.entropy_bits / -stats.lyapunov_bits + 1e-12);
    }

    #[test]
    fn powers_of_one_base_are_dependent(num in 1i64..4, den in 5i64..9, a in 1u32..5, b in 1u32..5) {
        let base = rational(num, den);
        let r1 = Literal::Exact(power(&base, a));
        let r2 = Literal::Exact(power(&base, b));
        match multiplicative_dependence(&r1, &r2).unwrap() {
            Dependence::Dependent { a: x, b: y } => prop_assert_eq!(x * a, y * b),
            other => prop_assert!(false, "expected dependence, got {other}"),
        }
    }

    #[test]
    fn convolution_is_symmetric(h1 in 0.0f64..1.0, h2 in 0.0f64..1.0) {
        let (r1, r2) = (Literal::Exact(rational(1, 3)), Literal::Exact(rational(1, 4)));
        let a = convolution_dimension(h1, &r1, h2, &r2).unwrap().predicted;
        let b = convolution_dimension(h2, &r2, h1, &r1).unwrap().predicted;
        prop_assert!((a - b).abs() < 1e-15);
    }
}

fn power(base: &fracdim_core::Exact, k: u32) -> fracdim_core::Exact {
    (0..k).fold(rational(1, 1), |acc, _| acc * base)
}
