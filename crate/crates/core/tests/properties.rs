use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gqf_core::counting::{count_direct, count_split_diagonal, CountSpec, DEFAULT_COUNT_BUDGET};
use gqf_core::density::{local_count, local_count_bruteforce, IntSystem, Weight, DEFAULT_BUDGET};
use gqf_core::descent::{descend, from_u, lift, to_u, DescendedSystem};
use gqf_core::expsum::{g_ideal, h_lattice, relative_deviation, s_bound, s_sum_gamma, s_sum_moebius};
use gqf_core::form::Gqf;
use gqf_core::ideal::ideals_up_to;
use gqf_core::linalg::q;
use gqf_core::{Field, FieldElement, FieldExt, NumberField};

fn field(cubic: bool) -> Field {
    if cubic {
        NumberField::cyclic_cubic().unwrap()
    } else {
        NumberField::real_quadratic(2).unwrap()
    }
}

fn elem(k: &Field, rng: &mut ChaCha8Rng, r: i64) -> FieldElement {
    k.elem_i64(&(0..k.degree).map(|_| rng.gen_range(-r..=r)).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn descent_roundtrip(seed in any::<u64>(), cubic in any::<bool>(), n in 1usize..4) {
        let k = field(cubic);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Gqf::random(&k, n, &mut rng, 7, 0.5);
        let s = descend(&f);
        prop_assert_eq!(lift(&s).unwrap(), f.clone());
        let json = s.to_json();
        let back = DescendedSystem::from_json(&k, &json).unwrap();
        prop_assert_eq!(back.forms, s.forms);
    }

    #[test]
    fn transport_identity(seed in any::<u64>(), cubic in any::<bool>()) {
        let k = field(cubic);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Gqf::random(&k, 2, &mut rng, 5, 0.6);
        let x: Vec<FieldElement> = (0..2).map(|_| elem(&k, &mut rng, 50)).collect();
        let u = to_u(&x);
        prop_assert_eq!(from_u(&k, &u, 2), x.clone());
        let vals = descend(&f).eval(&u);
        let mut acc = k.zero();
        for (p, v) in vals.iter().enumerate() {
            acc = &acc + &k.omega(p).scale(v);
        }
        prop_assert_eq!(acc, f.evaluate(&x).unwrap());
    }

    #[test]
    fn local_counts_match(seed in any::<u64>(), p in prop::sample::select(vec![2u64, 3, 5])) {
        let k = field(false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Gqf::random(&k, 2, &mut rng, 3, 0.5);
        if let Ok(sys) = IntSystem::new(&f, &elem(&k, &mut rng, 5)) {
            prop_assert_eq!(local_count(&sys, p, 1, DEFAULT_BUDGET).unwrap(), local_count_bruteforce(&sys, p, 1));
        }
    }

    #[test]
    fn split_counter_matches_direct(seed in any::<u64>()) {
        let k = field(false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..4);
        let m = rng.gen_range(1..=n);
        let a: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..4)).map(|x| if x == 0 { 2 } else { x }).collect();
        let b: Vec<i64> = (0..m).map(|_| rng.gen_range(-3..4)).map(|x| if x == 0 { 1 } else { x }).collect();
        let f = Gqf::make_diagonal_int(&k, &a, &b, 1).unwrap();
        let target = k.elem_i64(&[rng.gen_range(-10..20), rng.gen_range(-4..5)]);
        let xi: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let spec = CountSpec { form: f, target, p: 5.0, weight: Weight::Indicator, xi, delta: 0.5 };
        prop_assert_eq!(count_direct(&spec, DEFAULT_COUNT_BUDGET).unwrap().count, count_split_diagonal(&spec, DEFAULT_COUNT_BUDGET).unwrap().count);
    }
}

fn random_standard(k: &Field, rng: &mut ChaCha8Rng) -> Gqf {
    let mut a = vec![vec![k.zero(), k.zero()], vec![k.zero(), k.zero()]];
    for i in 0..2 {
        for j in i..2 {
            let v = elem(k, rng, 2);
            a[i][j] = v.clone();
            a[j][i] = v;
        }
    }
    Gqf::make_standard(k, &a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponential_sum_invariants(seed in any::<u64>()) {
        let k = field(false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = if rng.gen_bool(0.5) { Gqf::random(&k, 2, &mut rng, 2, 0.5) } else { random_standard(&k, &mut rng) };
        let ideals: Vec<_> = ideals_up_to(&k, 20).unwrap().into_iter().filter(|b| !b.is_unit()).collect();
        let b = &ideals[rng.gen_range(0..ideals.len())];
        let gn = g_ideal(&f, b).norm_u64().unwrap();
        prop_assume!(gn * gn <= 200_000);
        let h = h_lattice(&f, b).unwrap();
        prop_assert!(h.containment_holds());
        prop_assert!(h.index_identity_holds());
        let basis = g_ideal(&f, b).trace_dual().basis_elements();
        let m: Vec<FieldElement> = (0..2).map(|_| basis.iter().fold(k.zero(), |acc, z| &acc + &z.scale(&q(rng.gen_range(-2..=2))))).collect();
        let nn = elem(&k, &mut rng, 6);
        let s1 = s_sum_gamma(&f, b, &nn, &m).unwrap();
        let s2 = s_sum_moebius(&f, b, &nn, &m).unwrap();
        let bound = s_bound(&h).unwrap();
        if f.g_set() == [0] {
            prop_assert!(s1.norm() <= bound + 1e-6);
        }
        prop_assert!(relative_deviation(s1, s2, bound) < 1e-8);
        if !h.pairs_integrally(&m) {
            prop_assert!(s1.norm() < 1e-9 * bound);
        }
    }
}
