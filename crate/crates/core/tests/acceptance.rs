use std::io::Write;
use std::time::Instant;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gqf_core::counting::{compare_to_prediction, count_split_diagonal, CountSpec, DEFAULT_COUNT_BUDGET};
use gqf_core::density::{predict, PredictParams, Weight};
use gqf_core::descent::{descend, lift, to_u, DescendedSystem};
use gqf_core::expsum::*;
use gqf_core::form::Gqf;
use gqf_core::ideal::{factor_prime, ideals_up_to, is_prime_u64, Ideal};
use gqf_core::linalg::{q, Q};
use gqf_core::{Field, FieldElement, FieldExt, NumberField};

fn line(id: u32, name: &str, pass: bool, detail: String) {
    let s = format!("[criterion {id:02}] {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().write_all(s.as_bytes()).unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn k2() -> Field {
    NumberField::real_quadratic(2).unwrap()
}

fn sqrt2(k: &Field) -> FieldElement {
    k.omega(1)
}

fn diag(k: &Field, a: &[i64], b: &[i64]) -> Gqf {
    Gqf::make_diagonal_int(k, a, b, 1).unwrap()
}

fn random_int(k: &Field, rng: &mut ChaCha8Rng, r: i64) -> FieldElement {
    k.elem_i64(&(0..k.degree).map(|_| rng.gen_range(-r..=r)).collect::<Vec<_>>())
}

fn random_dual(f: &Gqf, b: &Ideal, rng: &mut ChaCha8Rng) -> Vec<FieldElement> {
    let k = &f.field;
    let basis = g_ideal(f, b).trace_dual().basis_elements();
    (0..f.n).map(|_| basis.iter().fold(k.zero(), |acc, z| &acc + &z.scale(&q(rng.gen_range(-3..=3))))).collect()
}

fn random_system(k: &Field, n: usize, rng: &mut ChaCha8Rng) -> DescendedSystem {
    let d = k.degree;
    let dim = n * d;
    let forms = (0..d)
        .map(|_| {
            let mut m = vec![vec![Q::zero(); dim]; dim];
            for a in 0..dim {
                for b in a..dim {
                    if rng.gen_bool(0.6) {
                        let v = Q::new(rng.gen_range(-9..=9).into(), rng.gen_range(1..=4).into());
                        m[a][b] = v.clone();
                        m[b][a] = v;
                    }
                }
            }
            m
        })
        .collect();
    DescendedSystem { field: k.clone(), n, forms, shift: None }
}


#[test]
fn criterion_01_descent_bijection() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut bad = 0;
    for k in [k2(), NumberField::cyclic_cubic().unwrap()] {
        for i in 0..100 {
            let f = Gqf::random(&k, 2 + i % 2, &mut rng, 6, 0.6);
            if lift(&descend(&f)).unwrap() != f {
                bad += 1;
            }
            let s = random_system(&k, 2 + i % 2, &mut rng);
            let back = descend(&lift(&s).unwrap());
            if back.n != s.n || back.forms != s.forms {
                bad += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(1, "descent bijection", bad == 0 && secs < 30.0, format!("{bad} mismatches in 400 round trips, {secs:.2}s"));
}

#[test]
fn criterion_02_displayed_system() {
    let k = k2();
    let (a, b) = ([1i64, 2, -3, 5, 7], [4i64, -1]);
    let (n, m) = (a.len(), b.len());
    let s = descend(&diag(&k, &a, &b));
    let dim = 2 * n;
    let mut q1 = vec![vec![Q::zero(); dim]; dim];
    let mut q2 = vec![vec![Q::zero(); dim]; dim];
    for i in 0..n {
        let (u, v) = (i, n + i);
        let (c1, c2) = if i < m { (a[i] + b[i], a[i] - b[i]) } else { (a[i], a[i]) };
        q1[u][u] = q(c1);
        q1[v][v] = q(2 * c1);
        q2[u][v] = q(c2);
        q2[v][u] = q(c2);
    }
    let sym = |x: &Vec<Vec<Q>>| -> Vec<Vec<Q>> {
        (0..dim).map(|r| (0..dim).map(|c| (&x[r][c] + &x[c][r]) / q(2)).collect()).collect()
    };
    let ok = sym(&s.forms[0]) == q1 && sym(&s.forms[1]) == q2;
    line(2, "displayed descended system", ok, format!("n = {n}, m = {m}, {} coefficients compared", 2 * dim * dim));
}

#[test]
fn criterion_03_descent_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut bad = 0;
    let mut total = 0;
    for k in [k2(), NumberField::cyclic_cubic().unwrap()] {
        let fixtures = [Gqf::random(&k, 3, &mut rng, 5, 0.7), diag(&k, &[1, 2, -3], &[4, 1])];
        for f in fixtures {
            let s = descend(&f);
            for _ in 0..1000 {
                let x: Vec<FieldElement> = (0..f.n).map(|_| random_int(&k, &mut rng, 20)).collect();
                let vals = s.eval(&to_u(&x));
                let mut acc = k.zero();
                for (p, v) in vals.iter().enumerate() {
                    acc = &acc + &k.omega(p).scale(v);
                }
                bad += (acc != f.evaluate(&x).unwrap()) as usize;
                total += 1;
            }
        }
    }
    line(3, "F(x) = Σ ω_p Q_p(u)", bad == 0, format!("{bad}/{total} mismatches"));
}

#[test]
fn criterion_04_gauss_sums() {
    let k = k2();
    let mut primes = Vec::new();
    for p in 3..1000u64 {
        if is_prime_u64(p) && (p % 8 == 1 || p % 8 == 7) {
            for pr in factor_prime(&k, p).unwrap() {
                primes.push(pr.ideal);
            }
        }
        if primes.len() >= 20 {
            break;
        }
    }
    let worst = primes
        .iter()
        .map(|pp| {
            let np = pp.norm_u64().unwrap() as f64;
            (gauss_sum(pp).unwrap().norm() - np.sqrt()).abs() / np.sqrt()
        })
        .fold(0.0, f64::max);
    line(4, "Gauss sums", primes.len() == 20 && worst < 1e-9, format!("{} primes, max relative deviation {worst:.2e}", primes.len()));
}

#[test]
fn criterion_05_multiplicativity() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let ideals: Vec<Ideal> = ideals_up_to(&k, 250).unwrap().into_iter().filter(|b| !b.is_unit()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut worst, mut worst0, mut done) = (0.0f64, 0.0f64, 0);
    while done < 50 {
        let b1 = &ideals[rng.gen_range(0..ideals.len())];
        let b2 = &ideals[rng.gen_range(0..ideals.len())];
        let (n1, n2) = (b1.norm_u64().unwrap(), b2.norm_u64().unwrap());
        if num_integer::gcd(n1, n2) != 1 || n1 * n2 > 500 {
            continue;
        }
        let b = b1.mul(b2);
        let m = random_dual(&f, &b, &mut rng);
        let nn = random_int(&k, &mut rng, 9);
        let r = verify_multiplicativity(&f, b1, b2, &nn, &m).unwrap();
        worst = worst.max(r.rel_diff);
        worst0 = worst0.max(r.rel_diff_zero);
        done += 1;
    }
    line(5, "multiplicativity", worst < 1e-8 && worst0 < 1e-8, format!("50 pairs, max deviation {worst:.2e}, m = 0 factorization {worst0:.2e}"));
}

#[test]
fn criterion_06_vanishing() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let s2 = sqrt2(&k);
    let moduli = [
        Ideal::principal(&(&k.from_int(3) + &s2)).unwrap(),
        Ideal::principal(&(&k.from_int(5) + &s2)).unwrap(),
        Ideal::principal(&(&k.from_int(1) + &(&s2 * &k.from_int(3)))).unwrap(),
        Ideal::principal(&s2).unwrap().mul(&Ideal::principal(&(&k.from_int(3) - &s2)).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst = 0.0f64;
    let mut count = 0;
    for b in &moduli {
        let h = h_lattice(&f, b).unwrap();
        let scale = s_bound(&h).unwrap();
        for _ in 0..5 {
            let m = violating_m(&h, &mut rng, 2000).unwrap();
            assert!(!h.pairs_integrally(&m));
            let s = s_sum_gamma(&f, b, &random_int(&k, &mut rng, 9), &m).unwrap();
            worst = worst.max(s.norm() / scale);
            count += 1;
        }
    }
    line(6, "vanishing outside the 𝓗-dual", count == 20 && worst < 1e-9, format!("{count} sums, max |S|/normalization {worst:.2e}"));
}

#[test]
fn criterion_07_oracle_equivalence() {
    let k = k2();
    let cubic = NumberField::cyclic_cubic().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let forms = [
        diag(&k, &[1, 1], &[1]),
        diag(&k, &[1, 2, 3], &[1]),
        Gqf::random(&k, 2, &mut rng, 3, 0.7),
        Gqf::random(&cubic, 2, &mut rng, 2, 0.5),
    ];
    let ideal_sets: Vec<Vec<Ideal>> = [&k, &cubic].iter().map(|kk| ideals_up_to(kk, 60).unwrap().into_iter().filter(|b| !b.is_unit()).collect()).collect();
    let (mut worst, mut done) = (0.0f64, 0);
    while done < 50 {
        let f = &forms[done % forms.len()];
        let set = if f.field.degree == 2 { &ideal_sets[0] } else { &ideal_sets[1] };
        let b = &set[rng.gen_range(0..set.len())];
        let gn = g_ideal(f, b).norm_u64().unwrap() as f64;
        if gn.powi(f.n as i32) > 3e6 {
            continue;
        }
        let m = random_dual(f, b, &mut rng);
        let nn = random_int(&f.field, &mut rng, 9);
        let s1 = s_sum_gamma(f, b, &nn, &m).unwrap();
        let s2 = s_sum_moebius(f, b, &nn, &m).unwrap();
        worst = worst.max(relative_deviation(s1, s2, s_bound(&h_lattice(f, b).unwrap()).unwrap()));
        done += 1;
    }
    line(7, "γ-route = Möbius route", worst < 1e-8, format!("50 instances, max relative deviation {worst:.2e}"));
}

#[test]
fn criterion_08_prime_power_identity() {
    let k = k2();
    let mut worst = 0.0f64;
    for f in [diag(&k, &[1, 1], &[1]), diag(&k, &[1, 2, 3], &[1])] {
        for p in [3, 5, 7] {
            for l in [1, 2] {
                let r = i_ell_identity(&f, &k.from_int(3), p, l).unwrap();
                worst = worst.max(r.rel_diff);
            }
        }
    }
    line(8, "I_ℓ prime-power identity", worst < 1e-6, format!("n ∈ {{2,3}}, p ∈ {{3,5,7}}, ℓ ∈ {{1,2}}, max relative deviation {worst:.2e}"));
}

#[test]
fn criterion_09_lattice_structure() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let all: Vec<Ideal> = ideals_up_to(&k, 500).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let (mut bad, mut done) = (Vec::new(), 0);
    while done < 50 {
        let b = &all[rng.gen_range(0..all.len())];
        let h = h_lattice(&f, b).unwrap();
        let kap = kappa_inclusion(&f, &h).unwrap();
        if !(h.index_identity_holds() && h.containment_holds() && kap.holds && kap.inverses_integral) {
            bad.push(b.norm_u64().unwrap());
        }
        done += 1;
    }
    line(9, "𝓗_𝔟 index identity, containment, κ-inclusion", bad.is_empty(), format!("50 ideals, failures at norms {bad:?}"));
}

#[test]
fn criterion_10_sigma_recomposition() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let primes: Vec<Ideal> = [7u64, 17, 23, 31, 41].iter().flat_map(|&p| factor_prime(&k, p).unwrap().into_iter().map(|pr| pr.ideal)).collect();
    let mut worst = 0.0f64;
    for pp in primes.iter().take(10) {
        let v = random_dual(&f, pp, &mut rng);
        let nn = random_int(&k, &mut rng, 9);
        let r = sigma_decomposition(&f, pp, &nn, &v).unwrap();
        worst = worst.max(r.rel_diff);
    }
    line(10, "Σ₀Σ₁Σ₂ recomposition", worst < 1e-8, format!("10 (prime, v) pairs, max relative deviation {worst:.2e}"));
}

#[test]
fn criterion_11_desk_scale_ratio() {
    let t = Instant::now();
    let k = k2();
    let f = diag(&k, &[1; 5], &[1]);
    let nn = k.from_int(3);
    let params = PredictParams { p: 24.0, p_max: 50, delta: 0.25, weight: Weight::Indicator, ..Default::default() };
    let rep = predict(&f, &nn, &params).unwrap();
    let si = rep.sigma_infinity.as_ref().expect("σ_∞ computed");
    let rel_err = si.stderr / si.value;
    let spec = CountSpec { form: f.clone(), target: nn, p: 24.0, weight: Weight::Indicator, xi: rep.xi.clone().unwrap(), delta: 0.25 };
    let c = count_split_diagonal(&spec, DEFAULT_COUNT_BUDGET).unwrap();
    let cmp = compare_to_prediction(&c, &rep);
    let ok = (0.7..=1.3).contains(&cmp.ratio) && rel_err < 0.02;
    line(
        11,
        "desk-scale count/prediction",
        ok,
        format!("P = 24, count = {}, c·P⁶ = {:.3}, ratio = {:.4}, σ_∞ stderr {:.2}%, {:.1}s", c.count, cmp.predicted, cmp.ratio, 100.0 * rel_err, t.elapsed().as_secs_f64()),
    );
}

#[test]
fn criterion_12_local_obstruction() {
    let k = k2();
    let f = diag(&k, &[3; 5], &[3]);
    let nn = k.one();
    let params = PredictParams { p: 8.0, p_max: 13, samples: 200_000, ..Default::default() };
    let rep = predict(&f, &nn, &params).unwrap();
    let mut counts = Vec::new();
    for p in [4.0, 8.0, 12.0] {
        for xi in [vec![0.0; 10], vec![0.1, 0.0, -0.2, 0.05, 0.0, 0.1, 0.0, 0.0, 0.1, 0.0]] {
            let spec = CountSpec { form: f.clone(), target: nn.clone(), p, weight: Weight::Indicator, xi, delta: 0.25 };
            counts.push(count_split_diagonal(&spec, DEFAULT_COUNT_BUDGET).unwrap().count);
        }
    }
    let ok = rep.obstructed && rep.predicted == 0.0 && counts.iter().all(|c| c.is_zero());
    line(12, "local obstruction", ok, format!("σ_3 = 0: obstructed = {}, predicted = {}, counts = {counts:?}", rep.obstructed, rep.predicted));
}

#[test]
fn invariants_bound_and_gamma_independence() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    for b in ideals_up_to(&k, 60).unwrap().into_iter().filter(|b| !b.is_unit()) {
        let h = h_lattice(&f, &b).unwrap();
        let m = random_dual(&f, &b, &mut rng);
        let s = s_sum_gamma(&f, &b, &k.from_int(3), &m).unwrap();
        assert!(s.norm() <= s_bound(&h).unwrap() + 1e-6);
        let ch = gqf_core::character::find_primitive_gamma(&b, 64).unwrap();
        let other = ch.gamma.scale(&q(-1));
        let s_other = s_sum_gamma_with(&f, &b, &k.from_int(3), &m, &other, DEFAULT_EXPSUM_BUDGET).unwrap();
        assert!(relative_deviation(s, s_other, s_bound(&h).unwrap()) < 1e-8);
    }
    assert!(Q::one() == q(1));
}

#[test]
fn special_shape_vanishing() {
    let k = k2();
    let f = diag(&k, &[1, 1], &[1]);
    let b = Ideal::principal(&(&k.from_int(3) + &sqrt2(&k))).unwrap();
    let bd = b.mul(&gqf_core::ideal::different(&k)).inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let h = h_lattice(&f, &b).unwrap();
    let mut hits = 0;
    for _ in 0..40 {
        let m = random_dual(&f, &b, &mut rng);
        if bd.contains(&m[1]) {
            continue;
        }
        hits += 1;
        let s = s_sum_gamma(&f, &b, &k.from_int(2), &m).unwrap();
        assert!(s.norm() < 1e-9 * s_bound(&h).unwrap());
    }
    assert!(hits > 0);
}
