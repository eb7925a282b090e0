//! Univariate polynomials: exact rational arithmetic, real-root isolation via
//! Sturm sequences, and factorization over 𝔽_p.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{q, to_f64, Q};

/// Coefficients low to high.
pub type QPoly = Vec<Q>;

pub fn trim(mut p: QPoly) -> QPoly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

pub fn degree(p: &QPoly) -> isize {
    p.len() as isize - 1
}

pub fn mul(a: &QPoly, b: &QPoly) -> QPoly {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

pub fn sub(a: &QPoly, b: &QPoly) -> QPoly {
    let n = a.len().max(b.len());
    trim((0..n).map(|i| a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default()).collect())
}

pub fn rem(a: &QPoly, m: &QPoly) -> QPoly {
    let m = trim(m.clone());
    let mut r = trim(a.clone());
    let dm = m.len() - 1;
    let lead = m[dm].clone();
    while r.len() > dm {
        let k = r.len() - 1 - dm;
        let f = r.last().unwrap() / &lead;
        for (i, c) in m.iter().enumerate() {
            r[k + i] -= &f * c;
        }
        r = trim(r);
    }
    r
}

pub fn mulmod(a: &QPoly, b: &QPoly, m: &QPoly) -> QPoly {
    rem(&mul(a, b), m)
}

pub fn derivative(p: &QPoly) -> QPoly {
    trim(p.iter().enumerate().skip(1).map(|(i, c)| c * q(i as i64)).collect())
}

pub fn eval_q(p: &QPoly, x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
}

pub fn eval_f64(p: &QPoly, x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(c))
}

/// Compose p(h(θ)) modulo m.
pub fn compose_mod(p: &QPoly, h: &QPoly, m: &QPoly) -> QPoly {
    let mut acc: QPoly = vec![];
    for c in p.iter().rev() {
        acc = mulmod(&acc, h, m);
        let mut t = acc.clone();
        if t.is_empty() {
            t.push(Q::zero());
        }
        t[0] += c;
        acc = trim(t);
    }
    acc
}

fn sturm_chain(p: &QPoly) -> Vec<QPoly> {
    let mut chain = vec![p.clone(), derivative(p)];
    loop {
        let n = chain.len();
        if chain[n - 1].is_empty() {
            chain.pop();
            break;
        }
        let r = rem(&chain[n - 2], &chain[n - 1]);
        if r.is_empty() {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    chain
}

fn sign_changes_at(chain: &[QPoly], x: &Q) -> usize {
    let signs: Vec<i32> = chain
        .iter()
        .map(|p| {
            let v = eval_q(p, x);
            if v.is_zero() {
                0
            } else if v.is_positive() {
                1
            } else {
                -1
            }
        })
        .filter(|&s| s != 0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn sign_changes_at_inf(chain: &[QPoly], positive: bool) -> usize {
    let signs: Vec<i32> = chain
        .iter()
        .map(|p| {
            let lead = p.last().unwrap().is_positive();
            let odd = (p.len() - 1) % 2 == 1;
            let s = if positive || !odd { lead } else { !lead };
            if s { 1 } else { -1 }
        })
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of distinct real roots (exact).
pub fn count_real_roots(p: &QPoly) -> usize {
    let chain = sturm_chain(p);
    sign_changes_at_inf(&chain, false) - sign_changes_at_inf(&chain, true)
}

pub fn is_squarefree(p: &QPoly) -> bool {
    let mut a = p.clone();
    let mut b = derivative(p);
    while !b.is_empty() {
        let r = rem(&a, &b);
        a = b;
        b = r;
    }
    a.len() == 1
}

/// Isolated, refined real roots in ascending order.
pub fn real_roots(p: &QPoly) -> Vec<f64> {
    let chain = sturm_chain(p);
    let lead = p.last().unwrap().abs();
    let bound = p.iter().fold(Q::zero(), |m, c| if c.abs() > m { c.abs() } else { m }) / lead + Q::one();
    let mut stack = vec![(-bound.clone(), bound)];
    let mut intervals = Vec::new();
    while let Some((a, b)) = stack.pop() {
        let n = sign_changes_at(&chain, &a) - sign_changes_at(&chain, &b);
        if n == 0 {
            continue;
        }
        if n == 1 {
            intervals.push((a, b));
            continue;
        }
        let mid = (&a + &b) / q(2);
        stack.push((a, mid.clone()));
        stack.push((mid, b));
    }
    let mut roots: Vec<f64> = intervals
        .into_iter()
        .map(|(a, b)| {
            if eval_q(p, &b).is_zero() {
                return to_f64(&b);
            }
            let (mut lo, mut hi) = (to_f64(&a), to_f64(&b));
            let flo = eval_f64(p, lo).signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eval_f64(p, mid).signum() == flo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let dp = derivative(p);
            let mut x = 0.5 * (lo + hi);
            for _ in 0..3 {
                let d = eval_f64(&dp, x);
                if d != 0.0 {
                    let nx = x - eval_f64(p, x) / d;
                    if nx >= lo && nx <= hi {
                        x = nx;
                    }
                }
            }
            x
        })
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

// ---------- 𝔽_p polynomials ----------

pub type FpPoly = Vec<u64>;

fn mulmod_u(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn inv_mod(a: i128, m: i128) -> Option<i128> {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

fn fp_trim(mut a: FpPoly) -> FpPoly {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn fp_sub(a: &FpPoly, b: &FpPoly, p: u64) -> FpPoly {
    let n = a.len().max(b.len());
    fp_trim(
        (0..n)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect(),
    )
}

fn fp_mul(a: &FpPoly, b: &FpPoly, p: u64) -> FpPoly {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mulmod_u(x, y, p)) % p;
        }
    }
    fp_trim(out)
}

/// (quotient, remainder).
fn fp_divrem(a: &FpPoly, m: &FpPoly, p: u64) -> (FpPoly, FpPoly) {
    let m = fp_trim(m.clone());
    let dm = m.len() - 1;
    let inv = inv_mod(m[dm] as i128, p as i128).unwrap() as u64;
    let mut r = fp_trim(a.clone());
    if r.len() <= dm {
        return (vec![], r);
    }
    let mut qt = vec![0u64; r.len() - dm];
    while r.len() > dm {
        let k = r.len() - 1 - dm;
        let f = mulmod_u(*r.last().unwrap(), inv, p);
        qt[k] = f;
        for (i, &c) in m.iter().enumerate() {
            r[k + i] = (r[k + i] + p - mulmod_u(f, c, p)) % p;
        }
        r = fp_trim(r);
    }
    (fp_trim(qt), r)
}

fn fp_monic(a: &FpPoly, p: u64) -> FpPoly {
    let inv = inv_mod(*a.last().unwrap() as i128, p as i128).unwrap() as u64;
    a.iter().map(|&c| mulmod_u(c, inv, p)).collect()
}

fn fp_gcd(a: &FpPoly, b: &FpPoly, p: u64) -> FpPoly {
    let (mut x, mut y) = (fp_trim(a.clone()), fp_trim(b.clone()));
    while !y.is_empty() {
        let r = fp_divrem(&x, &y, p).1;
        x = y;
        y = r;
    }
    if x.is_empty() { x } else { fp_monic(&x, p) }
}

fn fp_powmod(base: &FpPoly, mut e: u128, m: &FpPoly, p: u64) -> FpPoly {
    let mut result: FpPoly = vec![1];
    let mut b = fp_divrem(base, m, p).1;
    while e > 0 {
        if e & 1 == 1 {
            result = fp_divrem(&fp_mul(&result, &b, p), m, p).1;
        }
        b = fp_divrem(&fp_mul(&b, &b, p), m, p).1;
        e >>= 1;
    }
    result
}

fn equal_degree_split(f: &FpPoly, k: usize, p: u64, rng: &mut ChaCha8Rng) -> Vec<FpPoly> {
    let n = f.len() - 1;
    if n == k {
        return vec![f.clone()];
    }
    if p == 2 {
        // Trial division by all monic polynomials of degree k.
        for code in 0u64..(1u64 << k) {
            let mut g: FpPoly = (0..k).map(|i| (code >> i) & 1).collect();
            g.push(1);
            let (qt, r) = fp_divrem(f, &g, p);
            if r.is_empty() {
                let mut out = equal_degree_split(&g, k, p, rng);
                out.extend(equal_degree_split(&qt, k, p, rng));
                return out;
            }
        }
        unreachable!("equal-degree factor exists");
    }
    let e = ((p as u128).pow(k as u32) - 1) / 2;
    loop {
        let a: FpPoly = fp_trim((0..n).map(|_| rng.gen_range(0..p)).collect());
        if a.len() < 2 {
            continue;
        }
        let h = fp_sub(&fp_powmod(&a, e, f, p), &vec![1], p);
        let g = fp_gcd(f, &h, p);
        if g.len() > 1 && g.len() < f.len() {
            let (qt, _) = fp_divrem(f, &g, p);
            let mut out = equal_degree_split(&g, k, p, rng);
            out.extend(equal_degree_split(&fp_monic(&qt, p), k, p, rng));
            return out;
        }
    }
}

/// Factor a monic polynomial over 𝔽_p into (monic irreducible, multiplicity).
pub fn factor_mod_p(f: &FpPoly, p: u64) -> Vec<(FpPoly, usize)> {
    let f = fp_monic(&fp_trim(f.clone()), p);
    let n = f.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(p);
    let mut irreducibles: Vec<FpPoly> = Vec::new();
    let x: FpPoly = vec![0, 1];
    let mut xp = x.clone();
    for k in 1..=n {
        xp = fp_powmod(&xp, p as u128, &f, p);
        let mut h = fp_gcd(&f, &fp_sub(&xp, &x, p), p);
        for g in &irreducibles {
            if k % (g.len() - 1) == 0 {
                let (qt, r) = fp_divrem(&h, g, p);
                if r.is_empty() {
                    h = qt;
                }
            }
        }
        if h.len() > 1 {
            irreducibles.extend(equal_degree_split(&fp_monic(&h, p), k, p, &mut rng));
        }
    }
    let mut out = Vec::new();
    for g in irreducibles {
        let mut rest = f.clone();
        let mut e = 0;
        loop {
            let (qt, r) = fp_divrem(&rest, &g, p);
            if !r.is_empty() {
                break;
            }
            rest = qt;
            e += 1;
        }
        out.push((g, e));
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_counts() {
        let f = vec![q(-1), q(-2), q(1), q(1)];
        assert_eq!(count_real_roots(&f), 3);
        let g = vec![q(1), q(0), q(1)];
        assert_eq!(count_real_roots(&g), 0);
        let r = real_roots(&vec![q(-2), q(0), q(1)]);
        assert!((r[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn factor_x2_minus_2() {
        let f: FpPoly = vec![5, 0, 1];
        assert_eq!(factor_mod_p(&f, 7), vec![(vec![3, 1], 1), (vec![4, 1], 1)]);
        assert_eq!(factor_mod_p(&vec![1, 0, 1], 3), vec![(vec![1, 0, 1], 1)]);
        assert_eq!(factor_mod_p(&vec![0, 0, 1], 2), vec![(vec![0, 1], 2)]);
    }

    #[test]
    fn factor_cubic_degrees_sum() {
        for p in [2u64, 3, 5, 7, 13, 29, 97] {
            let f: FpPoly = vec![p - 1, p - 2, 1, 1];
            let fs = factor_mod_p(&f, p);
            let total: usize = fs.iter().map(|(g, e)| (g.len() - 1) * e).sum();
            assert_eq!(total, 3);
        }
    }
}
