//! Local densities, the truncated singular series, the singular integral and
//! the main-term constant.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{descend, DescendedSystem};
use crate::error::{Error, Result};
use crate::field::{FieldElement, NumberField};
use crate::form::Gqf;
use crate::ideal::is_prime_u64;
use crate::linalg::{self, Q};

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;
pub const DEFAULT_DELTA: f64 = 0.25;
const MC_SHARDS: u64 = 64;

/// Integer descended system with its shift, in a layout suited to modular enumeration.
#[derive(Clone, Debug)]
pub struct IntSystem {
    pub d: usize,
    pub n: usize,
    pub dim: usize,
    /// mats[p][a*dim + b]
    pub mats: Vec<Vec<i64>>,
    pub target: Vec<i64>,
}

impl IntSystem {
    pub fn new(f: &Gqf, nn: &FieldElement) -> Result<IntSystem> {
        if !f.is_integral() {
            return Err(Error::invalid("local densities need an integral form"));
        }
        let sys = descend(f).shift(nn)?;
        Self::from_system(&sys)
    }

    pub fn from_system(sys: &DescendedSystem) -> Result<IntSystem> {
        let mats = sys.int_forms().ok_or_else(|| Error::invalid("descended system is not integral"))?;
        Ok(IntSystem { d: sys.d(), n: sys.n, dim: sys.dim(), mats, target: sys.shift_i64() })
    }

    fn eval_mod(&self, u: &[i64], vars: &[usize], q: i64) -> Vec<i64> {
        self.mats
            .iter()
            .map(|m| {
                let mut acc: i128 = 0;
                for &a in vars {
                    if u[a] == 0 {
                        continue;
                    }
                    let mut row: i128 = 0;
                    for &b in vars {
                        row += m[a * self.dim + b] as i128 * u[b] as i128;
                    }
                    acc += row * u[a] as i128;
                }
                acc.rem_euclid(q as i128) as i64
            })
            .collect()
    }

    /// Variable blocks (in u-indices) that do not interact.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for m in &self.mats {
            for a in 0..self.dim {
                for b in 0..self.dim {
                    if m[a * self.dim + b] != 0 {
                        let (x, y) = (find(&mut parent, a % self.n), find(&mut parent, b % self.n));
                        parent[x] = y;
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of: Vec<Option<usize>> = vec![None; self.n];
        for i in 0..self.n {
            let r = find(&mut parent, i);
            let g = *root_of[r].get_or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i);
        }
        groups.into_iter().map(|g| (0..self.d).flat_map(|l| g.iter().map(move |&i| l * self.n + i)).collect()).collect()
    }
}

struct Grid {
    q: u64,
    d: usize,
    size: usize,
    digits: Vec<Vec<u32>>,
}

impl Grid {
    fn new(q: u64, d: usize) -> Grid {
        let size = (q as usize).pow(d as u32);
        let digits = (0..size)
            .map(|mut x| {
                (0..d)
                    .map(|_| {
                        let r = (x % q as usize) as u32;
                        x /= q as usize;
                        r
                    })
                    .collect()
            })
            .collect();
        Grid { q, d, size, digits }
    }

    fn index(&self, v: &[i64]) -> usize {
        v.iter().rev().fold(0usize, |acc, &x| acc * self.q as usize + x.rem_euclid(self.q as i64) as usize)
    }

    fn sub(&self, c: usize, a: usize) -> usize {
        let q = self.q as usize;
        let mut idx = 0;
        for p in (0..self.d).rev() {
            let x = (self.digits[c][p] as usize + q - self.digits[a][p] as usize) % q;
            idx = idx * q + x;
        }
        idx
    }
}

fn histogram(sys: &IntSystem, vars: &[usize], grid: &Grid) -> Vec<u128> {
    let q = grid.q as i64;
    let mut h = vec![0u128; grid.size];
    let mut u = vec![0i64; sys.dim];
    loop {
        h[grid.index(&sys.eval_mod(&u, vars, q))] += 1;
        let mut k = 0;
        loop {
            if k == vars.len() {
                return h;
            }
            u[vars[k]] += 1;
            if u[vars[k]] < q {
                break;
            }
            u[vars[k]] = 0;
            k += 1;
        }
    }
}

fn convolve(a: &[u128], b: &[u128], grid: &Grid) -> Vec<u128> {
    let nz: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0).collect();
    (0..grid.size).into_par_iter().map(|c| nz.iter().map(|&i| a[i] * b[grid.sub(c, i)]).sum()).collect()
}

fn nnz(a: &[u128]) -> u64 {
    a.iter().filter(|&&x| x != 0).count() as u64
}

/// #{u mod p^ℓ : Q(u) ≡ N mod p^ℓ}, by per-component histograms and exact convolution.
pub fn local_count(sys: &IntSystem, p: u64, l: u32, budget: u64) -> Result<u128> {
    if l == 0 {
        return Err(Error::invalid("ℓ must be at least 1"));
    }
    let q = p.checked_pow(l).filter(|&q| q < (1 << 31)).ok_or_else(|| Error::Budget {
        what: format!("modulus {p}^{l}; lower ℓ"),
        needed: (p as f64).powi(l as i32),
        cap: (1u64 << 31) as f64,
    })?;
    let total_bits = (sys.dim as f64) * (q as f64).log2();
    if total_bits >= 127.0 {
        return Err(Error::Budget { what: format!("count range at {p}^{l}; lower ℓ"), needed: total_bits, cap: 127.0 });
    }
    let comps = sys.components();
    let m = (q as f64).powi(sys.d as i32);
    let mut work: f64 = comps.iter().map(|c| (q as f64).powi(c.len() as i32)).sum();
    work += m * m * (comps.len().saturating_sub(2)) as f64 + m;
    if work > budget as f64 || m > 5e7 {
        return Err(Error::Budget { what: format!("local density at {p}^{l}; lower ℓ"), needed: work, cap: budget as f64 });
    }
    let grid = Grid::new(q, sys.d);
    let mut hists: Vec<Vec<u128>> = Vec::with_capacity(comps.len());
    let mut seen: Vec<(Vec<Vec<i64>>, usize)> = Vec::new();
    for c in &comps {
        let key: Vec<Vec<i64>> = sys.mats.iter().map(|m| c.iter().flat_map(|&a| c.iter().map(move |&b| m[a * sys.dim + b])).collect()).collect();
        if let Some((_, idx)) = seen.iter().find(|(k, _)| *k == key) {
            let h = hists[*idx].clone();
            hists.push(h);
        } else {
            seen.push((key, hists.len()));
            hists.push(histogram(sys, c, &grid));
        }
    }
    // Balance the two halves by the number of components, then pair them at the target.
    let half = hists.len().div_ceil(2);
    let fold = |hs: &[Vec<u128>]| -> Vec<u128> {
        let mut acc = hs[0].clone();
        for h in &hs[1..] {
            acc = if nnz(&acc) <= nnz(h) { convolve(&acc, h, &grid) } else { convolve(h, &acc, &grid) };
        }
        acc
    };
    let left = fold(&hists[..half]);
    let t = grid.index(&sys.target);
    if half == hists.len() {
        return Ok(left[t]);
    }
    let right = fold(&hists[half..]);
    Ok((0..grid.size).filter(|&a| left[a] != 0).map(|a| left[a] * right[grid.sub(t, a)]).sum())
}

/// Direct enumeration over all of (ℤ/p^ℓ)^{dn}.
pub fn local_count_bruteforce(sys: &IntSystem, p: u64, l: u32) -> u128 {
    let q = p.pow(l) as i64;
    let vars: Vec<usize> = (0..sys.dim).collect();
    let tgt: Vec<i64> = sys.target.iter().map(|x| x.rem_euclid(q)).collect();
    let mut u = vec![0i64; sys.dim];
    let mut count = 0u128;
    loop {
        if sys.eval_mod(&u, &vars, q) == tgt {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == sys.dim {
                return count;
            }
            u[k] += 1;
            if u[k] < q {
                break;
            }
            u[k] = 0;
            k += 1;
        }
    }
}

/// σ_p(ℓ) = p^{-dℓ(n-1)} · #{x mod p^ℓ : F(x) ≡ N}.
pub fn local_density(f: &Gqf, nn: &FieldElement, p: u64, l: u32, budget: u64) -> Result<Q> {
    let sys = IntSystem::new(f, nn)?;
    density_of(&sys, p, l, budget)
}

pub fn density_of(sys: &IntSystem, p: u64, l: u32, budget: u64) -> Result<Q> {
    let count = local_count(sys, p, l, budget)?;
    Ok(normalize(sys, p, l, count))
}

pub fn normalize(sys: &IntSystem, p: u64, l: u32, count: u128) -> Q {
    let e = (sys.d * (sys.n - 1)) as u32 * l;
    Q::new(BigInt::from(count), BigInt::from(p).pow(e))
}

fn inv_mod(a: i64, p: i64) -> i64 {
    let (mut r, mut b, mut e) = (1i64, a.rem_euclid(p), p - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn rank_mod_p(rows: &[Vec<i64>], p: i64) -> usize {
    let mut m: Vec<Vec<i64>> = rows.iter().map(|r| r.iter().map(|x| x.rem_euclid(p)).collect()).collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = inv_mod(m[rank][c], p);
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let fct = m[r][c] * inv % p;
                for k in 0..cols {
                    m[r][k] = (m[r][k] - fct * m[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Randomised search for u mod p with Q(u) ≡ N and full-rank gradient mod p
/// (at p = 2 the halved gradient is used, since every gradient is even).
pub fn nonsingular_solution_mod_p(sys: &IntSystem, p: u64, seed: u64) -> Option<Vec<i64>> {
    let pi = p as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p);
    let vars: Vec<usize> = (0..sys.dim).collect();
    let tgt: Vec<i64> = sys.target.iter().map(|x| x.rem_euclid(pi)).collect();
    let tries = (200.0 * (p as f64).powi(sys.d as i32)).min(2e6) as usize;
    for _ in 0..tries {
        let u: Vec<i64> = (0..sys.dim).map(|_| rng.gen_range(0..pi)).collect();
        if sys.eval_mod(&u, &vars, pi) != tgt {
            continue;
        }
        let factor = if p == 2 { 1 } else { 2 };
        let jac: Vec<Vec<i64>> = sys
            .mats
            .iter()
            .map(|m| (0..sys.dim).map(|a| factor * (0..sys.dim).map(|b| m[a * sys.dim + b] * u[b]).sum::<i64>()).collect())
            .collect();
        if rank_mod_p(&jac, pi) == sys.d {
            return Some(u);
        }
    }
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimeDensity {
    pub p: u64,
    pub l_used: u32,
    #[serde(with = "qstring")]
    pub sigma: Q,
    pub sigma_f64: f64,
    pub stabilized: bool,
    pub nonsingular_solution: bool,
    #[serde(with = "qvec")]
    pub history: Vec<Q>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    pub p_max: u64,
    pub l_max: u32,
    pub primes: Vec<PrimeDensity>,
    pub value: f64,
    pub value_half: f64,
    pub tail_sensitivity: f64,
    pub obstructed: bool,
}

pub fn prime_density(sys: &IntSystem, p: u64, l_max: u32, budget: u64) -> PrimeDensity {
    let nonsingular = nonsingular_solution_mod_p(sys, p, 0x5eed).is_some();
    let mut history: Vec<Q> = Vec::new();
    let mut note = None;
    let mut stabilized = false;
    for l in 1..=l_max.max(1) {
        match density_of(sys, p, l, budget) {
            Ok(v) => {
                let same = history.last() == Some(&v);
                history.push(v);
                if v_is_zero(history.last().unwrap()) {
                    break;
                }
                // at p = 2 lifting only starts to be regular from 2³
                if same && nonsingular && (p != 2 || l >= 3) {
                    stabilized = true;
                    break;
                }
            }
            Err(e) => {
                note = Some(e.to_string());
                break;
            }
        }
    }
    if history.is_empty() {
        return PrimeDensity { p, l_used: 0, sigma: Q::from_integer(1.into()), sigma_f64: 1.0, stabilized: false, nonsingular_solution: nonsingular, history, note };
    }
    let sigma = history.last().unwrap().clone();
    let l_used = if stabilized { history.len() as u32 - 1 } else { history.len() as u32 };
    PrimeDensity { p, l_used, sigma_f64: linalg::to_f64(&sigma), sigma, stabilized, nonsingular_solution: nonsingular, history, note }
}

fn v_is_zero(v: &Q) -> bool {
    v.is_zero()
}

/// 𝔖(N) truncated at p_max; a prime with σ_p(1) = 0 certifies a local obstruction.
pub fn singular_series(f: &Gqf, nn: &FieldElement, p_max: u64, l_max: u32, budget: u64) -> Result<SeriesReport> {
    let sys = IntSystem::new(f, nn)?;
    Ok(singular_series_of(&sys, p_max, l_max, budget))
}

pub fn singular_series_of(sys: &IntSystem, p_max: u64, l_max: u32, budget: u64) -> SeriesReport {
    let primes: Vec<u64> = (2..=p_max).filter(|&p| is_prime_u64(p)).collect();
    let table: Vec<PrimeDensity> = primes.par_iter().map(|&p| prime_density(sys, p, l_max, budget)).collect();
    let value: f64 = table.iter().map(|r| r.sigma_f64).product();
    let value_half: f64 = table.iter().filter(|r| r.p <= p_max / 2).map(|r| r.sigma_f64).product();
    let obstructed = table.iter().any(|r| r.sigma.is_zero());
    let tail_sensitivity = if value_half != 0.0 { (value / value_half - 1.0).abs() } else { 0.0 };
    SeriesReport { p_max, l_max, primes: table, value, value_half, tail_sensitivity, obstructed }
}

/// Newton iteration on Q_l(ξ) = τ_l with minimum-norm steps.
pub fn find_real_point(sys: &DescendedSystem, tau: &[f64], starts: usize, seed: u64) -> Option<Vec<f64>> {
    let fs = sys.forms_f64();
    let dim = sys.dim();
    let d = sys.d();
    let scale = tau.iter().fold(0.0f64, |m, x| m.max(x.abs())).sqrt().max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..starts {
        let mut u = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0) * scale * 2.0);
        for _ in 0..200 {
            let mu: Vec<DVector<f64>> = fs.iter().map(|m| m * &u).collect();
            let r = DVector::from_fn(d, |p, _| tau[p] - u.dot(&mu[p]));
            let j = DMatrix::from_fn(d, dim, |p, a| 2.0 * mu[p][a]);
            let res = r.amax();
            if res < 1e-12 * scale.max(1.0) {
                let sv = j.clone().singular_values();
                let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
                if smin > 1e-6 {
                    return Some(u.iter().cloned().collect());
                }
                break;
            }
            let jjt = &j * j.transpose();
            let Some(step) = jjt.lu().solve(&r) else { break };
            u += j.transpose() * step;
            if !u.iter().all(|x| x.is_finite()) || u.amax() > 1e8 {
                break;
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    Smooth,
    Indicator,
}

/// w(x) = exp(-1/(1-x²)) on |x| < 1.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

fn weight_at(weight: Weight, u: &[f64], xi: &[f64], delta: f64) -> f64 {
    let r = u.iter().zip(xi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / delta;
    match weight {
        Weight::Indicator => {
            if r <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Weight::Smooth => bump(r),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Slab,
    Radial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralReport {
    pub estimator: Estimator,
    pub value: f64,
    pub stderr: f64,
    pub value_half_eps: f64,
    pub stderr_half_eps: f64,
    pub eps: f64,
    pub samples: u64,
    pub accepted: u64,
    pub seed: u64,
}

struct Quad {
    d: usize,
    dim: usize,
    m: Vec<Vec<f64>>,
}

impl Quad {
    fn new(sys: &DescendedSystem) -> Quad {
        let dim = sys.dim();
        Quad { d: sys.d(), dim, m: sys.forms.iter().map(|f| f.iter().flatten().map(linalg::to_f64).collect()).collect() }
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for (p, m) in self.m.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..self.dim {
                let row = &m[a * self.dim..(a + 1) * self.dim];
                let s: f64 = row.iter().zip(u).map(|(x, y)| x * y).sum();
                acc += s * u[a];
            }
            out[p] = acc;
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: u64,
    acc: u64,
    s1: f64,
    s2: f64,
    h1: f64,
    h2: f64,
}

impl Moments {
    fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.acc += o.acc;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.h1 += o.h1;
        self.h2 += o.h2;
        self
    }

    fn finish(&self, scale: f64, scale_half: f64) -> (f64, f64, f64, f64) {
        let n = self.n as f64;
        let mean = self.s1 / n;
        let var = (self.s2 / n - mean * mean).max(0.0);
        let mh = self.h1 / n;
        let vh = (self.h2 / n - mh * mh).max(0.0);
        (mean * scale, (var / n).sqrt() * scale, mh * scale_half, (vh / n).sqrt() * scale_half)
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(shard + 1);
    r
}

/// Monte-Carlo over the box ξ + [-δ,δ]^{dn}, counting |Q_l(u) - τ_l| ≤ ε for all l.
pub fn singular_integral_slab(sys: &DescendedSystem, tau: &[f64], xi: &[f64], delta: f64, weight: Weight, samples: u64, eps: f64, seed: u64) -> Result<IntegralReport> {
    let qd = Quad::new(sys);
    let (d, dim) = (qd.d, qd.dim);
    let per = samples.div_ceil(MC_SHARDS);
    let m = (0..MC_SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s);
            let mut u = vec![0.0; dim];
            let mut val = vec![0.0; d];
            let mut mo = Moments::default();
            for _ in 0..per {
                for a in 0..dim {
                    u[a] = xi[a] + delta * rng.gen_range(-1.0..1.0);
                }
                mo.n += 1;
                qd.eval(&u, &mut val);
                let dev = val.iter().zip(tau).fold(0.0f64, |m, (v, t)| m.max((v - t).abs()));
                if dev <= eps {
                    let w = weight_at(weight, &u, xi, delta);
                    mo.acc += 1;
                    mo.s1 += w;
                    mo.s2 += w * w;
                    if dev <= eps / 2.0 {
                        mo.h1 += w;
                        mo.h2 += w * w;
                    }
                }
            }
            mo
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    if m.acc == 0 {
        return Err(Error::Numerical("no samples fell in the slab; increase δ, ε or the sample count".into()));
    }
    let vol = (2.0 * delta).powi(dim as i32);
    let (v, se, vh, seh) = m.finish(vol / (2.0 * eps).powi(d as i32), vol / eps.powi(d as i32));
    Ok(IntegralReport { estimator: Estimator::Slab, value: v, stderr: se, value_half_eps: vh, stderr_half_eps: seh, eps, samples: m.n, accepted: m.acc, seed })
}

fn ln_gamma_half(k: usize) -> f64 {
    // ln Γ(k/2)
    if k % 2 == 0 {
        (1..k / 2).map(|j| (j as f64).ln()).sum()
    } else {
        let mut acc = 0.5 * std::f64::consts::PI.ln();
        let mut x = 0.5;
        while x < k as f64 / 2.0 - 0.25 {
            acc += x.ln();
            x += 1.0;
        }
        acc
    }
}

/// Surface area of the unit sphere in ℝ^D.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / ln_gamma_half(dim).exp()
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Polar decomposition u = rθ: the radial integral over the slab is done in closed form
/// (or by Gauss–Legendre for the smooth weight), the direction by Monte-Carlo.
pub fn singular_integral_radial(sys: &DescendedSystem, tau: &[f64], xi: &[f64], delta: f64, weight: Weight, samples: u64, eps: f64, seed: u64) -> Result<IntegralReport> {
    let qd = Quad::new(sys);
    let (d, dim) = (qd.d, qd.dim);
    let per = samples.div_ceil(MC_SHARDS);
    let half_dim = dim as f64 / 2.0;
    let radial = |theta: &[f64], qt: &[f64], e: f64| -> f64 {
        // s = r² ∈ ∩_l {|s·Q_l(θ) - τ_l| ≤ e}
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for p in 0..d {
            let (a, t) = (qt[p], tau[p]);
            if a.abs() < 1e-300 {
                if t.abs() > e {
                    return 0.0;
                }
                continue;
            }
            let (x, y) = ((t - e) / a, (t + e) / a);
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
        // ray ∩ box
        let (mut rlo, mut rhi) = (0.0f64, f64::INFINITY);
        for a in 0..dim {
            let (c0, c1) = (xi[a] - delta, xi[a] + delta);
            if theta[a].abs() < 1e-300 {
                if c0 > 0.0 || c1 < 0.0 {
                    return 0.0;
                }
                continue;
            }
            let (x, y) = (c0 / theta[a], c1 / theta[a]);
            rlo = rlo.max(x.min(y));
            rhi = rhi.min(x.max(y));
        }
        lo = lo.max(rlo * rlo);
        hi = hi.min(rhi * rhi);
        if lo.is_nan() || hi <= lo {
            return 0.0;
        }
        match weight {
            Weight::Indicator => (hi.powf(half_dim) - lo.powf(half_dim)) / dim as f64,
            Weight::Smooth => {
                let (mid, half) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
                let mut u = vec![0.0; dim];
                GL8.iter()
                    .map(|&(x, w)| {
                        let s = mid + half * x;
                        let r = s.sqrt();
                        for a in 0..dim {
                            u[a] = r * theta[a];
                        }
                        w * half * 0.5 * s.powf(half_dim - 1.0) * weight_at(Weight::Smooth, &u, xi, delta)
                    })
                    .sum()
            }
        }
    };
    let m = (0..MC_SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s);
            let normal = rand_distr_normal();
            let mut th = vec![0.0; dim];
            let mut qt = vec![0.0; d];
            let mut mo = Moments::default();
            for _ in 0..per {
                let mut nrm = 0.0;
                for a in 0..dim {
                    th[a] = normal(&mut rng);
                    nrm += th[a] * th[a];
                }
                let nrm = nrm.sqrt();
                th.iter_mut().for_each(|x| *x /= nrm);
                qd.eval(&th, &mut qt);
                mo.n += 1;
                let v = radial(&th, &qt, eps);
                if v > 0.0 {
                    mo.acc += 1;
                    mo.s1 += v;
                    mo.s2 += v * v;
                    let vh = radial(&th, &qt, eps / 2.0);
                    mo.h1 += vh;
                    mo.h2 += vh * vh;
                }
            }
            mo
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    if m.acc == 0 {
        return Err(Error::Numerical("no directions met the slab; increase ε or the sample count".into()));
    }
    let area = sphere_area(dim);
    let (v, se, vh, seh) = m.finish(area / (2.0 * eps).powi(d as i32), area / eps.powi(d as i32));
    Ok(IntegralReport { estimator: Estimator::Radial, value: v, stderr: se, value_half_eps: vh, stderr_half_eps: seh, eps, samples: m.n, accepted: m.acc, seed })
}

fn rand_distr_normal() -> impl Fn(&mut ChaCha8Rng) -> f64 {
    |rng: &mut ChaCha8Rng| {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Radial when the box contains the origin (its acceptance does not degrade with small τ),
/// otherwise the box slab.
pub fn singular_integral(sys: &DescendedSystem, tau: &[f64], xi: &[f64], delta: f64, weight: Weight, samples: u64, eps: f64, seed: u64) -> Result<IntegralReport> {
    if xi.iter().all(|x| x.abs() < delta) {
        singular_integral_radial(sys, tau, xi, delta, weight, samples, eps, seed)
    } else {
        singular_integral_slab(sys, tau, xi, delta, weight, samples, eps, seed)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictParams {
    pub p: f64,
    pub p_max: u64,
    pub l_max: u32,
    pub delta: f64,
    pub weight: Weight,
    pub samples: u64,
    /// Slab half-width relative to max(|τ|, P^{-2}).
    pub eps_rel: f64,
    pub seed: u64,
    pub budget: u64,
    pub starts: usize,
}

impl Default for PredictParams {
    fn default() -> Self {
        PredictParams { p: 24.0, p_max: 50, l_max: 3, delta: DEFAULT_DELTA, weight: Weight::Indicator, samples: 4_000_000, eps_rel: 0.05, seed: 1, budget: DEFAULT_BUDGET, starts: 50 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityReport {
    pub params: PredictParams,
    pub n: usize,
    pub d: usize,
    pub discriminant: String,
    pub tau: Vec<f64>,
    pub xi: Option<Vec<f64>>,
    pub delta: f64,
    pub series: SeriesReport,
    pub sigma_infinity: Option<IntegralReport>,
    /// σ_∞ at t = 0 with the same ξ.
    pub sigma_infinity_t0: Option<IntegralReport>,
    /// c = σ_∞(N/P²)·𝔖(N) in u-coordinates.
    pub constant_c: f64,
    pub constant_c_err: f64,
    /// c / D_K^{n-1/2}, the prefactor with the discriminant normalization.
    pub constant_c_dk: f64,
    pub exponent: usize,
    pub predicted: f64,
    pub predicted_err: f64,
    pub obstructed: bool,
    pub note: Option<String>,
}

pub fn predict(f: &Gqf, nn: &FieldElement, params: &PredictParams) -> Result<DensityReport> {
    let sys = descend(f).shift(nn)?;
    let isys = IntSystem::from_system(&sys)?;
    let series = singular_series_of(&isys, params.p_max, params.l_max, params.budget);
    let (n, d) = (f.n, f.d());
    let tau: Vec<f64> = nn.coords.iter().map(|c| linalg::to_f64(c) / (params.p * params.p)).collect();
    let dk = linalg::to_f64(&Q::from_integer(f.field.discriminant.clone()));
    let exponent = (n.saturating_sub(2)) * d;
    let pe = params.p.powi(exponent as i32);
    let mut report = DensityReport {
        params: params.clone(),
        n,
        d,
        discriminant: f.field.discriminant.to_string(),
        tau: tau.clone(),
        xi: None,
        delta: params.delta,
        obstructed: series.obstructed,
        series,
        sigma_infinity: None,
        sigma_infinity_t0: None,
        constant_c: 0.0,
        constant_c_err: 0.0,
        constant_c_dk: 0.0,
        exponent,
        predicted: 0.0,
        predicted_err: 0.0,
        note: None,
    };
    if report.obstructed {
        report.note = Some("local obstruction: some σ_p vanishes".into());
        return Ok(report);
    }
    let Some(xi) = find_real_point(&sys, &tau, params.starts, params.seed) else {
        report.note = Some("no non-singular real point found".into());
        return Ok(report);
    };
    let scale = tau.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0 / (params.p * params.p));
    let eps = params.eps_rel * scale;
    let si = singular_integral(&sys, &tau, &xi, params.delta, params.weight, params.samples, eps, params.seed)?;
    report.sigma_infinity_t0 = singular_integral(&sys, &vec![0.0; d], &xi, params.delta, params.weight, params.samples / 4, eps, params.seed ^ 0x7f).ok();
    let s = report.series.value;
    report.constant_c = si.value * s;
    let rel = (si.stderr / si.value).hypot(report.series.tail_sensitivity);
    report.constant_c_err = report.constant_c * rel;
    report.constant_c_dk = report.constant_c / dk.powf(n as f64 - 0.5);
    report.predicted = report.constant_c * pe;
    report.predicted_err = report.constant_c_err * pe;
    report.xi = Some(xi);
    report.sigma_infinity = Some(si);
    Ok(report)
}

pub fn discriminant_f64(k: &NumberField) -> f64 {
    k.discriminant.to_f64().unwrap_or(f64::NAN)
}

mod qstring {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::linalg::fmt_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        crate::linalg::parse_rational(&s).ok_or_else(|| serde::de::Error::custom("bad rational"))
    }
}

mod qvec {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(crate::linalg::fmt_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| crate::linalg::parse_rational(s).ok_or_else(|| serde::de::Error::custom("bad rational"))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldExt;

    fn fixture(n: usize, m: usize) -> Gqf {
        let k = NumberField::real_quadratic(2).unwrap();
        Gqf::make_diagonal_int(&k, &vec![1; n], &vec![1; m], 1).unwrap()
    }

    #[test]
    fn convolution_matches_enumeration() {
        let f = fixture(2, 1);
        let nn = f.field.from_int(3);
        let sys = IntSystem::new(&f, &nn).unwrap();
        for (p, l) in [(2, 1), (3, 1), (5, 1), (2, 2), (3, 2)] {
            assert_eq!(local_count(&sys, p, l, DEFAULT_BUDGET).unwrap(), local_count_bruteforce(&sys, p, l), "p={p} l={l}");
        }
    }

    #[test]
    fn transport_over_field_elements() {
        let f = fixture(2, 1);
        let k = f.field.clone();
        let nn = k.from_int(3);
        let p = 3i64;
        let mut count = 0u128;
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    for e in 0..p {
                        let x = vec![k.elem_i64(&[a, b]), k.elem_i64(&[c, e])];
                        let v = &f.evaluate(&x).unwrap() - &nn;
                        if v.int_coords().unwrap().iter().all(|z| (z % p).is_zero()) {
                            count += 1;
                        }
                    }
                }
            }
        }
        let sys = IntSystem::new(&f, &nn).unwrap();
        assert_eq!(local_count(&sys, 3, 1, DEFAULT_BUDGET).unwrap(), count);
        assert_eq!(local_density(&f, &nn, 3, 1, DEFAULT_BUDGET).unwrap(), Q::new(count.into(), 9.into()));
    }

    #[test]
    fn series_and_obstruction() {
        let f = fixture(5, 1);
        let r = singular_series(&f, &f.field.from_int(3), 13, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.value > 0.0 && !r.obstructed);
        let k = f.field.clone();
        let g = Gqf::make_diagonal_int(&k, &[3; 5], &[3], 1).unwrap();
        let r = singular_series(&g, &k.one(), 7, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.obstructed && r.value == 0.0);
        let p3 = r.primes.iter().find(|x| x.p == 3).unwrap();
        assert!(p3.sigma.is_zero());
        let mut sq = Gqf::zero(&k, 1);
        sq.set(0, 0, 0, 0, k.one());
        let r = singular_series(&sq, &k.from_int(3), 5, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.obstructed);
    }

    #[test]
    fn real_points() {
        let f = fixture(5, 1);
        let sys = descend(&f);
        let xi = find_real_point(&sys, &[3.0 / 576.0, 0.0], 30, 3).unwrap();
        let v = sys.eval_f64(&xi);
        assert!((v[0] - 3.0 / 576.0).abs() < 1e-10 && v[1].abs() < 1e-10);
        assert!(find_real_point(&sys, &[-1.0, 0.0], 10, 3).is_none());
    }

    #[test]
    fn one_dimensional_integral() {
        // X² over ℚ(√2): Q1 = u²+2v², Q2 = 2uv; density of (Q1,Q2) = (τ1, τ2) over ℝ² has closed form
        // 1/|det J| summed over the preimages: J = [[2u,4v],[2v,2u]], det = 4(u²-2v²).
        let k = NumberField::real_quadratic(2).unwrap();
        let mut f = Gqf::zero(&k, 1);
        f.set(0, 0, 0, 0, k.one());
        let sys = descend(&f);
        let tau = [3.0, 2.0];
        // u²+2v² = 3, 2uv = 2 → (u,v) = ±(1,1), ±(√2, 1/√2)
        let pts = [(1.0f64, 1.0f64), (2f64.sqrt(), 1.0 / 2f64.sqrt())];
        let exact: f64 = 2.0 * pts.iter().map(|(u, v)| 1.0 / (4.0 * (u * u - 2.0 * v * v)).abs()).sum::<f64>();
        let r = singular_integral_slab(&sys, &tau, &[0.0, 0.0], 2.0, Weight::Indicator, 4_000_000, 0.02, 1).unwrap();
        assert!((r.value - exact).abs() < 3.0 * r.stderr + 0.01 * exact, "{} vs {exact}", r.value);
        let r2 = singular_integral_radial(&sys, &tau, &[0.0, 0.0], 2.0, Weight::Indicator, 4_000_000, 0.02, 2).unwrap();
        assert!((r2.value - exact).abs() < 3.0 * r2.stderr + 0.01 * exact, "{} vs {exact}", r2.value);
    }
}
