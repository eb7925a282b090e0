//! The lattice 𝓗_𝔟 and the complete sums S_𝔟(N;𝐦).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::character::{self, find_primitive_gamma, psi, KahanSum, PhaseTable};
use crate::density::{self, IntSystem};
use crate::descent::descend;
use crate::error::{Error, Result};
use crate::field::{Field, FieldElement, FieldExt};
use crate::form::{Gqf, SpecialShape};
use crate::ideal::{self, factor_prime, g_invariant_ideal, Ideal, PrimeIdeal};
use crate::lattice::{Lattice, ResidueSystem};
use crate::linalg::{self, Q};

/// Cap on the number of x-residues enumerated by one evaluator call.
pub const DEFAULT_EXPSUM_BUDGET: f64 = 2e8;
pub const GAMMA_RADIUS: i64 = 64;

/// 𝓗_𝔟 ⊆ ℤ^{dn}, with h_i = Σ_k h[i·d + k] ω_k.
///
/// `lattice` is {𝐡 : 2B(𝐚; 𝐡) ∈ 𝔟 ∀𝐚} and governs the size bound. `invariant` is the
/// sublattice {𝐡 : F(𝐚 + 𝐡) ≡ F(𝐚) mod 𝔟 ∀𝐚} and governs vanishing. They agree when 𝔟 is
/// coprime to 2.
#[derive(Clone, Debug)]
pub struct HLattice {
    pub n: usize,
    pub d: usize,
    pub modulus: Ideal,
    pub g_ideal: Ideal,
    pub lattice: Lattice,
    pub index_o_h: BigInt,
    pub index_h_g: BigInt,
    pub invariant: Lattice,
    pub index_o_inv: BigInt,
    pub index_inv_g: BigInt,
    pub g_norm: BigInt,
}

impl HLattice {
    /// HNF basis, one column per vector.
    pub fn basis(&self) -> Vec<Vec<BigInt>> {
        self.lattice.cols.clone()
    }

    pub fn basis_vectors(&self) -> Vec<Vec<FieldElement>> {
        self.vectors(&self.lattice)
    }

    pub fn invariant_vectors(&self) -> Vec<Vec<FieldElement>> {
        self.vectors(&self.invariant)
    }

    fn vectors(&self, l: &Lattice) -> Vec<Vec<FieldElement>> {
        let k = &self.modulus.field;
        l.cols
            .iter()
            .map(|c| (0..self.n).map(|i| k.elem(c[i * self.d..(i + 1) * self.d].iter().map(|x| linalg::qi(x.clone())).collect())).collect())
            .collect()
    }

    pub fn contains(&self, h: &[FieldElement]) -> bool {
        h.len() == self.n && self.lattice.contains(&flatten(h))
    }

    /// ^G𝔟ⁿ as a lattice in the same coordinates.
    pub fn g_lattice(&self) -> Lattice {
        ideal_power_lattice(&self.g_ideal, self.n)
    }

    /// ^G𝔟ⁿ ⊆ invariant ⊆ 𝓗_𝔟 ⊆ 𝔬ⁿ.
    pub fn containment_holds(&self) -> bool {
        self.g_lattice().is_subset_of(&self.invariant)
            && self.invariant.is_subset_of(&self.lattice)
            && self.lattice.is_subset_of(&Lattice::standard(self.n * self.d))
    }

    /// |𝔬ⁿ/𝓗_𝔟|·|𝓗_𝔟/^G𝔟ⁿ| = (N ^G𝔟)ⁿ, for both lattices.
    pub fn index_identity_holds(&self) -> bool {
        let total = num_traits::pow(self.g_norm.clone(), self.n);
        &self.index_o_h * &self.index_h_g == total && &self.index_o_inv * &self.index_inv_g == total
    }

    /// Tr(𝐦·𝐡) ∈ ℤ for every shift-invariant 𝐡.
    pub fn pairs_integrally(&self, m: &[FieldElement]) -> bool {
        self.invariant_vectors().iter().all(|h| dot(m, h).trace().is_integer())
    }
}

fn flatten(h: &[FieldElement]) -> Vec<Q> {
    h.iter().flat_map(|x| x.coords.iter().cloned()).collect()
}

fn dot(m: &[FieldElement], h: &[FieldElement]) -> FieldElement {
    let k = &m[0].field;
    m.iter().zip(h).fold(k.zero(), |acc, (a, b)| &acc + &(a * b))
}

fn ideal_power_lattice(b: &Ideal, n: usize) -> Lattice {
    let d = b.d();
    let mut gens = Vec::new();
    for i in 0..n {
        for c in b.basis() {
            let mut v = vec![Q::zero(); n * d];
            v[i * d..(i + 1) * d].clone_from_slice(&c);
            gens.push(v);
        }
    }
    Lattice::from_rational(&gens, n * d).expect("full-rank ideal power")
}

fn unit_vector(k: &Field, n: usize, i: usize, x: FieldElement) -> Vec<FieldElement> {
    let mut v = vec![k.zero(); n];
    v[i] = x;
    v
}

/// 𝓗_𝔟 = {𝐡 ∈ 𝔬ⁿ : 2B(ω_k 𝐞_i; 𝐡) ∈ 𝔟 for all i, k}, and its shift-invariant sublattice.
///
/// Membership in 𝔟 is tested against the trace-dual basis of 𝔟, so 𝓗_𝔟 is the
/// dual of ℤ^{dn} plus the span of the resulting rational functionals.
pub fn h_lattice(f: &Gqf, b: &Ideal) -> Result<HLattice> {
    if !b.is_integral() {
        return Err(Error::invalid("𝔟 must be a nonzero integral ideal"));
    }
    let k = &f.field;
    let (n, d) = (f.n, k.degree);
    let dim = n * d;
    let dual = b.trace_dual().basis_elements();
    let mut gens: Vec<Vec<Q>> = (0..dim)
        .map(|r| {
            let mut v = vec![Q::zero(); dim];
            v[r] = Q::one();
            v
        })
        .collect();
    // images L_{ik}(ω_l 𝐞_j) for all (i,k) and (j,l)
    for i in 0..n {
        for kk in 0..d {
            let a = unit_vector(k, n, i, k.omega(kk));
            let imgs: Vec<FieldElement> = (0..n)
                .flat_map(|j| (0..d).map(move |l| (j, l)))
                .map(|(j, l)| {
                    let h = unit_vector(k, n, j, k.omega(l));
                    Ok(&f.bilinear(&a, &h)? + &f.bilinear(&h, &a)?)
                })
                .collect::<Result<_>>()?;
            for z in &dual {
                gens.push(imgs.iter().map(|v| (v * z).trace()).collect());
            }
        }
    }
    // h with 2B(𝐚; h) ∈ 𝔟 for all 𝐚; F(h) mod 𝔟 is additive on it, and 𝓗_𝔟 is its kernel
    let bilinear = Lattice::from_rational(&gens, dim)?.dual();
    let basis = bilinear.basis();
    let values: Vec<FieldElement> = basis
        .iter()
        .map(|v| {
            let x: Vec<FieldElement> = (0..n).map(|i| k.elem(v[i * d..(i + 1) * d].to_vec())).collect();
            f.evaluate(&x)
        })
        .collect::<Result<_>>()?;
    let mut kgens: Vec<Vec<Q>> = (0..dim)
        .map(|r| {
            let mut v = vec![Q::zero(); dim];
            v[r] = Q::one();
            v
        })
        .collect();
    for z in &dual {
        kgens.push(values.iter().map(|v| (v * z).trace()).collect());
    }
    let kernel = Lattice::from_rational(&kgens, dim)?.dual();
    let hgens: Vec<Vec<Q>> = kernel
        .basis()
        .iter()
        .map(|c| (0..dim).map(|r| c.iter().zip(&basis).fold(Q::zero(), |acc, (ci, v)| acc + ci * &v[r])).collect())
        .collect();
    let invariant = Lattice::from_rational(&hgens, dim)?;
    let lattice = bilinear;
    let g_ideal = g_invariant_ideal(b, &g_set_or_identity(f));
    let g_norm = g_ideal.norm_int().ok_or_else(|| Error::invalid("^G𝔟 must be integral"))?;
    let index_o_h = Lattice::standard(dim)
        .index_of(&lattice)
        .ok_or_else(|| Error::validation("h-lattice", "𝓗_𝔟 ⊄ 𝔬ⁿ"))?;
    let index_h_g = lattice
        .index_of(&ideal_power_lattice(&g_ideal, n))
        .ok_or_else(|| Error::validation("h-lattice", "^G𝔟ⁿ ⊄ 𝓗_𝔟"))?;
    let index_o_inv = Lattice::standard(dim).index_of(&invariant).ok_or_else(|| Error::validation("h-lattice", "invariant lattice ⊄ 𝔬ⁿ"))?;
    let index_inv_g = invariant
        .index_of(&ideal_power_lattice(&g_ideal, n))
        .ok_or_else(|| Error::validation("h-lattice", "^G𝔟ⁿ ⊄ invariant lattice"))?;
    Ok(HLattice { n, d, modulus: b.clone(), g_ideal, lattice, index_o_h, index_h_g, invariant, index_o_inv, index_inv_g, g_norm })
}

fn g_set_or_identity(f: &Gqf) -> Vec<usize> {
    let g = f.g_set();
    if g.is_empty() {
        vec![f.field.identity()]
    } else {
        g
    }
}

/// ^G𝔟 for the automorphisms occurring in F.
pub fn g_ideal(f: &Gqf, b: &Ideal) -> Ideal {
    g_invariant_ideal(b, &g_set_or_identity(f))
}

// ---------------------------------------------------------------------------
// κ-inclusion for Q(𝐗) + R(𝐗^τ)

#[derive(Clone, Debug, Serialize)]
pub struct KappaReport {
    pub m: usize,
    pub tau: usize,
    pub kappa: Vec<String>,
    pub kappa_tilde: Vec<String>,
    pub inverses_integral: bool,
    pub holds: bool,
}

/// A (n×n), B (m×m) and τ when F = 𝐗ᵀA𝐗 + (𝐗'^τ)ᵀB𝐗'^τ.
pub fn special_shape(f: &Gqf) -> Option<SpecialShape> {
    let k = &f.field;
    let n = f.n;
    let id = k.identity();
    let mut tau = None;
    let mut m = 0;
    for (i, j, t, t2, _) in f.nonzero_entries() {
        if t != t2 {
            return None;
        }
        if t != id {
            if tau.is_some_and(|x| x != t) {
                return None;
            }
            tau = Some(t);
            m = m.max(i + 1).max(j + 1);
        }
    }
    let tau = tau?;
    let half = linalg::qfrac(1, 2);
    let sym = |i: usize, j: usize, t: usize| (f.coeff(i, j, t, t) + f.coeff(j, i, t, t)).scale(&half);
    let a = (0..n).map(|i| (0..n).map(|j| sym(i, j, id)).collect()).collect();
    let r = (0..m).map(|i| (0..m).map(|j| sym(i, j, tau)).collect()).collect();
    Some(SpecialShape { a, r, tau })
}

/// Checks 𝓗_𝔟 ⊆ Π(κ_i𝔟 ∩ κ̃_i𝔟^{τ⁻¹}) × Π κ_i𝔟 with κ_i = β/det A and
/// κ̃_i = (β/det B)^{τ⁻¹}, where β = 1/(2(ω_l^τ − ω_l)).
pub fn kappa_inclusion(f: &Gqf, h: &HLattice) -> Result<KappaReport> {
    let SpecialShape { a, r, tau } = special_shape(f).ok_or_else(|| Error::invalid("κ-inclusion needs a form Q(𝐗) + R(𝐗^τ)"))?;
    let k = &f.field;
    let one = k.one();
    let det_a = linalg::det(&a, &one);
    let det_r = linalg::det(&r, &one);
    if det_a.is_zero() || det_r.is_zero() {
        return Err(Error::invalid("κ-inclusion needs nonsingular A and B"));
    }
    let l = (0..k.degree)
        .find(|&l| k.omega(l).apply_galois(tau) != k.omega(l))
        .ok_or_else(|| Error::invalid("τ fixes the integral basis"))?;
    let w = k.omega(l);
    let two = k.from_int(2);
    let beta = (&two * &(&w.apply_galois(tau) - &w)).inverse()?;
    let kappa = beta.div(&det_a)?;
    let tinv = k.galois_inverse(tau);
    let kappa_t = beta.div(&det_r)?.apply_galois(tinv);
    let b = &h.modulus;
    let b_t = b.conjugate(tinv);
    let (ki, kti) = (kappa.inverse()?, kappa_t.inverse()?);
    let m = r.len();
    let holds = h.basis_vectors().iter().all(|v| {
        v.iter().enumerate().all(|(i, hi)| b.contains(&(hi * &ki)) && (i >= m || b_t.contains(&(hi * &kti))))
    });
    Ok(KappaReport {
        m,
        tau,
        kappa: vec![kappa.to_string(); f.n],
        kappa_tilde: vec![kappa_t.to_string(); m],
        inverses_integral: ki.is_integral() && kti.is_integral(),
        holds,
    })
}

// ---------------------------------------------------------------------------
// evaluators

/// e(Tr(c_i y)) for integral coordinate vectors y.
struct LinPhase {
    den: i64,
    num: Vec<Vec<i64>>,
}

impl LinPhase {
    fn new(c: &[FieldElement]) -> Result<LinPhase> {
        let Some(first) = c.first() else {
            return Ok(LinPhase { den: 1, num: Vec::new() });
        };
        let k = &first.field;
        let d = k.degree;
        let mut vals = Vec::with_capacity(c.len() * d);
        for ci in c {
            for l in 0..d {
                vals.push((ci * &k.omega(l)).trace());
            }
        }
        let den = linalg::lcm_den(&vals);
        let den_i = den.to_i64().filter(|&x| x <= 1 << 40).ok_or_else(|| Error::invalid("phase denominator too large"))?;
        let flat: Vec<i64> = vals
            .iter()
            .map(|v| (v * linalg::qi(den.clone())).to_integer().mod_floor(&den).to_i64().unwrap())
            .collect();
        Ok(LinPhase { den: den_i, num: flat.chunks(d).map(|x| x.to_vec()).collect() })
    }

    fn index(&self, i: usize, y: &[i64]) -> i64 {
        let s: i128 = self.num[i].iter().zip(y).map(|(&a, &b)| a as i128 * b as i128).sum();
        s.rem_euclid(self.den as i128) as i64
    }

    fn e(&self, idx: i64) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (idx.rem_euclid(self.den)) as f64 / self.den as f64)
    }
}

struct SumSetup {
    n: usize,
    d: usize,
    dim: usize,
    terms: Vec<(usize, usize, usize, i128)>,
    blocks: Vec<Vec<usize>>,
    b_res: ResidueSystem,
    b_norm: i64,
    g_reps: Vec<Vec<i64>>,
    lin: Option<LinPhase>,
    target: Vec<i64>,
}

fn check_modulus(b: &Ideal) -> Result<()> {
    if !b.is_integral() || b.is_unit() {
        return Err(Error::invalid("modulus must be a proper nonzero integral ideal"));
    }
    Ok(())
}

/// 𝐦 ∈ (^G𝔟)^∨ⁿ, the trace dual of ^G𝔟 in each coordinate.
pub fn check_dual(f: &Gqf, b: &Ideal, m: &[FieldElement]) -> Result<()> {
    if m.len() != f.n {
        return Err(Error::invalid(format!("𝐦 must have {} entries", f.n)));
    }
    let dual = g_ideal(f, b).trace_dual();
    if let Some(i) = m.iter().position(|x| !dual.contains(x)) {
        return Err(Error::invalid(format!("m_{} is not in the dual of ^G𝔟", i + 1)));
    }
    Ok(())
}

/// Q_p(𝐮) = Σ c·u_a·u_b over a ≤ b; integral exactly when F(𝔬ⁿ) ⊆ 𝔬.
fn value_terms(f: &Gqf) -> Result<Vec<(usize, usize, usize, i128)>> {
    let sys = descend(f);
    let dim = sys.dim();
    let mut out = Vec::new();
    for (p, m) in sys.forms.iter().enumerate() {
        for a in 0..dim {
            for b in a..dim {
                let c = if a == b { m[a][a].clone() } else { &m[a][b] + &m[b][a] };
                if c.is_zero() {
                    continue;
                }
                let c = c.is_integer().then(|| c.to_integer().to_i128()).flatten();
                out.push((p, a, b, c.ok_or_else(|| Error::invalid("F must take integral values on 𝔬ⁿ"))?));
            }
        }
    }
    Ok(out)
}

fn setup(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement]) -> Result<SumSetup> {
    check_modulus(b)?;
    check_dual(f, b, m)?;
    let k = &f.field;
    let terms = value_terms(f)?;
    let target = nn.i64_coords().ok_or_else(|| Error::invalid("N must be integral"))?;
    let b_norm = b.norm_u64().and_then(|x| i64::try_from(x).ok()).ok_or_else(|| Error::invalid("N𝔟 too large"))?;
    let g_reps = g_ideal(f, b).residues()?.reps();
    let lin = if m.iter().all(|x| x.is_zero()) { None } else { Some(LinPhase::new(m)?) };
    Ok(SumSetup { n: f.n, d: k.degree, dim: f.n * k.degree, terms, blocks: f.components(), b_res: b.residues()?, b_norm, g_reps, lin, target })
}

/// H[y] = Σ_{𝐱_V mod ^G𝔟, F_V(𝐱) ≡ y (𝔟)} ψ(𝐦_V·𝐱_V) for the variables V.
fn residue_histogram(s: &SumSetup, vars: &[usize], budget: f64) -> Result<Vec<Complex64>> {
    let g = s.g_reps.len();
    let total = (g as f64).powi(vars.len() as i32);
    if total > budget {
        return Err(Error::Budget { what: "x-residues mod ^G𝔟".into(), needed: total, cap: budget });
    }
    let total = total as usize;
    let (n, d, dim) = (s.n, s.d, s.dim);
    let mut inside = vec![false; n];
    vars.iter().for_each(|&i| inside[i] = true);
    let terms: Vec<(usize, usize, usize, i128)> = s.terms.iter().filter(|t| inside[t.1 % n] && inside[t.2 % n]).cloned().collect();
    let size = s.b_res.size;
    let chunks = total.clamp(1, 256);
    let per = total.div_ceil(chunks);
    let parts: Vec<Vec<Complex64>> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut hist = vec![Complex64::zero(); size];
            let mut u = vec![0i64; dim];
            let mut y = vec![0i128; d];
            let mut yi = vec![0i64; d];
            for t in ch * per..((ch + 1) * per).min(total) {
                let mut rest = t;
                let mut ph = 0i64;
                for &i in vars {
                    let r = &s.g_reps[rest % g];
                    rest /= g;
                    for l in 0..d {
                        u[l * n + i] = r[l];
                    }
                    if let Some(lp) = &s.lin {
                        ph += lp.index(i, r);
                    }
                }
                y.iter_mut().for_each(|v| *v = 0);
                for &(p, a, c, v) in &terms {
                    y[p] += v * u[a] as i128 * u[c] as i128;
                }
                for l in 0..d {
                    yi[l] = y[l].rem_euclid(s.b_norm as i128) as i64;
                }
                let idx = s.b_res.index(&yi);
                hist[idx] += match &s.lin {
                    Some(lp) => lp.e(ph),
                    None => Complex64::new(1.0, 0.0),
                };
            }
            hist
        })
        .collect();
    let mut out = vec![Complex64::zero(); size];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// S_𝔟(N;𝐦) through a primitive additive character ψ(γ·) modulo 𝔟,
/// factorized over non-interacting variable blocks.
pub fn s_sum_gamma(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement]) -> Result<Complex64> {
    check_modulus(b)?;
    let ch = find_primitive_gamma(b, GAMMA_RADIUS)?;
    s_sum_gamma_with(f, b, nn, m, &ch.gamma, DEFAULT_EXPSUM_BUDGET)
}

pub fn s_sum_gamma_with(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement], gamma: &FieldElement, budget: f64) -> Result<Complex64> {
    let s = setup(f, b, nn, m)?;
    if !character::is_primitive(gamma, b)? {
        return Err(Error::invalid("ψ(γ·) is not primitive modulo 𝔟"));
    }
    let pt = PhaseTable::new(gamma)?;
    let reps = s.b_res.reps();
    let mut hists: Vec<Vec<(usize, Complex64)>> = Vec::new();
    for vars in &s.blocks {
        let h = residue_histogram(&s, vars, budget)?;
        hists.push(h.into_iter().enumerate().filter(|(_, v)| v.norm_sqr() > 0.0).collect());
    }
    let units = b.residue_unit_reps()?;
    let vals: Vec<Complex64> = units
        .par_iter()
        .map(|a| {
            let row = pt.row(a);
            let mut prod = pt.e((pt.den - pt.index(&row, &s.target)) % pt.den);
            for h in &hists {
                let mut acc = Complex64::zero();
                for (y, v) in h {
                    acc += v * pt.e(pt.index(&row, &reps[*y]));
                }
                prod *= acc;
            }
            prod
        })
        .collect();
    let mut acc = KahanSum::new();
    for v in vals {
        acc.add(v);
    }
    Ok(acc.value())
}

/// S_𝔟(N;𝐦) = Σ_{𝔠|𝔟} μ_K(𝔟/𝔠)·N𝔠·Σ_{𝐱 mod ^G𝔟, F(𝐱)−N ∈ 𝔠} ψ(𝐦·𝐱), enumerating
/// all 𝐱 directly.
pub fn s_sum_moebius(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement]) -> Result<Complex64> {
    s_sum_moebius_with(f, b, nn, m, DEFAULT_EXPSUM_BUDGET)
}

pub fn s_sum_moebius_with(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement], budget: f64) -> Result<Complex64> {
    let s = setup(f, b, nn, m)?;
    let all: Vec<usize> = (0..s.n).collect();
    let hist = residue_histogram(&s, &all, budget)?;
    let reps = s.b_res.reps();
    let mut total = Complex64::zero();
    for (c, mu) in b.moebius_divisors()? {
        let nc = linalg::to_f64(&c.norm());
        let mut acc = Complex64::zero();
        for (y, v) in reps.iter().zip(&hist) {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let diff: Vec<i64> = y.iter().zip(&s.target).map(|(a, t)| a - t).collect();
            if c.contains_i64(&diff) {
                acc += v;
            }
        }
        total += acc * (mu as f64 * nc);
    }
    Ok(total)
}

/// S_𝔟 with the convention S_𝔬 = 1.
pub fn s_sum(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement]) -> Result<Complex64> {
    if b.is_unit() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    s_sum_gamma(f, b, nn, m)
}

/// |(𝔬/𝔟)*|.
pub fn unit_count(b: &Ideal) -> Result<f64> {
    let mut phi = linalg::to_f64(&b.norm());
    for (p, _) in b.factor()? {
        phi *= 1.0 - 1.0 / p.norm() as f64;
    }
    Ok(phi)
}

/// |(𝔬/𝔟)*|·|𝓗_𝔟/^G𝔟ⁿ|^{1/2}·(N ^G𝔟)^{n/2}.
pub fn s_bound(h: &HLattice) -> Result<f64> {
    let idx = h.index_h_g.to_f64().unwrap_or(f64::INFINITY);
    let gn = h.g_norm.to_f64().unwrap_or(f64::INFINITY);
    Ok(unit_count(&h.modulus)? * idx.sqrt() * gn.powf(h.n as f64 / 2.0))
}

/// |a − b| / max(|a|, |b|, scale); `scale` is the a-priori size of the sum,
/// so that two evaluations of a vanishing sum compare by rounding noise.
pub fn relative_deviation(a: Complex64, b: Complex64, scale: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(scale).max(f64::MIN_POSITIVE)
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

// ---------------------------------------------------------------------------
// multiplicativity

#[derive(Clone, Debug, Serialize)]
pub struct MultReport {
    pub norm1: u64,
    pub norm2: u64,
    pub s: [f64; 2],
    pub product: [f64; 2],
    pub rel_diff: f64,
    /// |S_𝔟| bound used as the floor of the relative deviation.
    pub scale: f64,
    pub s_zero: [f64; 2],
    pub product_zero: [f64; 2],
    pub rel_diff_zero: f64,
}

fn inv_mod_u64(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let e = BigInt::from(a).extended_gcd(&BigInt::from(m));
    e.gcd.is_one().then(|| e.x.mod_floor(&BigInt::from(m)).to_u64().unwrap())
}

/// S_𝔟(N;𝐦) against S_{𝔟₁}(ī₂²N; n₂𝐦)·S_{𝔟₂}(ī₁²N; n₁𝐦), n_i = N𝔟_i, and the
/// 𝐦 = 0 factorization S_𝔟(N;0) = S_{𝔟₁}(N;0)·S_{𝔟₂}(N;0).
pub fn verify_multiplicativity(f: &Gqf, b1: &Ideal, b2: &Ideal, nn: &FieldElement, m: &[FieldElement]) -> Result<MultReport> {
    let k = &f.field;
    let n1 = b1.norm_u64().ok_or_else(|| Error::invalid("𝔟₁ must be integral"))?;
    let n2 = b2.norm_u64().ok_or_else(|| Error::invalid("𝔟₂ must be integral"))?;
    if n1.gcd(&n2) != 1 {
        return Err(Error::invalid("multiplicativity needs coprime norms"));
    }
    let b = b1.mul(b2);
    check_dual(f, &b, m)?;
    let i2 = inv_mod_u64(n2, n1).unwrap();
    let i1 = inv_mod_u64(n1, n2).unwrap();
    let scale = |c: u64, x: &FieldElement| x.scale(&linalg::qi(BigInt::from(c)));
    let m1: Vec<FieldElement> = m.iter().map(|x| scale(n2, x)).collect();
    let m2: Vec<FieldElement> = m.iter().map(|x| scale(n1, x)).collect();
    let s = s_sum(f, &b, nn, m)?;
    let prod = s_sum(f, b1, &scale(i2 * i2, nn), &m1)? * s_sum(f, b2, &scale(i1 * i1, nn), &m2)?;
    let zero = vec![k.zero(); f.n];
    let s0 = s_sum(f, &b, nn, &zero)?;
    let prod0 = s_sum(f, b1, nn, &zero)? * s_sum(f, b2, nn, &zero)?;
    let scale = if b.is_unit() { 1.0 } else { s_bound(&h_lattice(f, &b)?)? };
    Ok(MultReport {
        norm1: n1,
        norm2: n2,
        s: c2(s),
        product: c2(prod),
        rel_diff: relative_deviation(s, prod, scale),
        scale,
        s_zero: c2(s0),
        product_zero: c2(prod0),
        rel_diff_zero: relative_deviation(s0, prod0, scale),
    })
}

// ---------------------------------------------------------------------------
// vanishing

/// Random 𝐦 ∈ (^G𝔟)^∨ⁿ with Tr(𝐦·𝐡) ∉ ℤ for some 𝐡 ∈ 𝓗_𝔟.
pub fn violating_m<R: Rng>(h: &HLattice, rng: &mut R, attempts: usize) -> Result<Vec<FieldElement>> {
    if h.index_inv_g.is_one() {
        return Err(Error::invalid("invariant lattice = ^G𝔟ⁿ: every 𝐦 pairs integrally"));
    }
    let k = &h.modulus.field;
    let dual = h.g_ideal.trace_dual().basis_elements();
    for _ in 0..attempts {
        let m: Vec<FieldElement> = (0..h.n)
            .map(|_| dual.iter().fold(k.zero(), |acc, z| &acc + &z.scale(&linalg::q(rng.gen_range(-3..=3)))))
            .collect();
        if !h.pairs_integrally(&m) {
            return Ok(m);
        }
    }
    Err(Error::SearchBound { what: "violating 𝐦".into(), bound: attempts as i64 })
}

// ---------------------------------------------------------------------------
// degree-one primes

/// The unique prime of 𝔭 after checking residue degree 1, p odd and unramified.
pub fn degree_one_prime(pp: &Ideal) -> Result<PrimeIdeal> {
    let fac = pp.factor()?;
    let [(pr, 1)] = fac.as_slice() else {
        return Err(Error::invalid("expected a prime ideal"));
    };
    if pr.f != 1 {
        return Err(Error::invalid("prime must have residue degree 1"));
    }
    if pr.p == 2 {
        return Err(Error::invalid("prime must not divide 2"));
    }
    if factor_prime(&pp.field, pr.p)?.iter().any(|q| q.e != 1) {
        return Err(Error::invalid("prime must be unramified"));
    }
    Ok(pr.clone())
}

/// τ_𝔭 = Σ_{u mod 𝔭} ψ(γu²).
pub fn gauss_sum(pp: &Ideal) -> Result<Complex64> {
    let pr = degree_one_prime(pp)?;
    let ch = find_primitive_gamma(pp, GAMMA_RADIUS)?;
    let t = ch.gamma.trace();
    let mut acc = KahanSum::new();
    for u in 0..pr.p as i64 {
        acc.add(character::e_of(&(&t * &linalg::q(u * u))));
    }
    Ok(acc.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct KloostermanReport {
    pub p: u64,
    pub exponent: u32,
    pub value: [f64; 2],
    /// |K| / 2√(N𝔭).
    pub weil_ratio: f64,
}

fn legendre(a: u64, p: u64) -> i32 {
    let mut r = 1u128;
    let mut b = a as u128 % p as u128;
    let mut e = (p - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u128;
        }
        b = b * b % p as u128;
        e >>= 1;
    }
    match r {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// Σ_{a ∈ (𝔬/𝔭)*} χ(a)^e ψ(γ(aA + āB)), χ the quadratic character modulo 𝔭.
pub fn kloosterman_salie(pp: &Ideal, a_coef: &FieldElement, b_coef: &FieldElement, exponent: u32) -> Result<KloostermanReport> {
    let pr = degree_one_prime(pp)?;
    let ch = find_primitive_gamma(pp, GAMMA_RADIUS)?;
    if !a_coef.is_integral() || !b_coef.is_integral() {
        return Err(Error::invalid("A and B must be integral"));
    }
    let ta = (&ch.gamma * a_coef).trace();
    let tb = (&ch.gamma * b_coef).trace();
    let p = pr.p;
    let mut acc = KahanSum::new();
    for a in 1..p {
        let ab = inv_mod_u64(a, p).unwrap();
        let chi = if exponent % 2 == 0 { 1 } else { legendre(a, p) };
        let z = character::e_of(&(&(&ta * &linalg::q(a as i64)) + &(&tb * &linalg::q(ab as i64))));
        acc.add(z * chi as f64);
    }
    let v = acc.value();
    Ok(KloostermanReport { p, exponent, value: c2(v), weil_ratio: v.norm() / (2.0 * (p as f64).sqrt()) })
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaDecomposition {
    pub p: u64,
    pub g: String,
    pub lambda: String,
    pub mu: String,
    pub sigma0: [f64; 2],
    pub sigma1: Vec<[f64; 2]>,
    pub sigma2: Vec<[f64; 2]>,
    pub recomposed: [f64; 2],
    /// S_𝔭(N; g𝐯) from the γ-route evaluator.
    pub direct: [f64; 2],
    pub rel_diff: f64,
    pub theta: f64,
    pub bound_ratio: f64,
}

fn element_sum(reps: &[FieldElement], mut term: impl FnMut(&FieldElement) -> Complex64) -> Complex64 {
    let mut acc = KahanSum::new();
    for x in reps {
        acc.add(term(x));
    }
    acc.value()
}

/// Σ₀, Σ₁(a), Σ₂(a) at a degree-one prime for a diagonal form
/// Σ a_iX_i² + Σ_{i≤m} b_i(X_i^τ)², with 𝐱 = μ𝐮 + λ𝐰.
pub fn sigma_decomposition(f: &Gqf, pp: &Ideal, nn: &FieldElement, v: &[FieldElement]) -> Result<SigmaDecomposition> {
    let diag = f.as_diagonal().ok_or_else(|| Error::invalid("Σ-decomposition needs a diagonal form"))?;
    let k = &f.field;
    let (n, m, tau) = (f.n, diag.b.len(), diag.tau);
    if m == 0 {
        return Err(Error::invalid("Σ-decomposition needs m ≥ 1"));
    }
    let pr = degree_one_prime(pp)?;
    let tinv = k.galois_inverse(tau);
    let pt = pp.conjugate(tinv);
    if pt == *pp {
        return Err(Error::invalid("𝔭 is fixed by τ"));
    }
    let bad = diag.a.iter().chain(&diag.b).fold(k.from_int(2), |acc, x| &acc * x);
    if pp.contains(&bad) {
        return Err(Error::invalid("𝔭 divides 2a₁⋯a_n b₁⋯b_m"));
    }
    if g_ideal(f, pp) != pp.mul(&pt) {
        return Err(Error::invalid("^G𝔭 ≠ 𝔭𝔭̃"));
    }
    check_dual(f, pp, v)?;
    if !nn.is_integral() {
        return Err(Error::invalid("N must be integral"));
    }
    let ch = find_primitive_gamma(pp, GAMMA_RADIUS)?;
    let (gamma, alpha) = (&ch.gamma, &ch.alpha);
    let ptp = PrimeIdeal { ideal: pt.clone(), p: pr.p, e: 1, f: 1 };
    let mu = ideal::element_with_valuations(k, &[(pr.clone(), 0), (ptp.clone(), 1)], ideal::DEFAULT_SEARCH_RADIUS)?;
    let lambda = ideal::element_with_valuations(k, &[(pr.clone(), 1), (ptp, 0)], ideal::DEFAULT_SEARCH_RADIUS)?;
    let lambda_t = lambda.apply_galois(tau);
    let ga = gamma * alpha;

    let reps_p: Vec<FieldElement> = pp.residue_classes()?;
    let reps_t: Vec<FieldElement> = pt.residue_classes()?;
    let units: Vec<FieldElement> = pp.residue_units()?;

    let mut sigma0 = Complex64::new(1.0, 0.0);
    for vi in &v[m..] {
        let c = &(&ga * &lambda) * vi;
        sigma0 *= element_sum(&reps_t, |w| psi(&(&c * w)));
    }
    let mu2 = &mu * &mu;
    let lt2 = &lambda_t * &lambda_t;
    let lin1: Vec<FieldElement> = v.iter().map(|vi| &(alpha * &mu) * vi).collect();
    let lin2: Vec<FieldElement> = v[..m].iter().map(|vi| &(alpha * &lambda) * vi).collect();
    let rows: Vec<(Complex64, Complex64, Complex64)> = units
        .par_iter()
        .map(|a| {
            let s1 = (0..n).fold(Complex64::new(1.0, 0.0), |acc, i| {
                let q = &(a * &mu2) * &diag.a[i];
                acc * element_sum(&reps_p, |u| psi(&(gamma * &(&(&q * &(u * u)) + &(&lin1[i] * u)))))
            });
            let s2 = (0..m).fold(Complex64::new(1.0, 0.0), |acc, i| {
                let q = &(a * &lt2) * &diag.b[i];
                acc * element_sum(&reps_t, |w| {
                    let wt = w.apply_galois(tau);
                    psi(&(gamma * &(&(&q * &(&wt * &wt)) + &(&lin2[i] * w))))
                })
            });
            (psi(&-&(&(gamma * a) * nn)), s1, s2)
        })
        .collect();
    let mut acc = KahanSum::new();
    for (e, s1, s2) in &rows {
        acc.add(e * s1 * s2);
    }
    let recomposed = sigma0 * acc.value();
    let gv: Vec<FieldElement> = v.iter().map(|x| x.scale(&linalg::qi(ch.g.clone()))).collect();
    let direct = s_sum_gamma_with(f, pp, nn, &gv, gamma, DEFAULT_EXPSUM_BUDGET)?;

    let prod_ab = diag.a.iter().chain(&diag.b).fold(k.one(), |acc, x| &acc * x);
    let mut gsum = k.zero();
    for i in 0..n {
        gsum = &gsum + &(&v[i] * &v[i]).div(&diag.a[i])?;
    }
    for i in 0..m {
        let vt = v[i].apply_galois(tau);
        gsum = &gsum + &(&vt * &vt).div(&diag.b[i])?;
    }
    let g_val = &prod_ab * &gsum;
    let ord = pr.valuation(&g_val);
    let theta = if pp.contains(nn) && ord.map_or(true, |o| o >= -1) { 1.0 } else { 0.5 };
    let p = pr.p as f64;
    let bound_ratio = recomposed.norm() / p.powf(theta + (3 * n - m) as f64 / 2.0);
    Ok(SigmaDecomposition {
        p: pr.p,
        g: ch.g.to_string(),
        lambda: lambda.to_string(),
        mu: mu.to_string(),
        sigma0: c2(sigma0),
        sigma1: rows.iter().map(|r| c2(r.1)).collect(),
        sigma2: rows.iter().map(|r| c2(r.2)).collect(),
        recomposed: c2(recomposed),
        direct: c2(direct),
        rel_diff: relative_deviation(recomposed, direct, s_bound(&h_lattice(f, pp)?)?),
        theta,
        bound_ratio,
    })
}

// ---------------------------------------------------------------------------
// prime-power identity

#[derive(Clone, Debug, Serialize)]
pub struct IEllReport {
    pub p: u64,
    pub l: u32,
    pub ideals: usize,
    pub lhs: [f64; 2],
    pub rhs: f64,
    pub rel_diff: f64,
}

/// Σ_{𝔟 ∈ I_ℓ} (N ^G𝔟)^{−n} S_𝔟(N;0) against p^{−ℓd(n−1)}·#{𝐱 mod p^ℓ : F(𝐱) ≡ N}.
pub fn i_ell_identity(f: &Gqf, nn: &FieldElement, p: u64, l: u32) -> Result<IEllReport> {
    let k = &f.field;
    let primes = factor_prime(k, p)?;
    let zero = vec![k.zero(); f.n];
    let mut exps = vec![0u32; primes.len()];
    let mut lhs = KahanSum::new();
    let mut count = 0;
    loop {
        let b = primes.iter().zip(&exps).fold(Ideal::unit(k), |acc, (pr, &e)| acc.mul(&pr.ideal.pow(e)));
        let gn = linalg::to_f64(&g_ideal(f, &b).norm());
        lhs.add(s_sum(f, &b, nn, &zero)? / gn.powi(f.n as i32));
        count += 1;
        let mut i = 0;
        loop {
            if i == primes.len() {
                let lhs = lhs.value();
                let sys = IntSystem::new(f, nn)?;
                let rhs = linalg::to_f64(&density::density_of(&sys, p, l, density::DEFAULT_BUDGET as u64)?);
                let rd = (lhs - Complex64::new(rhs, 0.0)).norm() / lhs.norm().max(rhs.abs()).max(1e-300);
                return Ok(IEllReport { p, l, ideals: count, lhs: c2(lhs), rhs, rel_diff: if lhs.norm().max(rhs.abs()) < 1e-12 { 0.0 } else { rd } });
            }
            exps[i] += 1;
            if exps[i] <= l * primes[i].e {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// records

#[derive(Clone, Debug, Serialize)]
pub struct ExpSumRecord {
    pub ideal: serde_json::Value,
    pub norm: u64,
    pub g_norm: String,
    pub m: Vec<String>,
    pub s_re: f64,
    pub s_im: f64,
    pub bound: f64,
    pub bound_ratio: f64,
    pub checks: ExpSumChecks,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpSumChecks {
    pub index_identity: bool,
    pub containment: bool,
    pub moebius_rel_diff: Option<f64>,
    pub pairs_integrally: bool,
    pub within_bound: bool,
}

/// S_𝔟(N;𝐦) with the lattice checks and, when affordable, the Möbius cross-check.
pub fn expsum_record(f: &Gqf, b: &Ideal, nn: &FieldElement, m: &[FieldElement], cross_check: bool, budget: f64) -> Result<ExpSumRecord> {
    let h = h_lattice(f, b)?;
    check_modulus(b)?;
    let ch = find_primitive_gamma(b, GAMMA_RADIUS)?;
    let s = s_sum_gamma_with(f, b, nn, m, &ch.gamma, budget)?;
    let moebius = if cross_check {
        match s_sum_moebius_with(f, b, nn, m, budget) {
            Ok(t) => Some(t),
            Err(e) if e.is_budget() => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let bound = s_bound(&h)?;
    let moebius = moebius.map(|t| relative_deviation(s, t, bound));
    Ok(ExpSumRecord {
        ideal: b.to_json(),
        norm: b.norm_u64().unwrap_or(0),
        g_norm: h.g_norm.to_string(),
        m: m.iter().map(|x| x.to_string()).collect(),
        s_re: s.re,
        s_im: s.im,
        bound,
        bound_ratio: s.norm() / bound,
        checks: ExpSumChecks {
            index_identity: h.index_identity_holds(),
            containment: h.containment_holds(),
            moebius_rel_diff: moebius,
            pairs_integrally: h.pairs_integrally(m),
            within_bound: s.norm() <= bound + 1e-6,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NumberField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k2() -> Field {
        NumberField::real_quadratic(2).unwrap()
    }

    fn fixture(k: &Field) -> Gqf {
        Gqf::make_diagonal_int(k, &[1, 1], &[1], 1).unwrap()
    }

    fn sqrt2(k: &Field) -> FieldElement {
        k.omega(1)
    }

    /// Brute force: count h mod ^G𝔟ⁿ satisfying the defining condition.
    /// (#{h mod ^G𝔟 : 2B(·; h) ∈ 𝔟}, #{those with F(h) ∈ 𝔟 as well}).
    fn h_count_bruteforce(f: &Gqf, b: &Ideal) -> (usize, usize) {
        let k = &f.field;
        let gb = g_ideal(f, b);
        let reps = gb.residue_classes().unwrap();
        let n = f.n;
        let (mut count, mut invariant) = (0, 0);
        let total = reps.len().pow(n as u32);
        for t in 0..total {
            let mut r = t;
            let h: Vec<FieldElement> = (0..n)
                .map(|_| {
                    let x = reps[r % reps.len()].clone();
                    r /= reps.len();
                    x
                })
                .collect();
            let ok = (0..n).all(|i| {
                (0..k.degree).all(|kk| {
                    let a = unit_vector(k, n, i, k.omega(kk));
                    b.contains(&(&f.bilinear(&a, &h).unwrap() + &f.bilinear(&h, &a).unwrap()))
                })
            });
            count += ok as usize;
            invariant += (ok && b.contains(&f.evaluate(&h).unwrap())) as usize;
        }
        (count, invariant)
    }

    #[test]
    fn h_lattice_fixture() {
        let k = k2();
        let f = fixture(&k);
        let b3 = Ideal::from_int(&k, 3).unwrap();
        let h = h_lattice(&f, &b3).unwrap();
        assert_eq!(h.index_o_h, BigInt::from(81));
        assert!(h.index_h_g.is_one());
        assert!(h.index_identity_holds() && h.containment_holds());
        let s2 = sqrt2(&k);
        let b = Ideal::principal(&(&k.from_int(3) + &s2)).unwrap();
        let h = h_lattice(&f, &b).unwrap();
        assert_eq!(h.g_norm, BigInt::from(49));
        assert_eq!((h.index_h_g.to_usize().unwrap(), h.index_inv_g.to_usize().unwrap()), h_count_bruteforce(&f, &b));
        assert!(kappa_inclusion(&f, &h).unwrap().holds);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let g = Gqf::random(&k, 2, &mut rng, 2, 0.5);
            for nb in [2i64, 4, 6] {
                let b = Ideal::from_int(&k, nb).unwrap();
                let h = h_lattice(&g, &b).unwrap();
                assert!(h.index_identity_holds() && h.containment_holds());
                assert_eq!((h.index_h_g.to_usize().unwrap(), h.index_inv_g.to_usize().unwrap()), h_count_bruteforce(&g, &b));
            }
        }
    }

    #[test]
    fn standard_diagonal_h() {
        let k = k2();
        let c = [k.from_int(3), &k.from_int(1) + &sqrt2(&k)];
        let a = vec![vec![c[0].clone(), k.zero()], vec![k.zero(), c[1].clone()]];
        let f = Gqf::make_standard(&k, &a).unwrap();
        for nb in [3i64, 5, 6, 7, 9, 14] {
            let b = Ideal::from_int(&k, nb).unwrap();
            let h = h_lattice(&f, &b).unwrap();
            // brute force: h_i mod 𝔟 with c_i(2a h_i + h_i²) ∈ 𝔟 for all a
            assert_eq!(h.invariant == h.lattice, nb % 2 == 1, "b = ({nb})");
            let mut gens = Vec::new();
            for (i, ci) in c.iter().enumerate() {
                for r in b.residue_classes().unwrap().into_iter().chain(b.basis_elements()) {
                    let lin = &(&k.from_int(2) * ci) * &r;
                    if b.contains(&lin) && b.contains(&(&(ci * &r) * &r)) {
                        let mut g = vec![Q::zero(); 4];
                        g[i * 2..i * 2 + 2].clone_from_slice(&r.coords);
                        gens.push(g);
                    }
                }
            }
            assert_eq!(h.invariant, Lattice::from_rational(&gens, 4).unwrap(), "b = ({nb})");
            {
                let o = Ideal::unit(&k);
                let mut gens = Vec::new();
                for (i, ci) in c.iter().enumerate() {
                    let e = Ideal::principal(&(&k.from_int(2) * ci)).unwrap().inverse().mul(&b).lcm(&o);
                    for v in e.basis() {
                        let mut g = vec![Q::zero(); 4];
                        g[i * 2..i * 2 + 2].clone_from_slice(&v);
                        gens.push(g);
                    }
                }
                assert_eq!(h.lattice, Lattice::from_rational(&gens, 4).unwrap(), "b = ({nb})");
            }
        }
    }

    #[test]
    fn evaluators_agree() {
        let k = k2();
        let f = fixture(&k);
        let s2 = sqrt2(&k);
        let n3 = k.from_int(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for b in [Ideal::from_int(&k, 3).unwrap(), Ideal::principal(&(&k.from_int(3) + &s2)).unwrap(), Ideal::from_int(&k, 2).unwrap(), Ideal::principal(&s2).unwrap()] {
            let dual = g_ideal(&f, &b).trace_dual().basis_elements();
            for _ in 0..3 {
                let m: Vec<FieldElement> = (0..2).map(|_| dual.iter().fold(k.zero(), |a, z| &a + &z.scale(&linalg::q(rng.gen_range(-2..=2))))).collect();
                let g = s_sum_gamma(&f, &b, &n3, &m).unwrap();
                let mo = s_sum_moebius(&f, &b, &n3, &m).unwrap();
                let h = h_lattice(&f, &b).unwrap();
                assert!(relative_deviation(g, mo, s_bound(&h).unwrap()) < 1e-9, "{g} vs {mo}");
                assert!(g.norm() <= s_bound(&h).unwrap() + 1e-6);
            }
        }
    }

    #[test]
    fn trivial_sum() {
        let k = k2();
        let f = Gqf::zero(&k, 2);
        let b = Ideal::from_int(&k, 3).unwrap();
        let z = vec![k.zero(); 2];
        let s = s_sum_moebius(&f, &b, &k.zero(), &z).unwrap();
        // |(𝔬/𝔟)*|·N(^G𝔟)ⁿ with ^G𝔟 = 𝔟 for the zero form
        assert!((s.re - 8.0 * 81.0).abs() < 1e-6 && s.im.abs() < 1e-6);
    }

    #[test]
    fn multiplicative_and_vanishing() {
        let k = k2();
        let f = fixture(&k);
        let s2 = sqrt2(&k);
        let b1 = Ideal::from_int(&k, 3).unwrap();
        let b2 = Ideal::principal(&(&k.from_int(3) + &s2)).unwrap();
        let z = vec![k.zero(); 2];
        let r = verify_multiplicativity(&f, &b1, &b2, &k.from_int(3), &z).unwrap();
        assert!(r.rel_diff < 1e-8 && r.rel_diff_zero < 1e-8, "{r:?}");
        let h = h_lattice(&f, &b2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..4 {
            let m = violating_m(&h, &mut rng, 1000).unwrap();
            let s = s_sum_gamma(&f, &b2, &k.from_int(3), &m).unwrap();
            assert!(s.norm() < 1e-9 * s_bound(&h).unwrap());
        }
    }

    #[test]
    fn gauss_and_kloosterman() {
        let k = k2();
        let s2 = sqrt2(&k);
        let p7 = Ideal::principal(&(&k.from_int(3) + &s2)).unwrap();
        assert!((gauss_sum(&p7).unwrap().norm() - 7f64.sqrt()).abs() < 1e-9);
        let p17 = factor_prime(&k, 17).unwrap()[0].ideal.clone();
        assert!((gauss_sum(&p17).unwrap().norm() - 17f64.sqrt()).abs() < 1e-9);
        let r = kloosterman_salie(&p7, &k.zero(), &k.zero(), 2).unwrap();
        assert!((r.value[0] - 6.0).abs() < 1e-9);
        let r = kloosterman_salie(&p17, &k.from_int(1), &k.from_int(3), 1).unwrap();
        assert!(r.weil_ratio <= 1.0 + 1e-12);
        assert!(degree_one_prime(&Ideal::from_int(&k, 3).unwrap()).is_err());
    }

    #[test]
    fn sigma_recomposition() {
        let k = k2();
        let f = fixture(&k);
        let s2 = sqrt2(&k);
        let pp = Ideal::principal(&(&k.from_int(3) + &s2)).unwrap();
        let dual = g_ideal(&f, &pp).trace_dual().basis_elements();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let v: Vec<FieldElement> = (0..2).map(|_| dual.iter().fold(k.zero(), |a, z| &a + &z.scale(&linalg::q(rng.gen_range(-3..=3))))).collect();
            let r = sigma_decomposition(&f, &pp, &k.from_int(5), &v).unwrap();
            assert!(r.rel_diff < 1e-8, "{r:?}");
        }
        let z = vec![k.zero(); 2];
        let r = sigma_decomposition(&f, &pp, &k.zero(), &z).unwrap();
        assert_eq!(r.theta, 1.0);
    }

    #[test]
    fn prime_power_identity() {
        let k = k2();
        let f = fixture(&k);
        for p in [3, 7] {
            for l in [1, 2] {
                let r = i_ell_identity(&f, &k.from_int(3), p, l).unwrap();
                assert!(r.rel_diff < 1e-6, "{r:?}");
            }
        }
    }

    /// With mixed (τ ≠ τ′) terms, a ↦ 2B(a; h) is only ℤ-linear, so a primitive σ can kill it
    /// for more h than 𝓗 contains and the 𝓗-bound can be exceeded.
    #[test]
    fn cross_terms_exceed_h_bound() {
        let k = k2();
        let json = r#"{"n":2,"coeffs":[{"i":0,"j":1,"tau":0,"tau'":1,"value":["-2","0"]},{"i":0,"j":1,"tau":1,"tau'":0,"value":["1","1"]},{"i":0,"j":1,"tau":1,"tau'":1,"value":["-1","-1"]},{"i":1,"j":1,"tau":0,"tau'":0,"value":["-1","0"]},{"i":1,"j":1,"tau":0,"tau'":1,"value":["-1","0"]},{"i":1,"j":1,"tau":1,"tau'":1,"value":["-1","2"]}]}"#;
        let f = Gqf::from_json(&k, &serde_json::from_str(json).unwrap()).unwrap();
        let b = Ideal::principal(&(&k.from_int(3) * &sqrt2(&k))).unwrap();
        let nn = &k.from_int(3) + &(&k.from_int(6) * &sqrt2(&k));
        let m = vec![k.zero(), k.zero()];
        let h = h_lattice(&f, &b).unwrap();
        assert!(h.containment_holds() && h.index_identity_holds());
        let bound = s_bound(&h).unwrap();
        assert!((bound - 288.0).abs() < 1e-9);
        for s in [s_sum_gamma(&f, &b, &nn, &m).unwrap(), s_sum_moebius(&f, &b, &nn, &m).unwrap()] {
            assert!((s.re + 360.0).abs() < 1e-6 && s.im.abs() < 1e-6, "{s}");
        }
    }
}
