//! Fractional ideals of 𝔬 as canonical HNF lattices in integral-basis coordinates.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::field::{Field, FieldElement, FieldExt, NumberField};
use crate::lattice::{Lattice, ResidueSystem};
use crate::linalg::{self, q, qi, Q};
use crate::poly;

#[derive(Clone)]
pub struct Ideal {
    pub field: Field,
    pub lat: Lattice,
}

impl PartialEq for Ideal {
    fn eq(&self, other: &Self) -> bool {
        self.lat == other.lat && NumberField::same(&self.field, &other.field)
    }
}

impl Eq for Ideal {}

impl std::hash::Hash for Ideal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.lat.hash(state);
    }
}

impl fmt::Debug for Ideal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<Vec<String>> = self.lat.cols.iter().map(|c| c.iter().map(|x| x.to_string()).collect()).collect();
        write!(f, "Ideal(den={}, cols={:?})", self.lat.den, cols)
    }
}

impl Ideal {
    pub fn unit(k: &Field) -> Ideal {
        Ideal { field: k.clone(), lat: Lattice::standard(k.degree) }
    }

    pub fn from_int(k: &Field, n: i64) -> Result<Ideal> {
        Ideal::principal(&k.from_int(n))
    }

    /// The 𝔬-module generated by the given elements.
    pub fn generated_by(k: &Field, elems: &[FieldElement]) -> Result<Ideal> {
        let mut gens = Vec::new();
        for g in elems {
            if g.is_zero() {
                continue;
            }
            for j in 0..k.degree {
                gens.push(k.mul_coords(&g.coords, &k.basis_coords(j)));
            }
        }
        if gens.is_empty() {
            return Err(Error::invalid("zero ideal"));
        }
        Ok(Ideal { field: k.clone(), lat: Lattice::from_rational(&gens, k.degree)? })
    }

    pub fn principal(a: &FieldElement) -> Result<Ideal> {
        if a.is_zero() {
            return Err(Error::invalid("principal ideal of zero"));
        }
        Ideal::generated_by(&a.field, std::slice::from_ref(a))
    }

    /// ℤ-span of the given coordinate vectors; checked to be an 𝔬-module.
    pub fn from_z_basis(k: &Field, gens: &[Vec<Q>]) -> Result<Ideal> {
        let lat = Lattice::from_rational(gens, k.degree)?;
        let id = Ideal { field: k.clone(), lat };
        if !id.is_o_module() {
            return Err(Error::validation("o-module", "lattice is not closed under multiplication by 𝔬"));
        }
        Ok(id)
    }

    pub fn is_o_module(&self) -> bool {
        let k = &self.field;
        self.lat.basis().iter().all(|b| (0..k.degree).all(|j| self.lat.contains(&k.mul_coords(b, &k.basis_coords(j)))))
    }

    pub fn d(&self) -> usize {
        self.field.degree
    }

    pub fn basis(&self) -> Vec<Vec<Q>> {
        self.lat.basis()
    }

    pub fn basis_elements(&self) -> Vec<FieldElement> {
        self.basis().into_iter().map(|c| self.field.elem(c)).collect()
    }

    pub fn is_integral(&self) -> bool {
        self.lat.is_integral()
    }

    pub fn is_unit(&self) -> bool {
        self.lat == Lattice::standard(self.d())
    }

    pub fn norm(&self) -> Q {
        self.lat.det()
    }

    pub fn norm_int(&self) -> Option<BigInt> {
        let n = self.norm();
        n.is_integer().then(|| n.to_integer())
    }

    pub fn norm_u64(&self) -> Option<u64> {
        self.norm_int().and_then(|n| n.to_u64())
    }

    pub fn contains(&self, x: &FieldElement) -> bool {
        self.lat.contains(&x.coords)
    }

    pub fn contains_i64(&self, x: &[i64]) -> bool {
        let v: Vec<BigInt> = x.iter().map(|&c| BigInt::from(c)).collect();
        self.lat.contains_int(&v)
    }

    pub fn is_subset_of(&self, other: &Ideal) -> bool {
        self.lat.is_subset_of(&other.lat)
    }

    /// self | other, i.e. other ⊆ self.
    pub fn divides(&self, other: &Ideal) -> bool {
        other.is_subset_of(self)
    }

    pub fn mul(&self, o: &Ideal) -> Ideal {
        let k = &self.field;
        let a = self.basis();
        let b = o.basis();
        let mut gens = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                gens.push(k.mul_coords(x, y));
            }
        }
        Ideal { field: k.clone(), lat: Lattice::from_rational(&gens, k.degree).expect("product of nonzero ideals") }
    }

    pub fn pow(&self, e: u32) -> Ideal {
        let mut r = Ideal::unit(&self.field);
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    /// 𝔞 + 𝔟.
    pub fn gcd(&self, o: &Ideal) -> Ideal {
        Ideal { field: self.field.clone(), lat: self.lat.sum(&o.lat) }
    }

    /// 𝔞 ∩ 𝔟.
    pub fn lcm(&self, o: &Ideal) -> Ideal {
        Ideal { field: self.field.clone(), lat: self.lat.intersect(&o.lat) }
    }

    pub fn is_coprime(&self, o: &Ideal) -> bool {
        self.gcd(o).is_unit()
    }

    pub fn scale(&self, c: &Q) -> Ideal {
        Ideal { field: self.field.clone(), lat: self.lat.scale(c) }
    }

    pub fn conjugate(&self, t: usize) -> Ideal {
        let gens: Vec<Vec<Q>> = self.basis().iter().map(|b| self.field.galois_apply_q(t, b)).collect();
        Ideal { field: self.field.clone(), lat: Lattice::from_rational(&gens, self.d()).expect("conjugate") }
    }

    /// {α : Tr(αx) ∈ ℤ for all x in self}.
    pub fn trace_dual(&self) -> Ideal {
        let k = &self.field;
        let gram: Vec<Vec<Q>> = k.trace_gram.iter().map(|r| r.iter().map(|x| qi(x.clone())).collect()).collect();
        let ginv = linalg::inverse(&gram).expect("nondegenerate trace form");
        let gens: Vec<Vec<Q>> = self.lat.dual().basis().iter().map(|v| linalg::mat_vec(&ginv, v)).collect();
        Ideal { field: k.clone(), lat: Lattice::from_rational(&gens, k.degree).expect("trace dual") }
    }

    /// {x ∈ K : x·b ⊆ a}.
    pub fn colon(a: &Ideal, b: &Ideal) -> Ideal {
        b.mul(&a.trace_dual()).trace_dual()
    }

    pub fn inverse(&self) -> Ideal {
        Ideal::colon(&Ideal::unit(&self.field), self)
    }

    pub fn div(&self, o: &Ideal) -> Ideal {
        self.mul(&o.inverse())
    }

    pub fn residues(&self) -> Result<ResidueSystem> {
        self.lat.residues()
    }

    pub fn residue_classes(&self) -> Result<Vec<FieldElement>> {
        Ok(self.residues()?.reps().into_iter().map(|r| self.field.elem_i64(&r)).collect())
    }

    /// Representatives of (𝔬/𝔟)* as integer coordinate vectors.
    pub fn residue_unit_reps(&self) -> Result<Vec<Vec<i64>>> {
        let rs = self.residues()?;
        let primes: Vec<Ideal> = match self.factor() {
            Ok(f) => f.into_iter().map(|(p, _)| p.ideal).collect(),
            Err(_) => Vec::new(),
        };
        let use_primes = !primes.is_empty() || self.is_unit();
        let mut out = Vec::new();
        for r in rs.reps() {
            let unit = if use_primes {
                primes.iter().all(|p| !p.contains_i64(&r))
            } else {
                let x = self.field.elem_i64(&r);
                !x.is_zero() && Ideal::principal(&x)?.gcd(self).is_unit()
            };
            if unit {
                out.push(r);
            }
        }
        Ok(out)
    }

    pub fn residue_units(&self) -> Result<Vec<FieldElement>> {
        Ok(self.residue_unit_reps()?.into_iter().map(|r| self.field.elem_i64(&r)).collect())
    }

    /// Prime factorization of a nonzero fractional ideal.
    pub fn factor(&self) -> Result<Vec<(PrimeIdeal, i64)>> {
        let den = self.lat.den.clone();
        let num_norm = self.lat.cols.iter().enumerate().fold(BigInt::one(), |acc, (i, c)| acc * &c[i]);
        let mut ps: Vec<u64> = Vec::new();
        for n in [num_norm, den] {
            let n = n.to_u64().ok_or_else(|| Error::invalid("ideal norm too large to factor"))?;
            for (p, _) in factor_u64(n) {
                if !ps.contains(&p) {
                    ps.push(p);
                }
            }
        }
        ps.sort();
        let mut out = Vec::new();
        for p in ps {
            for pr in factor_prime(&self.field, p)? {
                let v = pr.valuation_ideal(self);
                if v != 0 {
                    out.push((pr, v));
                }
            }
        }
        Ok(out)
    }

    /// Pairs (𝔠, μ_K(𝔟/𝔠)) over divisors 𝔠 | 𝔟 with squarefree quotient.
    pub fn moebius_divisors(&self) -> Result<Vec<(Ideal, i32)>> {
        let primes: Vec<Ideal> = self.factor()?.into_iter().map(|(p, _)| p.ideal).collect();
        let mut out = Vec::new();
        for mask in 0u32..(1 << primes.len()) {
            let mut c = self.clone();
            for (i, p) in primes.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    c = c.div(p);
                }
            }
            out.push((c, if mask.count_ones() % 2 == 0 { 1 } else { -1 }));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.d();
        let mut mat = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                mat.push(self.lat.cols[j][i].to_string());
            }
        }
        serde_json::json!({ "den": self.lat.den.to_string(), "mat": mat })
    }
}

pub fn different(k: &Field) -> Ideal {
    let o = Ideal::unit(k);
    Ideal::colon(&o, &o.trace_dual())
}

/// 𝔞_γ = {α ∈ 𝔬 : αγ ∈ 𝔬}.
pub fn denominator_ideal(gamma: &FieldElement) -> Result<Ideal> {
    if gamma.is_zero() {
        return Err(Error::invalid("denominator ideal of γ = 0"));
    }
    let k = &gamma.field;
    let o = Ideal::unit(k);
    Ok(Ideal::colon(&o, &Ideal::principal(gamma)?).lcm(&o))
}

/// ∩_{τ∈G} 𝔟^{τ⁻¹}.
pub fn g_invariant_ideal(b: &Ideal, g: &[usize]) -> Ideal {
    let k = &b.field;
    let mut out: Option<Ideal> = None;
    for &t in g {
        let c = b.conjugate(k.galois_inverse(t));
        out = Some(match out {
            None => c,
            Some(o) => o.lcm(&c),
        });
    }
    out.unwrap_or_else(|| b.clone())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrimeIdeal {
    pub ideal: Ideal,
    pub p: u64,
    pub e: u32,
    pub f: u32,
}

impl PrimeIdeal {
    pub fn norm(&self) -> u64 {
        self.p.pow(self.f)
    }

    /// ord_𝔭 of a nonzero fractional ideal.
    pub fn valuation_ideal(&self, a: &Ideal) -> i64 {
        let k = &a.field;
        let den = a.lat.den.clone();
        let num = Ideal { field: k.clone(), lat: Lattice { dim: a.lat.dim, cols: a.lat.cols.clone(), den: BigInt::one() } };
        let vden = vp_big(&den, self.p) as i64 * self.e as i64;
        let mut v = 0i64;
        let mut cur = num;
        let pinv = self.ideal.inverse();
        while cur.is_subset_of(&self.ideal) {
            cur = cur.mul(&pinv);
            v += 1;
        }
        v - vden
    }

    pub fn valuation(&self, x: &FieldElement) -> Option<i64> {
        if x.is_zero() {
            return None;
        }
        Some(self.valuation_ideal(&Ideal::principal(x).ok()?))
    }
}

pub fn vp_big(n: &BigInt, p: u64) -> u32 {
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    if n.is_zero() {
        return u32::MAX;
    }
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    v
}

pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime_u64(n: u64) -> bool {
    n >= 2 && factor_u64(n) == vec![(n, 1)]
}

fn char_poly(k: &NumberField, beta: &[Q]) -> Vec<Q> {
    // Faddeev–LeVerrier; returns coefficients low to high, monic.
    let d = k.degree;
    let a = k.mult_matrix(beta);
    let mut c = vec![Q::zero(); d + 1];
    c[d] = Q::one();
    let mut m = vec![vec![Q::zero(); d]; d];
    for kk in 1..=d {
        let mut next = vec![vec![Q::zero(); d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut s = Q::zero();
                for l in 0..d {
                    s += &a[i][l] * &m[l][j];
                }
                if i == j {
                    s += &c[d - kk + 1];
                }
                next[i][j] = s;
            }
        }
        m = next;
        let mut tr = Q::zero();
        for i in 0..d {
            for l in 0..d {
                tr += &a[i][l] * &m[l][i];
            }
        }
        c[d - kk] = -tr / q(kk as i64);
    }
    c
}

/// |det| of the coordinates of 1, β, …, β^{d−1}; zero when β is not primitive.
fn power_index(k: &NumberField, beta: &[Q]) -> BigInt {
    let d = k.degree;
    let mut rows = Vec::with_capacity(d);
    let mut cur = k.basis_coords(0);
    for _ in 0..d {
        rows.push(cur.clone());
        cur = k.mul_coords(&cur, beta);
    }
    linalg::det(&rows, &Q::one()).to_integer().abs()
}

fn prime_cache() -> &'static Mutex<HashMap<(u64, u64), Vec<PrimeIdeal>>> {
    static C: OnceLock<Mutex<HashMap<(u64, u64), Vec<PrimeIdeal>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Primes above p via Kummer–Dedekind on θ, or on a small alternative
/// generator when p divides [𝔬 : ℤ[θ]].
pub fn factor_prime(k: &Field, p: u64) -> Result<Vec<PrimeIdeal>> {
    if !is_prime_u64(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    if let Some(v) = prime_cache().lock().unwrap().get(&(k.id, p)) {
        return Ok(v.clone());
    }
    let d = k.degree;
    let pb = BigInt::from(p);
    let mut candidates: Vec<Vec<Q>> = vec![k.theta_coords().iter().map(|x| qi(x.clone())).collect()];
    let r = 2i64;
    let span = (2 * r + 1) as usize;
    let total = span.checked_pow(d as u32 - 1).unwrap_or(usize::MAX).min(200_000);
    for idx in 0..total {
        let mut c = vec![q(0)];
        let mut t = idx;
        for _ in 1..d {
            c.push(q((t % span) as i64 - r));
            t /= span;
        }
        candidates.push(c);
    }
    for beta in candidates {
        let idx = power_index(k, &beta);
        if idx.is_zero() || (&idx % &pb).is_zero() {
            continue;
        }
        let cp = char_poly(k, &beta);
        let fp: Vec<u64> = cp.iter().map(|c| c.to_integer().mod_floor(&pb).to_u64().unwrap()).collect();
        let mut out = Vec::new();
        for (g, e) in poly::factor_mod_p(&fp, p) {
            let beta_e = k.elem(beta.clone());
            let mut gb = k.zero();
            for c in g.iter().rev() {
                gb = &(&gb * &beta_e) + &k.from_int(*c as i64);
            }
            let ideal = Ideal::generated_by(k, &[k.from_int(p as i64), gb])?;
            out.push(PrimeIdeal { ideal, p, e: e as u32, f: (g.len() - 1) as u32 });
        }
        let total: u32 = out.iter().map(|x| x.e * x.f).sum();
        if total as usize != d {
            return Err(Error::Numerical(format!("splitting of {p} inconsistent: Σef = {total}")));
        }
        for pr in &out {
            if pr.ideal.norm_u64() != Some(pr.norm()) {
                return Err(Error::Numerical(format!("prime above {p} has unexpected norm")));
            }
        }
        out.sort_by(|a, b| a.ideal.lat.cols.cmp(&b.ideal.lat.cols));
        prime_cache().lock().unwrap().insert((k.id, p), out.clone());
        return Ok(out);
    }
    Err(Error::UnsupportedPrime(p))
}

/// Every element of the ideal with coordinates (in its HNF basis) in [−r, r],
/// in order of growing radius.
fn box_search<T>(ideal: &Ideal, max_radius: i64, mut pred: impl FnMut(&FieldElement) -> Option<T>) -> Result<T> {
    let basis = ideal.basis_elements();
    let d = basis.len();
    let mut r = 1i64;
    let mut prev = 0i64;
    loop {
        let span = (2 * r + 1) as u64;
        let total = span.pow(d as u32);
        for idx in 0..total {
            let mut c = Vec::with_capacity(d);
            let mut t = idx;
            for _ in 0..d {
                c.push((t % span) as i64 - r);
                t /= span;
            }
            if c.iter().all(|x| x.abs() <= prev) {
                continue;
            }
            let mut x = ideal.field.zero();
            for (ci, b) in c.iter().zip(&basis) {
                if *ci != 0 {
                    x = &x + &b.scale(&q(*ci));
                }
            }
            if x.is_zero() {
                continue;
            }
            if let Some(v) = pred(&x) {
                return Ok(v);
            }
        }
        if r >= max_radius {
            return Err(Error::SearchBound { what: "element search".into(), bound: max_radius });
        }
        prev = r;
        r = (r * 2).min(max_radius);
    }
}

pub const DEFAULT_SEARCH_RADIUS: i64 = 64;

/// α ∈ 𝔞 with gcd((α), 𝔞𝔠) = 𝔞.
pub fn element_with_exact_part(a: &Ideal, c: &Ideal, max_radius: i64) -> Result<FieldElement> {
    let ac = a.mul(c);
    box_search(a, max_radius, |x| {
        let px = Ideal::principal(x).ok()?;
        (px.gcd(&ac) == *a).then(|| x.clone())
    })
}

/// α₁, α₂ with ord_𝔭(α_i) = ord_𝔭(𝔟_i) at every 𝔭 | 𝔟₁𝔟₂.
pub fn crt_split(b1: &Ideal, b2: &Ideal, max_radius: i64) -> Result<(FieldElement, FieldElement)> {
    if !b1.is_coprime(b2) {
        return Err(Error::invalid("crt_split needs coprime ideals"));
    }
    let a1 = element_with_exact_part(b1, b2, max_radius)?;
    let a2 = element_with_exact_part(b2, b1, max_radius)?;
    Ok((a1, a2))
}

/// x with ord_𝔮(x) = e exactly for each listed prime power 𝔮^e.
pub fn element_with_valuations(k: &Field, vals: &[(PrimeIdeal, u32)], max_radius: i64) -> Result<FieldElement> {
    let mut target = Ideal::unit(k);
    let mut next = Ideal::unit(k);
    for (p, e) in vals {
        target = target.mul(&p.ideal.pow(*e));
        next = next.mul(&p.ideal);
    }
    element_with_exact_part(&target, &next, max_radius)
}

/// All integral ideals of norm ≤ bound (primes dividing an index that
/// cannot be handled are reported as errors).
pub fn ideals_up_to(k: &Field, bound: u64) -> Result<Vec<Ideal>> {
    let mut primes: Vec<(Ideal, u64)> = Vec::new();
    for p in 2..=bound {
        if !is_prime_u64(p) {
            continue;
        }
        for pr in factor_prime(k, p)? {
            if pr.norm() <= bound {
                primes.push((pr.ideal.clone(), pr.norm()));
            }
        }
    }
    let mut out = Vec::new();
    fn rec(primes: &[(Ideal, u64)], start: usize, cur: &Ideal, n: u64, bound: u64, out: &mut Vec<Ideal>) {
        out.push(cur.clone());
        for i in start..primes.len() {
            let (p, np) = &primes[i];
            if n * np > bound {
                continue;
            }
            rec(primes, i, &cur.mul(p), n * np, bound, out);
        }
    }
    rec(&primes, 0, &Ideal::unit(k), 1, bound, &mut out);
    out.sort_by(|a, b| (a.norm_u64(), &a.lat.cols).cmp(&(b.norm_u64(), &b.lat.cols)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2() -> Field {
        NumberField::real_quadratic(2).unwrap()
    }

    #[test]
    fn basic_ops() {
        let k = k2();
        let s = Ideal::principal(&k.omega(1)).unwrap();
        assert_eq!(s.mul(&s), Ideal::from_int(&k, 2).unwrap());
        let a = Ideal::principal(&k.parse_element("3+w2").unwrap()).unwrap();
        let b = Ideal::principal(&k.parse_element("3-w2").unwrap()).unwrap();
        assert!(a.gcd(&b).is_unit());
        assert_eq!(a.lcm(&b), Ideal::from_int(&k, 7).unwrap());
        assert_eq!(a.norm(), q(7));
        assert_eq!(Ideal::from_int(&k, 3).unwrap().norm(), q(9));
        assert_eq!(a.conjugate(1), b);
    }

    #[test]
    fn duals_and_different() {
        let k = k2();
        let o = Ideal::unit(&k);
        let od = o.trace_dual();
        let expect = Ideal::principal(&k.elem(vec![q(0), linalg::qfrac(1, 4)])).unwrap();
        assert_eq!(od, expect);
        assert_eq!(od.trace_dual(), o);
        let dd = different(&k);
        assert_eq!(dd, Ideal::principal(&k.elem_i64(&[0, 2])).unwrap());
        assert_eq!(dd.norm(), q(8));
        let g = k.elem(vec![q(0), linalg::qfrac(1, 12)]);
        assert_eq!(denominator_ideal(&g).unwrap(), Ideal::principal(&k.elem_i64(&[0, 6])).unwrap());
        assert!(denominator_ideal(&k.elem_i64(&[4, 5])).unwrap().is_unit());
    }

    #[test]
    fn splitting() {
        let k = k2();
        let f7 = factor_prime(&k, 7).unwrap();
        assert_eq!(f7.len(), 2);
        assert!(f7.iter().all(|p| p.e == 1 && p.f == 1));
        let f3 = factor_prime(&k, 3).unwrap();
        assert_eq!((f3.len(), f3[0].f), (1, 2));
        let f2 = factor_prime(&k, 2).unwrap();
        assert_eq!((f2.len(), f2[0].e), (1, 2));
        assert_eq!(f2[0].ideal, Ideal::principal(&k.omega(1)).unwrap());
        let k5 = NumberField::real_quadratic(5).unwrap();
        let f = factor_prime(&k5, 2).unwrap();
        assert_eq!((f.len(), f[0].f), (1, 2));
    }

    #[test]
    fn residues_and_units() {
        let k = k2();
        let three = Ideal::from_int(&k, 3).unwrap();
        assert_eq!(three.residue_classes().unwrap().len(), 9);
        assert_eq!(three.residue_units().unwrap().len(), 8);
        let a = Ideal::principal(&k.parse_element("3+w2").unwrap()).unwrap();
        assert_eq!(a.residue_classes().unwrap().len(), 7);
    }

    #[test]
    fn crt_covers_all_classes() {
        let k = k2();
        let b1 = Ideal::from_int(&k, 3).unwrap();
        let b2 = Ideal::principal(&k.parse_element("3+w2").unwrap()).unwrap();
        let b = b1.mul(&b2);
        let (a1, a2) = crt_split(&b1, &b2, 32).unwrap();
        let rs = b.residues().unwrap();
        let mut seen = vec![false; rs.size];
        for mu in b2.residue_classes().unwrap() {
            for beta in b1.residue_classes().unwrap() {
                let x = &(&a1 * &mu) + &(&a2 * &beta);
                seen[rs.index(&x.i64_coords().unwrap())] = true;
            }
        }
        assert_eq!(seen.len(), 63);
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn factorization_roundtrip() {
        let k = k2();
        for id in ideals_up_to(&k, 60).unwrap() {
            let mut r = Ideal::unit(&k);
            for (p, e) in id.factor().unwrap() {
                r = r.mul(&p.ideal.pow(e as u32));
            }
            assert_eq!(r, id);
            assert!(id.contains(&k.from_q(id.norm())));
        }
    }

    #[test]
    fn g_invariant() {
        let k = k2();
        let a = Ideal::principal(&k.parse_element("3+w2").unwrap()).unwrap();
        let g = g_invariant_ideal(&a, &[0, 1]);
        assert_eq!(g, Ideal::from_int(&k, 7).unwrap());
        assert_eq!(g_invariant_ideal(&a, &[0]), a);
    }
}
