//! Additive characters ψ(γ·) on 𝔬/𝔟.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldExt};
use crate::ideal::{self, factor_prime, Ideal, PrimeIdeal};
use crate::linalg::{self, qi, Q};

/// Compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: Complex64,
    c: Complex64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Complex64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn merge(&mut self, o: &KahanSum) {
        self.add(o.sum);
        self.add(-o.c);
    }

    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

/// e(q) = exp(2πi q) after exact reduction of q modulo 1.
pub fn e_of(qv: &Q) -> Complex64 {
    let num = qv.numer().mod_floor(qv.denom());
    let frac = linalg::to_f64(&Q::new(num, qv.denom().clone()));
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * frac)
}

pub fn psi(x: &FieldElement) -> Complex64 {
    e_of(&x.trace())
}

/// True iff ψ(γ·) is a nontrivial primitive character modulo b.
pub fn is_primitive(gamma: &FieldElement, b: &Ideal) -> Result<bool> {
    if !b.is_integral() || b.is_unit() {
        return Err(Error::invalid("modulus must be a proper nonzero integral ideal"));
    }
    if gamma.is_zero() {
        return Ok(false);
    }
    let k = &b.field;
    let dd = ideal::different(k);
    let a_gamma = ideal::denominator_ideal(gamma)?;
    let e = Ideal::colon(&a_gamma, b);
    Ok(b.mul(&e) == a_gamma && e.is_integral() && dd.is_subset_of(&e) && Ideal::colon(&dd, &e).gcd(b).is_unit())
}

/// Direct definition: ψ(γ·) is well defined on 𝔬/b but not on 𝔬/b₁ for
/// any proper divisor b₁ ⊋ b.
pub fn is_primitive_bruteforce(gamma: &FieldElement, b: &Ideal) -> Result<bool> {
    let k = &b.field;
    let od = Ideal::unit(k).trace_dual();
    let is_char_mod = |c: &Ideal| c.basis_elements().iter().all(|z| od.contains(&(gamma * z)));
    if !is_char_mod(b) {
        return Ok(false);
    }
    let primes: Vec<Ideal> = b.factor()?.into_iter().map(|(p, _)| p.ideal).collect();
    for p in primes {
        let b1 = b.div(&p);
        if is_char_mod(&b1) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug)]
pub struct PrimitiveCharacter {
    pub modulus: Ideal,
    pub gamma: FieldElement,
    pub alpha: FieldElement,
    pub g: BigInt,
    pub p1: PrimeIdeal,
    pub e: Ideal,
}

/// γ = g/α with (α) = 𝔟𝔡𝔭₁, g = |N(ν)| for ν ∈ 𝔭₁ coprime to every 𝔟^τ𝔡.
pub fn find_primitive_gamma(b: &Ideal, max_radius: i64) -> Result<PrimitiveCharacter> {
    if !b.is_integral() || b.is_unit() {
        return Err(Error::invalid("modulus must be a proper nonzero integral ideal"));
    }
    let k = &b.field;
    let dd = ideal::different(k);
    let c = b.mul(&dd);
    let c_inv = c.inverse();
    let conj: Vec<Ideal> = (0..k.degree).map(|t| b.conjugate(t).mul(&dd)).collect();
    let conj_lcm = conj.iter().skip(1).fold(conj[0].clone(), |acc, x| acc.lcm(x));

    let basis = c.basis_elements();
    let d = basis.len();
    let mut r = 1i64;
    let mut prev = 0i64;
    loop {
        let span = (2 * r + 1) as u64;
        for idx in 0..span.pow(d as u32) {
            let mut coeffs = Vec::with_capacity(d);
            let mut t = idx;
            for _ in 0..d {
                coeffs.push((t % span) as i64 - r);
                t /= span;
            }
            if coeffs.iter().all(|x| x.abs() <= prev) {
                continue;
            }
            let mut alpha = k.zero();
            for (ci, bv) in coeffs.iter().zip(&basis) {
                if *ci != 0 {
                    alpha = &alpha + &bv.scale(&linalg::q(*ci));
                }
            }
            if alpha.is_zero() {
                continue;
            }
            if let Some(ch) = try_alpha(b, &dd, &c_inv, &conj, &conj_lcm, &alpha)? {
                return Ok(ch);
            }
        }
        if r >= max_radius {
            return Err(Error::SearchBound { what: "primitive character generator α".into(), bound: max_radius });
        }
        prev = r;
        r = (r * 2).min(max_radius);
    }
}

fn try_alpha(
    b: &Ideal,
    dd: &Ideal,
    c_inv: &Ideal,
    conj: &[Ideal],
    conj_lcm: &Ideal,
    alpha: &FieldElement,
) -> Result<Option<PrimitiveCharacter>> {
    let k = &b.field;
    let pa = Ideal::principal(alpha)?;
    let q1 = pa.mul(c_inv);
    if !q1.is_integral() {
        return Ok(None);
    }
    let Some(n) = q1.norm_u64() else { return Ok(None) };
    if n < 2 {
        return Ok(None);
    }
    let fac = ideal::factor_u64(n);
    if fac.len() != 1 {
        return Ok(None);
    }
    let p = fac[0].0;
    let primes = match factor_prime(k, p) {
        Ok(v) => v,
        Err(Error::UnsupportedPrime(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Some(p1) = primes.into_iter().find(|pr| pr.ideal == q1) else { return Ok(None) };
    if p1.e != 1 || conj.iter().any(|cj| !cj.is_coprime(&p1.ideal)) {
        return Ok(None);
    }
    let nu = ideal::element_with_exact_part(&p1.ideal, conj_lcm, ideal::DEFAULT_SEARCH_RADIUS)?;
    let g = nu.norm().to_integer().abs();
    let gamma = k.from_q(qi(g.clone())).div(alpha)?;
    let ch = PrimitiveCharacter { modulus: b.clone(), gamma, alpha: alpha.clone(), g, p1, e: dd.clone() };
    verify_certificate(&ch)?;
    Ok(Some(ch))
}

/// Conditions (i)–(iii) of the 𝔉(𝔟) membership certificate.
pub fn verify_certificate(ch: &PrimitiveCharacter) -> Result<()> {
    let k = &ch.modulus.field;
    let dd = ideal::different(k);
    let b = &ch.modulus;
    if Ideal::principal(&ch.alpha)? != b.mul(&dd).mul(&ch.p1.ideal) {
        return Err(Error::validation("character-certificate", "(α) ≠ 𝔟𝔡𝔭₁"));
    }
    let gi = Ideal::principal(&k.from_q(qi(ch.g.clone())))?;
    if !ch.p1.ideal.contains(&k.from_q(qi(ch.g.clone()))) {
        return Err(Error::validation("character-certificate", "g ∉ 𝔭₁"));
    }
    for t in 0..k.degree {
        if !gi.is_coprime(&b.conjugate(t).mul(&dd)) {
            return Err(Error::validation("character-certificate", "(g) not coprime to 𝔟^τ𝔡"));
        }
    }
    let a_gamma = ideal::denominator_ideal(&ch.gamma)?;
    if a_gamma != b.mul(&ch.e) || !ch.e.divides(&dd) || !Ideal::colon(&dd, &ch.e).gcd(b).is_unit() {
        return Err(Error::validation("character-certificate", "𝔞_γ ≠ 𝔟𝔢 with admissible 𝔢"));
    }
    if !is_primitive(&ch.gamma, b)? {
        return Err(Error::validation("character-certificate", "ψ(γ·) not primitive"));
    }
    Ok(())
}

/// Integer phase table: Tr(γ a y) = (aᵀ T y)/den for integral a, y.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    pub d: usize,
    pub den: i64,
    pub t: Vec<i64>,
    roots: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(gamma: &FieldElement) -> Result<Self> {
        let k = &gamma.field;
        let d = k.degree;
        let mut vals = Vec::with_capacity(d * d);
        for j in 0..d {
            let gj = gamma * &k.omega(j);
            for l in 0..d {
                vals.push((&gj * &k.omega(l)).trace());
            }
        }
        let den = linalg::lcm_den(&vals);
        let den_i = den.to_i64().filter(|&x| x <= 1 << 40).ok_or_else(|| Error::invalid("phase denominator too large"))?;
        let t = vals
            .iter()
            .map(|v| (v * qi(den.clone())).to_integer().mod_floor(&den).to_i64().unwrap())
            .collect();
        let roots = if den_i <= 1 << 22 {
            (0..den_i).map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / den_i as f64)).collect()
        } else {
            Vec::new()
        };
        Ok(PhaseTable { d, den: den_i, t, roots })
    }

    /// r = aᵀT mod den.
    pub fn row(&self, a: &[i64]) -> Vec<i64> {
        let d = self.d;
        (0..d)
            .map(|l| {
                let s: i128 = (0..d).map(|j| a[j] as i128 * self.t[j * d + l] as i128).sum();
                s.rem_euclid(self.den as i128) as i64
            })
            .collect()
    }

    pub fn index(&self, row: &[i64], y: &[i64]) -> i64 {
        let s: i128 = row.iter().zip(y).map(|(&r, &x)| r as i128 * x as i128).sum();
        s.rem_euclid(self.den as i128) as i64
    }

    pub fn e(&self, idx: i64) -> Complex64 {
        if self.roots.is_empty() {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * idx as f64 / self.den as f64)
        } else {
            self.roots[idx as usize]
        }
    }
}

/// Σ_{a ∈ (𝔬/𝔟)*} ψ(γ a x).
pub fn primitive_char_sum(ch: &PrimitiveCharacter, x: &FieldElement) -> Result<Complex64> {
    let xi = x.i64_coords().ok_or_else(|| Error::invalid("x must be integral"))?;
    let pt = PhaseTable::new(&ch.gamma)?;
    let mut acc = KahanSum::new();
    for a in ch.modulus.residue_unit_reps()? {
        acc.add(pt.e(pt.index(&pt.row(&a), &xi)));
    }
    Ok(acc.value())
}

/// Σ_{𝔠|𝔟} μ(𝔟/𝔠) N𝔠 [x ∈ 𝔠].
pub fn primitive_char_sum_moebius(b: &Ideal, x: &FieldElement) -> Result<f64> {
    let mut s = 0.0;
    for (c, mu) in b.moebius_divisors()? {
        if c.contains(x) {
            s += mu as f64 * linalg::to_f64(&c.norm());
        }
    }
    Ok(s)
}

pub fn is_trivial_on(gamma: &FieldElement, b: &Ideal) -> bool {
    let od = Ideal::unit(&b.field).trace_dual();
    b.basis_elements().iter().all(|z| od.contains(&(gamma * z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NumberField;
    use crate::linalg::{q, qfrac};

    #[test]
    fn psi_values() {
        let k = NumberField::real_quadratic(2).unwrap();
        assert_eq!(psi(&k.elem_i64(&[3, 5])), Complex64::new(1.0, 0.0));
        let x = k.elem(vec![q(0), qfrac(1, 4)]);
        assert!((psi(&(&x * &k.omega(1))) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let y = k.elem(vec![qfrac(1, 7), qfrac(2, 9)]);
        assert!((psi(&y) * psi(&-&y) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn primitivity() {
        let k = NumberField::real_quadratic(2).unwrap();
        let three = Ideal::from_int(&k, 3).unwrap();
        let g = k.elem(vec![q(0), qfrac(1, 12)]);
        assert!(is_primitive(&g, &three).unwrap());
        assert!(is_primitive(&k.from_q(qfrac(1, 3)), &three).unwrap());
        assert!(is_primitive_bruteforce(&k.from_q(qfrac(1, 3)), &three).unwrap());
        assert!(!is_primitive(&k.from_int(5), &three).unwrap());
        assert!(is_primitive(&g, &Ideal::unit(&k)).is_err());
    }

    #[test]
    fn primitivity_matches_bruteforce() {
        let k = NumberField::real_quadratic(2).unwrap();
        let gammas: Vec<FieldElement> = [(1, 3, 0, 1), (0, 1, 1, 12), (1, 6, 1, 4), (1, 14, 0, 1), (2, 7, 1, 7), (1, 2, 1, 5)]
            .iter()
            .map(|&(a, b, c, d)| k.elem(vec![qfrac(a, b), qfrac(c, d)]))
            .collect();
        for b in ideal::ideals_up_to(&k, 50).unwrap().into_iter().skip(1) {
            for g in &gammas {
                assert_eq!(is_primitive(g, &b).unwrap(), is_primitive_bruteforce(g, &b).unwrap(), "{b:?} {g:?}");
            }
        }
    }

    #[test]
    fn constructed_characters() {
        let k = NumberField::real_quadratic(2).unwrap();
        for s in ["3", "3+w2", "5", "1+2*w2", "7"] {
            let b = Ideal::principal(&k.parse_element(s).unwrap()).unwrap();
            let ch = find_primitive_gamma(&b, 32).unwrap();
            let mut acc = KahanSum::new();
            for x in b.residue_classes().unwrap() {
                acc.add(psi(&(&ch.gamma * &x)));
            }
            assert!(acc.value().norm() < 1e-9);
            let nu = b.residue_unit_reps().unwrap().len() as f64;
            assert!((primitive_char_sum(&ch, &k.zero()).unwrap().re - nu).abs() < 1e-9);
            for x in [k.from_int(1), k.elem_i64(&[2, 1]), k.elem_i64(&[3, 3])] {
                let lhs = primitive_char_sum(&ch, &x).unwrap();
                let rhs = primitive_char_sum_moebius(&b, &x).unwrap();
                assert!((lhs - Complex64::new(rhs, 0.0)).norm() < 1e-9, "{s} {x:?}");
            }
        }
    }
}
