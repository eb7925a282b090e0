//! Totally real Galois number fields given by an integral basis, and exact
//! arithmetic on their elements.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, q, qi, Q};
use crate::poly::{self, QPoly};

pub type Field = Arc<NumberField>;

static NEXT_FIELD_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug)]
pub struct Automorphism {
    /// Column j holds the coordinates of τ(ω_j).
    pub matrix: Vec<Vec<BigInt>>,
    /// ρ_l ∘ τ = ρ_{perm[l]}.
    pub perm: Vec<usize>,
    /// τ(θ) as a polynomial in θ.
    pub image_theta: QPoly,
}

#[derive(Clone, Debug)]
pub enum GaloisSpec {
    Permutations(Vec<Vec<usize>>),
    Matrices(Vec<Vec<Vec<Q>>>),
}

pub struct NumberField {
    pub id: u64,
    pub degree: usize,
    /// Monic, coefficients low to high.
    pub min_poly: Vec<BigInt>,
    /// Row j: ω_j in powers of θ (low to high).
    pub basis: Vec<Vec<Q>>,
    basis_inv: Vec<Vec<Q>>,
    /// c[i][j][k] flattened: ω_i ω_j = Σ_k c_{ijk} ω_k.
    pub struct_consts: Vec<BigInt>,
    sc_i64: Vec<i64>,
    pub galois: Vec<Automorphism>,
    galois_i64: Vec<Vec<i64>>,
    compose: Vec<Vec<usize>>,
    inverse: Vec<usize>,
    pub roots: Vec<f64>,
    /// 𝐀[l][j] = ρ_l(ω_j).
    pub embeddings: Vec<Vec<f64>>,
    pub discriminant: BigInt,
    trace_of_basis: Vec<BigInt>,
    pub trace_gram: Vec<Vec<BigInt>>,
    dual: Vec<Vec<Q>>,
    theta: Vec<BigInt>,
    pub name: String,
}

impl fmt::Debug for NumberField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumberField({}, D_K={})", self.name, self.discriminant)
    }
}

impl PartialEq for NumberField {
    fn eq(&self, other: &Self) -> bool {
        if self.id == other.id {
            return true;
        }
        if self.min_poly != other.min_poly || self.basis != other.basis || self.galois.len() != other.galois.len() {
            return false;
        }
        self.galois.iter().all(|a| other.galois.iter().any(|b| a.matrix == b.matrix))
    }
}

fn qpoly_of(coeffs: &[BigInt]) -> QPoly {
    coeffs.iter().map(|c| qi(c.clone())).collect()
}

impl NumberField {
    pub fn new(name: &str, min_poly: Vec<BigInt>, basis: Vec<Vec<Q>>, galois: Option<GaloisSpec>) -> Result<Field> {
        let d = min_poly.len().checked_sub(1).filter(|&d| d >= 1).ok_or_else(|| Error::invalid("min_poly must have degree ≥ 1"))?;
        if !min_poly[d].is_one() {
            return Err(Error::validation("monic", "min_poly leading coefficient must be 1"));
        }
        let f = qpoly_of(&min_poly);
        if !poly::is_squarefree(&f) {
            return Err(Error::validation("irreducible", "min_poly has repeated roots"));
        }
        if poly::count_real_roots(&f) != d {
            return Err(Error::validation("totally-real", "min_poly does not have d distinct real roots"));
        }
        let roots = poly::real_roots(&f);
        check_irreducible(&f, &roots)?;

        if basis.len() != d || basis.iter().any(|r| r.len() != d) {
            return Err(Error::validation("basis-shape", format!("basis must be {d}×{d}")));
        }
        let mut one = vec![Q::zero(); d];
        one[0] = Q::one();
        if basis[0] != one {
            return Err(Error::validation("basis-unit", "ω_1 must equal 1"));
        }
        let basis_inv = linalg::inverse(&basis).ok_or_else(|| Error::validation("basis-independent", "basis matrix is singular"))?;
        let to_coords = |p: &QPoly| -> Vec<Q> {
            (0..d)
                .map(|k| (0..d).fold(Q::zero(), |acc, j| acc + p.get(j).cloned().unwrap_or_default() * &basis_inv[j][k]))
                .collect()
        };
        let mut sc = vec![BigInt::zero(); d * d * d];
        for i in 0..d {
            for j in 0..d {
                let prod = poly::mulmod(&basis[i], &basis[j], &f);
                for (k, c) in to_coords(&prod).into_iter().enumerate() {
                    if !c.is_integer() {
                        return Err(Error::validation(
                            "ring-closure",
                            format!("ω_{}·ω_{} has non-integral coordinate {} on ω_{}", i + 1, j + 1, linalg::fmt_rational(&c), k + 1),
                        ));
                    }
                    sc[(i * d + j) * d + k] = c.to_integer();
                }
            }
        }
        let theta_q = to_coords(&vec![Q::zero(), Q::one()]);
        if d > 1 && theta_q.iter().any(|c| !c.is_integer()) {
            return Err(Error::validation("ring-closure", "θ is not in the ℤ-span of the basis"));
        }
        let theta: Vec<BigInt> = if d == 1 { vec![-min_poly[0].clone()] } else { theta_q.iter().map(|c| c.to_integer()).collect() };

        let trace_of_basis: Vec<BigInt> = (0..d).map(|j| (0..d).map(|k| sc[(j * d + k) * d + k].clone()).sum()).collect();
        let trace_gram: Vec<Vec<BigInt>> = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| &sc[(i * d + j) * d + k] * &trace_of_basis[k]).sum()).collect())
            .collect();
        let gram_q: Vec<Vec<Q>> = trace_gram.iter().map(|r| r.iter().map(|x| qi(x.clone())).collect()).collect();
        let disc = linalg::det(&gram_q, &Q::one()).to_integer();
        if !disc.is_positive() {
            return Err(Error::validation("discriminant", "trace form discriminant is not positive"));
        }
        let dual = linalg::inverse(&gram_q).ok_or_else(|| Error::validation("discriminant", "singular trace form"))?;

        let embeddings: Vec<Vec<f64>> = roots.iter().map(|&r| (0..d).map(|j| poly::eval_f64(&basis[j], r)).collect()).collect();

        let images: Vec<QPoly> = match galois {
            Some(GaloisSpec::Permutations(perms)) => {
                let mut out = Vec::new();
                for p in perms {
                    if p.len() != d {
                        return Err(Error::validation("galois-automorphism", "permutation length differs from degree"));
                    }
                    let h = interpolate_image(&f, &roots, &p)
                        .ok_or_else(|| Error::validation("galois-automorphism", format!("permutation {p:?} is not induced by an automorphism")))?;
                    out.push(h);
                }
                out
            }
            Some(GaloisSpec::Matrices(ms)) => {
                let mut out = Vec::new();
                for m in ms {
                    if m.len() != d || m.iter().any(|r| r.len() != d) {
                        return Err(Error::validation("galois-automorphism", "matrix shape differs from degree"));
                    }
                    // τ(θ) = Σ_j θ_j τ(ω_j); column j of m is τ(ω_j).
                    let coords: Vec<Q> = (0..d).map(|i| (0..d).fold(Q::zero(), |acc, j| acc + &m[i][j] * qi(theta[j].clone()))).collect();
                    let h: QPoly = poly::trim((0..d).map(|k| (0..d).fold(Q::zero(), |acc, j| acc + &coords[j] * &basis[j][k])).collect());
                    if !poly::compose_mod(&f, &h, &f).is_empty() {
                        return Err(Error::validation("galois-automorphism", "matrix does not send θ to a root of min_poly"));
                    }
                    out.push(h);
                }
                out
            }
            None => search_automorphisms(&f, &roots)?,
        };
        if images.len() != d {
            return Err(Error::validation("galois-group", format!("expected {d} automorphisms, found {}", images.len())));
        }

        let mut galois = Vec::new();
        for h in images {
            let mut matrix = vec![vec![BigInt::zero(); d]; d];
            for j in 0..d {
                let img = poly::compose_mod(&basis[j], &h, &f);
                for (i, c) in to_coords(&img).into_iter().enumerate() {
                    if !c.is_integer() {
                        return Err(Error::validation("galois-automorphism", "automorphism does not preserve the integral basis"));
                    }
                    matrix[i][j] = c.to_integer();
                }
            }
            let mut perm = Vec::with_capacity(d);
            for &r in &roots {
                let v = poly::eval_f64(&h, r);
                let (idx, err) = roots
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| (i, (s - v).abs()))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                if err > 1e-6 * (1.0 + v.abs()) {
                    return Err(Error::validation("galois-automorphism", "image of a root is not a root"));
                }
                perm.push(idx);
            }
            let mut seen = perm.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != d {
                return Err(Error::validation("galois-automorphism", "induced root map is not a permutation"));
            }
            galois.push(Automorphism { matrix, perm, image_theta: h });
        }
        galois.sort_by_key(|a| {
            let ident = a.perm.iter().enumerate().all(|(i, &p)| i == p);
            (!ident, a.perm.clone())
        });
        for w in galois.windows(2) {
            if w[0].perm == w[1].perm {
                return Err(Error::validation("galois-group", "duplicate automorphism"));
            }
        }
        if !galois[0].perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Err(Error::validation("galois-group", "identity automorphism missing"));
        }
        let compose: Vec<Vec<usize>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        // (τ_a ∘ τ_b): ρ_l ∘ τ_a ∘ τ_b = ρ_{perm_a[l]} ∘ τ_b = ρ_{perm_b[perm_a[l]]}
                        let target: Vec<usize> = (0..d).map(|l| galois[b].perm[galois[a].perm[l]]).collect();
                        galois.iter().position(|g| g.perm == target).ok_or(())
                    })
                    .collect::<std::result::Result<Vec<_>, ()>>()
            })
            .collect::<std::result::Result<_, ()>>()
            .map_err(|_| Error::validation("galois-group", "automorphisms are not closed under composition"))?;
        let inverse: Vec<usize> = (0..d).map(|a| (0..d).find(|&b| compose[a][b] == 0).unwrap()).collect();
        let galois_i64 = galois
            .iter()
            .map(|a| {
                let mut flat = Vec::with_capacity(d * d);
                for row in &a.matrix {
                    for x in row {
                        flat.push(x.to_i64().ok_or_else(|| Error::invalid("Galois matrix entries exceed i64"))?);
                    }
                }
                Ok(flat)
            })
            .collect::<Result<Vec<_>>>()?;
        let sc_i64 = sc.iter().map(|x| x.to_i64().ok_or_else(|| Error::invalid("structure constants exceed i64"))).collect::<Result<_>>()?;

        let field = NumberField {
            id: NEXT_FIELD_ID.fetch_add(1, Ordering::Relaxed),
            degree: d,
            min_poly,
            basis,
            basis_inv,
            struct_consts: sc,
            sc_i64,
            galois,
            galois_i64,
            compose,
            inverse,
            roots,
            embeddings,
            discriminant: disc,
            trace_of_basis,
            trace_gram,
            dual,
            theta,
            name: name.to_string(),
        };
        field.check_automorphisms()?;
        Ok(Arc::new(field))
    }

    fn check_automorphisms(&self) -> Result<()> {
        let d = self.degree;
        for (t, _) in self.galois.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    let wi = self.basis_coords(i);
                    let wj = self.basis_coords(j);
                    let lhs = self.galois_apply_q(t, &self.mul_coords(&wi, &wj));
                    let rhs = self.mul_coords(&self.galois_apply_q(t, &wi), &self.galois_apply_q(t, &wj));
                    if lhs != rhs {
                        return Err(Error::validation("galois-automorphism", "τ(xy) ≠ τ(x)τ(y) on the basis"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn real_quadratic(dd: i64) -> Result<Field> {
        if dd <= 1 {
            return Err(Error::invalid(format!("D = {dd} must exceed 1")));
        }
        let mut k = 2i64;
        while k * k <= dd {
            if dd % (k * k) == 0 {
                return Err(Error::invalid(format!("D = {dd} is not squarefree")));
            }
            k += 1;
        }
        let min_poly = vec![BigInt::from(-dd), BigInt::zero(), BigInt::one()];
        let basis = if dd.rem_euclid(4) == 1 {
            vec![vec![q(1), q(0)], vec![linalg::qfrac(1, 2), linalg::qfrac(1, 2)]]
        } else {
            vec![vec![q(1), q(0)], vec![q(0), q(1)]]
        };
        Self::new(&format!("Qsqrt:{dd}"), min_poly, basis, Some(GaloisSpec::Permutations(vec![vec![0, 1], vec![1, 0]])))
    }

    /// The cyclic cubic field of conductor 7, defined by x³+x²−2x−1.
    pub fn cyclic_cubic() -> Result<Field> {
        let min_poly = [-1, -2, 1, 1].iter().map(|&c| BigInt::from(c)).collect();
        let basis = vec![vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]];
        Self::new("cubic7", min_poly, basis, None)
    }

    /// "Qsqrt:D" or "cubic7".
    pub fn builtin(name: &str) -> Result<Field> {
        if let Some(rest) = name.strip_prefix("Qsqrt:") {
            let dd: i64 = rest.trim().parse().map_err(|_| Error::invalid(format!("bad builtin field {name}")))?;
            return Self::real_quadratic(dd);
        }
        match name {
            "cubic7" => Self::cyclic_cubic(),
            _ => Err(Error::invalid(format!("unknown builtin field {name}"))),
        }
    }

    pub fn from_description(desc: &FieldDescription) -> Result<Field> {
        desc.build()
    }

    pub fn same(a: &Field, b: &Field) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }

    // ----- coordinate-level arithmetic -----

    pub fn sc(&self, i: usize, j: usize, k: usize) -> &BigInt {
        &self.struct_consts[(i * self.degree + j) * self.degree + k]
    }

    pub fn basis_coords(&self, k: usize) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.degree];
        v[k] = Q::one();
        v
    }

    pub fn mul_coords(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let d = self.degree;
        let mut out = vec![Q::zero(); d];
        for i in 0..d {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..d {
                if b[j].is_zero() {
                    continue;
                }
                let ab = &a[i] * &b[j];
                for k in 0..d {
                    let c = self.sc(i, j, k);
                    if !c.is_zero() {
                        out[k] += &ab * qi(c.clone());
                    }
                }
            }
        }
        out
    }

    pub fn galois_apply_q(&self, t: usize, a: &[Q]) -> Vec<Q> {
        let m = &self.galois[t].matrix;
        (0..self.degree)
            .map(|i| (0..self.degree).fold(Q::zero(), |acc, j| if m[i][j].is_zero() { acc } else { acc + qi(m[i][j].clone()) * &a[j] }))
            .collect()
    }

    pub fn trace_coords(&self, a: &[Q]) -> Q {
        a.iter().zip(&self.trace_of_basis).fold(Q::zero(), |acc, (x, t)| acc + x * qi(t.clone()))
    }

    pub fn trace_of_basis(&self) -> &[BigInt] {
        &self.trace_of_basis
    }

    /// M[k][i] = coefficient of ω_k in a·ω_i.
    pub fn mult_matrix(&self, a: &[Q]) -> Vec<Vec<Q>> {
        let d = self.degree;
        (0..d)
            .map(|k| {
                (0..d)
                    .map(|i| (0..d).fold(Q::zero(), |acc, j| acc + &a[j] * qi(self.sc(j, i, k).clone())))
                    .collect()
            })
            .collect()
    }

    // ----- fast integer paths -----

    pub fn mul_i64(&self, a: &[i64], b: &[i64], out: &mut [i64]) {
        let d = self.degree;
        out.iter_mut().for_each(|x| *x = 0);
        for i in 0..d {
            if a[i] == 0 {
                continue;
            }
            for j in 0..d {
                if b[j] == 0 {
                    continue;
                }
                let ab = a[i] * b[j];
                let base = (i * d + j) * d;
                for k in 0..d {
                    out[k] += ab * self.sc_i64[base + k];
                }
            }
        }
    }

    pub fn galois_i64(&self, t: usize, a: &[i64], out: &mut [i64]) {
        let d = self.degree;
        let m = &self.galois_i64[t];
        for i in 0..d {
            out[i] = (0..d).map(|j| m[i * d + j] * a[j]).sum();
        }
    }

    pub fn trace_i64(&self, a: &[i64]) -> i64 {
        a.iter().zip(&self.trace_of_basis).map(|(x, t)| x * t.to_i64().unwrap()).sum()
    }

    // ----- group structure -----

    pub fn identity(&self) -> usize {
        0
    }

    /// Index of τ_a ∘ τ_b.
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.compose[a][b]
    }

    pub fn galois_inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// l_τ with ρ_{l_τ} ∘ τ = ρ_l.
    pub fn l_tau(&self, t: usize, l: usize) -> usize {
        self.galois[t].perm.iter().position(|&p| p == l).unwrap()
    }

    // ----- derived data -----

    /// Dual basis coordinates: Tr(ρ_i ω_j) = δ_ij.
    pub fn dual_basis_coords(&self) -> &[Vec<Q>] {
        &self.dual
    }

    pub fn theta_coords(&self) -> &[BigInt] {
        &self.theta
    }

    pub fn poly_to_coords(&self, p: &QPoly) -> Vec<Q> {
        let f = qpoly_of(&self.min_poly);
        let r = poly::rem(p, &f);
        (0..self.degree)
            .map(|k| (0..self.degree).fold(Q::zero(), |acc, j| acc + r.get(j).cloned().unwrap_or_default() * &self.basis_inv[j][k]))
            .collect()
    }

    pub fn det_embeddings(&self) -> f64 {
        let d = self.degree;
        DMatrix::from_fn(d, d, |i, j| self.embeddings[i][j]).determinant()
    }
}

fn check_irreducible(f: &QPoly, roots: &[f64]) -> Result<()> {
    let d = roots.len();
    for mask in 1u64..(1u64 << d) {
        let k = mask.count_ones() as usize;
        if k > d / 2 || mask & 1 == 0 && k == d / 2 && d % 2 == 0 && false {
            continue;
        }
        let mut c = vec![1.0f64];
        for (i, &r) in roots.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let mut n = vec![0.0; c.len() + 1];
                for (j, &x) in c.iter().enumerate() {
                    n[j + 1] += x;
                    n[j] -= r * x;
                }
                c = n;
            }
        }
        if c.iter().any(|x| (x - x.round()).abs() > 1e-6) {
            continue;
        }
        let g: QPoly = c.iter().map(|x| q(x.round() as i64)).collect();
        if poly::rem(f, &g).is_empty() {
            return Err(Error::validation("irreducible", "min_poly has a rational factor"));
        }
    }
    Ok(())
}

fn interpolate_image(f: &QPoly, roots: &[f64], perm: &[usize]) -> Option<QPoly> {
    let d = roots.len();
    let v = DMatrix::from_fn(d, d, |i, j| roots[i].powi(j as i32));
    let rhs = DVector::from_fn(d, |i, _| roots[perm[i]]);
    let sol = v.lu().solve(&rhs)?;
    // Denominators divide the index, whose square divides disc(f).
    let df = poly_discriminant_bound(f);
    for den in [1i64, 2, 3, 4, 6, 8, 9, 12, df] {
        let h: QPoly = poly::trim(sol.iter().map(|&c| Q::new(BigInt::from((c * den as f64).round() as i64), BigInt::from(den))).collect());
        if !h.is_empty() && poly::compose_mod(f, &h, f).is_empty() {
            return Some(h);
        }
    }
    None
}

fn poly_discriminant_bound(f: &QPoly) -> i64 {
    let d = f.len() - 1;
    let roots = poly::real_roots(f);
    let mut prod = 1.0f64;
    for i in 0..d {
        for j in i + 1..d {
            prod *= (roots[i] - roots[j]).powi(2);
        }
    }
    (prod.round() as i64).max(1)
}

fn search_automorphisms(f: &QPoly, roots: &[f64]) -> Result<Vec<QPoly>> {
    let d = roots.len();
    if d > 7 {
        return Err(Error::invalid("automatic Galois search limited to degree ≤ 7; supply the group"));
    }
    let mut found: Vec<QPoly> = Vec::new();
    let mut targets_done = vec![false; d];
    let mut perm: Vec<usize> = (0..d).collect();
    loop {
        if !targets_done[perm[0]] {
            if let Some(h) = interpolate_image(f, roots, &perm) {
                targets_done[perm[0]] = true;
                found.push(h);
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(found)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct FieldElement {
    pub field: Field,
    pub coords: Vec<Q>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_element_string())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_element_string())
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords && NumberField::same(&self.field, &other.field)
    }
}

impl Eq for FieldElement {}

impl std::hash::Hash for FieldElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.coords.hash(state);
    }
}

pub trait FieldExt {
    fn elem(&self, coords: Vec<Q>) -> FieldElement;
    fn elem_i64(&self, coords: &[i64]) -> FieldElement;
    fn from_int(&self, n: i64) -> FieldElement;
    fn from_q(&self, x: Q) -> FieldElement;
    fn zero(&self) -> FieldElement;
    fn one(&self) -> FieldElement;
    fn omega(&self, k: usize) -> FieldElement;
    fn dual_basis(&self) -> Vec<FieldElement>;
    fn theta(&self) -> FieldElement;
    fn parse_element(&self, s: &str) -> Result<FieldElement>;
    fn fundamental_unit(&self, bound: i64) -> Result<FieldElement>;
}

impl FieldExt for Field {
    fn elem(&self, coords: Vec<Q>) -> FieldElement {
        assert_eq!(coords.len(), self.degree);
        FieldElement { field: self.clone(), coords }
    }

    fn elem_i64(&self, coords: &[i64]) -> FieldElement {
        self.elem(coords.iter().map(|&c| q(c)).collect())
    }

    fn from_int(&self, n: i64) -> FieldElement {
        self.from_q(q(n))
    }

    fn from_q(&self, x: Q) -> FieldElement {
        let mut c = vec![Q::zero(); self.degree];
        c[0] = x;
        self.elem(c)
    }

    fn zero(&self) -> FieldElement {
        self.elem(vec![Q::zero(); self.degree])
    }

    fn one(&self) -> FieldElement {
        self.from_int(1)
    }

    fn omega(&self, k: usize) -> FieldElement {
        self.elem(self.basis_coords(k))
    }

    fn dual_basis(&self) -> Vec<FieldElement> {
        self.dual_basis_coords().iter().map(|row| self.elem(row.clone())).collect()
    }

    fn theta(&self) -> FieldElement {
        self.elem(self.theta_coords().iter().map(|x| qi(x.clone())).collect())
    }

    /// Terms like "3", "-1/2*w2", "w3", joined by + or -; w_k is ω_k (1-based).
    fn parse_element(&self, s: &str) -> Result<FieldElement> {
        let mut coords = vec![Q::zero(); self.degree];
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(Error::invalid("empty element string"));
        }
        let mut terms = Vec::new();
        let mut cur = String::new();
        for (i, ch) in cleaned.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('*') && !cur.ends_with('/') {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);
        for t in terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (-1, b),
                None => (1, t.strip_prefix('+').unwrap_or(&t)),
            };
            let (coef, idx) = if let Some(pos) = body.find('w') {
                let c = body[..pos].trim_end_matches('*');
                let coef = if c.is_empty() { q(1) } else { linalg::parse_rational(c).ok_or_else(|| Error::invalid(format!("bad coefficient in {t}")))? };
                let k: usize = body[pos + 1..].parse().map_err(|_| Error::invalid(format!("bad basis index in {t}")))?;
                if k == 0 || k > self.degree {
                    return Err(Error::invalid(format!("basis index {k} out of range 1..={}", self.degree)));
                }
                (coef, k - 1)
            } else {
                (linalg::parse_rational(body).ok_or_else(|| Error::invalid(format!("bad term {t}")))?, 0)
            };
            coords[idx] += coef * q(sign);
        }
        Ok(self.elem(coords))
    }

    /// Smallest unit x+yω₂ with y > 0 of a real quadratic field.
    fn fundamental_unit(&self, bound: i64) -> Result<FieldElement> {
        if self.degree != 2 {
            return Err(Error::invalid("unit search implemented for real quadratic fields only"));
        }
        for y in 1..=bound {
            for x in -bound..=bound {
                let u = self.elem_i64(&[x, y]);
                if u.norm().abs().is_one() && u.embed(1) > 1.0 {
                    return Ok(u);
                }
            }
        }
        Err(Error::SearchBound { what: "fundamental unit".into(), bound })
    }
}

impl FieldElement {
    pub fn d(&self) -> usize {
        self.field.degree
    }

    fn check(&self, other: &FieldElement) -> Result<()> {
        if NumberField::same(&self.field, &other.field) {
            Ok(())
        } else {
            Err(Error::invalid("elements belong to different fields"))
        }
    }

    pub fn try_add(&self, o: &FieldElement) -> Result<FieldElement> {
        self.check(o)?;
        Ok(self + o)
    }

    pub fn try_mul(&self, o: &FieldElement) -> Result<FieldElement> {
        self.check(o)?;
        Ok(self * o)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(|c| c.is_integer())
    }

    pub fn scale(&self, c: &Q) -> FieldElement {
        self.field.elem(self.coords.iter().map(|x| x * c).collect())
    }

    pub fn trace(&self) -> Q {
        self.field.trace_coords(&self.coords)
    }

    pub fn norm(&self) -> Q {
        linalg::det(&self.field.mult_matrix(&self.coords), &Q::one())
    }

    pub fn mult_matrix(&self) -> Vec<Vec<Q>> {
        self.field.mult_matrix(&self.coords)
    }

    pub fn apply_galois(&self, t: usize) -> FieldElement {
        self.field.elem(self.field.galois_apply_q(t, &self.coords))
    }

    /// ρ_l(a), 0-based l.
    pub fn embed(&self, l: usize) -> f64 {
        self.coords.iter().zip(&self.field.embeddings[l]).map(|(c, e)| linalg::to_f64(c) * e).sum()
    }

    pub fn inverse(&self) -> Result<FieldElement> {
        if self.is_zero() {
            return Err(Error::invalid("inverse of zero"));
        }
        let mut e1 = vec![Q::zero(); self.d()];
        e1[0] = Q::one();
        let x = linalg::solve(&self.mult_matrix(), &e1).ok_or_else(|| Error::invalid("element not invertible"))?;
        Ok(self.field.elem(x))
    }

    pub fn div(&self, o: &FieldElement) -> Result<FieldElement> {
        Ok(self * &o.inverse()?)
    }

    pub fn pow(&self, e: u32) -> FieldElement {
        let mut r = self.field.one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    pub fn int_coords(&self) -> Option<Vec<BigInt>> {
        self.is_integral().then(|| self.coords.iter().map(|c| c.to_integer()).collect())
    }

    pub fn i64_coords(&self) -> Option<Vec<i64>> {
        self.coords.iter().map(|c| if c.is_integer() { c.to_integer().to_i64() } else { None }).collect()
    }

    pub fn to_element_string(&self) -> String {
        let mut parts = Vec::new();
        for (k, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let s = linalg::fmt_rational(c);
            parts.push(if k == 0 { s } else { format!("{s}*w{}", k + 1) });
        }
        if parts.is_empty() {
            return "0".into();
        }
        parts.join("+").replace("+-", "-")
    }
}

impl<'a> Add<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn add(self, o: &FieldElement) -> FieldElement {
        debug_assert!(NumberField::same(&self.field, &o.field));
        self.field.elem(self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn sub(self, o: &FieldElement) -> FieldElement {
        debug_assert!(NumberField::same(&self.field, &o.field));
        self.field.elem(self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect())
    }
}

impl<'a> Mul<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn mul(self, o: &FieldElement) -> FieldElement {
        assert!(NumberField::same(&self.field, &o.field), "elements belong to different fields");
        self.field.elem(self.field.mul_coords(&self.coords, &o.coords))
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        self.field.elem(self.coords.iter().map(|a| -a).collect())
    }
}

impl linalg::Scalar for FieldElement {
    fn is_zero_s(&self) -> bool {
        self.is_zero()
    }
    fn add_s(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_s(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_s(&self, o: &Self) -> Self {
        self * o
    }
    fn inv_s(&self) -> Self {
        self.inverse().expect("nonzero pivot")
    }
}

// ---------------------------------------------------------------------------

/// JSON field description: min_poly high-to-low (leading 1 may be omitted),
/// basis rows in powers of θ low-to-high as "p/q" strings, galois as root
/// permutations (0-based, ascending real roots) or coordinate matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldDescription {
    pub degree: usize,
    pub min_poly: Vec<serde_json::Value>,
    pub basis: Vec<Vec<String>>,
    #[serde(default)]
    pub galois: Option<serde_json::Value>,
    #[serde(default)]
    pub name: Option<String>,
}

impl FieldDescription {
    pub fn build(&self) -> Result<Field> {
        let d = self.degree;
        let mut coeffs: Vec<BigInt> = self
            .min_poly
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                serde_json::Value::Number(n) => n.as_i64().map(BigInt::from).ok_or_else(|| Error::invalid(format!("min_poly[{i}] not an integer"))),
                serde_json::Value::String(s) => s.parse().map_err(|_| Error::invalid(format!("min_poly[{i}] not an integer"))),
                _ => Err(Error::invalid(format!("min_poly[{i}] not an integer"))),
            })
            .collect::<Result<_>>()?;
        if coeffs.len() == d {
            coeffs.insert(0, BigInt::one());
        }
        if coeffs.len() != d + 1 {
            return Err(Error::invalid(format!("min_poly needs {d} or {} coefficients", d + 1)));
        }
        coeffs.reverse();
        let basis: Vec<Vec<Q>> = self
            .basis
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| linalg::parse_rational(s).ok_or_else(|| Error::invalid(format!("basis[{i}][{j}] is not a rational"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let galois = match &self.galois {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(parse_galois(v)?),
        };
        NumberField::new(self.name.as_deref().unwrap_or("custom"), coeffs, basis, galois)
    }

    pub fn from_field(k: &NumberField) -> Self {
        let mut mp: Vec<serde_json::Value> = k.min_poly.iter().rev().map(|c| serde_json::Value::String(c.to_string())).collect();
        mp.iter_mut().for_each(|v| {
            if let serde_json::Value::String(s) = v {
                if let Ok(n) = s.parse::<i64>() {
                    *v = serde_json::Value::from(n);
                }
            }
        });
        FieldDescription {
            degree: k.degree,
            min_poly: mp,
            basis: k.basis.iter().map(|r| r.iter().map(linalg::fmt_rational).collect()).collect(),
            galois: Some(serde_json::to_value(k.galois.iter().map(|a| a.perm.clone()).collect::<Vec<_>>()).unwrap()),
            name: Some(k.name.clone()),
        }
    }
}

fn parse_galois(v: &serde_json::Value) -> Result<GaloisSpec> {
    let arr = v.as_array().ok_or_else(|| Error::invalid("galois must be an array"))?;
    let is_matrix = arr.first().and_then(|x| x.as_array()).and_then(|x| x.first()).is_some_and(|x| x.is_array());
    if is_matrix {
        let ms = arr
            .iter()
            .enumerate()
            .map(|(t, m)| {
                m.as_array()
                    .ok_or_else(|| Error::invalid(format!("galois[{t}] not a matrix")))?
                    .iter()
                    .map(|row| {
                        row.as_array()
                            .ok_or_else(|| Error::invalid(format!("galois[{t}] row not an array")))?
                            .iter()
                            .map(|x| match x {
                                serde_json::Value::String(s) => linalg::parse_rational(s),
                                serde_json::Value::Number(n) => n.as_i64().map(q),
                                _ => None,
                            }
                            .ok_or_else(|| Error::invalid(format!("galois[{t}] entry not rational"))))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GaloisSpec::Matrices(ms))
    } else {
        let ps = arr
            .iter()
            .enumerate()
            .map(|(t, p)| {
                p.as_array()
                    .ok_or_else(|| Error::invalid(format!("galois[{t}] not a permutation")))?
                    .iter()
                    .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Error::invalid(format!("galois[{t}] entry not an index"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GaloisSpec::Permutations(ps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_basics() {
        let k = NumberField::real_quadratic(2).unwrap();
        assert_eq!(k.discriminant, BigInt::from(8));
        let s = k.omega(1);
        assert_eq!(s.trace(), q(0));
        assert_eq!(s.norm(), q(-2));
        let a = k.parse_element("3+1*w2").unwrap();
        assert_eq!(a.trace(), q(6));
        assert_eq!(a.norm(), q(7));
        assert_eq!(a.apply_galois(1), k.parse_element("3-w2").unwrap());
        assert_eq!(a.apply_galois(1).apply_galois(1), a);
        let db = k.dual_basis();
        assert_eq!(db[0], k.from_q(linalg::qfrac(1, 2)));
        assert_eq!(db[1], k.elem(vec![q(0), linalg::qfrac(1, 4)]));
        assert!((k.det_embeddings().powi(2) - 8.0).abs() < 1e-9);
    }

    #[test]
    fn sqrt5_and_errors() {
        let k = NumberField::real_quadratic(5).unwrap();
        assert_eq!(k.discriminant, BigInt::from(5));
        assert!(NumberField::real_quadratic(4).is_err());
        assert!(NumberField::real_quadratic(1).is_err());
    }

    #[test]
    fn cubic() {
        let k = NumberField::cyclic_cubic().unwrap();
        assert_eq!(k.discriminant, BigInt::from(49));
        assert_eq!(k.galois.len(), 3);
        let db = k.dual_basis();
        for i in 0..3 {
            for j in 0..3 {
                let t = (&db[i] * &k.omega(j)).trace();
                assert_eq!(t, if i == j { q(1) } else { q(0) });
            }
        }
    }

    #[test]
    fn description_matches_builtin() {
        let desc: FieldDescription = serde_json::from_str(r#"{"degree":2,"min_poly":[1,0,-2],"basis":[["1","0"],["0","1"]],"galois":[[0,1],[1,0]]}"#).unwrap();
        let k = desc.build().unwrap();
        let b = NumberField::real_quadratic(2).unwrap();
        assert!(*k == *b);
        let bad: FieldDescription = serde_json::from_str(r#"{"degree":2,"min_poly":[1,0,-2],"basis":[["1","0"],["0","1/2"]]}"#).unwrap();
        match bad.build() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "ring-closure"),
            other => panic!("{other:?}"),
        }
        let cx: FieldDescription = serde_json::from_str(r#"{"degree":2,"min_poly":[1,0,2],"basis":[["1","0"],["0","1"]]}"#).unwrap();
        match cx.build() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "totally-real"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_elements() {
        let k = NumberField::real_quadratic(2).unwrap();
        assert_eq!(k.parse_element("-1/2*w2+3").unwrap().coords, vec![q(3), linalg::qfrac(-1, 2)]);
        assert_eq!(k.parse_element("w2").unwrap(), k.omega(1));
        assert!(k.parse_element("w3").is_err());
    }

    #[test]
    fn fundamental_units() {
        let k = NumberField::real_quadratic(2).unwrap();
        assert_eq!(k.fundamental_unit(10).unwrap(), k.elem_i64(&[1, 1]));
    }
}
