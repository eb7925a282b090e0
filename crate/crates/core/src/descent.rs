//! The descent bijection between generalised quadratic forms over K and
//! systems of d rational quadratic forms in dn variables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldElement, FieldExt, NumberField};
use crate::form::Gqf;
use crate::linalg::{self, Q};

/// Variables are ordered u = (u_{1,1..n}, …, u_{d,1..n}) with X_i = Σ_k u_{k,i} ω_k.
#[derive(Clone, Debug)]
pub struct DescendedSystem {
    pub field: Field,
    pub n: usize,
    /// forms[p] is the dn×dn symmetric matrix of Q_p.
    pub forms: Vec<Vec<Vec<Q>>>,
    pub shift: Option<Vec<BigInt>>,
}

impl PartialEq for DescendedSystem {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && NumberField::same(&self.field, &o.field) && self.forms == o.forms && self.shift == o.shift
    }
}

struct Tables {
    /// T[((((p·d+k)·d+l)·d+τ)·d+m)·d+τ'] = Tr(ρ_p ω_k ω_l^τ ω_m^{τ'}).
    t: Vec<Q>,
    off_inv: Vec<Vec<Q>>,
    diag_inv: Vec<Vec<Q>>,
    diag_pairs: Vec<(usize, usize)>,
}

fn tables(k: &Field) -> Arc<Tables> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Tables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&k.id) {
        return t.clone();
    }
    let built = Arc::new(build_tables(k));
    cache.lock().unwrap().insert(k.id, built.clone());
    built
}

fn build_tables(k: &Field) -> Tables {
    let d = k.degree;
    let dual = k.dual_basis();
    let conj: Vec<Vec<FieldElement>> = (0..d).map(|l| (0..d).map(|t| k.omega(l).apply_galois(t)).collect()).collect();
    let mut t = Vec::with_capacity(d.pow(6));
    for p in 0..d {
        for kk in 0..d {
            let pk = &dual[p] * &k.omega(kk);
            for l in 0..d {
                for tau in 0..d {
                    let pkl = &pk * &conj[l][tau];
                    for m in 0..d {
                        for tau2 in 0..d {
                            t.push((&pkl * &conj[m][tau2]).trace());
                        }
                    }
                }
            }
        }
    }
    let tv = |p: usize, kk: usize, l: usize, tau: usize, m: usize, tau2: usize| &t[((((p * d + kk) * d + l) * d + tau) * d + m) * d + tau2];

    // Off-diagonal block: unknowns (k,τ,τ'), equations (p,l,m).
    let mut off = vec![vec![Q::zero(); d * d * d]; d * d * d];
    for p in 0..d {
        for l in 0..d {
            for m in 0..d {
                let row = (p * d + l) * d + m;
                for kk in 0..d {
                    for tau in 0..d {
                        for tau2 in 0..d {
                            off[row][(kk * d + tau) * d + tau2] = tv(p, kk, l, tau, m, tau2).clone();
                        }
                    }
                }
            }
        }
    }
    // Diagonal block: unknowns (k, τ≤τ'), equations (p, l≤m).
    let diag_pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let np = diag_pairs.len();
    let mut dg = vec![vec![Q::zero(); d * np]; d * np];
    for p in 0..d {
        for (ri, &(l, m)) in diag_pairs.iter().enumerate() {
            let row = p * np + ri;
            for kk in 0..d {
                for (ci, &(tau, tau2)) in diag_pairs.iter().enumerate() {
                    let mut v = tv(p, kk, l, tau, m, tau2).clone();
                    if tau != tau2 {
                        v += tv(p, kk, l, tau2, m, tau);
                    }
                    dg[row][kk * np + ci] = v;
                }
            }
        }
    }
    Tables {
        off_inv: linalg::inverse(&off).expect("descent map is injective"),
        diag_inv: linalg::inverse(&dg).expect("descent map is injective"),
        t,
        diag_pairs,
    }
}

/// β_{p,l,i,m,j} = Σ_k Σ_{τ,τ'} c^{(k)}_{i,j,τ,τ'} Tr(ρ_p ω_k ω_l^τ ω_m^{τ'}).
pub fn descend(f: &Gqf) -> DescendedSystem {
    let k = &f.field;
    let d = k.degree;
    let n = f.n;
    let tb = tables(k);
    let dim = d * n;
    let mut forms = vec![vec![vec![Q::zero(); dim]; dim]; d];
    for (i, j, tau, tau2, c) in f.nonzero_entries() {
        for (kk, ck) in c.coords.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            for p in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        let tv = &tb.t[((((p * d + kk) * d + l) * d + tau) * d + m) * d + tau2];
                        if !tv.is_zero() {
                            forms[p][l * n + i][m * n + j] += ck * tv;
                        }
                    }
                }
            }
        }
    }
    DescendedSystem { field: k.clone(), n, forms, shift: None }
}

/// Inverse of `descend`.
pub fn lift(s: &DescendedSystem) -> Result<Gqf> {
    let k = &s.field;
    let d = k.degree;
    let n = s.n;
    let dim = d * n;
    if s.forms.len() != d || s.forms.iter().any(|m| m.len() != dim || m.iter().any(|r| r.len() != dim)) {
        return Err(Error::invalid(format!("expected {d} matrices of size {dim}×{dim}")));
    }
    for (p, m) in s.forms.iter().enumerate() {
        for a in 0..dim {
            for b in 0..a {
                if m[a][b] != m[b][a] {
                    return Err(Error::validation("symmetry", format!("form {p} entry ({a},{b}) is not symmetric")));
                }
            }
        }
    }
    let tb = tables(k);
    let mut f = Gqf::zero(k, n);
    for i in 0..n {
        for j in i..n {
            if i != j {
                let rhs: Vec<Q> = (0..d)
                    .flat_map(|p| (0..d).flat_map(move |l| (0..d).map(move |m| (p, l, m))))
                    .map(|(p, l, m)| s.forms[p][l * n + i][m * n + j].clone())
                    .collect();
                let sol = linalg::mat_vec(&tb.off_inv, &rhs);
                for tau in 0..d {
                    for tau2 in 0..d {
                        let coords: Vec<Q> = (0..d).map(|kk| sol[(kk * d + tau) * d + tau2].clone()).collect();
                        f.set(i, j, tau, tau2, k.elem(coords));
                    }
                }
            } else {
                let np = tb.diag_pairs.len();
                let mut rhs = vec![Q::zero(); d * np];
                for p in 0..d {
                    for (ri, &(l, m)) in tb.diag_pairs.iter().enumerate() {
                        rhs[p * np + ri] = s.forms[p][l * n + i][m * n + i].clone();
                    }
                }
                let sol = linalg::mat_vec(&tb.diag_inv, &rhs);
                for (ci, &(tau, tau2)) in tb.diag_pairs.iter().enumerate() {
                    let coords: Vec<Q> = (0..d).map(|kk| sol[kk * np + ci].clone()).collect();
                    f.set(i, i, tau, tau2, k.elem(coords));
                }
            }
        }
    }
    Ok(f)
}

impl DescendedSystem {
    pub fn dim(&self) -> usize {
        self.field.degree * self.n
    }

    pub fn d(&self) -> usize {
        self.field.degree
    }

    pub fn zero(k: &Field, n: usize) -> Self {
        let dim = k.degree * n;
        DescendedSystem { field: k.clone(), n, forms: vec![vec![vec![Q::zero(); dim]; dim]; k.degree], shift: None }
    }

    /// Records N = Σ ω_i N_i.
    pub fn shift(&self, nn: &FieldElement) -> Result<DescendedSystem> {
        let coords = nn.int_coords().ok_or_else(|| Error::invalid("N must be integral"))?;
        let mut s = self.clone();
        s.shift = Some(coords);
        Ok(s)
    }

    pub fn eval(&self, u: &[Q]) -> Vec<Q> {
        self.forms
            .iter()
            .map(|m| {
                let mut acc = Q::zero();
                for (a, ua) in u.iter().enumerate() {
                    if ua.is_zero() {
                        continue;
                    }
                    for (b, ub) in u.iter().enumerate() {
                        if !ub.is_zero() && !m[a][b].is_zero() {
                            acc += &m[a][b] * ua * ub;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn forms_f64(&self) -> Vec<DMatrix<f64>> {
        let dim = self.dim();
        self.forms.iter().map(|m| DMatrix::from_fn(dim, dim, |a, b| linalg::to_f64(&m[a][b]))).collect()
    }

    pub fn eval_f64(&self, u: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_row_slice(u);
        self.forms_f64().iter().map(|m| (v.transpose() * m * &v)[(0, 0)]).collect()
    }

    /// Integer matrices (row-major) when every β is integral.
    pub fn int_forms(&self) -> Option<Vec<Vec<i64>>> {
        self.forms
            .iter()
            .map(|m| m.iter().flatten().map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None }).collect())
            .collect()
    }

    pub fn shift_i64(&self) -> Vec<i64> {
        match &self.shift {
            Some(s) => s.iter().map(|x| x.to_i64().expect("shift fits i64")).collect(),
            None => vec![0; self.d()],
        }
    }

    /// d × dn Jacobian of (Q_1, …, Q_d).
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let v = nalgebra::DVector::from_row_slice(u);
        let fs = self.forms_f64();
        let dim = self.dim();
        DMatrix::from_fn(self.d(), dim, |p, a| 2.0 * (fs[p].row(a) * &v)[(0, 0)])
    }

    pub fn jacobian_rank(&self, u: &[f64], tol: f64) -> usize {
        let j = self.jacobian(u);
        let sv = j.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&x| x > tol * top).count()
    }

    pub fn add(&self, o: &DescendedSystem) -> DescendedSystem {
        let forms = self
            .forms
            .iter()
            .zip(&o.forms)
            .map(|(a, b)| a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect())
            .collect();
        DescendedSystem { field: self.field.clone(), n: self.n, forms, shift: None }
    }

    pub fn to_json(&self) -> DescendedJson {
        DescendedJson {
            n: self.n,
            d: self.d(),
            forms: self.forms.iter().map(|m| m.iter().flatten().map(linalg::fmt_rational).collect()).collect(),
            shift: self.shift.as_ref().map(|s| s.iter().map(|x| x.to_string()).collect()),
        }
    }

    pub fn from_json(k: &Field, j: &DescendedJson) -> Result<DescendedSystem> {
        if j.d != k.degree {
            return Err(Error::invalid(format!("system has d = {} but the field has degree {}", j.d, k.degree)));
        }
        let dim = j.d * j.n;
        if j.forms.len() != j.d {
            return Err(Error::invalid(format!("forms: expected {} matrices", j.d)));
        }
        let mut forms = Vec::new();
        for (p, m) in j.forms.iter().enumerate() {
            if m.len() != dim * dim {
                return Err(Error::invalid(format!("forms[{p}]: expected {} entries", dim * dim)));
            }
            let vals = m
                .iter()
                .enumerate()
                .map(|(e, s)| linalg::parse_rational(s).ok_or_else(|| Error::invalid(format!("forms[{p}][{e}]: not a rational"))))
                .collect::<Result<Vec<_>>>()?;
            forms.push(vals.chunks(dim).map(|r| r.to_vec()).collect());
        }
        let shift = match &j.shift {
            Some(s) => Some(
                s.iter()
                    .enumerate()
                    .map(|(i, x)| x.parse::<BigInt>().map_err(|_| Error::invalid(format!("shift[{i}]: not an integer"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(DescendedSystem { field: k.clone(), n: j.n, forms, shift })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescendedJson {
    pub n: usize,
    pub d: usize,
    pub forms: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<String>>,
}

/// u[l·n + i] = coordinate l of x_i.
pub fn to_u(x: &[FieldElement]) -> Vec<Q> {
    let n = x.len();
    let d = x.first().map_or(0, |e| e.d());
    let mut u = vec![Q::zero(); d * n];
    for (i, xi) in x.iter().enumerate() {
        for l in 0..d {
            u[l * n + i] = xi.coords[l].clone();
        }
    }
    u
}

pub fn from_u(k: &Field, u: &[Q], n: usize) -> Vec<FieldElement> {
    let d = k.degree;
    (0..n).map(|i| k.elem((0..d).map(|l| u[l * n + i].clone()).collect())).collect()
}

pub fn from_u_i64(k: &Field, u: &[i64], n: usize) -> Vec<FieldElement> {
    let d = k.degree;
    (0..n).map(|i| k.elem_i64(&(0..d).map(|l| u[l * n + i]).collect::<Vec<_>>())).collect()
}

/// The block matrix with (l, k) block ρ_l(ω_k) I_n, so that (x^{(l)})_l = 𝐖 u.
pub fn w_matrix(k: &Field, n: usize) -> DMatrix<f64> {
    let d = k.degree;
    let mut w = DMatrix::zeros(d * n, d * n);
    for l in 0..d {
        for kk in 0..d {
            for i in 0..n {
                w[(l * n + i, kk * n + i)] = k.embeddings[l][kk];
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// β via coordinate extraction of c·ω_l^τ·ω_m^{τ'}.
    fn descend_by_coords(f: &Gqf) -> Vec<Vec<Vec<Q>>> {
        let k = &f.field;
        let d = k.degree;
        let n = f.n;
        let mut forms = vec![vec![vec![Q::zero(); d * n]; d * n]; d];
        for (i, j, tau, tau2, c) in f.nonzero_entries() {
            for l in 0..d {
                for m in 0..d {
                    let v = &(c * &k.omega(l).apply_galois(tau)) * &k.omega(m).apply_galois(tau2);
                    for p in 0..d {
                        forms[p][l * n + i][m * n + j] += &v.coords[p];
                    }
                }
            }
        }
        forms
    }

    #[test]
    fn traces_match_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [NumberField::real_quadratic(2).unwrap(), NumberField::real_quadratic(5).unwrap(), NumberField::cyclic_cubic().unwrap()] {
            for _ in 0..10 {
                let f = Gqf::random(&k, 2, &mut rng, 4, 0.5);
                assert_eq!(descend(&f).forms, descend_by_coords(&f));
            }
        }
    }

    #[test]
    fn displayed_system() {
        let k = NumberField::real_quadratic(2).unwrap();
        let (a, b) = ([1i64, 2, -3, 5], [4i64, -1]);
        let f = Gqf::make_diagonal_int(&k, &a, &b, 1).unwrap();
        let s = descend(&f);
        let n = 4;
        for i in 0..n {
            let (u, v) = (i, n + i);
            let (e1u, e1v, e2) = if i < 2 { (a[i] + b[i], 2 * (a[i] + b[i]), a[i] - b[i]) } else { (a[i], 2 * a[i], a[i]) };
            assert_eq!(s.forms[0][u][u], q(e1u));
            assert_eq!(s.forms[0][v][v], q(e1v));
            assert_eq!(&s.forms[1][u][v] + &s.forms[1][v][u], q(2 * e2));
        }
    }

    #[test]
    fn roundtrip_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in [NumberField::real_quadratic(2).unwrap(), NumberField::cyclic_cubic().unwrap()] {
            for _ in 0..10 {
                let f = Gqf::random(&k, 2, &mut rng, 5, 0.7);
                let s = descend(&f);
                assert_eq!(lift(&s).unwrap(), f);
                let x: Vec<FieldElement> = (0..2).map(|_| k.elem_i64(&(0..k.degree).map(|_| rng.gen_range(-9..10)).collect::<Vec<_>>())).collect();
                let vals = s.eval(&to_u(&x));
                let mut acc = k.zero();
                for (p, v) in vals.iter().enumerate() {
                    acc = &acc + &k.omega(p).scale(v);
                }
                assert_eq!(acc, f.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn w_and_transport() {
        let k = NumberField::real_quadratic(2).unwrap();
        assert!((w_matrix(&k, 2).determinant().abs() - 8.0).abs() < 1e-9);
        let f = Gqf::make_diagonal_int(&k, &[1, 1], &[1], 1).unwrap();
        let s = descend(&f).shift(&k.from_int(3)).unwrap();
        assert_eq!(s.shift_i64(), vec![3, 0]);
        let u = to_u(&[k.one(), k.one()]);
        assert_eq!(u, vec![q(1), q(1), q(0), q(0)]);
        assert_eq!(s.eval(&u), vec![q(3), q(0)]);
    }
}
