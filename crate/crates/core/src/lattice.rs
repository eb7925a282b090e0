//! Full-rank lattices in ℚ^k held as a canonical column Hermite normal form
//! over a single positive denominator.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, qi, Q};

/// Column HNF of the integer span of `gens` (each of length `dim`).
/// Returns `None` if the span has rank < dim. If `modulus` is a multiple of
/// the lattice determinant that lies in the lattice along every axis, entries
/// of pending columns are kept reduced modulo it.
pub fn hnf_columns(gens: &[Vec<BigInt>], dim: usize, modulus: Option<&BigInt>) -> Option<Vec<Vec<BigInt>>> {
    let mut work: Vec<Vec<BigInt>> = gens.iter().filter(|g| g.iter().any(|x| !x.is_zero())).cloned().collect();
    if let Some(m) = modulus {
        for i in 0..dim {
            let mut e = vec![BigInt::zero(); dim];
            e[i] = m.clone();
            work.push(e);
        }
    }
    let mut out: Vec<Vec<BigInt>> = vec![vec![]; dim];
    for i in (0..dim).rev() {
        let mut pivot: Option<Vec<BigInt>> = None;
        let mut rest = Vec::with_capacity(work.len());
        for c in work.drain(..) {
            if c[i].is_zero() {
                rest.push(c);
                continue;
            }
            match pivot.take() {
                None => pivot = Some(c),
                Some(p) => {
                    let eg = p[i].extended_gcd(&c[i]);
                    let (g, s, t) = (eg.gcd, eg.x, eg.y);
                    let pa = &p[i] / &g;
                    let ca = &c[i] / &g;
                    let newp: Vec<BigInt> = (0..dim).map(|k| &s * &p[k] + &t * &c[k]).collect();
                    let mut other: Vec<BigInt> = (0..dim).map(|k| &ca * &p[k] - &pa * &c[k]).collect();
                    if let Some(m) = modulus {
                        for x in other.iter_mut() {
                            *x = x.mod_floor(m);
                        }
                    }
                    if other.iter().any(|x| !x.is_zero()) {
                        rest.push(other);
                    }
                    pivot = Some(newp);
                }
            }
        }
        let mut p = pivot?;
        if p[i].is_negative() {
            for x in p.iter_mut() {
                *x = -&*x;
            }
        }
        if let Some(m) = modulus {
            for c in rest.iter_mut() {
                for x in c.iter_mut() {
                    *x = x.mod_floor(m);
                }
            }
            rest.retain(|c| c.iter().any(|x| !x.is_zero()));
        }
        out[i] = p;
        work = rest;
    }
    for j in 0..dim {
        for i in (0..j).rev() {
            let qt = out[j][i].div_floor(&out[i][i]);
            if !qt.is_zero() {
                let ci = out[i].clone();
                for k in 0..=i {
                    out[j][k] -= &qt * &ci[k];
                }
            }
        }
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    pub dim: usize,
    /// Columns of the HNF basis; column j is zero below row j.
    pub cols: Vec<Vec<BigInt>>,
    pub den: BigInt,
}

impl Lattice {
    pub fn from_int(gens: &[Vec<BigInt>], dim: usize) -> Result<Self> {
        Self::from_int_mod(gens, dim, None)
    }

    pub fn from_int_mod(gens: &[Vec<BigInt>], dim: usize, modulus: Option<&BigInt>) -> Result<Self> {
        let cols = hnf_columns(gens, dim, modulus).ok_or_else(|| Error::invalid("generators do not span a full-rank lattice"))?;
        Ok(Lattice { dim, cols, den: BigInt::one() })
    }

    pub fn from_rational(gens: &[Vec<Q>], dim: usize) -> Result<Self> {
        let den = gens.iter().fold(BigInt::one(), |acc, g| acc.lcm(&linalg::lcm_den(g)));
        let ints: Vec<Vec<BigInt>> = gens
            .iter()
            .map(|g| g.iter().map(|x| (x * qi(den.clone())).to_integer()).collect())
            .collect();
        let cols = hnf_columns(&ints, dim, None).ok_or_else(|| Error::invalid("generators do not span a full-rank lattice"))?;
        Ok(Lattice { dim, cols, den }.normalized())
    }

    pub fn standard(dim: usize) -> Self {
        let cols = (0..dim)
            .map(|j| (0..dim).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();
        Lattice { dim, cols, den: BigInt::one() }
    }

    fn normalized(mut self) -> Self {
        let mut g = self.den.clone();
        for c in &self.cols {
            for x in c {
                g = g.gcd(x);
            }
        }
        if !g.is_one() {
            self.den /= &g;
            for c in self.cols.iter_mut() {
                for x in c.iter_mut() {
                    *x /= &g;
                }
            }
        }
        self
    }

    pub fn basis(&self) -> Vec<Vec<Q>> {
        self.cols
            .iter()
            .map(|c| c.iter().map(|x| Q::new(x.clone(), self.den.clone())).collect())
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.den.is_one()
    }

    pub fn det(&self) -> Q {
        let mut d = Q::one();
        for i in 0..self.dim {
            d *= Q::new(self.cols[i][i].clone(), self.den.clone());
        }
        d
    }

    pub fn contains(&self, v: &[Q]) -> bool {
        let mut w = Vec::with_capacity(self.dim);
        for x in v {
            let y = x * qi(self.den.clone());
            if !y.is_integer() {
                return false;
            }
            w.push(y.to_integer());
        }
        self.contains_scaled(w)
    }

    pub fn contains_int(&self, v: &[BigInt]) -> bool {
        self.contains_scaled(v.iter().map(|x| x * &self.den).collect())
    }

    fn contains_scaled(&self, mut w: Vec<BigInt>) -> bool {
        for i in (0..self.dim).rev() {
            let (qt, r) = w[i].div_mod_floor(&self.cols[i][i]);
            if !r.is_zero() {
                return false;
            }
            if !qt.is_zero() {
                for k in 0..=i {
                    w[k] -= &qt * &self.cols[i][k];
                }
            }
        }
        true
    }

    pub fn is_subset_of(&self, other: &Lattice) -> bool {
        self.basis().iter().all(|c| other.contains(c))
    }

    pub fn sum(&self, other: &Lattice) -> Lattice {
        let mut g = self.basis();
        g.extend(other.basis());
        Lattice::from_rational(&g, self.dim).expect("sum of full-rank lattices")
    }

    /// Dual with respect to the standard dot product.
    pub fn dual(&self) -> Lattice {
        let b = linalg::transpose(&self.basis());
        let inv = linalg::inverse(&b).expect("full-rank basis");
        Lattice::from_rational(&inv, self.dim).expect("dual of full-rank lattice")
    }

    pub fn intersect(&self, other: &Lattice) -> Lattice {
        self.dual().sum(&other.dual()).dual()
    }

    /// [self : sub] when sub ⊆ self.
    pub fn index_of(&self, sub: &Lattice) -> Option<BigInt> {
        if !sub.is_subset_of(self) {
            return None;
        }
        let r = sub.det() / self.det();
        r.is_integer().then(|| r.to_integer())
    }

    pub fn scale(&self, c: &Q) -> Lattice {
        let g: Vec<Vec<Q>> = self.basis().into_iter().map(|v| v.into_iter().map(|x| x * c).collect()).collect();
        Lattice::from_rational(&g, self.dim).expect("nonzero scale")
    }

    pub fn residues(&self) -> Result<ResidueSystem> {
        ResidueSystem::new(self)
    }
}

/// Canonical box representatives of ℤ^k / L for an integral lattice L, with
/// machine-integer reduction for hot loops.
#[derive(Clone, Debug)]
pub struct ResidueSystem {
    pub dim: usize,
    pub diag: Vec<i64>,
    pub cols: Vec<Vec<i64>>,
    pub size: usize,
    strides: Vec<usize>,
}

impl ResidueSystem {
    pub fn new(l: &Lattice) -> Result<Self> {
        if !l.is_integral() {
            return Err(Error::invalid("residues need an integral lattice"));
        }
        let conv = |x: &BigInt| linalg::to_i64(x).ok_or_else(|| Error::invalid("lattice entries exceed i64"));
        let cols: Vec<Vec<i64>> = l.cols.iter().map(|c| c.iter().map(conv).collect::<Result<_>>()).collect::<Result<_>>()?;
        let diag: Vec<i64> = (0..l.dim).map(|i| cols[i][i]).collect();
        let mut strides = Vec::with_capacity(l.dim);
        let mut size: usize = 1;
        for &d in &diag {
            strides.push(size);
            size = size
                .checked_mul(d as usize)
                .ok_or_else(|| Error::invalid("residue ring too large"))?;
        }
        Ok(ResidueSystem { dim: l.dim, diag, cols, size, strides })
    }

    pub fn reduce(&self, v: &mut [i64]) {
        for i in (0..self.dim).rev() {
            let qt = v[i].div_euclid(self.diag[i]);
            if qt != 0 {
                let c = &self.cols[i];
                for k in 0..=i {
                    v[k] -= qt * c[k];
                }
            }
        }
    }

    pub fn index(&self, v: &[i64]) -> usize {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        self.index_reduced(&w)
    }

    pub fn index_reduced(&self, w: &[i64]) -> usize {
        w.iter().zip(&self.strides).map(|(&x, &s)| x as usize * s).sum()
    }

    pub fn rep(&self, mut idx: usize) -> Vec<i64> {
        let mut v = vec![0; self.dim];
        for i in 0..self.dim {
            let d = self.diag[i] as usize;
            v[i] = (idx % d) as i64;
            idx /= d;
        }
        v
    }

    pub fn reps(&self) -> Vec<Vec<i64>> {
        (0..self.size).map(|i| self.rep(i)).collect()
    }

    pub fn is_zero(&self, v: &[i64]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|&x| x == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{q, qfrac};

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn hnf_is_canonical() {
        let a = Lattice::from_int(&[bi(&[2, 0]), bi(&[0, 3]), bi(&[4, 3])], 2).unwrap();
        let b = Lattice::from_int(&[bi(&[2, 3]), bi(&[2, 0])], 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.det(), q(6));
    }

    #[test]
    fn dual_and_intersection() {
        let l = Lattice::from_rational(&[vec![q(2), q(0)], vec![q(0), q(4)]], 2).unwrap();
        let d = l.dual();
        assert!(d.contains(&[qfrac(1, 2), q(0)]));
        assert_eq!(d.dual(), l);
        let m = Lattice::from_int(&[bi(&[3, 0]), bi(&[0, 1])], 2).unwrap();
        let i = l.intersect(&m);
        assert_eq!(i, Lattice::from_int(&[bi(&[6, 0]), bi(&[0, 4])], 2).unwrap());
    }

    #[test]
    fn modular_hnf_agrees() {
        let g = [bi(&[6, 4, 2]), bi(&[0, 12, 8]), bi(&[3, 1, 5]), bi(&[0, 0, 6])];
        let a = Lattice::from_int(&g, 3).unwrap();
        let det = a.det().to_integer();
        let b = Lattice::from_int_mod(&g, 3, Some(&det)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residue_indexing() {
        let l = Lattice::from_int(&[bi(&[7, 0]), bi(&[3, 1])], 2).unwrap();
        let r = l.residues().unwrap();
        assert_eq!(r.size, 7);
        assert!(r.is_zero(&[3, 1]));
        assert_eq!(r.index(&[10, 1]), r.index(&[0, 0]));
    }
}
