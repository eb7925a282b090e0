//! Exact linear algebra over ℚ and over any field implementing [`Scalar`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qi(n: BigInt) -> Q {
    Q::from_integer(n)
}

pub fn qfrac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

pub fn lcm_den(xs: &[Q]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Q::new(n, d))
    } else {
        Some(qi(s.parse().ok()?))
    }
}

pub fn fmt_rational(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub trait Scalar: Clone {
    fn is_zero_s(&self) -> bool;
    fn add_s(&self, o: &Self) -> Self;
    fn sub_s(&self, o: &Self) -> Self;
    fn mul_s(&self, o: &Self) -> Self;
    fn inv_s(&self) -> Self;
}

impl Scalar for Q {
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
        self.recip()
    }
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref<T: Scalar>(m: &mut [Vec<T>]) -> Vec<usize> {
    let rows = m.len();
    if rows == 0 {
        return vec![];
    }
    let cols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero_s()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].inv_s();
        for j in c..cols {
            m[r][j] = m[r][j].mul_s(&inv);
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero_s() {
                let f = m[i][c].clone();
                for j in c..cols {
                    let t = f.mul_s(&m[r][j]);
                    m[i][j] = m[i][j].sub_s(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<T: Scalar>(m: &[Vec<T>]) -> usize {
    let mut a = m.to_vec();
    rref(&mut a).len()
}

/// Determinant by elimination; `one` supplies the multiplicative identity.
pub fn det<T: Scalar>(m: &[Vec<T>], one: &T) -> T {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = one.clone();
    let zero = one.sub_s(one);
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero_s()) else { return zero };
        if p != c {
            a.swap(p, c);
            d = zero.sub_s(&d);
        }
        d = d.mul_s(&a[c][c]);
        let inv = a[c][c].inv_s();
        for i in c + 1..n {
            if a[i][c].is_zero_s() {
                continue;
            }
            let f = a[i][c].mul_s(&inv);
            for j in c..n {
                let t = f.mul_s(&a[c][j]);
                a[i][j] = a[i][j].sub_s(&t);
            }
        }
    }
    d
}

/// Some solution of m·x = b, or None if inconsistent.
pub fn solve(m: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let piv = rref(&mut a);
    if piv.last() == Some(&cols) {
        return None;
    }
    let mut x = vec![Q::zero(); cols];
    for (r, &c) in piv.iter().enumerate() {
        x[c] = a[r][cols].clone();
    }
    Some(x)
}

pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let piv = rref(&mut a);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Basis of the right kernel {x : m·x = 0}.
pub fn kernel(m: &[Vec<Q>], cols: usize) -> Vec<Vec<Q>> {
    let mut a = m.to_vec();
    let piv = rref(&mut a);
    let mut out = Vec::new();
    for free in (0..cols).filter(|c| !piv.contains(c)) {
        let mut v = vec![Q::zero(); cols];
        v[free] = Q::one();
        for (r, &c) in piv.iter().enumerate() {
            v[c] = -a[r][free].clone();
        }
        out.push(v);
    }
    out
}

pub fn mat_vec(m: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Q::zero(), |acc, (a, b)| acc + a * b))
        .collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return vec![];
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or_else(|| {
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn to_i64(x: &BigInt) -> Option<i64> {
    use num_traits::ToPrimitive;
    x.to_i64()
}

pub fn abs_q(x: &Q) -> Q {
    x.abs()
}
