//! Generalised quadratic forms Σ c_{i,j,τ,τ'} X_i^τ X_j^{τ'}.

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldElement, FieldExt, NumberField};
use crate::linalg::{self, q, Q};

#[derive(Clone)]
pub struct Gqf {
    pub field: Field,
    pub n: usize,
    /// Dense (nd)×(nd) tensor, row (i,τ) = i·d+τ.
    coeffs: Vec<FieldElement>,
}

impl std::fmt::Debug for Gqf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Gqf(n={}, ", self.n)?;
        let mut first = true;
        for (i, j, t, t2, v) in self.nonzero_entries() {
            if i * self.d() + t <= j * self.d() + t2 {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "c[{i},{j},{t},{t2}]={v}")?;
            }
        }
        write!(f, ")")
    }
}

impl PartialEq for Gqf {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && NumberField::same(&self.field, &o.field) && self.coeffs == o.coeffs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagonal {
    pub a: Vec<FieldElement>,
    pub b: Vec<FieldElement>,
    pub tau: usize,
}

impl Gqf {
    pub fn zero(k: &Field, n: usize) -> Gqf {
        let nd = n * k.degree;
        Gqf { field: k.clone(), n, coeffs: vec![k.zero(); nd * nd] }
    }

    pub fn d(&self) -> usize {
        self.field.degree
    }

    fn idx(&self, i: usize, t: usize, j: usize, t2: usize) -> usize {
        let d = self.d();
        (i * d + t) * (self.n * d) + j * d + t2
    }

    pub fn coeff(&self, i: usize, j: usize, t: usize, t2: usize) -> &FieldElement {
        &self.coeffs[self.idx(i, t, j, t2)]
    }

    /// Sets c_{i,j,τ,τ'} and its symmetric partner c_{j,i,τ',τ}.
    pub fn set(&mut self, i: usize, j: usize, t: usize, t2: usize, v: FieldElement) {
        let a = self.idx(i, t, j, t2);
        let b = self.idx(j, t2, i, t);
        self.coeffs[a] = v.clone();
        self.coeffs[b] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, t: usize, t2: usize, v: &FieldElement) {
        let cur = self.coeff(i, j, t, t2).clone();
        self.set(i, j, t, t2, &cur + v);
    }

    pub fn from_entries(k: &Field, n: usize, entries: &[(usize, usize, usize, usize, FieldElement)]) -> Result<Gqf> {
        let mut f = Gqf::zero(k, n);
        let d = k.degree;
        let mut seen = std::collections::HashMap::new();
        for (i, j, t, t2, v) in entries {
            if *i >= n || *j >= n || *t >= d || *t2 >= d {
                return Err(Error::invalid(format!("coefficient index ({i},{j},{t},{t2}) out of range")));
            }
            let key = if (i * d + t) <= (j * d + t2) { (*i, *j, *t, *t2) } else { (*j, *i, *t2, *t) };
            if let Some(prev) = seen.insert(key, v.clone()) {
                if prev != *v {
                    return Err(Error::validation("symmetry", format!("conflicting values for c[{i},{j},{t},{t2}] and its transpose")));
                }
            }
            f.set(*i, *j, *t, *t2, v.clone());
        }
        Ok(f)
    }

    pub fn nonzero_entries(&self) -> Vec<(usize, usize, usize, usize, &FieldElement)> {
        let d = self.d();
        let mut out = Vec::new();
        for i in 0..self.n {
            for t in 0..d {
                for j in 0..self.n {
                    for t2 in 0..d {
                        let v = self.coeff(i, j, t, t2);
                        if !v.is_zero() {
                            out.push((i, j, t, t2, v));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integral())
    }

    pub fn add(&self, o: &Gqf) -> Gqf {
        Gqf { field: self.field.clone(), n: self.n, coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, c: &FieldElement) -> Gqf {
        Gqf { field: self.field.clone(), n: self.n, coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Automorphisms occurring in some nonzero coefficient.
    pub fn g_set(&self) -> Vec<usize> {
        let mut g = vec![false; self.d()];
        for (_, _, t, t2, _) in self.nonzero_entries() {
            g[t] = true;
            g[t2] = true;
        }
        (0..self.d()).filter(|&t| g[t]).collect()
    }

    fn conjugates(&self, x: &[FieldElement]) -> Vec<Vec<FieldElement>> {
        x.iter().map(|xi| (0..self.d()).map(|t| xi.apply_galois(t)).collect()).collect()
    }

    pub fn evaluate(&self, x: &[FieldElement]) -> Result<FieldElement> {
        self.bilinear(x, x)
    }

    /// B(x; y) = Σ c_{i,j,τ,τ'} x_i^τ y_j^{τ'}.
    pub fn bilinear(&self, x: &[FieldElement], y: &[FieldElement]) -> Result<FieldElement> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::invalid(format!("expected {} variables", self.n)));
        }
        let xc = self.conjugates(x);
        let yc = self.conjugates(y);
        let mut acc = self.field.zero();
        for (i, j, t, t2, c) in self.nonzero_entries() {
            acc = &acc + &(&(c * &xc[i][t]) * &yc[j][t2]);
        }
        Ok(acc)
    }

    /// The (nd)×(nd) coefficient matrix over K.
    pub fn coeff_matrix(&self) -> Vec<Vec<FieldElement>> {
        let nd = self.n * self.d();
        (0..nd).map(|r| self.coeffs[r * nd..(r + 1) * nd].to_vec()).collect()
    }

    pub fn coeff_rank(&self) -> usize {
        linalg::rank(&self.coeff_matrix())
    }

    /// Real symmetric matrices of the embedded system in variables
    /// (x^{(1)}, …, x^{(d)}), block l holding ρ_l(x).
    pub fn embedded_system(&self) -> Vec<DMatrix<f64>> {
        let d = self.d();
        let n = self.n;
        let k = &self.field;
        (0..d)
            .map(|l| {
                let mut m = DMatrix::zeros(d * n, d * n);
                for (i, j, t, t2, c) in self.nonzero_entries() {
                    let r = k.galois[t].perm[l] * n + i;
                    let s = k.galois[t2].perm[l] * n + j;
                    m[(r, s)] += c.embed(l);
                }
                m
            })
            .collect()
    }

    /// Variable classes linked by nonzero coefficients.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for (i, j, _, _, _) in self.nonzero_entries() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_idx = std::collections::HashMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            let gi = *root_idx.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[gi].push(i);
        }
        groups
    }

    pub fn as_diagonal(&self) -> Option<Diagonal> {
        let n = self.n;
        let mut tau = None;
        let mut a = vec![self.field.zero(); n];
        let mut bmap = vec![None; n];
        for (i, j, t, t2, c) in self.nonzero_entries() {
            if i != j || t != t2 {
                return None;
            }
            if t == 0 {
                a[i] = c.clone();
            } else {
                if tau.is_some_and(|x| x != t) {
                    return None;
                }
                tau = Some(t);
                bmap[i] = Some(c.clone());
            }
        }
        let m = bmap.iter().take_while(|b| b.is_some()).count();
        if bmap[m..].iter().any(|b| b.is_some()) || a.iter().any(|x| x.is_zero()) {
            return None;
        }
        Some(Diagonal { a, b: bmap.into_iter().take(m).map(|b| b.unwrap()).collect(), tau: tau.unwrap_or(0) })
    }

    // ----- constructors -----

    /// Q(X) + R(X₁^τ,…,X_m^τ) with symmetric matrices A (n×n) and R (m×m).
    pub fn make_special(k: &Field, a: &[Vec<FieldElement>], r: &[Vec<FieldElement>], tau: usize) -> Result<Gqf> {
        let n = a.len();
        let m = r.len();
        if m == 0 || m > n || tau == 0 || tau >= k.degree {
            return Err(Error::invalid("need 1 ≤ m ≤ n and a nontrivial τ"));
        }
        check_symmetric(a)?;
        check_symmetric(r)?;
        let mut f = Gqf::zero(k, n);
        for i in 0..n {
            for j in 0..n {
                f.set(i, j, 0, 0, a[i][j].clone());
            }
        }
        for i in 0..m {
            for j in 0..m {
                f.set(i, j, tau, tau, r[i][j].clone());
            }
        }
        Ok(f)
    }

    pub fn make_diagonal(k: &Field, a: &[FieldElement], b: &[FieldElement], tau: usize) -> Result<Gqf> {
        let n = a.len();
        if b.is_empty() || b.len() > n || tau == 0 || tau >= k.degree {
            return Err(Error::invalid("need 1 ≤ m ≤ n and a nontrivial τ"));
        }
        if a.iter().chain(b).any(|x| x.is_zero()) {
            return Err(Error::invalid("diagonal coefficients must be nonzero"));
        }
        let mut f = Gqf::zero(k, n);
        for (i, ai) in a.iter().enumerate() {
            f.set(i, i, 0, 0, ai.clone());
        }
        for (i, bi) in b.iter().enumerate() {
            f.set(i, i, tau, tau, bi.clone());
        }
        Ok(f)
    }

    pub fn make_diagonal_int(k: &Field, a: &[i64], b: &[i64], tau: usize) -> Result<Gqf> {
        let a: Vec<FieldElement> = a.iter().map(|&x| k.from_int(x)).collect();
        let b: Vec<FieldElement> = b.iter().map(|&x| k.from_int(x)).collect();
        Gqf::make_diagonal(k, &a, &b, tau)
    }

    /// Σ_i Tr_H(X_i²).
    pub fn make_partial_trace(k: &Field, h: &[usize], n: usize) -> Result<Gqf> {
        if h.is_empty() || h.iter().any(|&t| t >= k.degree) {
            return Err(Error::invalid("partial trace needs a nonempty set of automorphisms"));
        }
        let mut f = Gqf::zero(k, n);
        for i in 0..n {
            for &t in h {
                f.add_to(i, i, t, t, &k.one());
            }
        }
        Ok(f)
    }

    /// Standard form Σ A_ij X_i X_j.
    pub fn make_standard(k: &Field, a: &[Vec<FieldElement>]) -> Result<Gqf> {
        check_symmetric(a)?;
        let n = a.len();
        let mut f = Gqf::zero(k, n);
        for i in 0..n {
            for j in 0..n {
                f.set(i, j, 0, 0, a[i][j].clone());
            }
        }
        Ok(f)
    }

    /// G = (Πa_i Πb_i)(Σ X_i²/a_i + Σ (X_i^τ)²/b_i) for diagonal F.
    pub fn dual_form(&self) -> Result<Gqf> {
        let dg = self.as_diagonal().ok_or_else(|| Error::invalid("dual form needs a diagonal form"))?;
        let mut prod = self.field.one();
        for x in dg.a.iter().chain(&dg.b) {
            prod = &prod * x;
        }
        let a: Vec<FieldElement> = dg.a.iter().map(|x| prod.div(x)).collect::<Result<_>>()?;
        let b: Vec<FieldElement> = dg.b.iter().map(|x| prod.div(x)).collect::<Result<_>>()?;
        Gqf::make_diagonal(&self.field, &a, &b, dg.tau)
    }

    pub fn random(k: &Field, n: usize, rng: &mut impl Rng, range: i64, density: f64) -> Gqf {
        let d = k.degree;
        let mut f = Gqf::zero(k, n);
        for i in 0..n {
            for t in 0..d {
                for j in 0..n {
                    for t2 in 0..d {
                        if i * d + t > j * d + t2 || !rng.gen_bool(density) {
                            continue;
                        }
                        let v: Vec<i64> = (0..d).map(|_| rng.gen_range(-range..=range)).collect();
                        f.set(i, j, t, t2, k.elem_i64(&v));
                    }
                }
            }
        }
        f
    }

    // ----- admissibility -----

    /// Rational matrix of h ↦ (coords of B(v_r; h))_r for h ∈ Kⁿ in u-coordinates.
    fn pairing_matrix(&self, vs: &[Vec<FieldElement>]) -> Vec<Vec<Q>> {
        let k = &self.field;
        let d = self.d();
        let n = self.n;
        let mut rows = vec![vec![Q::zero(); d * n]; vs.len() * d];
        for l in 0..d {
            for j in 0..n {
                let mut h = vec![k.zero(); n];
                h[j] = k.omega(l);
                for (r, v) in vs.iter().enumerate() {
                    let b = self.bilinear(v, &h).expect("length checked");
                    for p in 0..d {
                        rows[r * d + p][l * n + j] = b.coords[p].clone();
                    }
                }
            }
        }
        rows
    }

    pub fn is_admissible(&self, rng: &mut impl Rng) -> Admissibility {
        let k = &self.field;
        let d = self.d();
        let n = self.n;
        let mut all = Vec::new();
        for i in 0..n {
            for l in 0..d {
                let mut v = vec![k.zero(); n];
                v[i] = k.omega(l);
                all.push(v);
            }
        }
        let full = self.pairing_matrix(&all);
        if linalg::rank(&full) < d * n {
            return Admissibility::No;
        }
        for _ in 0..20 {
            let vs: Vec<Vec<FieldElement>> = (0..n)
                .map(|_| (0..n).map(|_| k.elem_i64(&(0..d).map(|_| rng.gen_range(-5..=5)).collect::<Vec<_>>())).collect())
                .collect();
            if linalg::rank(&self.pairing_matrix(&vs)) == d * n {
                return Admissibility::Yes(vs);
            }
        }
        Admissibility::Unknown
    }

    // ----- JSON -----

    pub fn to_json(&self) -> GqfJson {
        let coeffs = self
            .nonzero_entries()
            .into_iter()
            .filter(|(i, j, t, t2, _)| i * self.d() + t <= j * self.d() + t2)
            .map(|(i, j, t, t2, v)| CoeffEntry { i, j, tau: t, tau2: t2, value: v.coords.iter().map(linalg::fmt_rational).collect() })
            .collect();
        GqfJson { n: Some(self.n), coeffs: Some(coeffs), a: None, b: None, tau: None }
    }

    pub fn from_json(k: &Field, j: &GqfJson) -> Result<Gqf> {
        if let Some(a) = &j.a {
            let parse = |v: &Vec<serde_json::Value>, name: &str| -> Result<Vec<FieldElement>> {
                v.iter().enumerate().map(|(i, x)| parse_value(k, x).map_err(|e| Error::invalid(format!("{name}[{i}]: {e}")))).collect()
            };
            let a = parse(a, "a")?;
            let b = parse(j.b.as_ref().ok_or_else(|| Error::invalid("diagonal shorthand needs b"))?, "b")?;
            return Gqf::make_diagonal(k, &a, &b, j.tau.unwrap_or(1));
        }
        let n = j.n.ok_or_else(|| Error::invalid("form needs n"))?;
        let mut entries = Vec::new();
        for (idx, e) in j.coeffs.as_ref().ok_or_else(|| Error::invalid("form needs coeffs"))?.iter().enumerate() {
            if e.value.len() != k.degree {
                return Err(Error::invalid(format!("coeffs[{idx}].value: expected {} coordinates", k.degree)));
            }
            let coords = e
                .value
                .iter()
                .enumerate()
                .map(|(c, s)| linalg::parse_rational(s).ok_or_else(|| Error::invalid(format!("coeffs[{idx}].value[{c}]: not a rational"))))
                .collect::<Result<Vec<_>>>()?;
            entries.push((e.i, e.j, e.tau, e.tau2, k.elem(coords)));
        }
        Gqf::from_entries(k, n, &entries)
    }
}

fn parse_value(k: &Field, v: &serde_json::Value) -> Result<FieldElement> {
    match v {
        serde_json::Value::Number(x) => Ok(k.from_int(x.as_i64().ok_or_else(|| Error::invalid("not an integer"))?)),
        serde_json::Value::String(s) => k.parse_element(s),
        serde_json::Value::Array(xs) => {
            let c = xs
                .iter()
                .map(|x| match x {
                    serde_json::Value::String(s) => linalg::parse_rational(s),
                    serde_json::Value::Number(n) => n.as_i64().map(q),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::invalid("bad coordinate"))?;
            if c.len() != k.degree {
                return Err(Error::invalid("wrong number of coordinates"));
            }
            Ok(k.elem(c))
        }
        _ => Err(Error::invalid("unsupported value")),
    }
}

fn check_symmetric(a: &[Vec<FieldElement>]) -> Result<()> {
    for (i, row) in a.iter().enumerate() {
        if row.len() != a.len() {
            return Err(Error::invalid("matrix must be square"));
        }
        for j in 0..i {
            if a[i][j] != a[j][i] {
                return Err(Error::validation("symmetry", format!("matrix entry ({i},{j}) differs from ({j},{i})")));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub enum Admissibility {
    Yes(Vec<Vec<FieldElement>>),
    No,
    Unknown,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub i: usize,
    pub j: usize,
    pub tau: usize,
    #[serde(rename = "tau'")]
    pub tau2: usize,
    pub value: Vec<String>,
}

/// Either the sparse form {n, coeffs} or the diagonal shorthand {a, b, tau}.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GqfJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<CoeffEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
}

// ---------------------------------------------------------------------------

/// Q(X) + R(X₁^τ,…,X_m^τ).
#[derive(Clone, Debug)]
pub struct SpecialShape {
    pub a: Vec<Vec<FieldElement>>,
    pub r: Vec<Vec<FieldElement>>,
    pub tau: usize,
}

impl SpecialShape {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    pub fn to_gqf(&self, k: &Field) -> Result<Gqf> {
        Gqf::make_special(k, &self.a, &self.r, self.tau)
    }

    pub fn from_diagonal(k: &Field, a: &[FieldElement], b: &[FieldElement], tau: usize) -> SpecialShape {
        let n = a.len();
        let m = b.len();
        let am = (0..n).map(|i| (0..n).map(|j| if i == j { a[i].clone() } else { k.zero() }).collect()).collect();
        let rm = (0..m).map(|i| (0..m).map(|j| if i == j { b[i].clone() } else { k.zero() }).collect()).collect();
        SpecialShape { a: am, r: rm, tau }
    }

    /// 𝐁: n×n with R in the upper-left block.
    pub fn b_full(&self, k: &Field) -> Vec<Vec<FieldElement>> {
        let n = self.n();
        let m = self.m();
        (0..n).map(|i| (0..n).map(|j| if i < m && j < m { self.r[i][j].clone() } else { k.zero() }).collect()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PencilReport {
    pub l: usize,
    pub l_tau: usize,
    /// Coefficients of t ↦ det(𝐀^{(l)} + t𝐁^{(l_τ)}), low to high.
    pub det_poly: Vec<f64>,
    pub degree: usize,
    pub real_roots: Vec<f64>,
    pub min_rank_at_roots: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub det_a: String,
    pub det_r: String,
    pub assumption_1_2_dets: Verdict,
    pub pencils: Vec<PencilReport>,
    pub assumption_1_5: Verdict,
    pub assumption_1_6: Verdict,
    pub jacobian_generic_rank: usize,
    pub codimension_probe: Verdict,
}

fn embed_matrix(m: &[Vec<FieldElement>], l: usize) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j].embed(l))
}

fn poly_roots_real(c: &[f64]) -> Vec<f64> {
    let mut deg = c.len();
    while deg > 0 && c[deg - 1] == 0.0 {
        deg -= 1;
    }
    if deg <= 1 {
        return Vec::new();
    }
    let dd = deg - 1;
    let lead = c[dd];
    let comp = DMatrix::from_fn(dd, dd, |i, j| {
        if i == 0 {
            -c[dd - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    comp.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-7 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

pub fn check_assumptions(k: &Field, s: &SpecialShape, rng: &mut impl Rng) -> Result<AssumptionReport> {
    let n = s.n();
    let m = s.m();
    let det_a = linalg::det(&s.a, &k.one());
    let det_r = linalg::det(&s.r, &k.one());
    let dets_ok = !det_a.is_zero() && !det_r.is_zero();
    let b = s.b_full(k);
    let mut pencils = Vec::new();
    let mut a15 = Verdict::Holds;
    let mut a16 = Verdict::Holds;
    for l in 0..k.degree {
        let lt = k.l_tau(s.tau, l);
        let al = embed_matrix(&s.a, l);
        let bl = embed_matrix(&b, lt);
        // interpolate the degree ≤ m polynomial at Chebyshev-like nodes
        let npts = n + 1;
        let ts: Vec<f64> = (0..npts).map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / npts as f64).cos() * 2.0).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| (&al + &bl * t).determinant()).collect();
        let v = DMatrix::from_fn(npts, npts, |i, j| ts[i].powi(j as i32));
        let coeffs: Vec<f64> = v.lu().solve(&nalgebra::DVector::from_vec(vals)).map(|x| x.iter().cloned().collect()).unwrap_or_default();
        let scale = coeffs.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
        let cleaned: Vec<f64> = coeffs.iter().map(|&x| if x.abs() < 1e-9 * scale { 0.0 } else { x }).collect();
        let degree = cleaned.iter().rposition(|&x| x != 0.0).unwrap_or(0);
        if cleaned.iter().all(|&x| x == 0.0) || degree + 1 < m {
            a16 = Verdict::Fails;
        }
        let roots = if cleaned.iter().all(|&x| x == 0.0) { ts.clone() } else { poly_roots_real(&cleaned) };
        let mut min_rank = None;
        for &t0 in &roots {
            let sv = (&al + &bl * t0).singular_values();
            let mut svs: Vec<f64> = sv.iter().cloned().collect();
            svs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let top = svs.last().cloned().unwrap_or(1.0).max(1e-300);
            let rank = svs.iter().filter(|&&x| x > 1e-8 * top).count();
            min_rank = Some(min_rank.map_or(rank, |r: usize| r.min(rank)));
            if n >= 2 {
                let second = svs[1] / top;
                if second < 1e-10 {
                    a15 = Verdict::Fails;
                } else if second < 1e-6 && a15 == Verdict::Holds {
                    a15 = Verdict::Inconclusive;
                }
            }
        }
        pencils.push(PencilReport { l, l_tau: lt, det_poly: cleaned, degree, real_roots: roots, min_rank_at_roots: min_rank });
    }
    let f = s.to_gqf(k)?;
    let sys = crate::descent::descend(&f);
    let mut generic = 0;
    for _ in 0..5 {
        let u: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        generic = generic.max(sys.jacobian_rank(&u, 1e-9));
    }
    let probe = if generic < k.degree {
        Verdict::Fails
    } else {
        match crate::density::find_real_point(&sys, &vec![0.0; k.degree], 30, rng.gen()) {
            Some(_) => Verdict::Holds,
            None => Verdict::Inconclusive,
        }
    };
    Ok(AssumptionReport {
        det_a: det_a.to_element_string(),
        det_r: det_r.to_element_string(),
        assumption_1_2_dets: if dets_ok { Verdict::Holds } else { Verdict::Fails },
        pencils,
        assumption_1_5: a15,
        assumption_1_6: a16,
        jacobian_generic_rank: generic,
        codimension_probe: probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k2() -> Field {
        NumberField::real_quadratic(2).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let k = k2();
        let f = Gqf::make_diagonal_int(&k, &[1, 1], &[1], 1).unwrap();
        assert_eq!(f.evaluate(&[k.one(), k.one()]).unwrap(), k.from_int(3));
        assert_eq!(f.evaluate(&[k.omega(1), k.zero()]).unwrap(), k.from_int(4));
        assert_eq!(f.evaluate(&[k.zero(), k.zero()]).unwrap(), k.zero());
        let mut e1 = vec![k.zero(), k.zero()];
        e1[0] = k.one();
        let e2 = vec![k.zero(), k.one()];
        assert_eq!(f.bilinear(&e1, &e2).unwrap(), k.zero());
        assert_eq!(f.g_set(), vec![0, 1]);
    }

    #[test]
    fn polarization_and_embedding() {
        let k = k2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = Gqf::random(&k, 3, &mut rng, 3, 0.5);
            let x: Vec<FieldElement> = (0..3).map(|_| k.elem_i64(&[rng.gen_range(-4..5), rng.gen_range(-4..5)])).collect();
            let h: Vec<FieldElement> = (0..3).map(|_| k.elem_i64(&[rng.gen_range(-4..5), rng.gen_range(-4..5)])).collect();
            let xh: Vec<FieldElement> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            let lhs = &f.evaluate(&xh).unwrap() - &f.evaluate(&x).unwrap();
            let b2 = f.bilinear(&x, &h).unwrap().scale(&q(2));
            assert_eq!(lhs, &b2 + &f.evaluate(&h).unwrap());
            let emb = f.embedded_system();
            let fx = f.evaluate(&x).unwrap();
            let mut v = nalgebra::DVector::zeros(6);
            for l in 0..2 {
                for i in 0..3 {
                    v[l * 3 + i] = x[i].embed(l);
                }
            }
            for l in 0..2 {
                let val = (v.transpose() * &emb[l] * &v)[(0, 0)];
                assert!((val - fx.embed(l)).abs() < 1e-8 * (1.0 + val.abs()));
            }
        }
    }

    #[test]
    fn dual_and_rank() {
        let k = k2();
        let f = Gqf::make_diagonal_int(&k, &[2, 1], &[1], 1).unwrap();
        let g = f.dual_form().unwrap();
        assert_eq!(g, Gqf::make_diagonal_int(&k, &[1, 2], &[2], 1).unwrap());
        let f2 = Gqf::make_diagonal_int(&k, &[1, 1], &[1, 1], 1).unwrap();
        assert_eq!(f2.coeff_rank(), 4);
        assert_eq!(Gqf::make_diagonal_int(&k, &[1, 1], &[1], 1).unwrap().dual_form().unwrap(), Gqf::make_diagonal_int(&k, &[1, 1], &[1], 1).unwrap());
        let pt = Gqf::make_partial_trace(&k, &[0, 1], 1).unwrap();
        assert_eq!(pt, Gqf::make_diagonal_int(&k, &[1], &[1], 1).unwrap());
    }

    #[test]
    fn admissibility() {
        let k = k2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = Gqf::make_diagonal_int(&k, &[1, 3], &[1], 1).unwrap();
        assert!(matches!(f.is_admissible(&mut rng), Admissibility::Yes(_)));
        let g = Gqf::from_entries(&k, 2, &[(0, 0, 0, 0, k.one())]).unwrap();
        assert!(matches!(g.is_admissible(&mut rng), Admissibility::No));
        let std = Gqf::make_standard(&k, &[vec![k.one(), k.zero()], vec![k.zero(), k.from_int(-2)]]).unwrap();
        assert!(matches!(std.is_admissible(&mut rng), Admissibility::Yes(_)));
    }

    #[test]
    fn assumptions() {
        let k = k2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SpecialShape::from_diagonal(&k, &[k.one(), k.one(), k.one()], &[k.one()], 1);
        let r = check_assumptions(&k, &s, &mut rng).unwrap();
        assert_eq!(r.assumption_1_2_dets, Verdict::Holds);
        for p in &r.pencils {
            assert_eq!(p.degree, 1);
            assert!((p.det_poly[0] - 1.0).abs() < 1e-9 && (p.det_poly[1] - 1.0).abs() < 1e-9);
        }
        assert_eq!(r.assumption_1_6, Verdict::Holds);
        assert_eq!(r.assumption_1_5, Verdict::Holds);
        // 2X₁X₂ + a(X₁^τ)² + X₃²: constant determinant.
        let z = k.zero();
        let o = k.one();
        let a = vec![vec![z.clone(), o.clone(), z.clone()], vec![o.clone(), z.clone(), z.clone()], vec![z.clone(), z.clone(), o.clone()]];
        let s2 = SpecialShape { a, r: vec![vec![k.from_int(3)]], tau: 1 };
        let r2 = check_assumptions(&k, &s2, &mut rng).unwrap();
        for p in &r2.pencils {
            assert_eq!(p.degree, 0);
        }
        let sing = SpecialShape { a: vec![vec![o.clone(), o.clone()], vec![o.clone(), o.clone()]], r: vec![vec![o.clone()]], tau: 1 };
        assert_eq!(check_assumptions(&k, &sing, &mut rng).unwrap().assumption_1_2_dets, Verdict::Fails);
    }

    #[test]
    fn json_roundtrip() {
        let k = k2();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Gqf::random(&k, 2, &mut rng, 3, 0.6);
        let s = serde_json::to_string(&f.to_json()).unwrap();
        let back = Gqf::from_json(&k, &serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, f);
        let diag: GqfJson = serde_json::from_str(r#"{"a":[1,"1"],"b":["1+0*w2"],"tau":1}"#).unwrap();
        assert_eq!(Gqf::from_json(&k, &diag).unwrap(), Gqf::make_diagonal_int(&k, &[1, 1], &[1], 1).unwrap());
    }
}
