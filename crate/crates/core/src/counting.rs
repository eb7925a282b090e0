//! Ground-truth counts of x ∈ 𝔬ⁿ with F(x) = N in the scaled box |u/P − ξ| ≤ δ.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{bump, DensityReport, IntSystem, Weight};
use crate::descent::descend;
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::form::Gqf;

pub const DEFAULT_COUNT_BUDGET: u64 = 2_000_000_000;

#[derive(Clone, Debug)]
pub struct CountSpec {
    pub form: Gqf,
    pub target: FieldElement,
    pub p: f64,
    pub weight: Weight,
    pub xi: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CountResult {
    pub p: f64,
    /// Number of solutions in the box.
    pub count: u128,
    /// Σ w(δ⁻¹|u/P − ξ|) over solutions; equals `count` for the indicator weight.
    pub weighted: f64,
    pub points_examined: u64,
}

impl CountSpec {
    fn system(&self) -> Result<IntSystem> {
        if !self.form.is_integral() || !self.target.is_integral() {
            return Err(Error::invalid("counting needs an integral form and target"));
        }
        let dim = self.form.d() * self.form.n;
        if self.xi.len() != dim {
            return Err(Error::invalid(format!("ξ must have {dim} coordinates")));
        }
        if !(self.delta > 0.0 && self.p > 0.0) {
            return Err(Error::invalid("P and δ must be positive"));
        }
        IntSystem::from_system(&descend(&self.form).shift(&self.target)?)
    }

    /// Integer ranges per u-coordinate.
    pub fn ranges(&self) -> Vec<(i64, i64)> {
        self.xi.iter().map(|&x| ((self.p * (x - self.delta)).ceil() as i64, (self.p * (x + self.delta)).floor() as i64)).collect()
    }

    fn weight_of(&self, u: &[i64]) -> f64 {
        match self.weight {
            Weight::Indicator => 1.0,
            Weight::Smooth => {
                let r = u.iter().zip(&self.xi).fold(0.0f64, |m, (&a, b)| m.max((a as f64 / self.p - b).abs()));
                bump(r / self.delta)
            }
        }
    }
}

fn box_volume(r: &[(i64, i64)]) -> f64 {
    r.iter().map(|(a, b)| (b - a + 1).max(0) as f64).product()
}

fn eval_exact(sys: &IntSystem, u: &[i64], vars: &[usize], out: &mut [i64]) {
    for (p, m) in sys.mats.iter().enumerate() {
        let mut acc: i128 = 0;
        for &a in vars {
            if u[a] == 0 {
                continue;
            }
            let row: i128 = vars.iter().map(|&b| m[a * sys.dim + b] as i128 * u[b] as i128).sum();
            acc += row * u[a] as i128;
        }
        out[p] = acc as i64;
    }
}

/// Enumerates the whole box.
pub fn count_direct(spec: &CountSpec, budget: u64) -> Result<CountResult> {
    let sys = spec.system()?;
    let ranges = spec.ranges();
    let vol = box_volume(&ranges);
    if vol > budget as f64 {
        return Err(Error::Budget { what: "direct count; use split mode".into(), needed: vol, cap: budget as f64 });
    }
    if vol == 0.0 {
        return Ok(CountResult { p: spec.p, count: 0, weighted: 0.0, points_examined: 0 });
    }
    let dim = sys.dim;
    let vars: Vec<usize> = (0..dim).collect();
    let (lo0, hi0) = ranges[0];
    let shards: Vec<(u128, f64, u64)> = (lo0..=hi0)
        .into_par_iter()
        .map(|first| {
            let mut u: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            u[0] = first;
            let mut val = vec![0i64; sys.d];
            let (mut c, mut w, mut seen) = (0u128, 0.0f64, 0u64);
            loop {
                seen += 1;
                eval_exact(&sys, &u, &vars, &mut val);
                if val == sys.target {
                    c += 1;
                    w += spec.weight_of(&u);
                }
                let mut k = 1;
                loop {
                    if k == dim {
                        return (c, w, seen);
                    }
                    u[k] += 1;
                    if u[k] <= ranges[k].1 {
                        break;
                    }
                    u[k] = ranges[k].0;
                    k += 1;
                }
            }
        })
        .collect();
    let (count, weighted, seen) = shards.iter().fold((0u128, 0.0, 0u64), |a, s| (a.0 + s.0, a.1 + s.1, a.2 + s.2));
    Ok(CountResult { p: spec.p, count, weighted, points_examined: seen })
}

/// Value → multiplicity of the partial sum over one block of variables.
fn block_map(sys: &IntSystem, vars: &[usize], ranges: &[(i64, i64)]) -> HashMap<Vec<i64>, u64> {
    let mut map = HashMap::new();
    let mut u = vec![0i64; sys.dim];
    for &v in vars {
        u[v] = ranges[v].0;
    }
    let mut val = vec![0i64; sys.d];
    loop {
        eval_exact(sys, &u, vars, &mut val);
        *map.entry(val.clone()).or_insert(0) += 1;
        let mut k = 0;
        loop {
            if k == vars.len() {
                return map;
            }
            u[vars[k]] += 1;
            if u[vars[k]] <= ranges[vars[k]].1 {
                break;
            }
            u[vars[k]] = ranges[vars[k]].0;
            k += 1;
        }
    }
}

fn sum_maps(a: &HashMap<Vec<i64>, u64>, b: &HashMap<Vec<i64>, u64>) -> HashMap<Vec<i64>, u64> {
    let mut out = HashMap::with_capacity(a.len() * b.len() / 2 + 1);
    for (ka, ca) in a {
        for (kb, cb) in b {
            let k: Vec<i64> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert(0) += ca * cb;
        }
    }
    out
}

/// Meet-in-the-middle count over non-interacting variable blocks (each X_i of a
/// diagonal form is one block). Indicator weight only.
pub fn count_split_diagonal(spec: &CountSpec, budget: u64) -> Result<CountResult> {
    if spec.weight != Weight::Indicator {
        return Err(Error::invalid("split counting needs the indicator weight"));
    }
    if spec.form.as_diagonal().is_none() {
        return Err(Error::invalid("split counting needs a diagonal form"));
    }
    let sys = spec.system()?;
    let ranges = spec.ranges();
    if box_volume(&ranges) == 0.0 {
        return Ok(CountResult { p: spec.p, count: 0, weighted: 0.0, points_examined: 0 });
    }
    let comps = sys.components();
    let maps: Vec<HashMap<Vec<i64>, u64>> = comps.par_iter().map(|c| block_map(&sys, c, &ranges)).collect();
    let sizes: Vec<f64> = maps.iter().map(|m| m.len() as f64).collect();
    // Left half is materialised, right half streamed.
    let total: f64 = sizes.iter().product();
    let mut split = 0;
    let mut left = 1.0;
    while split < maps.len() && left * left < total {
        left *= sizes[split];
        split += 1;
    }
    if split == maps.len() && maps.len() > 1 {
        split -= 1;
        left /= sizes[split];
    }
    let right = total / left;
    if left > 2e8 || left + right > budget as f64 {
        return Err(Error::Budget { what: format!("split count with {} blocks; reduce P or δ", maps.len()), needed: left + right, cap: budget as f64 });
    }
    let mut lmap: HashMap<Vec<i64>, u64> = HashMap::from([(vec![0i64; sys.d], 1u64)]);
    for m in &maps[..split] {
        lmap = sum_maps(&lmap, m);
    }
    let rlists: Vec<Vec<(Vec<i64>, u64)>> = maps[split..].iter().map(|m| m.iter().map(|(k, v)| (k.clone(), *v)).collect()).collect();
    let target = sys.target.clone();
    let count: u128 = if rlists.is_empty() {
        lmap.get(&target).copied().unwrap_or(0) as u128
    } else {
        rlists[0]
            .par_iter()
            .map(|(k0, c0)| {
                let mut idx = vec![0usize; rlists.len()];
                let mut acc = 0u128;
                let mut key = vec![0i64; sys.d];
                loop {
                    let mut mult = *c0 as u128;
                    key.iter_mut().zip(&target).zip(k0).for_each(|((x, t), a)| *x = t - a);
                    for (j, l) in rlists.iter().enumerate().skip(1) {
                        let (kj, cj) = &l[idx[j]];
                        mult *= *cj as u128;
                        key.iter_mut().zip(kj).for_each(|(x, a)| *x -= a);
                    }
                    if let Some(c) = lmap.get(&key) {
                        acc += mult * *c as u128;
                    }
                    let mut j = 1;
                    loop {
                        if j >= rlists.len() {
                            return acc;
                        }
                        idx[j] += 1;
                        if idx[j] < rlists[j].len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                }
            })
            .sum()
    };
    Ok(CountResult { p: spec.p, count, weighted: count as f64, points_examined: (left + right) as u64 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareRecord {
    pub p: f64,
    pub count: u128,
    pub predicted: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

pub fn compare_to_prediction(count: &CountResult, report: &DensityReport) -> CompareRecord {
    let observed = count.weighted;
    let pred = report.predicted;
    let (ratio, lo, hi) = if pred > 0.0 {
        let r = observed / pred;
        let rel = report.predicted_err / pred;
        (r, r / (1.0 + 2.0 * rel), r / (1.0 - 2.0 * rel).max(1e-12))
    } else if observed == 0.0 {
        (1.0, 1.0, 1.0)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    CompareRecord { p: count.p, count: count.count, predicted: pred, ratio, ratio_lo: lo, ratio_hi: hi }
}
