use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use gqf_core::character::{find_primitive_gamma, verify_certificate};
use gqf_core::counting::{compare_to_prediction, count_direct, count_split_diagonal, CountResult, CountSpec, DEFAULT_COUNT_BUDGET};
use gqf_core::density::{find_real_point, predict as predict_density, PredictParams, Weight, DEFAULT_BUDGET};
use gqf_core::descent::{descend as descend_form, lift as lift_system, DescendedJson, DescendedSystem};
use gqf_core::expsum::{expsum_record, g_ideal, special_shape, ExpSumRecord, DEFAULT_EXPSUM_BUDGET, GAMMA_RADIUS};
use gqf_core::form::{check_assumptions as check_shape, Admissibility, Gqf};
use gqf_core::ideal::{ideals_up_to, Ideal};
use gqf_core::linalg::{q, to_f64};
use gqf_core::{Error, Field, FieldElement, FieldExt};

use crate::input::{load_field, load_form, parse_element, parse_element_list, parse_json, read_text};
use crate::report::{write_json, Reporter};
use crate::{CliError, Common, Format};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightArg {
    Indicator,
    Smooth,
}

impl From<WeightArg> for Weight {
    fn from(w: WeightArg) -> Weight {
        match w {
            WeightArg::Indicator => Weight::Indicator,
            WeightArg::Smooth => Weight::Smooth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Split counter when the form is diagonal, direct enumeration otherwise.
    Auto,
    Direct,
    Split,
}

#[derive(Args, Serialize)]
pub struct DescendArgs {
    #[command(flatten)]
    pub common: Common,
    /// GQF JSON file ("-" for stdin) or diagonal shorthand "a=1,1;b=1;tau=1".
    #[arg(long)]
    pub form: String,
    /// Shift the system by N (records Q_l(u) − N_l).
    #[arg(long = "N")]
    pub n: Option<String>,
}

#[derive(Args, Serialize)]
pub struct LiftArgs {
    #[command(flatten)]
    pub common: Common,
    /// Descended system JSON ("-" for stdin).
    #[arg(long, default_value = "-")]
    pub input: String,
}

#[derive(Args, Serialize)]
pub struct PredictOpts {
    #[arg(long, default_value_t = 50)]
    pub pmax: u64,
    #[arg(long, default_value_t = 3)]
    pub lmax: u32,
    #[arg(long, default_value_t = 4_000_000)]
    pub samples: u64,
    /// Newton starts for the real point ξ.
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    /// Slab half-width relative to max(|τ|, P⁻²).
    #[arg(long, default_value_t = 0.05)]
    pub eps_rel: f64,
}

#[derive(Args, Serialize)]
pub struct CountArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub form: String,
    #[arg(long = "N")]
    pub n: String,
    /// Box scales, comma separated.
    #[arg(long = "P", value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = WeightArg::Indicator)]
    pub weight: WeightArg,
    /// Box centre in u-coordinates (comma separated); `count` only, `compare` uses the prediction's ξ.
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[command(flatten)]
    pub predict: PredictOpts,
}

#[derive(Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub form: String,
    #[arg(long = "N")]
    pub n: String,
    #[arg(long = "P", value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = WeightArg::Indicator)]
    pub weight: WeightArg,
    #[command(flatten)]
    pub opts: PredictOpts,
}

#[derive(Args, Serialize)]
pub struct ExpsumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub form: String,
    #[arg(long = "N", default_value = "0")]
    pub n: String,
    /// Generators of the modulus, separated by ';' (e.g. "3+1*w2").
    #[arg(long, conflicts_with = "sweep_norm")]
    pub ideal: Option<String>,
    /// Every proper ideal of norm at most this bound.
    #[arg(long, required_unless_present = "ideal")]
    pub sweep_norm: Option<u64>,
    /// The vector m, entries separated by ';'; random in the dual lattice when omitted.
    #[arg(long)]
    pub m: Option<String>,
    /// Also evaluate the Möbius route and report the deviation.
    #[arg(long)]
    pub cross_check: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CharAction {
    Find,
}

#[derive(Args, Serialize)]
pub struct CharArgs {
    #[arg(value_enum)]
    pub action: CharAction,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub ideal: String,
    #[arg(long, default_value_t = GAMMA_RADIUS)]
    pub radius: i64,
}

#[derive(Args, Serialize)]
pub struct AssumptionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub form: String,
}

/// Shortest round-trip decimal, in exponent form when that is shorter.
fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float serializes")
    } else {
        x.to_string()
    }
}

fn ideal_cell(b: &serde_json::Value) -> String {
    let mat: Vec<&str> = b["mat"].as_array().map(|v| v.iter().filter_map(|x| x.as_str()).collect()).unwrap_or_default();
    format!("[{}]/{}", mat.join(" "), b["den"].as_str().unwrap_or("1"))
}

fn setup(common: &Common, form: &str) -> Result<(Field, Gqf), CliError> {
    let k = load_field(&common.field)?;
    let f = load_form(&k, form)?;
    Ok((k, f))
}

fn json_only(common: &Common, what: &str) -> Result<(), CliError> {
    if common.format == Format::Csv {
        return Err(CliError::Input(format!("--format csv is not available for {what}")));
    }
    Ok(())
}

pub fn descend(a: &DescendArgs) -> Result<(), CliError> {
    json_only(&a.common, "descend")?;
    let (k, f) = setup(&a.common, &a.form)?;
    let mut s = descend_form(&f);
    if let Some(n) = &a.n {
        s = s.shift(&parse_element(&k, n, "--N")?)?;
    }
    write_json(a.common.out.as_deref(), &s.to_json())
}

pub fn lift(a: &LiftArgs) -> Result<(), CliError> {
    json_only(&a.common, "lift")?;
    let k = load_field(&a.common.field)?;
    let j: DescendedJson = parse_json(&a.input, &read_text(&a.input)?)?;
    let s = DescendedSystem::from_json(&k, &j).map_err(|e| CliError::Input(format!("{}: {e}", a.input)))?;
    write_json(a.common.out.as_deref(), &lift_system(&s)?.to_json())
}

fn predict_params(common: &Common, opts: &PredictOpts, p: f64, delta: f64, weight: WeightArg) -> PredictParams {
    PredictParams {
        p,
        p_max: opts.pmax,
        l_max: opts.lmax,
        delta,
        weight: weight.into(),
        samples: opts.samples,
        eps_rel: opts.eps_rel,
        seed: common.seed,
        budget: common.budget.unwrap_or(DEFAULT_BUDGET),
        starts: opts.starts,
    }
}

fn run_count(spec: &CountSpec, method: Method, budget: u64) -> Result<(CountResult, Method), CliError> {
    match method {
        Method::Direct => Ok((count_direct(spec, budget)?, Method::Direct)),
        Method::Split => Ok((count_split_diagonal(spec, budget)?, Method::Split)),
        Method::Auto => match count_split_diagonal(spec, budget) {
            Ok(c) => Ok((c, Method::Split)),
            Err(Error::InvalidInput(_)) => Ok((count_direct(spec, budget)?, Method::Direct)),
            Err(e) => Err(e.into()),
        },
    }
}

#[derive(Serialize)]
struct CountEntry {
    p: f64,
    method: Method,
    xi: Vec<f64>,
    result: CountResult,
}

#[derive(Serialize)]
struct CompareEntry {
    p: f64,
    method: Method,
    count: CountResult,
    compare: gqf_core::counting::CompareRecord,
    prediction: gqf_core::density::DensityReport,
}

pub fn count(a: &CountArgs, compare: bool) -> Result<(), CliError> {
    let rep = Reporter::start(if compare { "compare" } else { "count" });
    let (k, f) = setup(&a.common, &a.form)?;
    let nn = parse_element(&k, &a.n, "--N")?;
    let dim = f.n * k.degree;
    let budget = a.common.budget.unwrap_or(DEFAULT_COUNT_BUDGET);
    let spec_at = |p: f64, xi: Vec<f64>| CountSpec { form: f.clone(), target: nn.clone(), p, weight: a.weight.into(), xi, delta: a.delta };
    if compare {
        let mut entries = Vec::new();
        for &p in &a.p {
            let prediction = predict_density(&f, &nn, &predict_params(&a.common, &a.predict, p, a.delta, a.weight))?;
            let xi = prediction.xi.clone().unwrap_or_else(|| vec![0.0; dim]);
            let (c, method) = run_count(&spec_at(p, xi), a.method, budget)?;
            let cmp = compare_to_prediction(&c, &prediction);
            entries.push(CompareEntry { p, method, count: c, compare: cmp, prediction });
        }
        let rows = entries
            .iter()
            .map(|e| vec![num(e.p), e.count.count.to_string(), num(e.compare.predicted), num(e.compare.ratio), num(e.compare.ratio_lo), num(e.compare.ratio_hi)])
            .collect();
        return rep.emit(&a.common, a, &entries, Some((vec!["P", "count", "predicted", "ratio", "ratio_lo", "ratio_hi"], rows)));
    }
    let shifted = descend_form(&f).shift(&nn)?;
    let mut entries = Vec::new();
    for &p in &a.p {
        let xi = match &a.xi {
            Some(xi) => xi.clone(),
            None => {
                let tau: Vec<f64> = nn.coords.iter().map(|c| to_f64(c) / (p * p)).collect();
                find_real_point(&shifted, &tau, a.predict.starts, a.common.seed).unwrap_or_else(|| vec![0.0; dim])
            }
        };
        let (c, method) = run_count(&spec_at(p, xi.clone()), a.method, budget)?;
        entries.push(CountEntry { p, method, xi, result: c });
    }
    let rows = entries.iter().map(|e| vec![num(e.p), e.result.count.to_string(), num(e.result.weighted), e.result.points_examined.to_string()]).collect();
    rep.emit(&a.common, a, &entries, Some((vec!["P", "count", "weighted", "points_examined"], rows)))
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let rep = Reporter::start("predict");
    let (k, f) = setup(&a.common, &a.form)?;
    let nn = parse_element(&k, &a.n, "--N")?;
    let reports = a
        .p
        .iter()
        .map(|&p| predict_density(&f, &nn, &predict_params(&a.common, &a.opts, p, a.delta, a.weight)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for r in &reports {
        for pd in &r.series.primes {
            rows.push(vec![
                num(r.params.p),
                pd.p.to_string(),
                pd.l_used.to_string(),
                pd.sigma.to_string(),
                num(pd.sigma_f64),
                pd.stabilized.to_string(),
                pd.nonsingular_solution.to_string(),
                r.obstructed.to_string(),
            ]);
        }
    }
    rep.emit(&a.common, a, &reports, Some((vec!["P", "p", "l_used", "sigma", "sigma_f64", "stabilized", "nonsingular_solution", "obstructed"], rows)))
}

#[derive(Serialize)]
struct Skipped {
    ideal: serde_json::Value,
    norm: u64,
    reason: String,
}

#[derive(Serialize)]
struct ExpsumResult {
    records: Vec<ExpSumRecord>,
    skipped: Vec<Skipped>,
    max_bound_ratio: f64,
}

fn random_dual(f: &Gqf, b: &Ideal, rng: &mut ChaCha8Rng) -> Vec<FieldElement> {
    let k = &f.field;
    let basis = g_ideal(f, b).trace_dual().basis_elements();
    (0..f.n).map(|_| basis.iter().fold(k.zero(), |acc, z| &acc + &z.scale(&q(rng.gen_range(-3..=3))))).collect()
}

pub fn expsum(a: &ExpsumArgs) -> Result<(), CliError> {
    let rep = Reporter::start("expsum");
    let (k, f) = setup(&a.common, &a.form)?;
    let nn = parse_element(&k, &a.n, "--N")?;
    let budget = a.common.budget.map(|b| b as f64).unwrap_or(DEFAULT_EXPSUM_BUDGET);
    let fixed_m = match &a.m {
        Some(s) => {
            let m = parse_element_list(&k, s, "--m")?;
            if m.len() != f.n {
                return Err(CliError::Input(format!("--m: expected {} entries, got {}", f.n, m.len())));
            }
            Some(m)
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut out = ExpsumResult { records: Vec::new(), skipped: Vec::new(), max_bound_ratio: 0.0 };
    let ideals = match (&a.ideal, a.sweep_norm) {
        (Some(gens), _) => vec![Ideal::generated_by(&k, &parse_element_list(&k, gens, "--ideal")?)?],
        (None, Some(x)) => ideals_up_to(&k, x)?.into_iter().filter(|b| !b.is_unit()).collect(),
        (None, None) => return Err(CliError::Input("expsum needs --ideal or --sweep-norm".into())),
    };
    let sweep = a.ideal.is_none();
    for b in &ideals {
        let m = match &fixed_m {
            Some(m) => m.clone(),
            None => random_dual(&f, b, &mut rng),
        };
        match expsum_record(&f, b, &nn, &m, a.cross_check, budget) {
            Ok(r) => {
                out.max_bound_ratio = out.max_bound_ratio.max(r.bound_ratio);
                out.records.push(r);
            }
            Err(e @ (Error::Budget { .. } | Error::SearchBound { .. })) if sweep => {
                out.skipped.push(Skipped { ideal: b.to_json(), norm: b.norm_u64().unwrap_or(0), reason: e.to_string() });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let rows = out
        .records
        .iter()
        .map(|r| {
            vec![
                r.norm.to_string(),
                ideal_cell(&r.ideal),
                r.g_norm.clone(),
                num(r.s_re),
                num(r.s_im),
                num(r.bound),
                num(r.bound_ratio),
                r.checks.within_bound.to_string(),
                r.checks.pairs_integrally.to_string(),
                r.checks.moebius_rel_diff.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    let header = vec!["norm", "ideal", "g_norm", "s_re", "s_im", "bound", "bound_ratio", "within_bound", "pairs_integrally", "moebius_rel_diff"];
    rep.emit(&a.common, a, &out, Some((header, rows)))
}

#[derive(Serialize)]
struct CharReport {
    modulus: serde_json::Value,
    norm: String,
    gamma: String,
    alpha: String,
    g: String,
    p1: serde_json::Value,
    e: serde_json::Value,
    certificate_verified: bool,
}

pub fn character(a: &CharArgs) -> Result<(), CliError> {
    let rep = Reporter::start("char");
    let k = load_field(&a.common.field)?;
    let b = Ideal::generated_by(&k, &parse_element_list(&k, &a.ideal, "--ideal")?)?;
    let ch = match a.action {
        CharAction::Find => find_primitive_gamma(&b, a.radius)?,
    };
    verify_certificate(&ch)?;
    let r = CharReport {
        modulus: b.to_json(),
        norm: b.norm().to_string(),
        gamma: ch.gamma.to_string(),
        alpha: ch.alpha.to_string(),
        g: ch.g.to_string(),
        p1: serde_json::json!({ "p": ch.p1.p, "e": ch.p1.e, "f": ch.p1.f, "ideal": ch.p1.ideal.to_json() }),
        e: ch.e.to_json(),
        certificate_verified: true,
    };
    let row = vec![r.norm.clone(), r.gamma.clone(), r.alpha.clone(), r.g.clone(), ch.p1.p.to_string(), r.certificate_verified.to_string()];
    rep.emit(&a.common, a, &r, Some((vec!["norm", "gamma", "alpha", "g", "p1", "certificate_verified"], vec![row])))
}

pub fn check_assumptions(a: &AssumptionArgs) -> Result<(), CliError> {
    let rep = Reporter::start("check-assumptions");
    json_only(&a.common, "check-assumptions")?;
    let (k, f) = setup(&a.common, &a.form)?;
    let shape = special_shape(&f).ok_or_else(|| CliError::Input("--form: not of the shape Q(X) + R(X^τ)".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let report = check_shape(&k, &shape, &mut rng)?;
    let admissible = match f.is_admissible(&mut rng) {
        Admissibility::Yes(vs) => serde_json::json!({
            "verdict": "yes",
            "witnesses": vs.iter().map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
        Admissibility::No => serde_json::json!({ "verdict": "no" }),
        Admissibility::Unknown => serde_json::json!({ "verdict": "unknown" }),
    };
    let result = serde_json::json!({
        "n": shape.n(),
        "m": shape.m(),
        "tau": shape.tau,
        "assumptions": report,
        "admissible": admissible,
    });
    rep.emit(&a.common, a, &result, None)
}
