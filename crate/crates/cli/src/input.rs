use std::fs;
use std::io::Read;
use std::path::Path;

use gqf_core::field::FieldDescription;
use gqf_core::form::{Gqf, GqfJson};
use gqf_core::{Field, FieldElement, FieldExt, NumberField};
use serde::de::DeserializeOwned;

use crate::CliError;

pub fn read_text(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io { path: "<stdin>".into(), source: e })?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), source: e })
}

/// Deserializes JSON, reporting the path of the offending entry on failure.
pub fn parse_json<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Input(format!("{origin}: {path}: {}", e.into_inner()))
    })
}

/// A builtin name ("Qsqrt:2", "cubic7") or a JSON field description file.
pub fn load_field(spec: &str) -> Result<Field, CliError> {
    if Path::new(spec).is_file() {
        let desc: FieldDescription = parse_json(spec, &read_text(spec)?)?;
        return desc.build().map_err(|e| CliError::Input(format!("{spec}: {e}")));
    }
    Ok(NumberField::builtin(spec)?)
}

/// A GQF JSON file, or the diagonal shorthand "a=1,1;b=1;tau=1".
pub fn load_form(k: &Field, spec: &str) -> Result<Gqf, CliError> {
    let (origin, json) = if Path::new(spec).is_file() || spec == "-" {
        (spec.to_string(), parse_json::<GqfJson>(spec, &read_text(spec)?)?)
    } else if spec.contains('=') {
        ("--form".to_string(), parse_shorthand(spec)?)
    } else {
        return Err(CliError::Input(format!("--form {spec}: not a file and not a diagonal shorthand")));
    };
    Gqf::from_json(k, &json).map_err(|e| CliError::Input(format!("{origin}: {e}")))
}

fn parse_shorthand(spec: &str) -> Result<GqfJson, CliError> {
    let mut json = GqfJson { n: None, coeffs: None, a: None, b: None, tau: None };
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = part.split_once('=').ok_or_else(|| CliError::Input(format!("--form: expected key=value in {part:?}")))?;
        let list = || val.split(',').map(|x| serde_json::Value::String(x.trim().to_string())).collect::<Vec<_>>();
        match key.trim() {
            "a" => json.a = Some(list()),
            "b" => json.b = Some(list()),
            "tau" => json.tau = Some(val.trim().parse().map_err(|_| CliError::Input(format!("--form: tau: not an index: {val}")))?),
            other => return Err(CliError::Input(format!("--form: unknown key {other}"))),
        }
    }
    if json.a.is_none() {
        return Err(CliError::Input("--form: shorthand needs a=…".into()));
    }
    Ok(json)
}

pub fn parse_element(k: &Field, s: &str, flag: &str) -> Result<FieldElement, CliError> {
    k.parse_element(s).map_err(|e| CliError::Input(format!("{flag}: {e}")))
}

pub fn parse_element_list(k: &Field, s: &str, flag: &str) -> Result<Vec<FieldElement>, CliError> {
    s.split(';').map(|x| parse_element(k, x.trim(), flag)).collect()
}
