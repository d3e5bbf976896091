//! Run configuration: a JSON object whose keys are listed in
//! [`RunConfig`]. Missing keys take their defaults; unknown keys are
//! errors. `--key=value` flags override file values, where `value` is
//! read as JSON and falls back to a plain string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::env::DEFAULT_MAX_CELLS;
use crate::error::{Error, Result};
use crate::params::{Beta, ModelParams};
use crate::stats::{EnsembleSpec, Knobs, Target, ViewMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
    #[default]
    Both,
}

impl Emit {
    pub fn csv(self) -> bool {
        self != Emit::Json
    }

    pub fn json(self) -> bool {
        self != Emit::Csv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub d: usize,
    pub alpha: f64,
    pub c2: f64,
    pub p: f64,
    pub beta: Beta,
    pub theta: f64,
    pub zeta: f64,
    pub delta: f64,
    pub chi: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    /// Layer count for `gen`, `fpp` and `polymer`; defaults to the first
    /// entry of `n_list`.
    pub n: Option<usize>,
    /// Fixed half-width for single instances. Ensembles use it as the
    /// starting FPP window and the fixed polymer window.
    pub half_width: Option<i64>,
    pub targets: Vec<Target>,
    pub view: ViewMode,
    pub max_cells: u64,
    pub epsilon: f64,
    pub certificate_target: f64,
    /// Stored slab read by `fpp` and `polymer` instead of generating one.
    pub slab: Option<PathBuf>,
    /// Inverse temperatures for a `polymer` sweep.
    pub beta_grid: Option<Vec<Beta>>,
    /// Raw tables read by `report`; defaults to the ensemble table in `out_dir`.
    pub inputs: Option<Vec<PathBuf>>,
    pub out_dir: PathBuf,
    pub emit: Emit,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelParams::default();
        let k = Knobs::default();
        RunConfig {
            d: m.d,
            alpha: m.alpha,
            c2: m.c2,
            p: m.p,
            beta: m.beta,
            theta: m.theta,
            zeta: m.zeta,
            delta: 0.1,
            chi: 0.6,
            n_list: vec![64],
            replicas: 10,
            seed: 1,
            n: None,
            half_width: None,
            targets: vec![Target::Fpp, Target::Polymer],
            view: ViewMode::Raw,
            max_cells: DEFAULT_MAX_CELLS,
            epsilon: k.epsilon,
            certificate_target: k.certificate_target,
            slab: None,
            beta_grid: None,
            inputs: None,
            out_dir: PathBuf::from("out"),
            emit: Emit::Both,
            threads: 0,
        }
    }
}

/// Keys that do not change any scientific output.
const RUNTIME_KEYS: [&str; 3] = ["out_dir", "emit", "threads"];

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            d: self.d,
            alpha: self.alpha,
            c2: self.c2,
            p: self.p,
            beta: self.beta,
            theta: self.theta,
            zeta: self.zeta,
        }
    }

    pub fn knobs(&self) -> Knobs {
        Knobs {
            view: self.view,
            fpp_half_width: self.half_width,
            polymer_half_width: self.half_width,
            max_cells: self.max_cells,
            epsilon: self.epsilon,
            certificate_target: self.certificate_target,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            params: self.params(),
            n_list: self.n_list.clone(),
            replicas: self.replicas,
            master_seed: self.seed,
            targets: self.targets.clone(),
            knobs: self.knobs(),
        }
    }

    pub fn single_n(&self) -> usize {
        self.n.unwrap_or_else(|| self.n_list.first().copied().unwrap_or(0))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params().validate().map_err(cfg)?;
        self.knobs().validate().map_err(cfg)?;
        if !(self.delta > 0.0) || !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::Config(format!("need delta > 0 and chi in (0,1), got {} and {}", self.delta, self.chi)));
        }
        if self.single_n() == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form without the runtime-only keys.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            for k in RUNTIME_KEYS {
                m.remove(k);
            }
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn key_names() -> Vec<String> {
    match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Reads an override value: JSON when it parses, a string otherwise.
fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Builds the effective configuration from an optional file and
/// `--key=value` overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut map = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::Config("config must be a JSON object".into())),
                Err(e) => return Err(Error::Config(format!("config is not valid JSON: {e}"))),
            }
        }
        None => Map::new(),
    };
    for o in overrides {
        let body = o
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key=value, got `{o}`")))?;
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected --key=value, got `{o}`")))?;
        map.insert(k.to_string(), override_value(v));
    }
    let known = key_names();
    for (k, v) in &map {
        if !known.contains(k) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let one = Value::Object(Map::from_iter([(k.clone(), v.clone())]));
        if let Err(e) = serde_json::from_value::<RunConfig>(one) {
            return Err(Error::Config(format!("key `{k}`: {e}")));
        }
    }
    let cfg: RunConfig = serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn minimal_config_defaults() {
        let f = write(r#"{"d":1,"alpha":2,"c2":1,"p":0.5,"n_list":[64],"replicas":10,"seed":1}"#);
        let c = parse_config(Some(f.path()), &[]).unwrap();
        assert_eq!(c.n_list, vec![64]);
        assert_eq!(c.theta, 0.4);
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.chi, 0.6);
        assert_eq!(c.zeta, 0.5);
        assert_eq!(c.single_n(), 64);
    }

    #[test]
    fn unknown_key_is_named() {
        let f = write(r#"{"alpa": 2}"#);
        let e = parse_config(Some(f.path()), &[]).unwrap_err().to_string();
        assert!(e.contains("alpa"), "{e}");
        let e = parse_config(None, &["--nlist=[1]".into()]).unwrap_err().to_string();
        assert!(e.contains("nlist"));
    }

    #[test]
    fn type_errors_name_the_key() {
        let e = parse_config(None, &["--replicas=many".into()]).unwrap_err().to_string();
        assert!(e.contains("replicas"), "{e}");
    }

    #[test]
    fn flags_override_file() {
        let f = write(r#"{"p": 0.5}"#);
        let c = parse_config(Some(f.path()), &["--p=0.7".into(), "--beta=-inf".into()]).unwrap();
        assert_eq!(c.p, 0.7);
        assert_eq!(c.beta, Beta::NegInfinity);
        let c = parse_config(None, &["--out_dir=some/where".into(), "--view=regularized".into()]).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("some/where"));
        assert_eq!(c.view, ViewMode::Regularized);
    }

    #[test]
    fn hash_ignores_runtime_keys() {
        let a = parse_config(None, &["--threads=3".into(), "--out_dir=x".into()]).unwrap();
        let b = parse_config(None, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config(None, &["--seed=2".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(parse_config(None, &["--p=1".into()]).is_err());
        assert!(parse_config(None, &["--theta".into()]).is_err());
        assert!(parse_config(None, &["p=0.1".into()]).is_err());
    }
}
