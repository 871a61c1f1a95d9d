//! Flat JSON run configuration.
//!
//! ```json
//! {
//!   "case": "I",
//!   "scenario": "i",
//!   "algorithm": "lms",
//!   "param": 0.43,
//!   "iterations": 1000,
//!   "runs": 50,
//!   "master_seed": 7,
//!   "sampling_strategy": "greedy",
//!   "stations": "brazil_july.csv"
//! }
//! ```
//!
//! `case` fills `k`, `f` and `sample_size`; `scenario` fills `n_a` and `n_b`.
//! Explicit keys must agree with a named case or scenario when both are given.
//! Without `stations`, a synthetic table of `synthetic_nodes` stations is
//! generated from `master_seed`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::{CaseParams, ExperimentConfig, SamplingStrategy, DEFAULT_BURN_IN};
use crate::noise::Scenario;
use crate::theory::Algorithm;

pub const DEFAULT_RUNS: usize = 50;
pub const DEFAULT_SYNTHETIC_NODES: usize = 299;

const KNOWN_KEYS: &[&str] = &[
    "case",
    "k",
    "f",
    "sample_size",
    "scenario",
    "n_a",
    "n_b",
    "algorithm",
    "param",
    "iterations",
    "runs",
    "master_seed",
    "sampling_strategy",
    "stations",
    "synthetic_nodes",
    "burn_in",
];

/// The config file as written, before defaults and cross-field checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic { nodes: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub data: DataSource,
    pub burn_in: f64,
    /// The effective configuration with every default filled in, as flat JSON.
    pub resolved: RawConfig,
}

fn case_params(name: &str) -> Option<CaseParams> {
    match name {
        "I" | "1" => Some(CaseParams::CASE_I),
        "II" | "2" => Some(CaseParams::CASE_II),
        _ => None,
    }
}

pub fn load_config(path: &Path, overrides: Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base, overrides)
}

/// Parses and validates a config; every problem found is reported together.
pub fn parse_config(text: &str, base_dir: &Path, overrides: Overrides) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config(vec!["config must be a JSON object".into()]))?;
    let mut problems: Vec<String> = obj
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|k| format!("unknown key `{k}`"))
        .collect();
    let mut raw: RawConfig = match serde_json::from_value(value.clone()) {
        Ok(raw) => raw,
        Err(e) => {
            problems.push(e.to_string());
            return Err(Error::Config(problems));
        }
    };
    if let Some(seed) = overrides.seed {
        raw.master_seed = Some(seed);
    }
    if let Some(runs) = overrides.runs {
        raw.runs = Some(runs);
    }
    if let Some(iterations) = overrides.iterations {
        raw.iterations = Some(iterations);
    }
    resolve(raw, base_dir, problems)
}

fn resolve(raw: RawConfig, base_dir: &Path, mut problems: Vec<String>) -> Result<RunConfig> {
    let mut labels = BTreeMap::new();

    let named_case = match raw.case.as_deref() {
        Some(name) => match case_params(name) {
            Some(c) => {
                labels.insert("case".to_string(), name.to_string());
                Some(c)
            }
            None => {
                problems.push(format!("unknown case `{name}` (expected I or II)"));
                None
            }
        },
        None => None,
    };
    let mut pick_usize = |key: &str, explicit: Option<usize>, named: Option<usize>| {
        match (explicit, named) {
            (Some(e), Some(n)) if e != n => {
                problems.push(format!("`{key}` = {e} conflicts with case value {n}"));
                e
            }
            (Some(e), _) => e,
            (None, Some(n)) => n,
            (None, None) => {
                problems.push(format!("missing `{key}` (or a `case`)"));
                0
            }
        }
    };
    let k = pick_usize("k", raw.k, named_case.map(|c| c.k));
    let f = pick_usize("f", raw.f, named_case.map(|c| c.f));
    let sample_size = pick_usize("sample_size", raw.sample_size, named_case.map(|c| c.sample_size));

    let named_scenario = match raw.scenario.as_deref() {
        Some(name) => match Scenario::parse(name) {
            Some(s) => {
                labels.insert("scenario".to_string(), name.to_string());
                Some(s.coefficients())
            }
            None => {
                problems.push(format!("unknown scenario `{name}` (expected i, ii or iii)"));
                None
            }
        },
        None => None,
    };
    let mut pick_f64 = |key: &str, explicit: Option<f64>, named: Option<f64>| match (explicit, named) {
        (Some(e), Some(n)) if e != n => {
            problems.push(format!("`{key}` = {e} conflicts with scenario value {n}"));
            e
        }
        (Some(e), _) => e,
        (None, Some(n)) => n,
        (None, None) => {
            problems.push(format!("missing `{key}` (or a `scenario`)"));
            0.0
        }
    };
    let n_a = pick_f64("n_a", raw.n_a, named_scenario.map(|s| s.0));
    let n_b = pick_f64("n_b", raw.n_b, named_scenario.map(|s| s.1));

    let algorithm = match raw.algorithm.as_deref() {
        Some("lms") => Some(Algorithm::Lms),
        Some("rls") => Some(Algorithm::Rls),
        Some(other) => {
            problems.push(format!("unknown algorithm `{other}` (expected lms or rls)"));
            None
        }
        None => {
            problems.push("missing `algorithm`".into());
            None
        }
    };
    let param = raw.param.unwrap_or_else(|| {
        problems.push("missing `param` (step size for lms, forgetting factor for rls)".into());
        f64::NAN
    });
    let master_seed = raw.master_seed.unwrap_or_else(|| {
        problems.push("missing `master_seed`".into());
        0
    });
    let iterations = raw.iterations.unwrap_or(match algorithm {
        Some(Algorithm::Rls) => 200,
        _ => 1000,
    });
    let runs = raw.runs.unwrap_or(DEFAULT_RUNS);
    let sampling_strategy = match raw.sampling_strategy.as_deref() {
        None | Some("greedy") => SamplingStrategy::Greedy,
        Some("random") => SamplingStrategy::Random,
        Some(other) => {
            problems.push(format!(
                "unknown sampling_strategy `{other}` (expected greedy or random)"
            ));
            SamplingStrategy::Greedy
        }
    };
    let burn_in = raw.burn_in.unwrap_or(DEFAULT_BURN_IN);
    if !(0.0..1.0).contains(&burn_in) {
        problems.push(format!("burn_in must lie in [0, 1), got {burn_in}"));
    }
    let data = match (&raw.stations, raw.synthetic_nodes) {
        (Some(_), Some(_)) => {
            problems.push("give either `stations` or `synthetic_nodes`, not both".into());
            None
        }
        (Some(p), None) => Some(DataSource::Csv {
            path: if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            },
        }),
        (None, nodes) => {
            let nodes = nodes.unwrap_or(DEFAULT_SYNTHETIC_NODES);
            if nodes < 2 {
                problems.push(format!("synthetic_nodes must be >= 2, got {nodes}"));
            }
            Some(DataSource::Synthetic {
                nodes,
                seed: master_seed,
            })
        }
    };

    let experiment = ExperimentConfig {
        case: CaseParams { k, f, sample_size },
        n_a,
        n_b,
        algorithm: algorithm.unwrap_or(Algorithm::Lms),
        param,
        iterations,
        runs,
        master_seed,
        sampling_strategy,
        labels,
    };
    if let Err(Error::Config(more)) = experiment.validate() {
        for p in more {
            if !problems.contains(&p) && !(p.starts_with("param") && raw.param.is_none()) {
                problems.push(p);
            }
        }
    }
    if let Some(DataSource::Synthetic { nodes, .. }) = data {
        if nodes >= 2 && (k >= nodes || f > nodes || sample_size > nodes) {
            problems.push(format!(
                "case (k = {k}, f = {f}, sample_size = {sample_size}) does not fit {nodes} nodes"
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }

    let resolved = RawConfig {
        case: raw.case,
        k: Some(k),
        f: Some(f),
        sample_size: Some(sample_size),
        scenario: raw.scenario,
        n_a: Some(n_a),
        n_b: Some(n_b),
        algorithm: Some(experiment.algorithm.name().into()),
        param: Some(param),
        iterations: Some(iterations),
        runs: Some(runs),
        master_seed: Some(master_seed),
        sampling_strategy: Some(sampling_strategy.name().into()),
        stations: match &data {
            Some(DataSource::Csv { path }) => Some(path.clone()),
            _ => None,
        },
        synthetic_nodes: match &data {
            Some(DataSource::Synthetic { nodes, .. }) => Some(*nodes),
            _ => None,
        },
        burn_in: Some(burn_in),
    };
    Ok(RunConfig {
        experiment,
        data: data.expect("data source resolved when no problems were found"),
        burn_in,
        resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("/data"), Overrides::default())
    }

    #[test]
    fn named_case_and_scenario() {
        let cfg = parse(
            r#"{"case":"I","scenario":"iii","algorithm":"rls","param":0.85,"master_seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment.case, CaseParams::CASE_I);
        assert_eq!((cfg.experiment.n_a, cfg.experiment.n_b), (0.05, 0.05));
        assert_eq!(cfg.experiment.iterations, 200);
        assert_eq!(cfg.experiment.runs, 50);
        assert_eq!(
            cfg.data,
            DataSource::Synthetic {
                nodes: 299,
                seed: 3
            }
        );
        assert_eq!(cfg.experiment.labels["case"], "I");
    }

    #[test]
    fn unknown_keys_and_problems_reported_together() {
        let err = parse(r#"{"case":"III","scenaro":"i","algorithm":"nlms","master_seed":1}"#)
            .unwrap_err();
        match err {
            Error::Config(p) => {
                let joined = p.join("\n");
                assert!(joined.contains("unknown key `scenaro`"), "{joined}");
                assert!(joined.contains("unknown case `III`"), "{joined}");
                assert!(joined.contains("unknown algorithm `nlms`"), "{joined}");
                assert!(joined.contains("missing `param`"), "{joined}");
                assert!(joined.contains("missing `n_a`"), "{joined}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn overrides_win() {
        let cfg = parse_config(
            r#"{"case":"II","scenario":"i","algorithm":"lms","param":0.2,"master_seed":1,"runs":5}"#,
            Path::new("."),
            Overrides {
                seed: Some(99),
                runs: Some(2),
                iterations: Some(3),
            },
        )
        .unwrap();
        assert_eq!(cfg.experiment.master_seed, 99);
        assert_eq!(cfg.experiment.runs, 2);
        assert_eq!(cfg.experiment.iterations, 3);
    }

    #[test]
    fn relative_station_path_resolves_against_config_dir() {
        let cfg = parse(
            r#"{"k":2,"f":2,"sample_size":3,"n_a":0,"n_b":0.1,"algorithm":"lms","param":0.5,"master_seed":1,"stations":"st.csv"}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.data,
            DataSource::Csv {
                path: PathBuf::from("/data/st.csv")
            }
        );
    }

    #[test]
    fn conflicting_explicit_value() {
        let err = parse(
            r#"{"case":"I","f":150,"scenario":"i","algorithm":"lms","param":0.4,"master_seed":1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("conflicts with case value 200"), "{err}");
    }
}
