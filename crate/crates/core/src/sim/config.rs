//! Experiment configuration, schema version 1.
//!
//! Unknown keys are rejected everywhere. Parse errors carry the JSON path of
//! the offending field.

use serde::{Deserialize, Serialize};

use crate::channel::{GainMatrix, NoiseVector};
use crate::error::{contract, Error, Result};
use crate::multiuser::{InterferenceScenario, ProbeOrder};
use crate::pilot::{BalancedPattern, SectorLoad};
use crate::two_user::TwoUserProblem;

pub const SCHEMA_VERSION: u32 = 1;

/// Symbols per random stream in symbol-level simulations.
pub const DEFAULT_BATCH: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Gaussfit(GaussFitConfig),
    Estimate(EstimateConfig),
    PilotSearch(PilotSearchConfig),
    Detect2(Detect2Config),
    Multiuser(MultiuserConfig),
    Timing(TimingConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Gaussfit(_) => "gaussfit",
            Experiment::Estimate(_) => "estimate",
            Experiment::PilotSearch(_) => "pilot_search",
            Experiment::Detect2(_) => "detect2",
            Experiment::Multiuser(_) => "multiuser",
            Experiment::Timing(_) => "timing",
        }
    }
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_bins() -> usize {
    60
}

fn default_scales() -> Vec<f64> {
    vec![1.0]
}

/// Distribution of `W = Σ α_m N_m` against its Gaussian surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussFitConfig {
    /// Total per-sector intensity.
    pub lambda: Vec<f64>,
    /// Weight vectors; each is normalized to unit length.
    pub weights: Vec<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Multipliers applied to `lambda`.
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
}

fn default_trials() -> u64 {
    500
}

/// Pilot-based LS estimation over patterns and pilot lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// `users × sectors`.
    pub gains: GainMatrix,
    pub noise: NoiseVector,
    /// Weight sets such as `[1, 4]`; every nonempty pattern when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<Vec<usize>>>,
    pub lengths: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<EstimateDetection>,
}

/// Two-user separation driven by estimated gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateDetection {
    pub user_a: usize,
    pub user_b: usize,
    /// Estimation trials whose estimates are used for detector design.
    pub trials: u64,
    /// Symbols simulated per design.
    pub symbols: u64,
}

/// Closed-form ranking of all balanced patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSearchConfig {
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    /// Either explicit per-sector loads ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sectors: Option<Vec<SectorLoad>>,
    /// ... or a gain matrix with its noise vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseVector>,
}

impl PilotSearchConfig {
    /// `(K, per-sector loads)` after checking that exactly one form is given.
    pub fn resolve(&self) -> Result<(usize, Vec<SectorLoad>)> {
        match (&self.sectors, &self.gains, &self.noise) {
            (Some(s), None, None) => {
                let users = self.users.ok_or_else(|| contract("experiment.users is required with experiment.sectors"))?;
                for (m, l) in s.iter().enumerate() {
                    if !(l.noise.is_finite() && l.noise >= 0.0) || !(l.gain_l1.is_finite() && l.gain_l1 >= 0.0) {
                        return Err(contract(format!("experiment.sectors[{m}]: noise and gain_l1 must be finite and >= 0")));
                    }
                }
                Ok((users, s.clone()))
            }
            (None, Some(g), Some(n)) => {
                if n.len() != g.sectors() {
                    return Err(contract(format!(
                        "experiment.noise has {} entries for {} sectors",
                        n.len(),
                        g.sectors()
                    )));
                }
                if let Some(u) = self.users.filter(|&u| u != g.users()) {
                    return Err(contract(format!("experiment.users = {u} but gains has {} rows", g.users())));
                }
                let loads = (0..g.sectors())
                    .map(|m| SectorLoad { noise: n.as_slice()[m], gain_l1: g.sector_column(m).iter().sum() })
                    .collect();
                Ok((g.users(), loads))
            }
            _ => Err(contract("pilot search needs either experiment.sectors or experiment.gains with experiment.noise")),
        }
    }
}

/// One two-hypothesis problem. With `noise`, `lambda_a` and `lambda_b` are
/// signal gains and the background is added to each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn problem(&self) -> Result<TwoUserProblem> {
        match &self.noise {
            Some(n) => TwoUserProblem::from_signal(&self.lambda_a, &self.lambda_b, n),
            None => TwoUserProblem::new(self.lambda_a.clone(), self.lambda_b.clone()),
        }
    }
}

fn default_symbols() -> u64 {
    1_000_000
}

fn default_tail_epsilon() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

/// Two-user separation: exactly one of two users is active in each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detect2Config {
    pub problems: Vec<ProblemSpec>,
    #[serde(default = "default_symbols")]
    pub symbols: u64,
    /// Also sum the exact ML error over the count lattice when it is small enough.
    #[serde(default = "default_true")]
    pub exact_ml: bool,
    #[serde(default = "default_tail_epsilon")]
    pub tail_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lambda_a: Vec<f64>,
    pub interferers: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
}

impl ScenarioSpec {
    pub fn scenario(&self) -> Result<InterferenceScenario> {
        InterferenceScenario::new(self.lambda_a.clone(), self.interferers.clone(), NoiseVector::new(self.noise.clone())?)
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("scenario{index}"))
    }
}

/// OOK desired user with on/off interferers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiuserConfig {
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "default_symbols")]
    pub symbols: u64,
    #[serde(default)]
    pub probe_order: ProbeOrder,
    #[serde(default = "default_true")]
    pub exact_ml: bool,
    #[serde(default = "default_tail_epsilon")]
    pub tail_epsilon: f64,
}

fn default_timing_symbols() -> u64 {
    100_000
}

fn default_repetitions() -> usize {
    10
}

fn default_warmup() -> usize {
    1
}

/// ML against successive elimination on one shared symbol stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "default_timing_symbols")]
    pub symbols: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub probe_order: ProbeOrder,
}

fn positive(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(contract(format!("{name} must be >= 1")));
    }
    Ok(())
}

fn check_vector(name: &str, v: &[f64], positive_only: bool) -> Result<()> {
    if v.is_empty() {
        return Err(contract(format!("{name} is empty")));
    }
    for (i, x) in v.iter().enumerate() {
        let ok = x.is_finite() && if positive_only { *x > 0.0 } else { *x >= 0.0 };
        if !ok {
            let need = if positive_only { "> 0" } else { ">= 0" };
            return Err(contract(format!("{name}[{i}] = {x} must be finite and {need}")));
        }
    }
    Ok(())
}

fn field_error(path: &str, inner: &str) -> Error {
    let inner = inner.strip_prefix("contract violation: ").unwrap_or(inner);
    Error::Contract(format!("config field `{path}`: {inner}"))
}

fn typed_error<T: serde::de::DeserializeOwned>(body: &serde_json::Value) -> Option<Error> {
    serde_path_to_error::deserialize::<_, T>(body).err().map(|e| {
        let path = format!("experiment.{}", e.path());
        field_error(&path, &e.into_inner().to_string())
    })
}

// The tagged enum buffers its body, which hides nested paths. Re-parse the
// body as the concrete kind to recover them.
fn experiment_field_error(text: &str) -> Option<Error> {
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut body = root.get("experiment")?.as_object()?.clone();
    let kind = body.remove("kind")?;
    let body = serde_json::Value::Object(body);
    match kind.as_str()? {
        "gaussfit" => typed_error::<GaussFitConfig>(&body),
        "estimate" => typed_error::<EstimateConfig>(&body),
        "pilot_search" => typed_error::<PilotSearchConfig>(&body),
        "detect2" => typed_error::<Detect2Config>(&body),
        "multiuser" => typed_error::<MultiuserConfig>(&body),
        "timing" => typed_error::<TimingConfig>(&body),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Parse and fully validate; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            if path == "experiment" {
                if let Some(err) = experiment_field_error(text) {
                    return err;
                }
            }
            field_error(&path, &inner)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(contract(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match &self.experiment {
            Experiment::Gaussfit(c) => {
                check_vector("experiment.lambda", &c.lambda, false)?;
                if c.weights.is_empty() {
                    return Err(contract("experiment.weights is empty"));
                }
                for (i, w) in c.weights.iter().enumerate() {
                    if w.len() != c.lambda.len() {
                        return Err(contract(format!(
                            "experiment.weights[{i}] has {} entries for {} sectors",
                            w.len(),
                            c.lambda.len()
                        )));
                    }
                    if w.iter().any(|x| !x.is_finite()) || w.iter().all(|x| *x == 0.0) {
                        return Err(contract(format!("experiment.weights[{i}] must be finite and nonzero")));
                    }
                }
                positive("experiment.samples", c.samples)?;
                if c.samples < 2 {
                    return Err(contract("experiment.samples must be >= 2"));
                }
                if c.bins == 0 {
                    return Err(contract("experiment.bins must be >= 1"));
                }
                check_vector("experiment.scales", &c.scales, true)?;
                let total: f64 = c.lambda.iter().sum();
                if total == 0.0 {
                    return Err(contract("experiment.lambda is all zero"));
                }
            }
            Experiment::Estimate(c) => {
                if c.noise.len() != c.gains.sectors() {
                    return Err(contract(format!(
                        "experiment.noise has {} entries for {} sectors",
                        c.noise.len(),
                        c.gains.sectors()
                    )));
                }
                if c.gains.users() > 20 {
                    return Err(contract("experiment.gains: at most 20 users are supported"));
                }
                if let Some(ps) = &c.patterns {
                    if ps.is_empty() {
                        return Err(contract("experiment.patterns is empty"));
                    }
                    for (i, p) in ps.iter().enumerate() {
                        BalancedPattern::new(c.gains.users(), p.clone())
                            .map_err(|e| contract(format!("experiment.patterns[{i}]: {e}")))?;
                    }
                }
                if c.lengths.is_empty() || c.lengths.contains(&0) {
                    return Err(contract("experiment.lengths must be nonempty and positive"));
                }
                positive("experiment.trials", c.trials)?;
                if let Some(d) = &c.detection {
                    let k = c.gains.users();
                    if d.user_a >= k || d.user_b >= k || d.user_a == d.user_b {
                        return Err(contract("experiment.detection: user_a and user_b must be distinct user indices"));
                    }
                    positive("experiment.detection.trials", d.trials)?;
                    positive("experiment.detection.symbols", d.symbols)?;
                    if d.trials > c.trials {
                        return Err(contract("experiment.detection.trials exceeds experiment.trials"));
                    }
                }
            }
            Experiment::PilotSearch(c) => {
                if c.length == 0 {
                    return Err(contract("experiment.length must be >= 1"));
                }
                let (users, _) = c.resolve()?;
                if users == 0 || users > 20 {
                    return Err(contract(format!("experiment.users = {users} must lie in 1..=20")));
                }
            }
            Experiment::Detect2(c) => {
                if c.problems.is_empty() {
                    return Err(contract("experiment.problems is empty"));
                }
                for (i, p) in c.problems.iter().enumerate() {
                    p.problem().map_err(|e| contract(format!("experiment.problems[{i}]: {e}")))?;
                }
                positive("experiment.symbols", c.symbols)?;
                check_epsilon(c.tail_epsilon)?;
            }
            Experiment::Multiuser(c) => {
                check_scenarios(&c.scenarios)?;
                positive("experiment.symbols", c.symbols)?;
                check_epsilon(c.tail_epsilon)?;
            }
            Experiment::Timing(c) => {
                check_scenarios(&c.scenarios)?;
                positive("experiment.symbols", c.symbols)?;
                if c.repetitions < 1 {
                    return Err(contract("experiment.repetitions must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

fn check_epsilon(e: f64) -> Result<()> {
    if !(e > 0.0 && e < 1.0) {
        return Err(contract(format!("experiment.tail_epsilon = {e} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_scenarios(s: &[ScenarioSpec]) -> Result<()> {
    if s.is_empty() {
        return Err(contract("experiment.scenarios is empty"));
    }
    for (i, sc) in s.iter().enumerate() {
        sc.scenario().map_err(|e| contract(format!("experiment.scenarios[{i}]: {e}")))?;
        if sc.interferers.len() > crate::multiuser::MAX_TABLE_INTERFERERS {
            return Err(contract(format!(
                "experiment.scenarios[{i}]: at most {} interferers are supported",
                crate::multiuser::MAX_TABLE_INTERFERERS
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS: &str = r#"{"schema_version":1,"seed":7,"experiment":{"kind":"gaussfit","lambda":[10,15,20],"weights":[[0.3,0.5,0.81]]}}"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(GAUSS).unwrap();
        let Experiment::Gaussfit(g) = &c.experiment else { panic!() };
        assert_eq!(g.samples, 1_000_000);
        assert_eq!(g.scales, vec![1.0]);
        assert_eq!(ExperimentConfig::from_json(&c.to_json_pretty()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let bad = GAUSS.replace("\"samples\"", "\"x\"").replace("\"lambda\"", "\"lambda\":[1],\"extra\":1,\"l2\"");
        let e = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(e.contains("extra") || e.contains("l2"), "{e}");
        let top = GAUSS.replacen("\"seed\":7", "\"seed\":7,\"threads\":2", 1);
        assert!(ExperimentConfig::from_json(&top).unwrap_err().to_string().contains("threads"));
    }

    #[test]
    fn negative_gain_names_the_field() {
        let text = r#"{"schema_version":1,"seed":1,"experiment":{"kind":"estimate","gains":[[1,2],[3,-4]],"noise":[1,1],"lengths":[10]}}"#;
        let e = ExperimentConfig::from_json(text).unwrap_err().to_string();
        assert!(e.contains("experiment.gains") && e.contains("gain[1][1]"), "{e}");
    }

    #[test]
    fn zero_weight_vector_rejected() {
        let text = GAUSS.replace("[0.3,0.5,0.81]", "[0,0,0]");
        assert!(ExperimentConfig::from_json(&text).unwrap_err().to_string().contains("weights[0]"));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = GAUSS.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn pilot_search_forms() {
        let a = r#"{"schema_version":1,"seed":1,"experiment":{"kind":"pilot_search","length":100,"users":4,"sectors":[{"noise":1,"gain_l1":34.7638}]}}"#;
        let c = ExperimentConfig::from_json(a).unwrap();
        let Experiment::PilotSearch(p) = &c.experiment else { panic!() };
        assert_eq!(p.resolve().unwrap().0, 4);
        let b = r#"{"schema_version":1,"seed":1,"experiment":{"kind":"pilot_search","length":100,"gains":[[1],[2]],"noise":[1]}}"#;
        let c = ExperimentConfig::from_json(b).unwrap();
        let Experiment::PilotSearch(p) = &c.experiment else { panic!() };
        let (k, loads) = p.resolve().unwrap();
        assert_eq!((k, loads[0].gain_l1), (2, 3.0));
        let neither = r#"{"schema_version":1,"seed":1,"experiment":{"kind":"pilot_search","length":100,"users":4}}"#;
        assert!(ExperimentConfig::from_json(neither).is_err());
    }
}
