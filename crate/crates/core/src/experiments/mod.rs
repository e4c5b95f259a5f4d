//! The six experiments behind the command-line tool. Each run is a pure
//! function of its config (seed included) and returns a report whose verdicts
//! are recomputable from the recorded numbers.

mod basic;
pub mod config;
mod pipeline;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use basic::{run_bunching, run_holonomy_validation, run_spectrum};
pub use config::{ExperimentConfig, OutputFormat, Overrides, ReferenceCocycle};
pub use pipeline::{run_openness, run_su_breaking, run_theta_scan, select_theta, SuBreakingPipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Bunching,
    Holonomy,
    ThetaScan,
    SuBreaking,
    Openness,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Spectrum,
        Experiment::Bunching,
        Experiment::Holonomy,
        Experiment::ThetaScan,
        Experiment::SuBreaking,
        Experiment::Openness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Bunching => "bunching",
            Experiment::Holonomy => "holonomy",
            Experiment::ThetaScan => "theta-scan",
            Experiment::SuBreaking => "su-breaking",
            Experiment::Openness => "openness",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Spectrum => "E1",
            Experiment::Bunching => "E2",
            Experiment::Holonomy => "E3",
            Experiment::ThetaScan => "E4",
            Experiment::SuBreaking => "E5",
            Experiment::Openness => "E6",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s || e.id() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

/// `value relation threshold`, with the outcome stored next to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Gt => value > threshold,
            Relation::Ge => value >= threshold,
        };
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            pass,
        }
    }

    /// A yes/no outcome recorded as `1 > 0.5` or `0 > 0.5`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::Gt, 0.5)
    }

    pub fn recompute(&self) -> bool {
        Self::new(self.name.clone(), self.value, self.relation, self.threshold).pass
    }
}

/// A table of numbers worth plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub id: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub records: serde_json::Map<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    pub series: Vec<Series>,
}

impl ExperimentReport {
    fn new(e: Experiment, config: &ExperimentConfig) -> Self {
        Self {
            experiment: e.name().into(),
            id: e.id().into(),
            seed: config.seed(),
            config: config.clone(),
            records: serde_json::Map::new(),
            verdicts: Vec::new(),
            all_pass: true,
            series: Vec::new(),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
        self.records.insert(key.into(), v);
        Ok(())
    }

    fn verdict(&mut self, v: Verdict) {
        self.all_pass &= v.pass;
        self.verdicts.push(v);
    }

    pub fn verdict_named(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Run `e` on `config`. A `name` in the config must agree with `e`.
pub fn run(e: Experiment, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if let Some(name) = &config.experiment.name {
        if Experiment::from_name(name) != Some(e) {
            return Err(Error::Config(format!(
                "config is for experiment `{name}`, not `{}`",
                e.name()
            )));
        }
    }
    match e {
        Experiment::Spectrum => run_spectrum(config),
        Experiment::Bunching => run_bunching(config),
        Experiment::Holonomy => run_holonomy_validation(config),
        Experiment::ThetaScan => run_theta_scan(config),
        Experiment::SuBreaking => run_su_breaking(config),
        Experiment::Openness => run_openness(config),
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_recompute() {
        for (v, rel, t, pass) in [
            (1.0, Relation::Lt, 1.0, false),
            (1.0, Relation::Le, 1.0, true),
            (2.0, Relation::Gt, 1.0, true),
            (1.0, Relation::Ge, 1.5, false),
        ] {
            let verdict = Verdict::new("x", v, rel, t);
            assert_eq!(verdict.pass, pass);
            assert_eq!(verdict.recompute(), pass);
        }
        assert!(Verdict::flag("y", true).pass);
        assert!(!Verdict::flag("y", false).pass);
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()), Some(e));
            assert_eq!(Experiment::from_name(e.id()), Some(e));
        }
        assert_eq!(Experiment::from_name("nope"), None);
    }

    #[test]
    fn bunching_boundary_and_determinism() {
        let cfg = ExperimentConfig::from_toml("[experiment]\ns_step = 0.05\ncertificate_samples = 4\n").unwrap();
        let a = run(Experiment::Bunching, &cfg).unwrap();
        assert!(a.all_pass, "{:?}", a.verdicts);
        let b = run(Experiment::Bunching, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        for v in &a.verdicts {
            assert_eq!(v.recompute(), v.pass);
        }
    }

    #[test]
    fn mismatched_name_is_a_config_error() {
        let cfg = ExperimentConfig::from_toml("[experiment]\nname = \"spectrum\"\n").unwrap();
        assert!(matches!(run(Experiment::Bunching, &cfg), Err(Error::Config(_))));
    }
}
