//! Scenario files: a JSON document describing one experiment.

use std::path::{Path, PathBuf};

use predmarket::simulation::grid;
use predmarket::{SimConfig, SweepParameter, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Independent replicate runs of one configuration.
    #[default]
    Trajectory,
    /// A one-parameter grid sweep.
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    /// Explicit grid values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// Evenly spaced grid, used when `values` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<GridRange>,
}

impl SweepSection {
    pub fn spec(&self) -> Result<SweepSpec, CliError> {
        let values = match (&self.values[..], &self.range) {
            ([], Some(r)) => {
                if !(r.step > 0.0) || r.stop < r.start {
                    return Err(CliError::Config(
                        "sweep.range: need step > 0 and stop >= start".into(),
                    ));
                }
                grid(r.start, r.stop, r.step)
            }
            ([], None) => {
                return Err(CliError::Config(
                    "sweep: give either `values` or `range`".into(),
                ))
            }
            (v, None) => v.to_vec(),
            (_, Some(_)) => {
                return Err(CliError::Config(
                    "sweep: `values` and `range` are mutually exclusive".into(),
                ))
            }
        };
        Ok(SweepSpec {
            parameter: self.parameter,
            values,
        })
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.simulation.validate()?;
        if self.replications == 0 {
            return Err(CliError::Config("replications: must be at least 1".into()));
        }
        match (self.experiment, &self.sweep) {
            (ExperimentKind::Sweep, None) => Err(CliError::Config(
                "sweep: required when experiment is `sweep`".into(),
            )),
            (ExperimentKind::Sweep, Some(s)) => {
                let spec = s.spec()?;
                for v in &spec.values {
                    spec.parameter.apply(&self.simulation, *v)?;
                }
                Ok(())
            }
            (ExperimentKind::Trajectory, Some(_)) => Err(CliError::Config(
                "sweep: only allowed when experiment is `sweep`".into(),
            )),
            (ExperimentKind::Trajectory, None) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_trajectory() {
        let s = Scenario::from_json("{}").unwrap();
        assert_eq!(s.simulation, SimConfig::default());
        assert_eq!(s.experiment, ExperimentKind::Trajectory);
        assert_eq!(s.replications, 1);
        assert!(s.plots);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Scenario::from_json(r#"{"simulation": {"n_agent": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("n_agent"), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert!(Scenario::from_json(r#"{"plot": false}"#).is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = Scenario::from_json(r#"{"simulation": {"lambda": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn sweep_ranges() {
        let s = Scenario::from_json(
            r#"{"experiment": "sweep", "sweep": {"parameter": "expertise", "range": {"start": 0.5, "stop": 1.0, "step": 0.25}}}"#,
        )
        .unwrap();
        assert_eq!(
            s.sweep.unwrap().spec().unwrap().values,
            vec![0.5, 0.75, 1.0]
        );
        assert!(Scenario::from_json(r#"{"experiment": "sweep"}"#).is_err());
        assert!(Scenario::from_json(
            r#"{"experiment": "sweep", "sweep": {"parameter": "rho", "values": [1.5]}}"#
        )
        .is_err());
    }

    #[test]
    fn book_example_parses() {
        let chapter = include_str!("../../../book/src/cli.md");
        let body = chapter
            .split("```json")
            .nth(1)
            .unwrap()
            .split("```")
            .next()
            .unwrap();
        let s = Scenario::from_json(body).unwrap();
        assert_eq!(s.sweep.unwrap().spec().unwrap().values.len(), 5);
        assert_eq!(s.simulation.whale.unwrap().budget_fraction, 0.3);
    }
}
