//! Experiment configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::algorithms::Algorithm;
use crate::coherence::BandPolicy;
use crate::error::{Error, Result};
use crate::models::EDGE_MARGIN_RL;

/// Noiseless runs above this dynamic range lose most of their digits to
/// rounding; sweeps are capped here unless full range is requested.
pub const DEFAULT_DR_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Random time samples, objects on the grid.
    Spectral,
    /// Gaussian measurements of a redundant DFT frame expansion.
    Frame,
    /// Random time samples, objects at continuous frequencies.
    Offgrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Random positions at least `min_sep_rl` apart.
    Separated,
    /// Equally spaced by `min_sep_rl` with a random global shift. Band
    /// radii become half the spacing.
    Consecutive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    DynamicRange,
    NoiseLevel,
    #[serde(rename = "N")]
    N,
    MinSepRl,
    #[serde(rename = "F")]
    F,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::DynamicRange => "dynamic_range",
            SweepVariable::NoiseLevel => "noise_level",
            SweepVariable::N => "N",
            SweepVariable::MinSepRl => "min_sep_rl",
            SweepVariable::F => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Iteration limits and tolerances of the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub lasso_tol: f64,
    pub lasso_max_iters: usize,
    pub admm_tol: f64,
    pub admm_max_iters: usize,
    /// Pursuit stopping tolerance relative to `||b||`.
    pub pursuit_eps_rel: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            lasso_tol: 1e-10,
            lasso_max_iters: 20_000,
            admm_tol: 1e-8,
            admm_max_iters: 20_000,
            pursuit_eps_rel: 1e-6,
        }
    }
}

fn default_placement() -> Placement {
    Placement::Separated
}

fn default_bands() -> BandPolicy {
    BandPolicy::CoherenceThreshold { eta: 0.3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub ensemble: Ensemble,
    /// Number of measurements.
    #[serde(rename = "N")]
    pub n: usize,
    /// Window length in RL.
    #[serde(rename = "R")]
    pub r: usize,
    /// Grid refinement factor.
    #[serde(rename = "F")]
    pub f: usize,
    pub s: usize,
    pub min_sep_rl: f64,
    pub dynamic_range: f64,
    pub noise_level: f64,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    #[serde(default = "default_bands")]
    pub bands: BandPolicy,
    pub algorithms: Vec<String>,
    pub sweep: Sweep,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Entry standard deviation of the frame ensemble's Gaussian matrix;
    /// `1/sqrt(N)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_sigma: Option<f64>,
}

/// Parameters of a single sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub n: usize,
    pub r: usize,
    pub f: usize,
    pub s: usize,
    pub min_sep_rl: f64,
    pub dynamic_range: f64,
    pub noise_level: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            // serde names unknown and missing fields in its message
            Error::config(json_field_hint(&e.to_string()), e.to_string())
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parsed_algorithms(&self) -> Result<Vec<Algorithm>> {
        self.algorithms
            .iter()
            .enumerate()
            .map(|(i, name)| {
                name.parse::<Algorithm>()
                    .map_err(|reason| Error::config(format!("algorithms[{i}]"), reason))
            })
            .collect()
    }

    /// Parameters at sweep value `v`, before any dynamic-range cap.
    pub fn point(&self, v: f64) -> PointParams {
        let mut p = PointParams {
            n: self.n,
            r: self.r,
            f: self.f,
            s: self.s,
            min_sep_rl: self.min_sep_rl,
            dynamic_range: self.dynamic_range,
            noise_level: self.noise_level,
        };
        match self.sweep.variable {
            SweepVariable::DynamicRange => p.dynamic_range = v,
            SweepVariable::NoiseLevel => p.noise_level = v,
            SweepVariable::N => p.n = v as usize,
            SweepVariable::MinSepRl => p.min_sep_rl = v,
            SweepVariable::F => p.f = v as usize,
        }
        p
    }

    /// Checks everything that can be checked without drawing an instance.
    pub fn validate(&self) -> Result<()> {
        let algos = self.parsed_algorithms()?;
        if algos.is_empty() {
            return Err(Error::config("algorithms", "list at least one algorithm"));
        }
        for (i, a) in algos.iter().enumerate() {
            if a.needs_frame() && self.ensemble != Ensemble::Frame {
                return Err(Error::config(
                    format!("algorithms[{i}]"),
                    format!("{a} needs the frame ensemble"),
                ));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        if let Some(sigma) = self.frame_sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::config("frame_sigma", "must be positive and finite"));
            }
        }
        self.bands
            .validate()
            .map_err(|e| Error::config("bands", e.to_string()))?;
        let st = &self.solver;
        for (field, v) in [
            ("solver.lasso_tol", st.lasso_tol),
            ("solver.admm_tol", st.admm_tol),
            ("solver.pursuit_eps_rel", st.pursuit_eps_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and non-negative"));
            }
        }
        if st.lasso_max_iters == 0 || st.admm_max_iters == 0 {
            return Err(Error::config("solver", "iteration limits must be positive"));
        }
        for (i, &v) in self.sweep.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::config(format!("sweep.values[{i}]"), "must be finite"));
            }
            let integral = matches!(self.sweep.variable, SweepVariable::N | SweepVariable::F);
            if integral && (v < 1.0 || v.fract() != 0.0) {
                return Err(Error::config(
                    format!("sweep.values[{i}]"),
                    format!("{} must be a positive integer, got {v}", self.sweep.variable.name()),
                ));
            }
            self.validate_point(&self.point(v))
                .map_err(|e| match e {
                    Error::Config { field, reason } if self.swept(&field) => Error::Config {
                        field: format!("sweep.values[{i}]"),
                        reason: format!("{field}: {reason}"),
                    },
                    other => other,
                })?;
        }
        Ok(())
    }

    fn swept(&self, field: &str) -> bool {
        field == self.sweep.variable.name()
    }

    fn validate_point(&self, p: &PointParams) -> Result<()> {
        if p.n == 0 {
            return Err(Error::config("N", "must be positive"));
        }
        if p.r == 0 {
            return Err(Error::config("R", "must be positive"));
        }
        if p.f == 0 {
            return Err(Error::config("F", "must be positive"));
        }
        if p.s == 0 {
            return Err(Error::config("s", "must be positive"));
        }
        if !(p.dynamic_range >= 1.0 && p.dynamic_range.is_finite()) {
            return Err(Error::config("dynamic_range", "must be finite and >= 1"));
        }
        if p.s == 1 && p.dynamic_range != 1.0 {
            return Err(Error::config("dynamic_range", "a single object has dynamic range 1"));
        }
        if !(p.noise_level >= 0.0 && p.noise_level.is_finite()) {
            return Err(Error::config("noise_level", "must be finite and non-negative"));
        }
        if !(p.min_sep_rl > 0.0 && p.min_sep_rl.is_finite()) {
            return Err(Error::config("min_sep_rl", "must be positive and finite"));
        }
        let span = p.r as f64;
        let extent = (p.s - 1) as f64 * p.min_sep_rl;
        match self.placement {
            Placement::Separated => {
                let usable = if self.ensemble == Ensemble::Offgrid {
                    span - 2.0 * EDGE_MARGIN_RL
                } else {
                    span - 1.0 / p.f as f64
                };
                if extent > usable {
                    return Err(Error::config(
                        "min_sep_rl",
                        format!("{} objects {} RL apart do not fit in {span} RL", p.s, p.min_sep_rl),
                    ));
                }
                if self.ensemble == Ensemble::Offgrid && p.min_sep_rl <= 1.0 / p.f as f64 {
                    return Err(Error::config(
                        "min_sep_rl",
                        "off-grid objects must be more than one grid step apart",
                    ));
                }
            }
            Placement::Consecutive => {
                if self.ensemble == Ensemble::Offgrid {
                    return Err(Error::config("placement", "consecutive placement needs on-grid objects"));
                }
                let steps = p.min_sep_rl * p.f as f64;
                if p.min_sep_rl <= 1.0 / p.f as f64 {
                    return Err(Error::config(
                        "min_sep_rl",
                        format!("spacing {} RL is not above the grid spacing", p.min_sep_rl),
                    ));
                }
                if (steps - steps.round()).abs() > 1e-9 {
                    return Err(Error::config("min_sep_rl", "spacing must be a whole number of grid steps"));
                }
                if extent >= span {
                    return Err(Error::config("min_sep_rl", "consecutive objects do not fit in the window"));
                }
            }
        }
        Ok(())
    }
}

/// Best-effort field name from a serde_json error message.
fn json_field_hint(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<document>".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
            "name": "t", "ensemble": "spectral", "N": 50, "R": 60, "F": 10,
            "s": 3, "min_sep_rl": 3.0, "dynamic_range": 1.0, "noise_level": 0.0,
            "algorithms": ["OMP", "BLOOMP"],
            "sweep": {"variable": "dynamic_range", "values": [1, 10]},
            "trials": 2, "base_seed": 1
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = sample();
        assert_eq!(cfg.placement, Placement::Separated);
        assert_eq!(cfg.bands, BandPolicy::CoherenceThreshold { eta: 0.3 });
        assert_eq!(cfg.solver, SolverSettings::default());
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = sample();
        cfg.algorithms.push("NOPE".into());
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "algorithms[2]"),
            other => panic!("{other:?}"),
        }
        let mut cfg = sample();
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "trials"));

        let mut cfg = sample();
        cfg.sweep.values = vec![1.0, 0.5];
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "sweep.values[1]"));

        let err = ExperimentConfig::from_json(r#"{"name": "x", "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Config { field, .. } if field == "bogus"));
    }

    #[test]
    fn resolution_spacing_must_be_representable() {
        let mut cfg = sample();
        cfg.placement = Placement::Consecutive;
        cfg.sweep = Sweep {
            variable: SweepVariable::MinSepRl,
            values: vec![0.3, 0.05],
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "sweep.values[1]"));
        cfg.sweep.values = vec![0.4];
        assert!(cfg.validate().is_ok());
        cfg.sweep.values = vec![0.33];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_only_algorithms_are_rejected_elsewhere() {
        let mut cfg = sample();
        cfg.algorithms = vec!["ABP".into()];
        assert!(cfg.validate().is_err());
        cfg.ensemble = Ensemble::Frame;
        assert!(cfg.validate().is_ok());
    }
}
