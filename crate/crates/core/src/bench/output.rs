//! CSV and JSON emission. Floats are written with 17 significant digits so
//! identical runs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{Ensemble, ExperimentConfig};
use super::sweep::{build_instance, SweepResult};
use super::trial_seed;
use crate::coherence::{pairwise_coherence, shift_coherence_profile};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 11] = [
    "sweep_var",
    "sweep_value",
    "algorithm",
    "trials",
    "success_rate",
    "mean_bottleneck_rl",
    "mean_rel_residual",
    "mean_rel_coeff_err",
    "mean_rel_signal_err",
    "mean_runtime_ms",
    "base_seed",
];

pub const TRIALS_HEADER: [&str; 14] = [
    "sweep_var",
    "sweep_value",
    "trial",
    "seed",
    "instance_hash",
    "algorithm",
    "success",
    "bottleneck_rl",
    "rel_residual",
    "rel_coeff_err",
    "rel_signal_err",
    "rel_gridding_err",
    "converged",
    "runtime_ms",
];

/// `{:.16e}` with `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

impl SweepResult {
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUMMARY_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.sweep_var.clone(),
                fmt_f64(r.sweep_value),
                r.algorithm.clone(),
                r.trials.to_string(),
                fmt_f64(r.success_rate),
                fmt_f64(r.mean_bottleneck_rl),
                fmt_f64(r.mean_rel_residual),
                fmt_f64(r.mean_rel_coeff_err),
                fmt_f64(r.mean_rel_signal_err),
                fmt_f64(r.mean_runtime_ms),
                r.base_seed.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<summary csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRIALS_HEADER)?;
        let var = self.config.sweep.variable.name();
        for r in &self.records {
            let o = &r.outcome;
            out.write_record([
                var.to_string(),
                fmt_f64(r.sweep_value),
                r.trial.to_string(),
                r.seed.to_string(),
                r.instance_hash.clone(),
                r.algorithm.clone(),
                o.success.to_string(),
                fmt_f64(o.bottleneck_rl),
                fmt_f64(o.rel_residual),
                fmt_f64(o.rel_coeff_error),
                fmt_f64(o.rel_signal_error),
                fmt_f64(r.rel_gridding_error),
                r.converged.to_string(),
                fmt_f64(if self.timing { r.runtime_ms } else { f64::NAN }),
            ])?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<trials csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    /// Run metadata: the effective config, library version, per-point
    /// parameters and solver convergence counts.
    pub fn meta_json(&self) -> serde_json::Value {
        let nonconverged: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.nonconverged > 0)
            .map(|r| json!({"sweep_value": r.sweep_value, "algorithm": r.algorithm, "trials": r.nonconverged}))
            .collect();
        let mut meta = json!({
            "library": "bandex",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "seed_mixing": "trial seed = splitmix64(base_seed ^ splitmix64(trial)); ChaCha8 streams 0 matrix, 1 objects, 2 noise",
            "timing": self.timing,
            "points": self.points,
            "nonconverged": nonconverged,
        });
        if let Some(profile) = &self.analysis_profile {
            let max = profile.first().copied().unwrap_or(0.0);
            let significant = profile.iter().filter(|&&m| m > 0.01 * max).count();
            meta["analysis_coefficients_above_1pct"] = json!(significant);
        }
        meta
    }

    /// Writes `<stem>.csv`, `<stem>.trials.csv`, `<stem>.meta.json` and, for
    /// frame runs, `<stem>.analysis_profile.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();
        let summary = dir.join(format!("{stem}.csv"));
        self.write_summary_csv(fs::File::create(&summary).map_err(io_err(&summary))?)?;
        written.push(summary);
        let trials = dir.join(format!("{stem}.trials.csv"));
        self.write_trials_csv(fs::File::create(&trials).map_err(io_err(&trials))?)?;
        written.push(trials);
        let meta = dir.join(format!("{stem}.meta.json"));
        let text = serde_json::to_string_pretty(&self.meta_json())? + "\n";
        fs::write(&meta, text).map_err(io_err(&meta))?;
        written.push(meta);
        if let Some(profile) = &self.analysis_profile {
            let path = dir.join(format!("{stem}.analysis_profile.csv"));
            let mut out = csv::Writer::from_writer(fs::File::create(&path).map_err(io_err(&path))?);
            out.write_record(["rank", "magnitude"])?;
            for (i, m) in profile.iter().enumerate() {
                out.write_record([(i + 1).to_string(), fmt_f64(*m)])?;
            }
            out.flush().map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Coherence between a reference column and every other column of the
/// first instance of a config, against separation in RL.
///
/// Time-sample ensembles have a shift-invariant Gram matrix, so the profile
/// is one row of it; the frame ensemble uses the middle column.
pub fn coherence_profile(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let p = cfg.point(cfg.sweep.values[0]);
    let inst = build_instance(cfg, &p, trial_seed(cfg.base_seed, 0))?;
    let m = inst.a.matrix.cols();
    let step = 1.0 / p.f as f64;
    match (cfg.ensemble, inst.a.times()) {
        (Ensemble::Spectral | Ensemble::Offgrid, Some(times)) => Ok(shift_coherence_profile(times, p.f, m)
            .into_iter()
            .enumerate()
            .map(|(lag, c)| (lag as f64 * step, c))
            .collect()),
        _ => {
            let center = m / 2;
            (0..m)
                .map(|j| {
                    let c = pairwise_coherence(&inst.a.matrix, center, j)?;
                    Ok(((j as f64 - center as f64) * step, c))
                })
                .collect()
        }
    }
}

pub fn write_coherence_csv(profile: &[(f64, f64)], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut out = csv::Writer::from_writer(fs::File::create(path).map_err(io_err(path))?);
    out.write_record(["separation_rl", "coherence"])?;
    for (sep, c) in profile {
        out.write_record([fmt_f64(*sep), fmt_f64(*c)])?;
    }
    out.flush().map_err(io_err(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}
