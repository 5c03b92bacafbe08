//! Instance generation, paired trials and aggregation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::algorithms::{Algorithm, Output, Problem};
use super::config::{Ensemble, ExperimentConfig, Placement, PointParams, SweepVariable, DEFAULT_DR_CAP};
use super::{trial_seed, RunOptions};
use crate::coherence::{BandIndex, BandPolicy};
use crate::error::{Error, Result};
use crate::metrics::{relative_error, score_trial, TrialOutcome, Truth};
use crate::models::{
    frame_model, make_consecutive_objects, make_objects, make_offgrid_scene, measure, sample_times, spectral_matrix,
    spectral_matrix_from_times, synthesize_data, FrameModel, GridSpec, OffGridScene, SensingMatrix, SparseSignal,
};
use crate::numlin::{norm, sub, CVector, C64};
use crate::par;

/// RNG streams of one trial. Keeping them apart means, for example, that
/// sweeping `N` redraws the matrix but not the objects.
const STREAM_MATRIX: u64 = 0;
const STREAM_OBJECTS: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone)]
pub enum OwnedTruth {
    OnGrid(SparseSignal),
    OffGrid { scene: OffGridScene, nearest: SparseSignal },
}

impl OwnedTruth {
    pub fn as_truth(&self) -> Truth<'_> {
        match self {
            OwnedTruth::OnGrid(x) => Truth::OnGrid(x),
            OwnedTruth::OffGrid { scene, nearest } => Truth::OffGrid { scene, nearest },
        }
    }
}

/// One random problem shared by every algorithm of a trial.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: SensingMatrix,
    pub b: CVector,
    pub truth: OwnedTruth,
    pub sigma: f64,
    pub error_norm: f64,
    pub bands: BandIndex,
    pub frame: Option<FrameModel>,
    /// Frame ensemble only: the signal `y = Psi x`.
    pub y: Option<CVector>,
    /// `||d|| / ||b||` for off-grid scenes, 0 otherwise.
    pub rel_gridding_error: f64,
}

impl Instance {
    /// SHA-256 of the matrix and data, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for z in self.a.matrix.as_slice().iter().chain(&self.b) {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Band policy at a sweep point: consecutive placement replaces both radii
/// by half the spacing.
pub fn point_policy(cfg: &ExperimentConfig, p: &PointParams) -> BandPolicy {
    match cfg.placement {
        Placement::Consecutive => BandPolicy::FixedRadius {
            exclusion_rl: p.min_sep_rl / 2.0,
            local_rl: p.min_sep_rl / 2.0,
        },
        Placement::Separated => cfg.bands,
    }
}

/// Draws the instance of trial seed `seed` at sweep point `p`.
pub fn build_instance(cfg: &ExperimentConfig, p: &PointParams, seed: u64) -> Result<Instance> {
    let grid = GridSpec::new(p.f, p.r)?;
    let mut rm = rng(seed, STREAM_MATRIX);
    let mut ro = rng(seed, STREAM_OBJECTS);
    let mut rn = rng(seed, STREAM_NOISE);
    let place = |ro: &mut ChaCha8Rng| match cfg.placement {
        Placement::Separated => make_objects(p.s, p.dynamic_range, p.min_sep_rl, grid, ro),
        Placement::Consecutive => make_consecutive_objects(p.s, p.min_sep_rl, p.dynamic_range, grid, ro),
    };
    let (a, b, truth, sigma, error_norm, frame, y, rel_gridding_error) = match cfg.ensemble {
        Ensemble::Spectral => {
            let a = spectral_matrix(p.n, grid, &mut rm)?;
            let x = place(&mut ro)?;
            let m = measure(&a.matrix, &x, p.noise_level, &mut rn)?;
            let e = norm(&m.noise);
            (a, m.b, OwnedTruth::OnGrid(x), m.sigma, e, None, None, 0.0)
        }
        Ensemble::Frame => {
            let sigma_phi = cfg.frame_sigma.unwrap_or(1.0 / (p.n as f64).sqrt());
            let fm = frame_model(p.n, p.r, p.f, sigma_phi, &mut rm)?;
            let x = place(&mut ro)?;
            let m = measure(&fm.sensing.matrix, &x, p.noise_level, &mut rn)?;
            let y = fm.psi.combine(&x.support, &x.amplitudes);
            let e = norm(&m.noise);
            (fm.sensing.clone(), m.b, OwnedTruth::OnGrid(x), m.sigma, e, Some(fm), Some(y), 0.0)
        }
        Ensemble::Offgrid => {
            let times = sample_times(p.n, &mut rm);
            let a = spectral_matrix_from_times(times.clone(), grid)?;
            let scene = make_offgrid_scene(p.s, p.dynamic_range, p.min_sep_rl, p.r as f64, &mut ro)?;
            let data = synthesize_data(&scene, &times, grid, p.noise_level, &mut rn)?;
            let e = norm(&data.total_error());
            let g = data.relative_gridding_error();
            let truth = OwnedTruth::OffGrid {
                scene,
                nearest: data.x_nearest,
            };
            (a, data.b, truth, data.sigma, e, None, None, g)
        }
    };
    let bands = BandIndex::build(&a, point_policy(cfg, p))?;
    Ok(Instance {
        a,
        b,
        truth,
        sigma,
        error_norm,
        bands,
        frame,
        y,
        rel_gridding_error,
    })
}

/// One (trial, algorithm) result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub instance_hash: String,
    pub algorithm: String,
    pub outcome: TrialOutcome,
    pub rel_gridding_error: f64,
    pub converged: bool,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub algorithm: String,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_bottleneck_rl: f64,
    pub mean_rel_residual: f64,
    pub mean_rel_coeff_err: f64,
    pub mean_rel_signal_err: f64,
    pub mean_runtime_ms: f64,
    pub nonconverged: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSummary {
    pub sweep_value: f64,
    /// The configured value when the dynamic-range cap replaced it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requested_value: Option<f64>,
    pub params: PointParams,
    pub band_policy: BandPolicy,
    pub mean_rel_gridding_error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub algorithms: Vec<Algorithm>,
    pub points: Vec<PointSummary>,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
    /// `|Psi* y|` in descending order for the first frame instance.
    pub analysis_profile: Option<Vec<f64>>,
    pub timing: bool,
}

impl SweepResult {
    pub fn row(&self, sweep_index: usize, algorithm: Algorithm) -> Option<&SummaryRow> {
        let k = self.algorithms.iter().position(|a| *a == algorithm)?;
        self.rows.get(sweep_index * self.algorithms.len() + k)
    }

    /// Trial records of one algorithm at one sweep point, in trial order.
    pub fn trials_of(&self, sweep_index: usize, algorithm: Algorithm) -> Vec<&TrialRecord> {
        let name = algorithm.to_string();
        self.records
            .iter()
            .filter(|r| r.sweep_index == sweep_index && r.algorithm == name)
            .collect()
    }
}

/// Sweep points after the dynamic-range cap.
fn sweep_points(cfg: &ExperimentConfig, full_range: bool) -> Vec<(f64, Option<f64>, PointParams)> {
    let cap = |dr: f64| if full_range { dr } else { dr.min(DEFAULT_DR_CAP) };
    cfg.sweep
        .values
        .iter()
        .map(|&v| {
            let mut p = cfg.point(v);
            p.dynamic_range = cap(p.dynamic_range);
            let swept_dr = cfg.sweep.variable == SweepVariable::DynamicRange;
            let used = if swept_dr { p.dynamic_range } else { v };
            let requested = (used != v).then_some(v);
            (used, requested, p)
        })
        .collect()
}

fn score(inst: &Instance, out: &Output) -> TrialOutcome {
    let a = &inst.a.matrix;
    let mut outcome = match &out.signal {
        None => score_trial(inst.truth.as_truth(), &out.estimate, a, &inst.b),
        Some(signal) => {
            // a direct signal estimate has no support to score
            let fm = inst.frame.as_ref().expect("signal estimates come from the frame ensemble");
            let fit = fm.phi.matvec(signal).unwrap_or_default();
            TrialOutcome {
                bottleneck_rl: f64::INFINITY,
                success: false,
                rel_residual: norm(&sub(&fit, &inst.b)) / norm(&inst.b),
                rel_coeff_error: f64::NAN,
                rel_signal_error: f64::NAN,
            }
        }
    };
    if let (Some(y), Some(fm)) = (&inst.y, &inst.frame) {
        let y_hat = match &out.signal {
            Some(s) => s.clone(),
            None => fm.psi.combine(&out.estimate.support, &out.estimate.amplitudes),
        };
        outcome.rel_signal_error = relative_error(&y_hat, y);
    }
    outcome
}

struct TrialOutput {
    records: Vec<TrialRecord>,
    gridding: f64,
    profile: Option<Vec<f64>>,
}

fn run_trial(
    cfg: &ExperimentConfig,
    algos: &[Algorithm],
    point: (usize, f64, &PointParams),
    trial: usize,
    want_profile: bool,
) -> Result<TrialOutput> {
    let (sweep_index, sweep_value, p) = point;
    let seed = trial_seed(cfg.base_seed, trial);
    let context = |e: Error| match e {
        Error::Config { .. } => e,
        other => Error::Infeasible(format!(
            "{} = {sweep_value}, trial {trial} (seed {seed}): {other}",
            cfg.sweep.variable.name()
        )),
    };
    let inst = build_instance(cfg, p, seed).map_err(context)?;
    let hash = inst.hash();
    let problem = Problem {
        a: &inst.a,
        b: &inst.b,
        s: p.s,
        bands: &inst.bands,
        sigma: inst.sigma,
        error_norm: inst.error_norm,
        solver: &cfg.solver,
        frame: inst.frame.as_ref(),
    };
    let mut records = Vec::with_capacity(algos.len());
    for alg in algos {
        let t0 = Instant::now();
        let out = alg.run(&problem).map_err(|e| context(Error::Infeasible(format!("{alg}: {e}"))))?;
        let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
        records.push(TrialRecord {
            sweep_index,
            sweep_value,
            trial,
            seed,
            instance_hash: hash.clone(),
            algorithm: alg.to_string(),
            outcome: score(&inst, &out),
            rel_gridding_error: inst.rel_gridding_error,
            converged: out.converged,
            runtime_ms,
        });
    }
    let profile = match (&inst.frame, &inst.y) {
        (Some(fm), Some(y)) if want_profile => {
            let mut mags: Vec<f64> = fm.psi.adjoint_apply(y)?.iter().map(|c: &C64| c.norm()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            Some(mags)
        }
        _ => None,
    };
    Ok(TrialOutput {
        records,
        gridding: inst.rel_gridding_error,
        profile,
    })
}

fn mean(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    values.sum::<f64>() / count as f64
}

/// Runs every algorithm on every (sweep value, trial) instance.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    cfg.validate()?;
    let algos = cfg.parsed_algorithms()?;
    let points = sweep_points(cfg, opts.full_range);
    let trials = cfg.trials;
    let jobs = points.len() * trials;
    let outputs: Vec<Result<TrialOutput>> = par::with_workers(opts.workers, || {
        par::map_indexed(jobs, |job| {
            let (pi, trial) = (job / trials, job % trials);
            let (value, _, ref p) = points[pi];
            run_trial(cfg, &algos, (pi, value, p), trial, job == 0)
        })
    });
    let outputs: Vec<TrialOutput> = outputs.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len() * algos.len());
    let mut summaries = Vec::with_capacity(points.len());
    for (pi, (value, requested, p)) in points.iter().enumerate() {
        let chunk = &outputs[pi * trials..(pi + 1) * trials];
        summaries.push(PointSummary {
            sweep_value: *value,
            requested_value: *requested,
            params: *p,
            band_policy: point_policy(cfg, p),
            mean_rel_gridding_error: mean(chunk.iter().map(|t| t.gridding), trials),
        });
        for (k, alg) in algos.iter().enumerate() {
            let recs: Vec<&TrialRecord> = chunk.iter().map(|t| &t.records[k]).collect();
            let o = |f: fn(&TrialOutcome) -> f64| mean(recs.iter().map(|r| f(&r.outcome)), trials);
            rows.push(SummaryRow {
                sweep_var: cfg.sweep.variable.name().to_string(),
                sweep_value: *value,
                algorithm: alg.to_string(),
                trials,
                success_rate: recs.iter().filter(|r| r.outcome.success).count() as f64 / trials as f64,
                mean_bottleneck_rl: o(|t| t.bottleneck_rl),
                mean_rel_residual: o(|t| t.rel_residual),
                mean_rel_coeff_err: o(|t| t.rel_coeff_error),
                mean_rel_signal_err: o(|t| t.rel_signal_error),
                mean_runtime_ms: if opts.timing {
                    mean(recs.iter().map(|r| r.runtime_ms), trials)
                } else {
                    f64::NAN
                },
                nonconverged: recs.iter().filter(|r| !r.converged).count(),
                base_seed: cfg.base_seed,
            });
        }
    }
    let analysis_profile = outputs.first().and_then(|t| t.profile.clone());
    let records = outputs.into_iter().flat_map(|t| t.records).collect();
    Ok(SweepResult {
        config: cfg.clone(),
        algorithms: algos,
        points: summaries,
        rows,
        records,
        analysis_profile,
        timing: opts.timing,
    })
}

/// The resolution study: equally spaced objects, spacing swept, band radii
/// tied to the spacing.
pub fn run_resolution_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    if cfg.placement != Placement::Consecutive {
        return Err(Error::config("placement", "the resolution experiment uses consecutive placement"));
    }
    if cfg.sweep.variable != SweepVariable::MinSepRl {
        return Err(Error::config("sweep.variable", "the resolution experiment sweeps min_sep_rl"));
    }
    run_sweep(cfg, opts)
}

/// Sweeps on the frame ensemble; every row carries the relative signal
/// error `||y_hat - y|| / ||y||`.
pub fn run_frame_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    if cfg.ensemble != Ensemble::Frame {
        return Err(Error::config("ensemble", "the frame experiment needs the frame ensemble"));
    }
    run_sweep(cfg, opts)
}
