//! Sensing ensembles and synthetic test objects.
//!
//! Frequencies are measured in Rayleigh lengths (RL). A grid with refinement
//! factor `F` over a window of `R` RL has `M = R F` points `p_l = l / F`,
//! `l = 0..M`, so adjacent grid points are `1/F` RL apart.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{norm, scale, CMatrix, CVector, C64, ZERO};

/// Rejection-sampling budget for object placement.
const PLACEMENT_RESTARTS: usize = 200;
const PLACEMENT_TRIES: usize = 2000;

/// Off-grid frequencies stay this far (RL) from either end of the window.
pub const EDGE_MARGIN_RL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid points per Rayleigh length.
    pub refinement: usize,
    /// Window length in Rayleigh lengths.
    pub span_rl: usize,
}

impl GridSpec {
    pub fn new(refinement: usize, span_rl: usize) -> Result<Self> {
        if refinement == 0 {
            return Err(Error::param("refinement", "must be positive"));
        }
        if span_rl == 0 {
            return Err(Error::param("span_rl", "must be positive"));
        }
        Ok(Self { refinement, span_rl })
    }

    pub fn columns(&self) -> usize {
        self.refinement * self.span_rl
    }

    pub fn spacing_rl(&self) -> f64 {
        1.0 / self.refinement as f64
    }

    /// Location of column `l` in RL.
    pub fn position_rl(&self, l: usize) -> f64 {
        l as f64 / self.refinement as f64
    }

    pub fn nearest_index(&self, freq_rl: f64) -> Option<usize> {
        let l = (freq_rl * self.refinement as f64).round();
        (l >= 0.0 && (l as usize) < self.columns()).then_some(l as usize)
    }

    /// Smallest whole number of grid steps covering `dist_rl`.
    pub fn steps_for(&self, dist_rl: f64) -> usize {
        (dist_rl * self.refinement as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// A sparse vector on a grid. Truth objects built by the generators have
/// nonzero amplitudes; estimates may carry zeros produced by a refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    pub support: Vec<usize>,
    pub amplitudes: Vec<C64>,
    pub grid: GridSpec,
}

impl SparseSignal {
    /// Validated constructor: strictly increasing support, nonzero finite
    /// amplitudes.
    pub fn new(support: Vec<usize>, amplitudes: Vec<C64>, grid: GridSpec) -> Result<Self> {
        if support.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                op: "SparseSignal::new",
                expected: support.len(),
                found: amplitudes.len(),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("support", "must be strictly increasing"));
        }
        if support.last().is_some_and(|&l| l >= grid.columns()) {
            return Err(Error::param("support", "index outside the grid"));
        }
        if amplitudes.iter().any(|a| *a == ZERO || !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::param("amplitudes", "must be nonzero and finite"));
        }
        Ok(Self {
            support,
            amplitudes,
            grid,
        })
    }

    /// Builds an estimate from (index, amplitude) pairs in any order.
    pub fn from_pairs(mut pairs: Vec<(usize, C64)>, grid: GridSpec) -> Self {
        pairs.sort_by_key(|p| p.0);
        let (support, amplitudes) = pairs.into_iter().unzip();
        Self {
            support,
            amplitudes,
            grid,
        }
    }

    /// Keeps the nonzero entries of a dense coefficient vector.
    pub fn from_dense(x: &[C64], grid: GridSpec) -> Self {
        let pairs = x.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(i, v)| (i, *v)).collect();
        Self::from_pairs(pairs, grid)
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self {
            support: Vec::new(),
            amplitudes: Vec::new(),
            grid,
        }
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn x_max(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn x_min(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn dynamic_range(&self) -> f64 {
        self.x_max() / self.x_min()
    }

    pub fn to_dense(&self) -> CVector {
        let mut x = vec![ZERO; self.grid.columns()];
        for (&l, &a) in self.support.iter().zip(&self.amplitudes) {
            x[l] = a;
        }
        x
    }

    pub fn positions_rl(&self) -> Vec<f64> {
        self.support.iter().map(|&l| self.grid.position_rl(l)).collect()
    }
}

/// Continuous-frequency scene `y(t) = sum_j c_j exp(-2 pi i omega_j t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffGridScene {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

impl OffGridScene {
    pub fn min_separation(&self) -> f64 {
        let mut f = self.frequencies.clone();
        f.sort_by(f64::total_cmp);
        f.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Structure the generator knows about, exploited when building bands.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// `A_{k,l} = exp(-2 pi i xi_k p_l) / sqrt(N)`: the Gram matrix depends
    /// only on `l - l'`.
    ShiftInvariant { times: Vec<f64> },
    General,
}

#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub matrix: CMatrix,
    pub grid: GridSpec,
    pub structure: Structure,
}

impl SensingMatrix {
    pub fn general(matrix: CMatrix, grid: GridSpec) -> Result<Self> {
        if matrix.cols() != grid.columns() {
            return Err(Error::DimensionMismatch {
                op: "SensingMatrix::general",
                expected: grid.columns(),
                found: matrix.cols(),
            });
        }
        Ok(Self {
            matrix,
            grid,
            structure: Structure::General,
        })
    }

    pub fn times(&self) -> Option<&[f64]> {
        match &self.structure {
            Structure::ShiftInvariant { times } => Some(times),
            Structure::General => None,
        }
    }
}

/// `exp(-2 pi i xi_k p) / sqrt(N)` for every sample time.
pub fn spectral_column(times: &[f64], freq_rl: f64) -> CVector {
    let amp = 1.0 / (times.len() as f64).sqrt();
    times.iter().map(|&t| C64::from_polar(amp, -TAU * t * freq_rl)).collect()
}

/// Spectral ensemble on explicit sample times.
pub fn spectral_matrix_from_times(times: Vec<f64>, grid: GridSpec) -> Result<SensingMatrix> {
    if times.is_empty() {
        return Err(Error::param("N", "need at least one sample"));
    }
    let n = times.len();
    let amp = 1.0 / (n as f64).sqrt();
    let f = grid.refinement as f64;
    let matrix = CMatrix::from_fn(n, grid.columns(), |k, l| C64::from_polar(amp, -TAU * (l as f64) * times[k] / f));
    Ok(SensingMatrix {
        matrix,
        grid,
        structure: Structure::ShiftInvariant { times },
    })
}

/// Draws `N` sample times i.i.d. uniform on `(0, 1)`.
pub fn sample_times<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let t: f64 = rng.random();
            if t > 0.0 {
                break t;
            }
        })
        .collect()
}

/// The `N x RF` random partial Fourier ensemble on a refined grid.
pub fn spectral_matrix<R: Rng + ?Sized>(n: usize, grid: GridSpec, rng: &mut R) -> Result<SensingMatrix> {
    if n == 0 {
        return Err(Error::param("N", "need at least one sample"));
    }
    spectral_matrix_from_times(sample_times(n, rng), grid)
}

/// Gaussian measurements of a signal synthesized by a redundant DFT frame.
#[derive(Debug, Clone)]
pub struct FrameModel {
    /// `N x R` Gaussian measurement matrix.
    pub phi: CMatrix,
    /// `R x RF` frame, `Psi_{k,j} = exp(-2 pi i k j / (RF)) / sqrt(R)`.
    pub psi: CMatrix,
    /// `Phi Psi` with the coefficient grid attached.
    pub sensing: SensingMatrix,
}

pub fn dft_frame(span_rl: usize, refinement: usize) -> CMatrix {
    let m = span_rl * refinement;
    let amp = 1.0 / (span_rl as f64).sqrt();
    CMatrix::from_fn(span_rl, m, |k, j| {
        // reduce k*j mod M first so the phase stays small
        let e = (k * j) % m;
        C64::from_polar(amp, -TAU * e as f64 / m as f64)
    })
}

pub fn frame_model<R: Rng + ?Sized>(n: usize, span_rl: usize, refinement: usize, sigma: f64, rng: &mut R) -> Result<FrameModel> {
    if n == 0 {
        return Err(Error::param("N", "must be positive"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    let grid = GridSpec::new(refinement, span_rl)?;
    let phi = CMatrix::from_fn(n, span_rl, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        C64::new(sigma * g, 0.0)
    });
    let psi = dft_frame(span_rl, refinement);
    let a = phi.matmul(&psi)?;
    Ok(FrameModel {
        phi,
        psi,
        sensing: SensingMatrix::general(a, grid)?,
    })
}

/// Magnitudes for `s` objects of dynamic range `dr`: one at 1, one at `dr`,
/// the rest log-uniform in between, in random order.
fn magnitudes<R: Rng + ?Sized>(s: usize, dr: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(dr >= 1.0) || !dr.is_finite() {
        return Err(Error::param("dynamic_range", format!("must be finite and >= 1, got {dr}")));
    }
    if s == 1 {
        if dr != 1.0 {
            return Err(Error::param("dynamic_range", "a single object has dynamic range 1"));
        }
        return Ok(vec![1.0]);
    }
    let log_dr = dr.ln();
    let mut mags = vec![1.0, dr];
    for _ in 2..s {
        let u: f64 = rng.random();
        mags.push((u * log_dr).exp());
    }
    mags.shuffle(rng);
    Ok(mags)
}

fn random_amplitudes<R: Rng + ?Sized>(s: usize, dr: f64, rng: &mut R) -> Result<Vec<C64>> {
    let mags = magnitudes(s, dr, rng)?;
    Ok(mags
        .into_iter()
        .map(|m| {
            let phase: f64 = rng.random_range(0.0..TAU);
            C64::from_polar(m, phase)
        })
        .collect())
}

/// Rejection sampling of `s` points with pairwise distance `>= gap`, drawn by
/// `draw`. Returns `None` when the budget runs out.
fn place<R: Rng + ?Sized, T: Copy>(
    s: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> T,
    far_enough: impl Fn(T, T) -> bool,
) -> Option<Vec<T>> {
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        let mut placed: Vec<T> = Vec::with_capacity(s);
        while placed.len() < s {
            let mut accepted = false;
            for _ in 0..PLACEMENT_TRIES {
                let cand = draw(rng);
                if placed.iter().all(|&p| far_enough(p, cand)) {
                    placed.push(cand);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                continue 'restart;
            }
        }
        return Some(placed);
    }
    None
}

/// `s` randomly phased objects on the grid, pairwise at least `min_sep_rl`
/// apart, with dynamic range exactly `dr`.
pub fn make_objects<R: Rng + ?Sized>(s: usize, dr: f64, min_sep_rl: f64, grid: GridSpec, rng: &mut R) -> Result<SparseSignal> {
    if s == 0 {
        return Err(Error::param("s", "must be positive"));
    }
    if !(min_sep_rl >= 0.0) {
        return Err(Error::param("min_sep_rl", "must be non-negative"));
    }
    if s as f64 * min_sep_rl >= grid.span_rl as f64 {
        return Err(Error::Infeasible(format!(
            "{s} objects {min_sep_rl} RL apart do not fit in {} RL",
            grid.span_rl
        )));
    }
    let gap = grid.steps_for(min_sep_rl);
    let m = grid.columns();
    let support = place(s, rng, |r| r.random_range(0..m), |a: usize, b: usize| a.abs_diff(b) >= gap.max(1))
        .ok_or_else(|| Error::Infeasible(format!("could not place {s} objects {min_sep_rl} RL apart")))?;
    let amps = random_amplitudes(s, dr, rng)?;
    let pairs = support.into_iter().zip(amps).collect();
    let sig = SparseSignal::from_pairs(pairs, grid);
    SparseSignal::new(sig.support, sig.amplitudes, grid)
}

/// `s` objects at consecutive grid positions spaced `spacing_rl` apart,
/// shifted uniformly at random inside the window.
pub fn make_consecutive_objects<R: Rng + ?Sized>(s: usize, spacing_rl: f64, dr: f64, grid: GridSpec, rng: &mut R) -> Result<SparseSignal> {
    if s == 0 {
        return Err(Error::param("s", "must be positive"));
    }
    if !(spacing_rl > grid.spacing_rl()) {
        return Err(Error::param(
            "spacing_rl",
            format!("{spacing_rl} RL is not above the grid spacing {} RL", grid.spacing_rl()),
        ));
    }
    let steps_f = spacing_rl * grid.refinement as f64;
    let step = steps_f.round() as usize;
    if (steps_f - step as f64).abs() > 1e-9 {
        return Err(Error::param("spacing_rl", "must be a whole number of grid steps"));
    }
    let extent = (s - 1) * step;
    if extent >= grid.columns() {
        return Err(Error::Infeasible("consecutive objects do not fit in the window".into()));
    }
    let start = rng.random_range(0..grid.columns() - extent);
    let amps = random_amplitudes(s, dr, rng)?;
    SparseSignal::new((0..s).map(|j| start + j * step).collect(), amps, grid)
}

/// `s` objects at continuous frequencies in `[0.5, span - 0.5)` RL.
pub fn make_offgrid_scene<R: Rng + ?Sized>(s: usize, dr: f64, min_sep_rl: f64, span_rl: f64, rng: &mut R) -> Result<OffGridScene> {
    if s == 0 {
        return Err(Error::param("s", "must be positive"));
    }
    let lo = EDGE_MARGIN_RL;
    let hi = span_rl - EDGE_MARGIN_RL;
    if !(hi > lo) || s as f64 * min_sep_rl >= span_rl {
        return Err(Error::Infeasible(format!("{s} objects {min_sep_rl} RL apart do not fit in {span_rl} RL")));
    }
    let mut freqs = place(s, rng, |r| r.random_range(lo..hi), |a: f64, b: f64| (a - b).abs() >= min_sep_rl)
        .ok_or_else(|| Error::Infeasible(format!("could not place {s} frequencies {min_sep_rl} RL apart")))?;
    freqs.sort_by(f64::total_cmp);
    let amplitudes = random_amplitudes(s, dr, rng)?;
    Ok(OffGridScene {
        frequencies: freqs,
        amplitudes,
    })
}

/// Complex Gaussian noise with `||n|| = level * reference_norm` exactly.
/// Returns the noise and its per-component standard deviation.
pub fn relative_noise<R: Rng + ?Sized>(n: usize, level: f64, reference_norm: f64, rng: &mut R) -> Result<(CVector, f64)> {
    if !(level >= 0.0) {
        return Err(Error::param("noise_level", "must be non-negative"));
    }
    if level == 0.0 || reference_norm == 0.0 {
        return Ok((vec![ZERO; n], 0.0));
    }
    let mut noise: CVector = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let target = level * reference_norm;
    let current = norm(&noise);
    scale(&mut noise, target / current);
    Ok((noise, target / (n as f64).sqrt()))
}

/// Noisy data for a grid signal: `b = A x + n`.
#[derive(Debug, Clone)]
pub struct Measurements {
    pub b: CVector,
    pub clean: CVector,
    pub noise: CVector,
    /// Per-component noise standard deviation.
    pub sigma: f64,
}

pub fn measure<R: Rng + ?Sized>(a: &CMatrix, x: &SparseSignal, noise_level: f64, rng: &mut R) -> Result<Measurements> {
    if x.grid.columns() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "measure",
            expected: a.cols(),
            found: x.grid.columns(),
        });
    }
    let clean = a.combine(&x.support, &x.amplitudes);
    let (noise, sigma) = relative_noise(clean.len(), noise_level, norm(&clean), rng)?;
    let b = clean.iter().zip(&noise).map(|(y, n)| y + n).collect();
    Ok(Measurements { b, clean, noise, sigma })
}

/// Data for an off-grid scene together with its gridding error.
#[derive(Debug, Clone)]
pub struct SynthesizedData {
    pub b: CVector,
    /// `y = b - n`.
    pub clean: CVector,
    /// The scene snapped to its nearest grid points.
    pub x_nearest: SparseSignal,
    /// `d = b - n - A x_nearest`.
    pub gridding_error: CVector,
    pub noise: CVector,
    pub sigma: f64,
}

impl SynthesizedData {
    /// `e = n + d = b - A x_nearest`.
    pub fn total_error(&self) -> CVector {
        self.noise.iter().zip(&self.gridding_error).map(|(n, d)| n + d).collect()
    }

    pub fn relative_gridding_error(&self) -> f64 {
        norm(&self.gridding_error) / norm(&self.b)
    }
}

pub fn synthesize_data<R: Rng + ?Sized>(
    scene: &OffGridScene,
    times: &[f64],
    grid: GridSpec,
    noise_level: f64,
    rng: &mut R,
) -> Result<SynthesizedData> {
    if times.is_empty() {
        return Err(Error::param("times", "need at least one sample"));
    }
    let n = times.len();
    let mut clean = vec![ZERO; n];
    let mut pairs = Vec::with_capacity(scene.frequencies.len());
    let mut on_grid = vec![ZERO; n];
    for (&w, &c) in scene.frequencies.iter().zip(&scene.amplitudes) {
        crate::numlin::axpy(c, &spectral_column(times, w), &mut clean);
        let l = grid
            .nearest_index(w)
            .ok_or_else(|| Error::Infeasible(format!("frequency {w} RL outside the grid")))?;
        crate::numlin::axpy(c, &spectral_column(times, grid.position_rl(l)), &mut on_grid);
        pairs.push((l, c));
    }
    let x_nearest = SparseSignal::from_pairs(pairs, grid);
    if x_nearest.support.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Infeasible("two frequencies share a nearest grid point".into()));
    }
    let x_nearest = SparseSignal::new(x_nearest.support, x_nearest.amplitudes, grid)?;
    let (noise, sigma) = relative_noise(n, noise_level, norm(&clean), rng)?;
    let b: CVector = clean.iter().zip(&noise).map(|(y, e)| y + e).collect();
    let gridding_error = clean.iter().zip(&on_grid).map(|(y, a)| y - a).collect();
    Ok(SynthesizedData {
        b,
        clean,
        x_nearest,
        gridding_error,
        noise,
        sigma,
    })
}

/// Dirichlet-kernel magnitude of two frame columns `delta` grid steps
/// apart: `|sin(pi delta / F)| / (R |sin(pi delta / (R F))|)`.
pub fn frame_column_coherence(span_rl: usize, refinement: usize, delta: usize) -> f64 {
    if delta % (span_rl * refinement) == 0 {
        return 1.0;
    }
    let f = refinement as f64;
    let r = span_rl as f64;
    let d = delta as f64;
    ((PI * d / f).sin() / (r * (PI * d / (r * f)).sin())).abs()
}
