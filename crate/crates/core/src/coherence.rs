//! Pairwise coherence and coherence bands.
//!
//! The band of column `k` is `B(k) = { i : mu(i, k) > eta }`. Bands of a set
//! are unions, and the double band is `B(B(S))`. Bands near either end of
//! the window are clipped, never wrapped.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::models::{GridSpec, SensingMatrix, Structure};
use crate::numlin::{inner, CMatrix};
use crate::par;

/// `|<a_k, a_l>| / (||a_k|| ||a_l||)`.
pub fn pairwise_coherence(a: &CMatrix, k: usize, l: usize) -> Result<f64> {
    if k >= a.cols() || l >= a.cols() {
        return Err(Error::param("index", format!("column out of range for {} columns", a.cols())));
    }
    let (nk, nl) = (a.col_norm(k), a.col_norm(l));
    if nk == 0.0 || nl == 0.0 {
        return Err(Error::param("A", "zero column has no coherence"));
    }
    Ok((inner(a.col(k), a.col(l)).norm() / (nk * nl)).min(1.0))
}

/// Largest pairwise coherence over distinct columns.
pub fn mutual_coherence(a: &CMatrix) -> Result<f64> {
    if a.cols() < 2 {
        return Err(Error::param("A", "mutual coherence needs at least two columns"));
    }
    let norms: Vec<f64> = (0..a.cols()).map(|j| a.col_norm(j)).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::param("A", "zero column has no coherence"));
    }
    let per_col = par::map_indexed(a.cols(), |k| {
        (k + 1..a.cols())
            .map(|l| inner(a.col(k), a.col(l)).norm() / (norms[k] * norms[l]))
            .fold(0.0, f64::max)
    });
    Ok(per_col.into_iter().fold(0.0, f64::max).min(1.0))
}

/// Coherence between spectral-ensemble columns `delta` grid steps apart:
/// `|(1/N) sum_k exp(-2 pi i delta xi_k / F)|`, for `delta = 0..len`.
pub fn shift_coherence_profile(times: &[f64], refinement: usize, len: usize) -> Vec<f64> {
    let n = times.len() as f64;
    let f = refinement as f64;
    (0..len)
        .map(|d| {
            let (mut re, mut im) = (0.0, 0.0);
            for &t in times {
                let (s, c) = (-TAU * d as f64 * t / f).sin_cos();
                re += c;
                im += s;
            }
            (re.hypot(im) / n).min(1.0)
        })
        .collect()
}

/// How bands are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandPolicy {
    /// `B(k) = { i : mu(i, k) > eta }`; exclusion uses the double band.
    CoherenceThreshold { eta: f64 },
    /// Distance rules in RL: exclusion within `exclusion_rl` of a selected
    /// index, local optimization within `local_rl`.
    FixedRadius { exclusion_rl: f64, local_rl: f64 },
}

impl BandPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandPolicy::CoherenceThreshold { eta } if !(eta > 0.0 && eta < 1.0) => {
                Err(Error::param("eta", format!("must lie in (0, 1), got {eta}")))
            }
            BandPolicy::FixedRadius { exclusion_rl, local_rl } if !(exclusion_rl > 0.0 && local_rl > 0.0) => {
                Err(Error::param("radius", "exclusion and local radii must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
enum Bands {
    /// Shift-invariant coherence: offsets `delta >= 0` inside the band.
    Lags(Vec<usize>),
    /// Sorted member list per column.
    Explicit(Vec<Vec<usize>>),
    Radius { exclusion: usize, local: usize },
}

/// Precomputed band structure of one sensing matrix. Immutable once built.
#[derive(Debug, Clone)]
pub struct BandIndex {
    policy: BandPolicy,
    columns: usize,
    bands: Bands,
}

/// Grid steps covered by a radius in RL, inclusive.
fn radius_steps(grid: GridSpec, r: f64) -> usize {
    (r * grid.refinement as f64 + 1e-9).floor() as usize
}

impl BandIndex {
    /// Builds bands, using the shift-invariant structure of the spectral
    /// ensemble when the generator recorded it.
    pub fn build(a: &SensingMatrix, policy: BandPolicy) -> Result<Self> {
        policy.validate()?;
        match (&a.structure, policy) {
            (Structure::ShiftInvariant { times }, BandPolicy::CoherenceThreshold { eta }) => {
                let profile = shift_coherence_profile(times, a.grid.refinement, a.grid.columns());
                Ok(Self::from_shift_profile(&profile, eta))
            }
            _ => Self::build_dense(&a.matrix, a.grid, policy),
        }
    }

    /// Bands from the explicit Gram matrix, ignoring any structure.
    pub fn build_dense(a: &CMatrix, grid: GridSpec, policy: BandPolicy) -> Result<Self> {
        policy.validate()?;
        let m = a.cols();
        match policy {
            BandPolicy::FixedRadius { exclusion_rl, local_rl } => Ok(Self {
                policy,
                columns: m,
                bands: Bands::Radius {
                    exclusion: radius_steps(grid, exclusion_rl),
                    local: radius_steps(grid, local_rl),
                },
            }),
            BandPolicy::CoherenceThreshold { eta } => {
                let norms: Vec<f64> = (0..m).map(|j| a.col_norm(j)).collect();
                if norms.iter().any(|&n| n == 0.0) {
                    return Err(Error::param("A", "zero column has no coherence"));
                }
                // each pair is evaluated once, so membership is exactly symmetric
                let upper = par::map_indexed(m, |k| {
                    (k + 1..m)
                        .filter(|&l| inner(a.col(k), a.col(l)).norm() / (norms[k] * norms[l]) > eta)
                        .collect::<Vec<_>>()
                });
                let mut bands: Vec<Vec<usize>> = (0..m).map(|k| vec![k]).collect();
                for (k, ls) in upper.into_iter().enumerate() {
                    for l in ls {
                        bands[k].push(l);
                        bands[l].push(k);
                    }
                }
                for b in &mut bands {
                    b.sort_unstable();
                }
                Ok(Self {
                    policy,
                    columns: m,
                    bands: Bands::Explicit(bands),
                })
            }
        }
    }

    /// Bands of a shift-invariant dictionary from its coherence profile
    /// (`profile[d]` = coherence of columns `d` steps apart).
    pub fn from_shift_profile(profile: &[f64], eta: f64) -> Self {
        let mut lags: Vec<usize> = profile.iter().enumerate().filter(|(_, &c)| c > eta).map(|(d, _)| d).collect();
        if lags.first() != Some(&0) {
            lags.insert(0, 0);
        }
        Self {
            policy: BandPolicy::CoherenceThreshold { eta },
            columns: profile.len(),
            bands: Bands::Lags(lags),
        }
    }

    pub fn policy(&self) -> BandPolicy {
        self.policy
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    fn for_each_in(&self, k: usize, local: bool, mut f: impl FnMut(usize)) {
        let m = self.columns;
        match &self.bands {
            Bands::Lags(lags) => {
                for &d in lags.iter().rev() {
                    if d > 0 && d <= k {
                        f(k - d);
                    }
                }
                for &d in lags {
                    if k + d < m {
                        f(k + d);
                    }
                }
            }
            Bands::Explicit(b) => b[k].iter().copied().for_each(f),
            Bands::Radius { exclusion, local: lo } => {
                let r = if local { *lo } else { *exclusion };
                (k.saturating_sub(r)..(k + r + 1).min(m)).for_each(f)
            }
        }
    }

    /// `B(k)`, sorted. Under a fixed-radius policy this is the local radius.
    pub fn band(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in(k, true, |i| out.push(i));
        out
    }

    pub fn contains(&self, k: usize, i: usize) -> bool {
        match &self.bands {
            Bands::Lags(lags) => lags.binary_search(&k.abs_diff(i)).is_ok(),
            Bands::Explicit(b) => b[k].binary_search(&i).is_ok(),
            Bands::Radius { local, .. } => k.abs_diff(i) <= *local,
        }
    }

    /// `B(S)`, sorted.
    pub fn band_of_set(&self, set: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &k in set {
            self.for_each_in(k, true, |i| out.push(i));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Marks every index excluded by band exclusion around `set`: the double
    /// band `B(B(S))`, or the exclusion radius under a fixed-radius policy.
    pub fn exclusion_mask(&self, set: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.columns];
        self.mark_exclusion(set, &mut mask);
        mask
    }

    pub fn mark_exclusion(&self, set: &[usize], mask: &mut [bool]) {
        match self.bands {
            Bands::Radius { .. } => {
                for &k in set {
                    self.for_each_in(k, false, |i| mask[i] = true);
                }
            }
            _ => {
                for &k in set {
                    self.for_each_in(k, true, |j| self.for_each_in(j, true, |i| mask[i] = true));
                }
            }
        }
    }

    /// `B^(2)(S)`, sorted (the exclusion region of `set`).
    pub fn double_band(&self, set: &[usize]) -> Vec<usize> {
        let mask = self.exclusion_mask(set);
        mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    /// Largest `d` such that every offset `0..=d` to the right of `k` is in
    /// the band, in grid steps.
    pub fn main_lobe_half_width(&self, k: usize) -> usize {
        let mut d = 0;
        while k + d + 1 < self.columns && self.contains(k, k + d + 1) {
            d += 1;
        }
        d
    }
}
