//! Success criteria and error measures.

use serde::{Deserialize, Serialize};

use crate::coherence::BandIndex;
use crate::error::{Error, Result};
use crate::models::{OffGridScene, SparseSignal};
use crate::numlin::{norm, sub, CMatrix, C64, ZERO};

/// Reconstructions closer than this (RL, Bottleneck) count as successes.
pub const SUCCESS_RADIUS_RL: f64 = 1.0;

/// Bottleneck distance between two equal-size sets on the line: the
/// largest gap after sorting both. Input order does not matter.
pub fn bottleneck_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param(
            "sets",
            format!("bottleneck distance needs equal cardinality, got {} and {}", a.len(), b.len()),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Hausdorff distance between two non-empty sets on the line.
pub fn hausdorff_1d(a: &[f64], b: &[f64]) -> f64 {
    let directed = |p: &[f64], q: &[f64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// `+inf` when the reconstruction has the wrong number of objects.
    pub bottleneck_rl: f64,
    pub success: bool,
    pub rel_residual: f64,
    pub rel_coeff_error: f64,
    /// Only meaningful for frame experiments; `NaN` otherwise.
    pub rel_signal_error: f64,
}

/// What the reconstruction is compared with.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    OnGrid(&'a SparseSignal),
    /// A continuous scene; coefficient errors use its nearest-grid snapshot.
    OffGrid {
        scene: &'a OffGridScene,
        nearest: &'a SparseSignal,
    },
}

impl Truth<'_> {
    pub fn positions_rl(&self) -> Vec<f64> {
        match self {
            Truth::OnGrid(x) => x.positions_rl(),
            Truth::OffGrid { scene, .. } => scene.frequencies.clone(),
        }
    }

    pub fn coefficients(&self) -> &SparseSignal {
        match self {
            Truth::OnGrid(x) => x,
            Truth::OffGrid { nearest, .. } => nearest,
        }
    }
}

/// `||x_hat - x|| / ||x||` for two sparse vectors on the same grid.
pub fn relative_coefficient_error(estimate: &SparseSignal, truth: &SparseSignal) -> f64 {
    let mut diff_sq = 0.0;
    let (mut i, mut j) = (0, 0);
    let (es, ts) = (&estimate.support, &truth.support);
    while i < es.len() || j < ts.len() {
        let take_e = j >= ts.len() || (i < es.len() && es[i] <= ts[j]);
        let take_t = i >= es.len() || (j < ts.len() && ts[j] <= es[i]);
        let e = if take_e { estimate.amplitudes[i] } else { ZERO };
        let t = if take_t { truth.amplitudes[j] } else { ZERO };
        diff_sq += (e - t).norm_sqr();
        i += take_e as usize;
        j += take_t as usize;
    }
    diff_sq.sqrt() / norm(&truth.amplitudes)
}

/// Scores one reconstruction against the truth.
pub fn score_trial(truth: Truth<'_>, estimate: &SparseSignal, a: &CMatrix, b: &[C64]) -> TrialOutcome {
    let t_pos = truth.positions_rl();
    let e_pos = estimate.positions_rl();
    let bottleneck_rl = if t_pos.len() == e_pos.len() {
        bottleneck_1d(&t_pos, &e_pos).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let fit = a.combine(&estimate.support, &estimate.amplitudes);
    let b_norm = norm(b);
    TrialOutcome {
        bottleneck_rl,
        success: bottleneck_rl < SUCCESS_RADIUS_RL,
        rel_residual: norm(&sub(&fit, b)) / b_norm,
        rel_coeff_error: relative_coefficient_error(estimate, truth.coefficients()),
        rel_signal_error: f64::NAN,
    }
}

pub fn relative_error(estimate: &[C64], truth: &[C64]) -> f64 {
    norm(&sub(estimate, truth)) / norm(truth)
}

/// Whether every estimated index can be assigned to a distinct true index
/// whose band contains it (a matching saturating the estimate).
pub fn unique_band_assignment(bands: &BandIndex, truth: &[usize], estimate: &[usize]) -> bool {
    // Kuhn's augmenting paths; sets hold at most a few dozen indices.
    fn augment(
        e: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &t in &adj[e] {
            if seen[t] {
                continue;
            }
            seen[t] = true;
            if owner[t].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[t] = Some(e);
                return true;
            }
        }
        false
    }
    if estimate.len() > truth.len() {
        return false;
    }
    let adj: Vec<Vec<usize>> = estimate
        .iter()
        .map(|&e| (0..truth.len()).filter(|&t| bands.contains(truth[t], e)).collect())
        .collect();
    let mut owner = vec![None; truth.len()];
    (0..estimate.len()).all(|e| augment(e, &adj, &mut vec![false; truth.len()], &mut owner))
}

/// Checks that the bands of distinct support indices do not interact:
/// `B(i)` and `B(B(j))` disjoint when `double`, else `B(i)` and `B(j)`.
pub fn supports_separated(bands: &BandIndex, support: &[usize], double: bool) -> bool {
    for (p, &i) in support.iter().enumerate() {
        let bi = bands.band(i);
        for (q, &j) in support.iter().enumerate() {
            if p == q {
                continue;
            }
            let other = if double { bands.double_band(&[j]) } else { bands.band(j) };
            if bi.iter().any(|k| other.binary_search(k).is_ok()) {
                return false;
            }
        }
    }
    true
}
