//! Thresholding-based recovery.
//!
//! [`bmt`] picks `s` indices at once from the matched filter `A* b`, each
//! outside the double band of those already picked. [`blot`] applies the
//! same band-excluded selection to an arbitrary coefficient vector, follows
//! it with local optimization and refits. These two steps are embedded in
//! subspace pursuit, CoSaMP and iterative hard thresholding:
//!
//! | identification   | pruning            | algorithm        |
//! |------------------|--------------------|------------------|
//! | top `s`          | top `s`, refit     | SP               |
//! | top `2s`         | top `s`            | CoSaMP           |
//! | BMT `s`          | band-excluded, refit | BSP            |
//! | BMT `2s`         | band-excluded      | BCoSaMP          |
//! | BMT `s`          | BLOT               | BLOSP            |
//! | BMT `2s`         | BLOT               | BLOCoSaMP        |
//!
//! All iterative variants stop as soon as the residual is below `eps` or
//! fails to decrease, and return the last improving iterate refit on its
//! support.

use serde::{Deserialize, Serialize};

use crate::coherence::BandIndex;
use crate::error::{Error, Result};
use crate::greedy::{check_bands, check_problem, fit, local_optimization, RecoveryResult, Step, Termination};
use crate::models::{SensingMatrix, SparseSignal};
use crate::numlin::{norm, norm_sqr, sub, C64, ZERO};

/// Safety cap on pursuit iterations; the non-improvement rule normally
/// stops far earlier.
const MAX_ITERATIONS: usize = 1000;

/// Default stopping tolerance `1e-6 ||b||`.
pub fn default_eps(b: &[C64]) -> f64 {
    1e-6 * norm(b)
}

/// Indices of the `k` largest nonzero `|values|`, optionally skipping the
/// exclusion region of every index already taken. Ties go to the lower
/// index.
fn select(values: &[C64], k: usize, bands: Option<&BandIndex>) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm_sqr()))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked = Vec::with_capacity(k);
    match bands {
        None => picked.extend(order.iter().take(k).map(|&(i, _)| i)),
        Some(bi) => {
            let mut blocked = vec![false; values.len()];
            for (i, _) in order {
                if picked.len() == k {
                    break;
                }
                if blocked[i] {
                    continue;
                }
                picked.push(i);
                bi.mark_exclusion(&[i], &mut blocked);
            }
        }
    }
    picked
}

/// Band-excluded matched thresholding: `s` picks from `|<a_j, b>|` with
/// double-band exclusion, then one least-squares fit.
pub fn bmt(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<RecoveryResult> {
    check_problem(a, b, s)?;
    check_bands(a, bands)?;
    let corr = a.matrix.adjoint_apply(b)?;
    let picks = select(&corr, s, Some(bands));
    let (estimate, res) = fit(a, b, &picks)?;
    let termination = if picks.len() < s {
        Termination::ExclusionExhausted
    } else {
        Termination::SparsityReached
    };
    Ok(RecoveryResult {
        estimate,
        residual_norm_history: vec![res],
        iterations: 1,
        termination,
        trace: vec![Step {
            prior_support: Vec::new(),
            picks: picks.clone(),
            support: picks,
        }],
    })
}

/// Result of band-excluded, locally optimized thresholding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlotOutput {
    pub estimate: SparseSignal,
    /// Indices chosen by the band-excluded selection, before LO.
    pub selected: Vec<usize>,
    pub residual_norm: f64,
}

/// Band-excluded, locally optimized thresholding of `x_dense`: keep the `s`
/// largest entries under double-band exclusion, locally optimize that
/// support against `b`, and refit.
pub fn blot(x_dense: &[C64], a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<BlotOutput> {
    if x_dense.len() != a.matrix.cols() {
        return Err(Error::DimensionMismatch {
            op: "blot",
            expected: a.matrix.cols(),
            found: x_dense.len(),
        });
    }
    check_bands(a, bands)?;
    let selected = select(x_dense, s, Some(bands));
    let support = local_optimization(a, b, &selected, bands)?;
    let (estimate, residual_norm) = fit(a, b, &support)?;
    Ok(BlotOutput {
        estimate,
        selected,
        residual_norm,
    })
}

#[derive(Debug, Clone, Copy)]
enum Prune {
    /// Top/band-excluded selection of the LS coefficients, then refit.
    Refit { banded: bool },
    /// Keep the LS coefficients on the selected indices.
    Keep { banded: bool },
    Blot,
}

#[derive(Debug, Clone, Copy)]
struct Skeleton {
    banded_identify: bool,
    identify_factor: usize,
    prune: Prune,
}

struct Iterate {
    x: Vec<C64>,
    support: Vec<usize>,
    residual: Vec<C64>,
    residual_norm: f64,
}

impl Iterate {
    fn zero(m: usize, b: &[C64]) -> Self {
        Iterate {
            x: vec![ZERO; m],
            support: Vec::new(),
            residual: b.to_vec(),
            residual_norm: norm(b),
        }
    }

    fn from_sparse(a: &SensingMatrix, b: &[C64], sig: &SparseSignal) -> Self {
        let mut x = vec![ZERO; a.matrix.cols()];
        for (&i, &v) in sig.support.iter().zip(&sig.amplitudes) {
            x[i] = v;
        }
        let residual = sub(b, &a.matrix.combine(&sig.support, &sig.amplitudes));
        let residual_norm = norm(&residual);
        Iterate {
            x,
            support: sig.support.clone(),
            residual,
            residual_norm,
        }
    }
}

/// Runs `step` from `x = 0` until the residual drops below `eps` or stops
/// improving, then refits on the last accepted support.
fn iterate_until_stall(
    a: &SensingMatrix,
    b: &[C64],
    eps: f64,
    mut step: impl FnMut(&Iterate) -> Result<(Iterate, Vec<usize>)>,
) -> Result<RecoveryResult> {
    let mut current = Iterate::zero(a.matrix.cols(), b);
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut termination = Termination::SparsityReached;
    for _ in 0..MAX_ITERATIONS {
        if current.residual_norm <= eps {
            termination = Termination::ResidualBelowEps;
            break;
        }
        let (next, picks) = step(&current)?;
        if next.residual_norm >= current.residual_norm {
            termination = Termination::ResidualNonimproving;
            break;
        }
        history.push(next.residual_norm);
        trace.push(Step {
            prior_support: current.support.clone(),
            picks,
            support: next.support.clone(),
        });
        current = next;
    }
    let (estimate, _) = fit(a, b, &current.support)?;
    Ok(RecoveryResult {
        estimate,
        iterations: history.len(),
        residual_norm_history: history,
        termination,
        trace,
    })
}

fn run_pursuit(a: &SensingMatrix, b: &[C64], s: usize, bands: Option<&BandIndex>, eps: f64, sk: Skeleton) -> Result<RecoveryResult> {
    check_problem(a, b, s)?;
    if let Some(bi) = bands {
        check_bands(a, bi)?;
    }
    let m = a.matrix.cols();
    let band_for = |banded: bool| if banded { bands } else { None };
    iterate_until_stall(a, b, eps, |cur| {
        let corr = a.matrix.adjoint_apply(&cur.residual)?;
        let picks = select(&corr, sk.identify_factor * s, band_for(sk.banded_identify));
        let mut merged: Vec<usize> = cur.support.iter().chain(&picks).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        let (wide, _) = fit(a, b, &merged)?;
        let mut x_wide = vec![ZERO; m];
        for (&i, &v) in wide.support.iter().zip(&wide.amplitudes) {
            x_wide[i] = v;
        }
        let next = match sk.prune {
            Prune::Refit { banded } => {
                let keep = select(&x_wide, s, band_for(banded));
                Iterate::from_sparse(a, b, &fit(a, b, &keep)?.0)
            }
            Prune::Keep { banded } => {
                let keep = select(&x_wide, s, band_for(banded));
                let pairs = keep.iter().map(|&i| (i, x_wide[i])).collect();
                Iterate::from_sparse(a, b, &SparseSignal::from_pairs(pairs, a.grid))
            }
            Prune::Blot => {
                let bi = bands.ok_or_else(|| Error::param("bands", "BLOT pruning needs a band index"))?;
                Iterate::from_sparse(a, b, &blot(&x_wide, a, b, s, bi)?.estimate)
            }
        };
        Ok((next, picks))
    })
}

/// Band-excluded, locally optimized subspace pursuit.
pub fn blosp(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex, eps: f64) -> Result<RecoveryResult> {
    let sk = Skeleton {
        banded_identify: true,
        identify_factor: 1,
        prune: Prune::Blot,
    };
    run_pursuit(a, b, s, Some(bands), eps, sk)
}

/// Band-excluded, locally optimized CoSaMP: `2s` BMT picks per iteration,
/// BLOT pruning.
pub fn blocosamp(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex, eps: f64) -> Result<RecoveryResult> {
    let sk = Skeleton {
        banded_identify: true,
        identify_factor: 2,
        prune: Prune::Blot,
    };
    run_pursuit(a, b, s, Some(bands), eps, sk)
}

/// Plain subspace pursuit.
pub fn subspace_pursuit(a: &SensingMatrix, b: &[C64], s: usize, eps: f64) -> Result<RecoveryResult> {
    let sk = Skeleton {
        banded_identify: false,
        identify_factor: 1,
        prune: Prune::Refit { banded: false },
    };
    run_pursuit(a, b, s, None, eps, sk)
}

/// Plain CoSaMP.
pub fn cosamp(a: &SensingMatrix, b: &[C64], s: usize, eps: f64) -> Result<RecoveryResult> {
    let sk = Skeleton {
        banded_identify: false,
        identify_factor: 2,
        prune: Prune::Keep { banded: false },
    };
    run_pursuit(a, b, s, None, eps, sk)
}

/// Band-excluded, locally optimized IHT: `x <- BLOT(x + A* r)` with unit
/// step, which presumes unit-norm columns.
pub fn bloiht(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex, eps: f64) -> Result<RecoveryResult> {
    check_problem(a, b, s)?;
    check_bands(a, bands)?;
    iterate_until_stall(a, b, eps, |cur| {
        let grad = a.matrix.adjoint_apply(&cur.residual)?;
        let proposal: Vec<C64> = cur.x.iter().zip(&grad).map(|(x, g)| x + g).collect();
        let out = blot(&proposal, a, b, s, bands)?;
        let picks = out.selected.clone();
        Ok((Iterate::from_sparse(a, b, &out.estimate), picks))
    })
}

/// Band-excluded normalized IHT. The step `||g_S||^2 / ||A g_S||^2` uses the
/// gradient restricted to the current support (or to its band-excluded
/// selection on the first iteration); thresholding keeps values.
fn bniht(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex, eps: f64) -> Result<RecoveryResult> {
    check_problem(a, b, s)?;
    check_bands(a, bands)?;
    iterate_until_stall(a, b, eps, |cur| {
        let grad = a.matrix.adjoint_apply(&cur.residual)?;
        let on = if cur.support.is_empty() {
            select(&grad, s, Some(bands))
        } else {
            cur.support.clone()
        };
        let g_s: Vec<C64> = on.iter().map(|&i| grad[i]).collect();
        let ag = a.matrix.combine(&on, &g_s);
        let denom = norm_sqr(&ag);
        let mu = if denom > 0.0 { norm_sqr(&g_s) / denom } else { 1.0 };
        let proposal: Vec<C64> = cur.x.iter().zip(&grad).map(|(x, g)| x + g * mu).collect();
        let keep = select(&proposal, s, Some(bands));
        let pairs = keep.iter().map(|&i| (i, proposal[i])).collect();
        let next = Iterate::from_sparse(a, b, &SparseSignal::from_pairs(pairs, a.grid));
        Ok((next, keep))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeOnlyKind {
    Bsp,
    BCoSaMP,
    Bniht,
}

/// Band exclusion without local optimization: BSP, BCoSaMP or BNIHT.
pub fn be_only_variant(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex, eps: f64, kind: BeOnlyKind) -> Result<RecoveryResult> {
    match kind {
        BeOnlyKind::Bsp => run_pursuit(
            a,
            b,
            s,
            Some(bands),
            eps,
            Skeleton {
                banded_identify: true,
                identify_factor: 1,
                prune: Prune::Refit { banded: true },
            },
        ),
        BeOnlyKind::BCoSaMP => run_pursuit(
            a,
            b,
            s,
            Some(bands),
            eps,
            Skeleton {
                banded_identify: true,
                identify_factor: 2,
                prune: Prune::Keep { banded: true },
            },
        ),
        BeOnlyKind::Bniht => bniht(a, b, s, bands, eps),
    }
}

/// Left side of the BMT recovery condition,
/// `eta (2s - 1) x_max / x_min + 2 ||e|| / x_min`.
pub fn bmt_condition(eta: f64, x: &SparseSignal, noise_norm: f64) -> f64 {
    let s = x.sparsity() as f64;
    eta * (2.0 * s - 1.0) * x.dynamic_range() + 2.0 * noise_norm / x.x_min()
}
