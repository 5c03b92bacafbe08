//! Greedy pursuit: OMP, band-excluded OMP (BOMP), local optimization (LO),
//! and the locally optimized variants LOOMP and BLOOMP.
//!
//! All selections pick the largest correlation `|<a_i, r>|`; ties go to the
//! lowest index.

use serde::{Deserialize, Serialize};

use crate::coherence::BandIndex;
use crate::error::{Error, Result};
use crate::models::{SensingMatrix, SparseSignal};
use crate::numlin::{axpy, inner, norm, norm_sqr, restricted_least_squares, CMatrix, Projector, C64};

/// Residual norms at or below this fraction of `||b||` count as an exact fit.
pub(crate) const EXACT_FIT: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    SparsityReached,
    ResidualBelowEps,
    ResidualNonimproving,
    ExclusionExhausted,
}

/// One recorded iteration: the indices newly proposed against the support
/// held before the iteration, and the support after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub prior_support: Vec<usize>,
    pub picks: Vec<usize>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub estimate: SparseSignal,
    /// `||b - A x^n||` after each iteration, aligned with `trace`.
    pub residual_norm_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<Step>,
}

impl RecoveryResult {
    pub fn support(&self) -> &[usize] {
        &self.estimate.support
    }
}

pub(crate) fn check_problem(a: &SensingMatrix, b: &[C64], s: usize) -> Result<()> {
    if b.len() != a.matrix.rows() {
        return Err(Error::DimensionMismatch {
            op: "recovery data",
            expected: a.matrix.rows(),
            found: b.len(),
        });
    }
    if s == 0 {
        return Err(Error::param("s", "sparsity must be positive"));
    }
    if s > a.matrix.rows() {
        return Err(Error::param("s", format!("sparsity {s} exceeds {} measurements", a.matrix.rows())));
    }
    Ok(())
}

pub(crate) fn check_bands(a: &SensingMatrix, bands: &BandIndex) -> Result<()> {
    if bands.columns() != a.matrix.cols() {
        return Err(Error::DimensionMismatch {
            op: "band index",
            expected: a.matrix.cols(),
            found: bands.columns(),
        });
    }
    Ok(())
}

/// Index of the largest `|v_i|` over unmasked entries.
pub(crate) fn argmax_admissible(v: &[C64], blocked: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in v.iter().enumerate() {
        if blocked[i] {
            continue;
        }
        let m = z.norm_sqr();
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

/// Least-squares fit on `support` packaged as an estimate.
pub(crate) fn fit(a: &SensingMatrix, b: &[C64], support: &[usize]) -> Result<(SparseSignal, f64)> {
    let ls = restricted_least_squares(&a.matrix, b, support)?;
    let pairs = support.iter().copied().zip(ls.coefficients).collect();
    Ok((SparseSignal::from_pairs(pairs, a.grid), ls.residual_norm))
}

/// Residual of `b` after projecting onto the columns in `others` plus
/// column `j`, given the projector of `others` and `b`'s projection residual.
fn swap_residual(a: &CMatrix, proj: &Projector, rt: &[C64], j: usize) -> f64 {
    let q = proj.project_out(a.col(j));
    let qn = norm_sqr(&q);
    if qn <= 1e-24 * norm_sqr(a.col(j)) {
        return norm(rt);
    }
    let mut r = rt.to_vec();
    axpy(-inner(&q, rt) / qn, &q, &mut r);
    norm(&r)
}

/// One pass of local optimization over `s0`, in order.
///
/// Position `n` is re-placed at the index of the local band of `s0[n]`
/// (itself included) that minimizes the least-squares residual with every
/// other position held fixed. The returned support has the same length and
/// order as the input; the residual never increases.
pub fn local_optimization(a: &SensingMatrix, b: &[C64], s0: &[usize], bands: &BandIndex) -> Result<Vec<usize>> {
    check_bands(a, bands)?;
    if b.len() != a.matrix.rows() {
        return Err(Error::DimensionMismatch {
            op: "local_optimization",
            expected: a.matrix.rows(),
            found: b.len(),
        });
    }
    let mut support = s0.to_vec();
    for pos in 0..support.len() {
        let center = support[pos];
        let others: Vec<usize> = support.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &j)| j).collect();
        let proj = Projector::new(others.iter().map(|&j| a.matrix.col(j)));
        let rt = proj.project_out(b);
        let mut best = (swap_residual(&a.matrix, &proj, &rt, center), center);
        for j in bands.band(center) {
            if j == center || others.contains(&j) {
                continue;
            }
            let res = swap_residual(&a.matrix, &proj, &rt, j);
            if res < best.0 {
                best = (res, j);
            }
        }
        support[pos] = best.1;
    }
    Ok(support)
}

/// How a pursuit restricts the next selection.
#[derive(Debug, Clone, Copy)]
enum Exclusion {
    /// Already-selected indices only.
    Selected,
    /// The double band of the current support.
    DoubleBand,
}

fn pursuit(
    a: &SensingMatrix,
    b: &[C64],
    s: usize,
    bands: Option<&BandIndex>,
    exclusion: Exclusion,
    optimize: bool,
) -> Result<RecoveryResult> {
    check_problem(a, b, s)?;
    if let Some(bi) = bands {
        check_bands(a, bi)?;
    }
    let m = a.matrix.cols();
    let b_norm = norm(b);
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut residual = b.to_vec();
    let mut history = Vec::with_capacity(s);
    let mut trace = Vec::with_capacity(s);
    let mut estimate = SparseSignal::empty(a.grid);
    let mut termination = Termination::SparsityReached;

    if b_norm == 0.0 {
        termination = Termination::ResidualBelowEps;
    }
    while termination == Termination::SparsityReached && support.len() < s {
        let corr = a.matrix.adjoint_apply(&residual)?;
        let mut blocked = vec![false; m];
        match (exclusion, bands) {
            (Exclusion::DoubleBand, Some(bi)) => bi.mark_exclusion(&support, &mut blocked),
            _ => support.iter().for_each(|&j| blocked[j] = true),
        }
        let Some(pick) = argmax_admissible(&corr, &blocked) else {
            termination = Termination::ExclusionExhausted;
            break;
        };
        let prior = support.clone();
        support.push(pick);
        if optimize {
            let bi = bands.ok_or_else(|| Error::param("bands", "local optimization needs a band index"))?;
            support = local_optimization(a, b, &support, bi)?;
        }
        let ls = restricted_least_squares(&a.matrix, b, &support)?;
        residual = ls.residual;
        history.push(ls.residual_norm);
        let pairs = support.iter().copied().zip(ls.coefficients).collect();
        estimate = SparseSignal::from_pairs(pairs, a.grid);
        trace.push(Step {
            prior_support: prior,
            picks: vec![pick],
            support: support.clone(),
        });
        if ls.residual_norm <= EXACT_FIT * b_norm {
            termination = Termination::ResidualBelowEps;
        }
    }
    Ok(RecoveryResult {
        estimate,
        iterations: history.len(),
        residual_norm_history: history,
        termination,
        trace,
    })
}

/// Orthogonal matching pursuit with `s` iterations.
pub fn omp(a: &SensingMatrix, b: &[C64], s: usize) -> Result<RecoveryResult> {
    pursuit(a, b, s, None, Exclusion::Selected, false)
}

/// OMP whose matching step skips the double band of the current support.
pub fn bomp(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<RecoveryResult> {
    pursuit(a, b, s, Some(bands), Exclusion::DoubleBand, false)
}

/// Band-excluded, locally optimized OMP: BOMP with a local-optimization
/// pass over the augmented support at every iteration.
pub fn bloomp(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<RecoveryResult> {
    pursuit(a, b, s, Some(bands), Exclusion::DoubleBand, true)
}

/// BLOOMP without band exclusion: only already-selected indices are barred.
pub fn loomp(a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<RecoveryResult> {
    pursuit(a, b, s, Some(bands), Exclusion::Selected, true)
}

/// Left side of the BOMP recovery condition,
/// `eta (5s - 4) x_max / x_min + 5 ||e|| / (2 x_min)`; recovery into unique
/// bands is guaranteed when it is below 1 and the bands of the support
/// satisfy [`crate::metrics::supports_separated`] with the double band.
pub fn bomp_condition(eta: f64, x: &SparseSignal, noise_norm: f64) -> f64 {
    let s = x.sparsity() as f64;
    eta * (5.0 * s - 4.0) * x.dynamic_range() + 5.0 * noise_norm / (2.0 * x.x_min())
}

/// Right side of the LO preservation condition: local optimization keeps
/// every index in the band of a unique object when `x_min` exceeds
/// `(eps + 2 (s - 1) eta) (1/(1-eta) + sqrt(1/(1-eta)^2 + 1/(1-eta^2)))`,
/// with `eps = ||e||`.
pub fn lo_condition_bound(eta: f64, s: usize, noise_norm: f64) -> f64 {
    let g = 1.0 / (1.0 - eta);
    (noise_norm + 2.0 * (s as f64 - 1.0) * eta) * (g + (g * g + 1.0 / (1.0 - eta * eta)).sqrt())
}
