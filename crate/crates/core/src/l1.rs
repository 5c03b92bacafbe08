//! L1 solvers for complex data: the Lasso, Basis Pursuit (with optional
//! data ball) and analysis Basis Pursuit over a tight frame, plus BLOT
//! post-processing of their dense output.
//!
//! The Lasso uses monotone FISTA with step `1/L`, `L` from power iteration
//! on `A*A`. BP and analysis-BP share one ADMM loop that splits the L1 term
//! from the data constraint; the constraint projection diagonalises `QQ*`
//! once and solves for the multiplier by bisection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coherence::BandIndex;
use crate::error::{Error, Result};
use crate::greedy::{RecoveryResult, Step, Termination};
use crate::models::SensingMatrix;
use crate::numlin::{norm, norm_sqr, sub, CMatrix, CVector, C64, ZERO};
use crate::thresh::blot;

/// Complex soft threshold: shrinks the magnitude by `tau`, keeps the phase.
pub fn soft_threshold(v: C64, tau: f64) -> C64 {
    let mag = v.norm();
    if mag <= tau {
        ZERO
    } else {
        v * ((mag - tau) / mag)
    }
}

fn soft_threshold_vec(v: &[C64], tau: f64) -> CVector {
    v.iter().map(|&x| soft_threshold(x, tau)).collect()
}

fn l1_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `0.5 sqrt(ln M)`
    HalfSqrtLogM,
    /// `sqrt(2 ln M)`
    Sqrt2LogM,
    Explicit(f64),
}

impl LambdaRule {
    pub fn resolve(&self, columns: usize) -> Result<f64> {
        let log_m = (columns.max(1) as f64).ln();
        let lambda = match *self {
            LambdaRule::HalfSqrtLogM => 0.5 * log_m.sqrt(),
            LambdaRule::Sqrt2LogM => (2.0 * log_m).sqrt(),
            LambdaRule::Explicit(l) => l,
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be finite and non-negative, got {lambda}")));
        }
        Ok(lambda)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LambdaRule::HalfSqrtLogM => "half_sqrt_log_m",
            LambdaRule::Sqrt2LogM => "sqrt_2_log_m",
            LambdaRule::Explicit(_) => "explicit",
        }
    }
}

/// Lasso settings. The penalty weight is `lambda * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    pub lambda_rule: LambdaRule,
    pub sigma: f64,
    pub max_iters: usize,
    /// Relative objective change at which iteration stops.
    pub tol: f64,
}

impl L1Config {
    pub fn new(lambda_rule: LambdaRule, sigma: f64) -> Self {
        L1Config {
            lambda_rule,
            sigma,
            max_iters: 20_000,
            tol: 1e-10,
        }
    }
}

/// ADMM settings for BP, BPDN and analysis-BP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub max_iters: usize,
    /// Relative primal and dual residual tolerance.
    pub tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            max_iters: 20_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L1Solution {
    pub x: CVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimate of `||A||^2` by power iteration on `A*A`, inflated by 1% so
/// `1/L` is a safe gradient step.
pub fn lipschitz_constant(a: &CMatrix) -> Result<f64> {
    let m = a.cols();
    if m == 0 || a.rows() == 0 {
        return Ok(0.0);
    }
    // deterministic, generic start
    let mut v: CVector = (0..m).map(|j| C64::new(1.0 + (j as f64 * 0.618).fract(), (j as f64 * 0.414).fract())).collect();
    let mut est = 0.0;
    for _ in 0..500 {
        let nv = norm(&v);
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = a.adjoint_apply(&a.matvec(&v)?)?;
        let next = norm(&w);
        let done = (next - est).abs() <= 1e-10 * next;
        est = next;
        v = w;
        if done {
            break;
        }
    }
    Ok(est * 1.01)
}

/// Complex Lasso `min 0.5||b - Az||^2 + lambda sigma ||z||_1` by monotone
/// FISTA.
pub fn lasso(a: &CMatrix, b: &[C64], cfg: &L1Config) -> Result<L1Solution> {
    let lambda = cfg.lambda_rule.resolve(a.cols())?;
    if !(cfg.sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    lasso_with_penalty(a, b, lambda * cfg.sigma, cfg.max_iters, cfg.tol, |_| {})
}

/// The FISTA loop; `observe` sees the objective of every accepted iterate.
fn lasso_with_penalty(
    a: &CMatrix,
    b: &[C64],
    penalty: f64,
    max_iters: usize,
    tol: f64,
    mut observe: impl FnMut(f64),
) -> Result<L1Solution> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "lasso",
            expected: a.rows(),
            found: b.len(),
        });
    }
    let m = a.cols();
    let lip = lipschitz_constant(a)?;
    if lip == 0.0 {
        return Ok(L1Solution {
            x: vec![ZERO; m],
            iterations: 0,
            converged: true,
        });
    }
    let objective = |ax: &[C64], x: &[C64]| 0.5 * norm_sqr(&sub(ax, b)) + penalty * l1_norm(x);

    let mut x = vec![ZERO; m];
    let mut ax = vec![ZERO; a.rows()];
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut f_x = objective(&ax, &x);
    observe(f_x);
    let mut t = 1.0_f64;
    for it in 1..=max_iters {
        let grad = a.adjoint_apply(&sub(&ay, b))?;
        let step: CVector = y.iter().zip(&grad).map(|(yi, gi)| yi - gi / lip).collect();
        let z = soft_threshold_vec(&step, penalty / lip);
        let az = a.matvec(&z)?;
        let f_z = objective(&az, &z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = f_z <= f_x;
        let (x_next, ax_next, f_next) = if accepted {
            (z.clone(), az.clone(), f_z)
        } else {
            (x.clone(), ax.clone(), f_x)
        };
        let c1 = t / t_next;
        let c2 = (t - 1.0) / t_next;
        let extrapolate = |next: &[C64], prev: &[C64], cand: &[C64]| -> CVector {
            next.iter()
                .zip(prev)
                .zip(cand)
                .map(|((n, p), c)| n + (c - n) * c1 + (n - p) * c2)
                .collect()
        };
        y = extrapolate(&x_next, &x, &z);
        ay = extrapolate(&ax_next, &ax, &az);
        let change = f_x - f_next;
        x = x_next;
        ax = ax_next;
        t = t_next;
        if accepted {
            observe(f_next);
            if change <= tol * f_next.max(f64::MIN_POSITIVE) && it > 1 {
                return Ok(L1Solution {
                    x,
                    iterations: it,
                    converged: true,
                });
            }
            f_x = f_next;
        }
    }
    Ok(L1Solution {
        x,
        iterations: max_iters,
        converged: false,
    })
}

/// Euclidean projection onto `{z : ||Qz - b|| <= eps}`.
struct DataBall<'a> {
    q: &'a CMatrix,
    b: &'a [C64],
    eps: f64,
    /// Eigenvectors of `QQ*` (columns) and eigenvalues.
    u: DMatrix<C64>,
    lam: Vec<f64>,
    active: Vec<bool>,
    /// Part of `||Qz - b||^2` no `z` can remove.
    floor_sq: f64,
}

impl<'a> DataBall<'a> {
    fn new(q: &'a CMatrix, b: &'a [C64], eps: f64) -> Result<Self> {
        if b.len() != q.rows() {
            return Err(Error::DimensionMismatch {
                op: "data constraint",
                expected: q.rows(),
                found: b.len(),
            });
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param("eps_data", "must be finite and non-negative"));
        }
        let gram = q.gram_rows().to_nalgebra();
        let eig = gram.symmetric_eigen();
        let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let top = lam.iter().copied().fold(0.0, f64::max);
        let cutoff = top * f64::EPSILON * q.rows().max(q.cols()) as f64;
        let active: Vec<bool> = lam.iter().map(|&l| l > cutoff).collect();
        let u = eig.eigenvectors;
        let mut ball = DataBall {
            q,
            b,
            eps,
            u,
            lam,
            active,
            floor_sq: 0.0,
        };
        let c = ball.coords(&b.iter().map(|x| -x).collect::<CVector>());
        ball.floor_sq = c
            .iter()
            .zip(&ball.active)
            .filter(|(_, &on)| !on)
            .map(|(ci, _)| ci.norm_sqr())
            .sum();
        // genuinely infeasible data misses by O(||b||); eigen round-off by far less
        let slack = 1e-6 * norm(b);
        if ball.floor_sq.sqrt() > eps + slack {
            return Err(Error::Infeasible(format!(
                "data lies {:.3e} from the range of the operator, beyond eps_data = {eps:.3e}",
                ball.floor_sq.sqrt()
            )));
        }
        Ok(ball)
    }

    fn coords(&self, d: &[C64]) -> CVector {
        (self.u.adjoint() * DVector::from_column_slice(d)).iter().copied().collect()
    }

    fn project(&self, v: &[C64]) -> Result<CVector> {
        let d = sub(&self.q.matvec(v)?, self.b);
        if norm(&d) <= self.eps {
            return Ok(v.to_vec());
        }
        let c = self.coords(&d);
        let target_sq = self.eps * self.eps - self.floor_sq;
        let residual_sq = |mu: f64| -> f64 {
            c.iter()
                .zip(&self.lam)
                .zip(&self.active)
                .filter(|(_, &on)| on)
                .map(|((ci, &l), _)| ci.norm_sqr() / (1.0 + mu * l).powi(2))
                .sum()
        };
        // weights w_i on each eigen-coordinate; the correction is Q* U (w . c)
        let weights: Vec<f64> = if target_sq <= 0.0 {
            self.lam.iter().zip(&self.active).map(|(&l, &on)| if on { 1.0 / l } else { 0.0 }).collect()
        } else {
            let mut hi = 1.0 / self.lam.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
            while residual_sq(hi) > target_sq && hi < 1e300 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if residual_sq(mid) > target_sq {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            let mu = hi;
            self.lam
                .iter()
                .zip(&self.active)
                .map(|(&l, &on)| if on { mu / (1.0 + mu * l) } else { 0.0 })
                .collect()
        };
        let scaled = DVector::from_iterator(c.len(), c.iter().zip(&weights).map(|(ci, w)| ci * *w));
        let back: CVector = (&self.u * scaled).iter().copied().collect();
        let corr = self.q.adjoint_apply(&back)?;
        Ok(v.iter().zip(&corr).map(|(x, y)| x - y).collect())
    }
}

/// The sparsifying side of the ADMM split: identity (synthesis) or the
/// analysis operator `z -> Psi* z` of a tight frame with `Psi Psi* = c I`.
enum Sparsifier<'a> {
    Identity,
    Frame { psi: &'a CMatrix, c: f64 },
}

impl Sparsifier<'_> {
    fn forward(&self, z: &[C64]) -> Result<CVector> {
        match self {
            Sparsifier::Identity => Ok(z.to_vec()),
            Sparsifier::Frame { psi, .. } => psi.adjoint_apply(z),
        }
    }

    /// `T*(w) / c`, the least-squares inverse of `forward`.
    fn pseudo_inverse(&self, w: &[C64]) -> Result<CVector> {
        match self {
            Sparsifier::Identity => Ok(w.to_vec()),
            Sparsifier::Frame { psi, c } => {
                let mut z = psi.matvec(w)?;
                z.iter_mut().for_each(|x| *x /= *c);
                Ok(z)
            }
        }
    }

    fn frame_bound(&self) -> f64 {
        match self {
            Sparsifier::Identity => 1.0,
            Sparsifier::Frame { c, .. } => *c,
        }
    }
}

/// Over-relaxation factor for ADMM.
const RELAX: f64 = 1.6;

/// `min ||T z||_1` subject to `||Qz - b|| <= eps` by scaled ADMM on the split
/// `w = T z`.
fn admm(q: &CMatrix, b: &[C64], eps: f64, t: &Sparsifier<'_>, cfg: &AdmmConfig) -> Result<L1Solution> {
    let ball = DataBall::new(q, b, eps)?;
    let dim = q.cols();
    if norm(b) <= eps {
        return Ok(L1Solution {
            x: vec![ZERO; dim],
            iterations: 0,
            converged: true,
        });
    }
    let start = t.forward(&q.adjoint_apply(b)?)?;
    let scale = start.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let root_c = t.frame_bound().sqrt();
    let mut rho = 10.0 / scale;
    let mut w = vec![ZERO; start.len()];
    let mut u = vec![ZERO; start.len()];
    let mut z = vec![ZERO; dim];
    for it in 1..=cfg.max_iters {
        let target: CVector = w.iter().zip(&u).map(|(wi, ui)| wi - ui).collect();
        z = ball.project(&t.pseudo_inverse(&target)?)?;
        let tz = t.forward(&z)?;
        let relaxed: CVector = tz.iter().zip(&w).map(|(a, b)| a * RELAX + b * (1.0 - RELAX)).collect();
        let w_prev = std::mem::replace(
            &mut w,
            soft_threshold_vec(&relaxed.iter().zip(&u).map(|(a, b)| a + b).collect::<CVector>(), 1.0 / rho),
        );
        for ((ui, ri), wi) in u.iter_mut().zip(&relaxed).zip(&w) {
            *ui += ri - wi;
        }
        let primal = norm(&sub(&tz, &w));
        let dual = rho * root_c * norm(&sub(&w, &w_prev));
        let eps_pri = cfg.tol * norm(&tz).max(norm(&w));
        let eps_dual = cfg.tol * rho * root_c * norm(&u);
        if primal <= eps_pri && dual <= eps_dual {
            return Ok(L1Solution {
                x: z,
                iterations: it,
                converged: true,
            });
        }
        // residual balancing; u is scaled by 1/rho
        if primal > 10.0 * dual {
            rho *= 2.0;
            u.iter_mut().for_each(|x| *x *= 0.5);
        } else if dual > 10.0 * primal {
            rho *= 0.5;
            u.iter_mut().for_each(|x| *x *= 2.0);
        }
    }
    Ok(L1Solution {
        x: z,
        iterations: cfg.max_iters,
        converged: false,
    })
}

/// Basis Pursuit `min ||z||_1 s.t. Az = b` (`eps_data = 0`) or BPDN
/// `s.t. ||Az - b|| <= eps_data`.
pub fn basis_pursuit(a: &CMatrix, b: &[C64], eps_data: f64) -> Result<L1Solution> {
    basis_pursuit_with(a, b, eps_data, &AdmmConfig::default())
}

pub fn basis_pursuit_with(a: &CMatrix, b: &[C64], eps_data: f64, cfg: &AdmmConfig) -> Result<L1Solution> {
    admm(a, b, eps_data, &Sparsifier::Identity, cfg)
}

/// Analysis Basis Pursuit `min ||Psi* z||_1 s.t. ||Phi z - b|| <= eps_data`
/// over signals `z`. `Psi` must be a tight frame (`Psi Psi* = c I`).
pub fn analysis_bp(phi: &CMatrix, psi: &CMatrix, b: &[C64], eps_data: f64) -> Result<L1Solution> {
    analysis_bp_with(phi, psi, b, eps_data, &AdmmConfig::default())
}

pub fn analysis_bp_with(phi: &CMatrix, psi: &CMatrix, b: &[C64], eps_data: f64, cfg: &AdmmConfig) -> Result<L1Solution> {
    if psi.rows() != phi.cols() {
        return Err(Error::DimensionMismatch {
            op: "analysis_bp",
            expected: phi.cols(),
            found: psi.rows(),
        });
    }
    let c = tight_frame_bound(psi)?;
    admm(phi, b, eps_data, &Sparsifier::Frame { psi, c }, cfg)
}

/// Frame bound `c` of a tight frame, checked on a fixed probe vector.
fn tight_frame_bound(psi: &CMatrix) -> Result<f64> {
    let r = psi.rows();
    let c = norm_sqr(psi.as_slice()) / r as f64;
    let probe: CVector = (0..r).map(|i| C64::new((i as f64 * 0.754).sin(), (i as f64 * 1.31).cos())).collect();
    let back = psi.matvec(&psi.adjoint_apply(&probe)?)?;
    let err = norm(&back.iter().zip(&probe).map(|(x, p)| x - p * c).collect::<CVector>());
    if !(c > 0.0) || err > 1e-8 * c * norm(&probe) {
        return Err(Error::param("psi", "analysis BP needs a tight frame (Psi Psi* = cI)"));
    }
    Ok(c)
}

/// BLOT applied to a dense L1 estimate.
pub fn blot_postprocess(z_dense: &[C64], a: &SensingMatrix, b: &[C64], s: usize, bands: &BandIndex) -> Result<RecoveryResult> {
    let out = blot(z_dense, a, b, s, bands)?;
    let support = out.estimate.support.clone();
    let termination = if support.len() < s {
        Termination::ExclusionExhausted
    } else {
        Termination::SparsityReached
    };
    Ok(RecoveryResult {
        estimate: out.estimate,
        residual_norm_history: vec![out.residual_norm],
        iterations: 1,
        termination,
        trace: vec![Step {
            prior_support: Vec::new(),
            picks: out.selected,
            support,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{dft_frame, frame_model, spectral_matrix, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, m: usize, seed: u64) -> CMatrix {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMatrix::from_fn(n, m, |_, _| {
            C64::new(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal))
        });
        for j in 0..m {
            let nj = a.col_norm(j);
            a.col_mut(j).iter_mut().for_each(|x| *x /= nj);
        }
        a
    }

    #[test]
    fn soft_threshold_shrinks_magnitude_keeps_phase() {
        let v = C64::from_polar(3.0, 0.7);
        let out = soft_threshold(v, 1.0);
        assert!((out.norm() - 2.0).abs() < 1e-15);
        assert!((out.arg() - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(v, 3.0), ZERO);
        assert_eq!(soft_threshold(ZERO, 0.0), ZERO);
    }

    #[test]
    fn lambda_rules() {
        let h = LambdaRule::HalfSqrtLogM.resolve(4000).unwrap();
        let s = LambdaRule::Sqrt2LogM.resolve(4000).unwrap();
        assert!((h - 1.44).abs() < 0.005, "{h}");
        assert!((s - 4.07).abs() < 0.005, "{s}");
        assert!(LambdaRule::Explicit(-1.0).resolve(10).is_err());
    }

    #[test]
    fn lipschitz_matches_largest_singular_value() {
        let a = gaussian(6, 15, 1);
        let l = lipschitz_constant(&a).unwrap();
        let eig = a.gram_rows().to_nalgebra().symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        assert!(l >= top && l <= 1.02 * top);
    }

    #[test]
    fn lasso_zero_above_null_threshold() {
        let a = gaussian(10, 30, 2);
        let b: CVector = a.col(3).to_vec();
        let cmax = a.adjoint_apply(&b).unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max);
        let cfg = L1Config::new(LambdaRule::Explicit(1.0), cmax * 1.01);
        let sol = lasso(&a, &b, &cfg).unwrap();
        assert!(sol.x.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn lasso_satisfies_kkt() {
        let a = gaussian(15, 40, 3);
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let b: CVector = (0..15).map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        let pen = 0.3;
        let cfg = L1Config {
            lambda_rule: LambdaRule::Explicit(1.0),
            sigma: pen,
            max_iters: 100_000,
            tol: 1e-14,
        };
        let sol = lasso(&a, &b, &cfg).unwrap();
        assert!(sol.converged);
        let corr = a.adjoint_apply(&sub(&b, &a.matvec(&sol.x).unwrap())).unwrap();
        let tol = 1e-5;
        let mut nonzero = 0;
        for (c, x) in corr.iter().zip(&sol.x) {
            assert!(c.norm() <= pen + tol);
            if x.norm() > 1e-6 {
                nonzero += 1;
                assert!((c.norm() - pen).abs() <= tol);
                // the correlation points along the coefficient
                assert!((c / c.norm() - x / x.norm()).norm() <= 1e-3);
            }
        }
        assert!(nonzero > 0);
    }

    #[test]
    fn lasso_without_penalty_is_least_squares() {
        let a = gaussian(12, 5, 5);
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let b: CVector = (0..12).map(|_| C64::new(r.random_range(-1.0..1.0), 0.0)).collect();
        let sol = lasso_with_penalty(&a, &b, 0.0, 50_000, 1e-15, |_| {}).unwrap();
        let grad = a.adjoint_apply(&sub(&a.matvec(&sol.x).unwrap(), &b)).unwrap();
        assert!(norm(&grad) <= 1e-6);
    }

    #[test]
    fn lasso_objective_never_increases() {
        let a = gaussian(20, 60, 7);
        let b: CVector = a.combine(&[4, 30], &[C64::new(1.0, 0.0), C64::new(0.0, -2.0)]);
        let mut seen = Vec::new();
        lasso_with_penalty(&a, &b, 0.05, 2000, 1e-12, |f| seen.push(f)).unwrap();
        assert!(seen.windows(2).all(|w| w[1] <= w[0]));
        assert!(seen.len() > 2);
    }

    #[test]
    fn bp_recovers_single_column() {
        let a = gaussian(20, 20, 8);
        let b = a.col(5).to_vec();
        let sol = basis_pursuit(&a, &b, 0.0).unwrap();
        for (j, x) in sol.x.iter().enumerate() {
            let want = if j == 5 { C64::new(1.0, 0.0) } else { ZERO };
            assert!((x - want).norm() < 1e-6, "{j}: {x}");
        }
    }

    #[test]
    fn bp_sparse_recovery_underdetermined() {
        let a = gaussian(30, 80, 9);
        let x0 = [(7, C64::new(1.0, 0.5)), (40, C64::new(-0.8, 0.0)), (66, C64::new(0.0, 1.2))];
        let b = a.combine(&[7, 40, 66], &x0.map(|p| p.1));
        let sol = basis_pursuit(&a, &b, 0.0).unwrap();
        assert!(sol.converged);
        let mut dense = vec![ZERO; 80];
        for (i, v) in x0 {
            dense[i] = v;
        }
        assert!(norm(&sub(&sol.x, &dense)) / norm(&dense) < 1e-6);
        assert!(norm(&sub(&a.matvec(&sol.x).unwrap(), &b)) < 1e-8 * norm(&b));
    }

    #[test]
    fn bp_is_homogeneous() {
        let a = gaussian(25, 60, 10);
        let b = a.combine(&[3, 17, 50], &[C64::new(1.0, 0.0), C64::new(0.5, 0.5), C64::new(-1.0, 0.2)]);
        let c = C64::new(-3.0, 40.0);
        let base = basis_pursuit(&a, &b, 0.0).unwrap().x;
        let cb: CVector = b.iter().map(|x| x * c).collect();
        let scaled = basis_pursuit(&a, &cb, 0.0).unwrap().x;
        let expect: CVector = base.iter().map(|x| x * c).collect();
        assert!(norm(&sub(&scaled, &expect)) <= 1e-6 * norm(&expect));
    }

    #[test]
    fn bpdn_constraint_and_trivial_ball() {
        let a = gaussian(20, 50, 11);
        let b = a.combine(&[1, 2], &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let eps = 0.1 * norm(&b);
        let sol = basis_pursuit(&a, &b, eps).unwrap();
        let res = norm(&sub(&a.matvec(&sol.x).unwrap(), &b));
        assert!(res <= eps * (1.0 + 1e-9));
        let zero = basis_pursuit(&a, &b, norm(&b)).unwrap();
        assert!(zero.x.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn bp_infeasible_when_overdetermined() {
        let a = gaussian(10, 3, 12);
        let b: CVector = (0..10).map(|i| C64::new(i as f64, 1.0)).collect();
        assert!(matches!(basis_pursuit(&a, &b, 0.0), Err(Error::Infeasible(_))));
        assert!(basis_pursuit(&a, &b, 1e3).is_ok());
    }

    #[test]
    fn bp_beats_support_least_squares_in_l1() {
        let a = gaussian(15, 40, 13);
        let support = [2, 9, 20, 33];
        let b = a.combine(&support, &[C64::new(1.0, 0.0), C64::new(1.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.3, 0.0)]);
        let sol = basis_pursuit(&a, &b, 0.0).unwrap();
        let ls = crate::numlin::restricted_least_squares(&a, &b, &support).unwrap();
        assert!(l1_norm(&sol.x) <= l1_norm(&ls.coefficients) * (1.0 + 1e-7));
    }

    #[test]
    fn analysis_bp_with_unitary_frame_matches_synthesis() {
        let mut r = ChaCha8Rng::seed_from_u64(14);
        let fm = frame_model(12, 32, 1, 1.0, &mut r).unwrap();
        let x = [(3usize, C64::new(1.0, 0.0)), (20, C64::new(0.0, -0.7))];
        let y = fm.psi.combine(&[3, 20], &x.map(|p| p.1));
        let b = fm.phi.matvec(&y).unwrap();
        let cfg = AdmmConfig {
            max_iters: 100_000,
            tol: 1e-10,
        };
        let synth = basis_pursuit_with(&fm.sensing.matrix, &b, 0.0, &cfg).unwrap();
        let y_synth = fm.psi.matvec(&synth.x).unwrap();
        let ana = analysis_bp_with(&fm.phi, &fm.psi, &b, 0.0, &cfg).unwrap();
        assert!(norm(&sub(&ana.x, &y_synth)) <= 1e-6 * norm(&y_synth));
    }

    #[test]
    fn analysis_bp_trivial_ball_and_tightness_check() {
        let mut r = ChaCha8Rng::seed_from_u64(15);
        let fm = frame_model(10, 20, 4, 1.0, &mut r).unwrap();
        let b = fm.phi.matvec(fm.psi.col(17)).unwrap();
        let z = analysis_bp(&fm.phi, &fm.psi, &b, norm(&b)).unwrap();
        assert!(z.x.iter().all(|x| *x == ZERO));
        let mut loose = dft_frame(20, 4);
        loose.set(0, 0, C64::new(5.0, 0.0));
        assert!(analysis_bp(&fm.phi, &loose, &b, 0.0).is_err());
    }

    #[test]
    fn blot_postprocess_keeps_true_sparse_input() {
        let mut r = ChaCha8Rng::seed_from_u64(16);
        let grid = GridSpec::new(10, 100).unwrap();
        let a = spectral_matrix(60, grid, &mut r).unwrap();
        let x = crate::models::make_objects(4, 2.0, 4.0, grid, &mut r).unwrap();
        let b = a.matrix.combine(&x.support, &x.amplitudes);
        let bands = BandIndex::build(&a, crate::coherence::BandPolicy::CoherenceThreshold { eta: 0.3 }).unwrap();
        let res = blot_postprocess(&x.to_dense(), &a, &b, 4, &bands).unwrap();
        assert_eq!(res.support(), x.support.as_slice());
        assert!(res.residual_norm_history[0] <= 1e-10 * norm(&b));
    }
}
