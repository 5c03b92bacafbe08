//! Named algorithms as they appear in configs and CSV rows.

use std::fmt;
use std::str::FromStr;

use super::config::SolverSettings;
use crate::coherence::BandIndex;
use crate::error::Result;
use crate::greedy::{bloomp, bomp, loomp, omp};
use crate::l1::{analysis_bp_with, basis_pursuit_with, blot_postprocess, lasso, AdmmConfig, L1Config, LambdaRule};
use crate::models::{FrameModel, SensingMatrix, SparseSignal};
use crate::numlin::{CVector, C64};
use crate::thresh::{be_only_variant, blocosamp, bloiht, blosp, bmt, cosamp, subspace_pursuit, BeOnlyKind};

/// Lasso penalty rule. The `Log10` variants use the base-10 logarithm and
/// exist to check how much the base matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaChoice {
    HalfSqrtLogM,
    Sqrt2LogM,
    HalfSqrtLog10M,
    Sqrt2Log10M,
}

impl LambdaChoice {
    fn suffix(&self) -> &'static str {
        match self {
            LambdaChoice::HalfSqrtLogM => "S",
            LambdaChoice::Sqrt2LogM => "L",
            LambdaChoice::HalfSqrtLog10M => "S10",
            LambdaChoice::Sqrt2Log10M => "L10",
        }
    }

    pub fn rule(&self, columns: usize) -> LambdaRule {
        let log10_m = (columns.max(1) as f64).log10();
        match self {
            LambdaChoice::HalfSqrtLogM => LambdaRule::HalfSqrtLogM,
            LambdaChoice::Sqrt2LogM => LambdaRule::Sqrt2LogM,
            LambdaChoice::HalfSqrtLog10M => LambdaRule::Explicit(0.5 * log10_m.sqrt()),
            LambdaChoice::Sqrt2Log10M => LambdaRule::Explicit((2.0 * log10_m).sqrt()),
        }
    }

    const ALL: [LambdaChoice; 4] = [
        LambdaChoice::HalfSqrtLogM,
        LambdaChoice::Sqrt2LogM,
        LambdaChoice::HalfSqrtLog10M,
        LambdaChoice::Sqrt2Log10M,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Omp,
    /// OMP run to `k s` atoms.
    OmpTimes(usize),
    Bomp,
    Loomp,
    Bloomp,
    Bmt,
    Sp,
    CoSaMP,
    Bsp,
    BCoSaMP,
    Bniht,
    Blosp,
    BloCoSaMP,
    Bloiht,
    Bp,
    BpBlot,
    Lasso(LambdaChoice),
    LassoBlot(LambdaChoice),
    /// Analysis BP over the frame; estimates the signal, not coefficients.
    AnalysisBp,
}

const FIXED_NAMES: [(&str, Algorithm); 17] = [
    ("OMP", Algorithm::Omp),
    ("BOMP", Algorithm::Bomp),
    ("LOOMP", Algorithm::Loomp),
    ("BLOOMP", Algorithm::Bloomp),
    ("BMT", Algorithm::Bmt),
    ("SP", Algorithm::Sp),
    ("CoSaMP", Algorithm::CoSaMP),
    ("BSP", Algorithm::Bsp),
    ("BCoSaMP", Algorithm::BCoSaMP),
    ("BNIHT", Algorithm::Bniht),
    ("BLOSP", Algorithm::Blosp),
    ("BLOCoSaMP", Algorithm::BloCoSaMP),
    ("BLOIHT", Algorithm::Bloiht),
    ("BP", Algorithm::Bp),
    ("BP-BLOT", Algorithm::BpBlot),
    ("ABP", Algorithm::AnalysisBp),
    ("OMP-2s", Algorithm::OmpTimes(2)),
];

impl Algorithm {
    /// Every algorithm with a one-line description, in display order.
    pub fn catalogue() -> Vec<(Algorithm, &'static str)> {
        let mut out = vec![
            (Algorithm::Omp, "orthogonal matching pursuit"),
            (Algorithm::OmpTimes(2), "OMP run to 2s atoms (OMP-<k>s for any k)"),
            (Algorithm::OmpTimes(5), "OMP run to 5s atoms"),
            (Algorithm::Bomp, "band-excluded OMP"),
            (Algorithm::Loomp, "OMP with local optimization after every pick"),
            (Algorithm::Bloomp, "band-excluded, locally optimized OMP"),
            (Algorithm::Bmt, "band-excluded matched thresholding"),
            (Algorithm::Sp, "subspace pursuit"),
            (Algorithm::CoSaMP, "CoSaMP"),
            (Algorithm::Bsp, "band-excluded subspace pursuit"),
            (Algorithm::BCoSaMP, "band-excluded CoSaMP"),
            (Algorithm::Bniht, "band-excluded normalized IHT"),
            (Algorithm::Blosp, "band-excluded, locally optimized subspace pursuit"),
            (Algorithm::BloCoSaMP, "band-excluded, locally optimized CoSaMP"),
            (Algorithm::Bloiht, "band-excluded, locally optimized IHT"),
            (Algorithm::Bp, "basis pursuit (ball radius = realized error norm)"),
            (Algorithm::BpBlot, "basis pursuit followed by BLOT"),
        ];
        for l in LambdaChoice::ALL {
            let what = match l {
                LambdaChoice::HalfSqrtLogM => "lambda = 0.5 sqrt(ln M)",
                LambdaChoice::Sqrt2LogM => "lambda = sqrt(2 ln M)",
                LambdaChoice::HalfSqrtLog10M => "lambda = 0.5 sqrt(log10 M)",
                LambdaChoice::Sqrt2Log10M => "lambda = sqrt(2 log10 M)",
            };
            out.push((Algorithm::Lasso(l), what));
            out.push((Algorithm::LassoBlot(l), what));
        }
        out.push((Algorithm::AnalysisBp, "analysis basis pursuit over the frame (frame ensemble only)"));
        out
    }

    pub fn needs_frame(&self) -> bool {
        matches!(self, Algorithm::AnalysisBp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::OmpTimes(k) => write!(f, "OMP-{k}s"),
            Algorithm::Lasso(l) => write!(f, "Lasso-{}", l.suffix()),
            Algorithm::LassoBlot(l) => write!(f, "Lasso-BLOT-{}", l.suffix()),
            other => {
                let name = FIXED_NAMES.iter().find(|(_, a)| a == other).map(|(n, _)| *n).unwrap_or("?");
                f.write_str(name)
            }
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        if let Some((_, a)) = FIXED_NAMES.iter().find(|(n, _)| n.eq_ignore_ascii_case(t)) {
            return Ok(*a);
        }
        let upper = t.to_ascii_uppercase();
        if let Some(k) = upper.strip_prefix("OMP-").and_then(|r| r.strip_suffix('S')) {
            if let Ok(k) = k.parse::<usize>() {
                if k >= 1 {
                    return Ok(Algorithm::OmpTimes(k));
                }
            }
        }
        for l in LambdaChoice::ALL {
            if upper == format!("LASSO-{}", l.suffix()) {
                return Ok(Algorithm::Lasso(l));
            }
            if upper == format!("LASSO-BLOT-{}", l.suffix()) {
                return Ok(Algorithm::LassoBlot(l));
            }
        }
        Err(format!("unknown algorithm `{t}` (see `bandex list-algorithms`)"))
    }
}

/// One recovery problem as seen by every algorithm of a trial.
pub struct Problem<'a> {
    pub a: &'a SensingMatrix,
    pub b: &'a [C64],
    pub s: usize,
    pub bands: &'a BandIndex,
    /// Per-component noise standard deviation (Lasso penalty scale).
    pub sigma: f64,
    /// Norm of the realized data error, used as the BP ball radius.
    pub error_norm: f64,
    pub solver: &'a SolverSettings,
    pub frame: Option<&'a FrameModel>,
}

pub struct Output {
    pub estimate: SparseSignal,
    /// Direct signal estimate, for methods that do not produce coefficients.
    pub signal: Option<CVector>,
    pub converged: bool,
}

impl Output {
    fn coeffs(estimate: SparseSignal) -> Self {
        Output {
            estimate,
            signal: None,
            converged: true,
        }
    }
}

impl Algorithm {
    pub fn run(&self, p: &Problem<'_>) -> Result<Output> {
        let (a, b, s, bands) = (p.a, p.b, p.s, p.bands);
        let eps = p.solver.pursuit_eps_rel * crate::numlin::norm(b);
        let admm = AdmmConfig {
            max_iters: p.solver.admm_max_iters,
            tol: p.solver.admm_tol,
        };
        let lasso_cfg = |l: LambdaChoice| L1Config {
            lambda_rule: l.rule(a.matrix.cols()),
            sigma: p.sigma,
            max_iters: p.solver.lasso_max_iters,
            tol: p.solver.lasso_tol,
        };
        let grid = a.grid;
        Ok(match *self {
            Algorithm::Omp => Output::coeffs(omp(a, b, s)?.estimate),
            Algorithm::OmpTimes(k) => Output::coeffs(omp(a, b, (k * s).min(a.matrix.rows()))?.estimate),
            Algorithm::Bomp => Output::coeffs(bomp(a, b, s, bands)?.estimate),
            Algorithm::Loomp => Output::coeffs(loomp(a, b, s, bands)?.estimate),
            Algorithm::Bloomp => Output::coeffs(bloomp(a, b, s, bands)?.estimate),
            Algorithm::Bmt => Output::coeffs(bmt(a, b, s, bands)?.estimate),
            Algorithm::Sp => Output::coeffs(subspace_pursuit(a, b, s, eps)?.estimate),
            Algorithm::CoSaMP => Output::coeffs(cosamp(a, b, s, eps)?.estimate),
            Algorithm::Bsp => Output::coeffs(be_only_variant(a, b, s, bands, eps, BeOnlyKind::Bsp)?.estimate),
            Algorithm::BCoSaMP => Output::coeffs(be_only_variant(a, b, s, bands, eps, BeOnlyKind::BCoSaMP)?.estimate),
            Algorithm::Bniht => Output::coeffs(be_only_variant(a, b, s, bands, eps, BeOnlyKind::Bniht)?.estimate),
            Algorithm::Blosp => Output::coeffs(blosp(a, b, s, bands, eps)?.estimate),
            Algorithm::BloCoSaMP => Output::coeffs(blocosamp(a, b, s, bands, eps)?.estimate),
            Algorithm::Bloiht => Output::coeffs(bloiht(a, b, s, bands, eps)?.estimate),
            Algorithm::Bp | Algorithm::BpBlot => {
                let sol = basis_pursuit_with(&a.matrix, b, p.error_norm, &admm)?;
                let estimate = if *self == Algorithm::BpBlot {
                    blot_postprocess(&sol.x, a, b, s, bands)?.estimate
                } else {
                    SparseSignal::from_dense(&sol.x, grid)
                };
                Output {
                    estimate,
                    signal: None,
                    converged: sol.converged,
                }
            }
            Algorithm::Lasso(l) | Algorithm::LassoBlot(l) => {
                let sol = lasso(&a.matrix, b, &lasso_cfg(l))?;
                let estimate = if matches!(self, Algorithm::LassoBlot(_)) {
                    blot_postprocess(&sol.x, a, b, s, bands)?.estimate
                } else {
                    SparseSignal::from_dense(&sol.x, grid)
                };
                Output {
                    estimate,
                    signal: None,
                    converged: sol.converged,
                }
            }
            Algorithm::AnalysisBp => {
                let fm = p
                    .frame
                    .ok_or_else(|| crate::error::Error::param("algorithm", "ABP needs the frame ensemble"))?;
                let sol = analysis_bp_with(&fm.phi, &fm.psi, b, p.error_norm, &admm)?;
                Output {
                    estimate: SparseSignal::empty(grid),
                    signal: Some(sol.x),
                    converged: sol.converged,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for (a, _) in Algorithm::catalogue() {
            let name = a.to_string();
            assert_eq!(name.parse::<Algorithm>().unwrap(), a, "{name}");
            assert_eq!(name.to_lowercase().parse::<Algorithm>().unwrap(), a);
            assert!(!name.contains(','));
        }
        assert_eq!("omp-10s".parse::<Algorithm>().unwrap(), Algorithm::OmpTimes(10));
        assert!("OMP-0s".parse::<Algorithm>().is_err());
        assert!("Lasso-BLOT-X".parse::<Algorithm>().is_err());
    }

    #[test]
    fn log10_rules_are_smaller() {
        let small = LambdaChoice::HalfSqrtLog10M.rule(4000).resolve(4000).unwrap();
        let natural = LambdaChoice::HalfSqrtLogM.rule(4000).resolve(4000).unwrap();
        assert!(small < natural);
    }
}
