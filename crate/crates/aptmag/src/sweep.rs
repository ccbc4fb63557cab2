//! Parameter sweeps over the cavity decay rate: eigenvalue trajectories with
//! branch continuity, exceptional-point location by bisection, and the
//! level-attraction report.
//!
//! Three eigenvalue pipelines are available. The anti-PT closed form uses the
//! symmetrized parameters; the general-effective pipeline diagonalizes the
//! exact-parameter elimination result; the full-3-mode pipeline diagonalizes
//! the 3x3 dynamical matrix and keeps the two eigenvectors with the least
//! cavity weight. Below kappa ~ 2g the full model enters the polariton regime
//! and its branch discriminant can change sign more than once; ep_estimate
//! refines the last sign change along ascending kappa.

use crate::effective::{
    classify_phase, effective_coupling, eigvals_antipt, eigvals_general, eliminate_cavity,
    magnon_branch_eigvals, EffectiveError, PhaseRegime, DEFAULT_PHASE_TOL,
};
use crate::linalg::C64;
use crate::model::{ModelError, SystemParams};
use crate::scattering::{
    combined_spectrum, default_grid, dip_analysis, fmt_sig, spectrum, Port, ProbeSpec,
    ScatteringError,
};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Effective(#[from] EffectiveError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("sweep values must be non-empty, positive, and strictly monotone")]
    BadPlan,
    #[error("discriminant does not change sign across [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("bracket or tolerance invalid: {0}")]
    BadBracket(String),
}

/// Which eigenvalue computation a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pipeline {
    /// Closed-form anti-PT eigenvalues from the symmetrized parameters.
    AntiPt,
    /// Numeric eigenvalues of the exact-parameter effective Hamiltonian.
    GeneralEffective,
    /// Magnon-branch eigenvalues of the full 3x3 dynamical matrix.
    FullThreeMode,
}

/// Swept control parameter (the cavity decay rate is the only one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParameter {
    Kappa,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: SystemParams,
    pub pipeline: Pipeline,
}

impl SweepPlan {
    pub fn new(base: SystemParams, values: Vec<f64>, pipeline: Pipeline) -> Result<Self, SweepError> {
        if values.is_empty() || values.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(SweepError::BadPlan);
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if values.len() > 1 && !increasing && !decreasing {
            return Err(SweepError::BadPlan);
        }
        base.validate()?;
        Ok(SweepPlan {
            parameter: SweepParameter::Kappa,
            values,
            base,
            pipeline,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint {
    pub kappa: f64,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub regime: PhaseRegime,
}

#[derive(Debug, Clone, Copy)]
pub struct EpEstimate {
    pub kappa0: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct EigenTrajectory {
    pub points: Vec<TrajectoryPoint>,
    pub ep_estimate: Option<EpEstimate>,
}

impl EigenTrajectory {
    /// CSV: `kappa_MHz,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus,regime`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "kappa_MHz,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus,regime"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_sig(p.kappa),
                fmt_sig(p.lambda_plus.re),
                fmt_sig(p.lambda_plus.im),
                fmt_sig(p.lambda_minus.re),
                fmt_sig(p.lambda_minus.im),
                p.regime.regime
            )?;
        }
        Ok(())
    }
}

/// Eigenvalue pair at a given total cavity rate, by the selected pipeline.
/// Canonical ordering (larger real part first, ties by imaginary part).
pub fn eigenpair_at(
    base: &SystemParams,
    pipeline: Pipeline,
    kappa: f64,
) -> Result<(C64, C64), SweepError> {
    match pipeline {
        Pipeline::AntiPt => {
            let inputs = base.antipt_inputs();
            let coupling = effective_coupling(inputs.coupling, kappa)?;
            Ok(eigvals_antipt(inputs.detuning, coupling, inputs.damping))
        }
        Pipeline::GeneralEffective => {
            let p = base.with_total_kappa(kappa)?;
            Ok(eigvals_general(&eliminate_cavity(&p)?))
        }
        Pipeline::FullThreeMode => {
            let p = base.with_total_kappa(kappa)?;
            Ok(magnon_branch_eigvals(&p)?)
        }
    }
}

/// Pipeline discriminant Re[((lambda+ - lambda-)/2)^2]; positive in the broken
/// phase, negative in the symmetric phase. Equals detuning^2 - coupling^2
/// exactly for the anti-PT pipeline.
pub fn discriminant(
    base: &SystemParams,
    pipeline: Pipeline,
    kappa: f64,
) -> Result<f64, SweepError> {
    match pipeline {
        Pipeline::AntiPt => {
            let inputs = base.antipt_inputs();
            let coupling = effective_coupling(inputs.coupling, kappa)?;
            Ok(inputs.detuning * inputs.detuning - coupling * coupling)
        }
        _ => {
            let (lp, lm) = eigenpair_at(base, pipeline, kappa)?;
            let half = (lp - lm) * 0.5;
            Ok((half * half).re)
        }
    }
}

/// Runs the sweep: per-kappa eigenvalues, branch-matched to the previous point
/// by minimal total complex distance, with the anti-PT phase classification
/// attached per point, and an EP estimate refined from the discriminant's sign
/// changes.
pub fn run_sweep(plan: &SweepPlan) -> Result<EigenTrajectory, SweepError> {
    let inputs = plan.base.antipt_inputs();
    let mut points: Vec<TrajectoryPoint> = Vec::with_capacity(plan.values.len());
    let mut discs: Vec<f64> = Vec::with_capacity(plan.values.len());
    for &kappa in &plan.values {
        let (mut lp, mut lm) = eigenpair_at(&plan.base, plan.pipeline, kappa)?;
        if let Some(prev) = points.last() {
            // 2-permutation nearest-neighbor matching
            let keep = (lp - prev.lambda_plus).norm() + (lm - prev.lambda_minus).norm();
            let swap = (lm - prev.lambda_plus).norm() + (lp - prev.lambda_minus).norm();
            if swap < keep {
                std::mem::swap(&mut lp, &mut lm);
            }
        }
        let coupling = effective_coupling(inputs.coupling, kappa)?;
        let regime = classify_phase(inputs.detuning, coupling, DEFAULT_PHASE_TOL);
        discs.push(discriminant(&plan.base, plan.pipeline, kappa)?);
        points.push(TrajectoryPoint {
            kappa,
            lambda_plus: lp,
            lambda_minus: lm,
            regime,
        });
    }

    // last sign change along ascending kappa, refined by bisection
    let mut ep_estimate = None;
    let ascending: Vec<(f64, f64)> = {
        let mut pairs: Vec<(f64, f64)> = plan.values.iter().copied().zip(discs).collect();
        if pairs.len() > 1 && pairs[0].0 > pairs[1].0 {
            pairs.reverse();
        }
        pairs
    };
    for w in ascending.windows(2).rev() {
        let (k_lo, d_lo) = w[0];
        let (k_hi, d_hi) = w[1];
        if d_lo == 0.0 {
            ep_estimate = Some(EpEstimate {
                kappa0: k_lo,
                bracket: (k_lo, k_hi),
            });
            break;
        }
        if d_lo * d_hi < 0.0 {
            let tol = (k_hi - k_lo).max(1e-9) * 1e-6;
            let kappa0 = locate_ep(&plan.base, plan.pipeline, (k_lo, k_hi), tol)?;
            ep_estimate = Some(EpEstimate {
                kappa0,
                bracket: (k_lo, k_hi),
            });
            break;
        }
    }

    Ok(EigenTrajectory {
        points,
        ep_estimate,
    })
}

/// Bisection on the pipeline discriminant to a bracket width `tol`. For the
/// anti-PT pipeline the result agrees with the closed form g^2/|detuning| to
/// the same tolerance.
pub fn locate_ep(
    base: &SystemParams,
    pipeline: Pipeline,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, SweepError> {
    let (mut lo, mut hi) = bracket;
    if lo.is_nan() || hi.is_nan() || tol.is_nan() || lo <= 0.0 || hi <= lo || tol <= 0.0 {
        return Err(SweepError::BadBracket(format!(
            "bracket [{lo}, {hi}], tol {tol}"
        )));
    }
    let f_lo = discriminant(base, pipeline, lo)?;
    let f_hi = discriminant(base, pipeline, hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo * f_hi > 0.0 {
        return Err(SweepError::NoSignChange { lo, hi });
    }
    let mut f_lo = f_lo;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = discriminant(base, pipeline, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of the level-attraction report.
#[derive(Debug, Clone, Serialize)]
pub struct AttractionRow {
    pub kappa: f64,
    pub separation: f64,
    pub mean_fwhm: f64,
    pub resolvable: bool,
    pub regime: PhaseRegime,
}

/// For each cavity rate: compute both magnon-readout spectra on the default
/// grid, combine them, run the dip analysis, and attach the phase regime.
pub fn level_attraction_report(
    base: &SystemParams,
    kappa_values: &[f64],
) -> Result<Vec<AttractionRow>, SweepError> {
    let inputs = base.antipt_inputs();
    let center = 0.5 * (base.magnon1.omega + base.magnon2.omega);
    let mut rows = Vec::with_capacity(kappa_values.len());
    for &kappa in kappa_values {
        let p = base.with_total_kappa(kappa)?;
        let grid = default_grid(center);
        let s1 = spectrum(&p, &ProbeSpec::new(Port::Magnon1, grid.clone(), 1.0)?)?;
        let s2 = spectrum(&p, &ProbeSpec::new(Port::Magnon2, grid, 1.0)?)?;
        let report = dip_analysis(&combined_spectrum(&s1, &s2)?)?;
        let mean_fwhm = if report.dips.len() >= 2 {
            // mean over the two deepest, as used by the resolvability verdict
            let mut order: Vec<usize> = (0..report.dips.len()).collect();
            order.sort_by(|&a, &b| {
                report.dips[a]
                    .depth
                    .partial_cmp(&report.dips[b].depth)
                    .unwrap()
            });
            0.5 * (report.fwhm[order[0]] + report.fwhm[order[1]])
        } else {
            report.fwhm[0]
        };
        let coupling = effective_coupling(inputs.coupling, kappa)?;
        rows.push(AttractionRow {
            kappa,
            separation: report.separation,
            mean_fwhm,
            resolvable: report.resolvable,
            regime: classify_phase(inputs.detuning, coupling, DEFAULT_PHASE_TOL),
        });
    }
    Ok(rows)
}

/// CSV for the level-attraction report.
pub fn write_attraction_csv<W: Write>(rows: &[AttractionRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "kappa_MHz,dip_separation_MHz,mean_fwhm_MHz,resolvable,regime")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_sig(r.kappa),
            fmt_sig(r.separation),
            fmt_sig(r.mean_fwhm),
            r.resolvable,
            r.regime.regime
        )?;
    }
    Ok(())
}
