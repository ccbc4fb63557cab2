//! Nonlinear least-squares fitting of reflection spectra.
//!
//! The optimizer is a damped Gauss-Newton (Levenberg-Marquardt) loop with
//! central-difference Jacobians: every accepted step is non-increasing in the
//! sum of squares, damping shrinks by 3 on acceptance and grows by 3 on
//! rejection. Objectives are built on linear magnitudes; dB inputs are
//! converted before fitting.
//!
//! Drive phases enter the reflection only through their cosine, so their sign
//! is not identifiable from magnitude (or even complex reflection) data; fitted
//! phases are reported as the canonical representative in [0, pi].

use crate::effective::{eigvals_general, eliminate_cavity, EffectiveError};
use crate::linalg::C64;
use crate::model::{ModelError, SystemParams};
use crate::scattering::{
    reflection_magnon1, reflection_magnon2, reflection_cavity, Port, ScatteringError,
};
use serde::Serialize;
use std::f64::consts::PI;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Effective(#[from] EffectiveError),
    #[error("row {line}: {msg}")]
    Ingest { line: usize, msg: String },
    #[error("unknown fit parameter '{0}'")]
    UnknownParameter(String),
    #[error("bounds: {0}")]
    BadBounds(String),
    #[error("phase fitting needs a magnon port, got {0:?}")]
    WrongPort(Port),
    #[error("measured spectrum is empty")]
    EmptyData,
}

/// Magnitude scale of measured data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scale {
    Linear,
    Db,
}

/// A measured (or synthetic) magnitude spectrum for one readout port.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSpectrum {
    pub port: Port,
    /// (probe frequency \[MHz\], magnitude) pairs, strictly increasing in frequency.
    pub points: Vec<(f64, f64)>,
    pub scale: Scale,
}

impl MeasuredSpectrum {
    pub fn new(port: Port, points: Vec<(f64, f64)>, scale: Scale) -> Result<Self, FitError> {
        if points.is_empty() {
            return Err(FitError::EmptyData);
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(FitError::Ingest {
                    line: i + 2,
                    msg: format!(
                        "frequencies not strictly increasing ({} after {})",
                        w[1].0, w[0].0
                    ),
                });
            }
        }
        for (i, &(_, m)) in points.iter().enumerate() {
            if !m.is_finite() {
                return Err(FitError::Ingest {
                    line: i + 1,
                    msg: "non-finite magnitude".into(),
                });
            }
            if scale == Scale::Linear && m < 0.0 {
                return Err(FitError::Ingest {
                    line: i + 1,
                    msg: format!("negative linear magnitude ({m})"),
                });
            }
        }
        Ok(MeasuredSpectrum {
            port,
            points,
            scale,
        })
    }

    /// Parses the `freq_MHz,mag` CSV format. Line numbers in errors are
    /// 1-based and include the header.
    pub fn from_csv<R: BufRead>(reader: R, port: Port, scale: Scale) -> Result<Self, FitError> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            _ => {
                return Err(FitError::Ingest {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
        };
        if header.trim() != "freq_MHz,mag" {
            return Err(FitError::Ingest {
                line: 1,
                msg: format!("expected header 'freq_MHz,mag', got '{}'", header.trim()),
            });
        }
        let mut points = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| FitError::Ingest {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut fields = t.split(',');
            let parse = |s: Option<&str>| -> Result<f64, FitError> {
                s.ok_or(FitError::Ingest {
                    line: idx + 1,
                    msg: "missing field".into(),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| FitError::Ingest {
                    line: idx + 1,
                    msg: e.to_string(),
                })
            };
            let f = parse(fields.next())?;
            let m = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(FitError::Ingest {
                    line: idx + 1,
                    msg: "too many fields".into(),
                });
            }
            if let Some(&(prev, _)) = points.last() {
                if f <= prev {
                    return Err(FitError::Ingest {
                        line: idx + 1,
                        msg: format!("frequencies not strictly increasing ({f} after {prev})"),
                    });
                }
            }
            points.push((f, m));
        }
        MeasuredSpectrum::new(port, points, scale)
    }

    /// Linear-magnitude view of the data.
    pub fn to_linear(&self) -> Vec<(f64, f64)> {
        match self.scale {
            Scale::Linear => self.points.clone(),
            Scale::Db => self
                .points
                .iter()
                .map(|&(f, m)| (f, 10f64.powf(m / 20.0)))
                .collect(),
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Root-mean-square misfit in linear magnitude units.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Linearized per-parameter 1-sigma sensitivity estimates, when the normal
    /// equations are invertible.
    pub sensitivities: Option<Vec<f64>>,
    /// Parameters that finished pinned at a bound.
    pub pinned: Vec<String>,
    /// RMS residual after each accepted iteration (non-increasing).
    pub residual_history: Vec<f64>,
}

/// Names accepted by `fit_params`: the atomic rates/frequencies/phases, plus
/// `gamma1`/`gamma2` which scale a magnon's intrinsic and port rates together
/// (preserving the coupling ratio).
pub const PARAM_NAMES: &[&str] = &[
    "omega1", "omega2", "omega3", "gamma10", "gamma11", "gamma20", "gamma21", "kappa_int",
    "kappa1", "kappa2", "kappa3", "g13", "g23", "phi13", "phi23", "gamma1", "gamma2",
];

fn apply_param(p: &mut SystemParams, name: &str, value: f64) -> Result<(), FitError> {
    match name {
        "omega1" => p.magnon1.omega = value,
        "omega2" => p.magnon2.omega = value,
        "omega3" => p.cavity.omega = value,
        "gamma10" => p.magnon1.gamma_int = value,
        "gamma11" => {
            if p.magnon1.gamma_ports.is_empty() {
                p.magnon1.gamma_ports.push(0.0);
            }
            p.magnon1.gamma_ports[0] = value;
        }
        "gamma20" => p.magnon2.gamma_int = value,
        "gamma21" => {
            if p.magnon2.gamma_ports.is_empty() {
                p.magnon2.gamma_ports.push(0.0);
            }
            p.magnon2.gamma_ports[0] = value;
        }
        "kappa_int" => p.cavity.gamma_int = value,
        "kappa1" => p.cavity.gamma_ports[0] = value,
        "kappa2" => p.cavity.gamma_ports[1] = value,
        "kappa3" => p.cavity.gamma_ports[2] = value,
        "g13" => p.g13 = value,
        "g23" => p.g23 = value,
        "phi13" => p.phi13 = value,
        "phi23" => p.phi23 = value,
        "gamma1" => {
            let total = p.magnon1.total_rate();
            if total <= 0.0 {
                return Err(FitError::BadBounds(
                    "cannot scale gamma1 from a zero total rate".into(),
                ));
            }
            let scale = value / total;
            p.magnon1.gamma_int *= scale;
            for r in &mut p.magnon1.gamma_ports {
                *r *= scale;
            }
        }
        "gamma2" => {
            let total = p.magnon2.total_rate();
            if total <= 0.0 {
                return Err(FitError::BadBounds(
                    "cannot scale gamma2 from a zero total rate".into(),
                ));
            }
            let scale = value / total;
            p.magnon2.gamma_int *= scale;
            for r in &mut p.magnon2.gamma_ports {
                *r *= scale;
            }
        }
        other => return Err(FitError::UnknownParameter(other.to_string())),
    }
    Ok(())
}

fn get_param(p: &SystemParams, name: &str) -> Result<f64, FitError> {
    Ok(match name {
        "omega1" => p.magnon1.omega,
        "omega2" => p.magnon2.omega,
        "omega3" => p.cavity.omega,
        "gamma10" => p.magnon1.gamma_int,
        "gamma11" => p.gamma11(),
        "gamma20" => p.magnon2.gamma_int,
        "gamma21" => p.gamma21(),
        "kappa_int" => p.cavity.gamma_int,
        "kappa1" => p.kappa1(),
        "kappa2" => p.kappa2(),
        "kappa3" => p.kappa3(),
        "g13" => p.g13,
        "g23" => p.g23,
        "phi13" => p.phi13,
        "phi23" => p.phi23,
        "gamma1" => p.gamma1(),
        "gamma2" => p.gamma2(),
        other => return Err(FitError::UnknownParameter(other.to_string())),
    })
}

/// Wraps an angle to (-pi, pi].
fn wrap_angle(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Canonical phase representative in [0, pi] (the cosine branch).
fn canonical_phase(phi: f64) -> f64 {
    wrap_angle(phi).abs()
}

struct Objective<'a> {
    base: SystemParams,
    free: Vec<&'a str>,
    data: Vec<(Port, Vec<(f64, f64)>)>, // linear magnitudes
    n_residuals: usize,
}

impl<'a> Objective<'a> {
    fn new(
        base: &SystemParams,
        free: &[&'a str],
        measured: &[MeasuredSpectrum],
    ) -> Result<Self, FitError> {
        for name in free {
            if !PARAM_NAMES.contains(name) {
                return Err(FitError::UnknownParameter(name.to_string()));
            }
        }
        let data: Vec<(Port, Vec<(f64, f64)>)> = measured
            .iter()
            .map(|m| (m.port, m.to_linear()))
            .collect();
        let n_residuals = data.iter().map(|(_, d)| d.len()).sum();
        if n_residuals == 0 {
            return Err(FitError::EmptyData);
        }
        Ok(Objective {
            base: base.clone(),
            free: free.to_vec(),
            data,
            n_residuals,
        })
    }

    fn params_at(&self, x: &[f64]) -> Result<SystemParams, FitError> {
        let mut p = self.base.clone();
        for (name, &v) in self.free.iter().zip(x) {
            apply_param(&mut p, name, v)?;
        }
        Ok(p)
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>, FitError> {
        let p = self.params_at(x)?;
        let mut out = Vec::with_capacity(self.n_residuals);
        for (port, points) in &self.data {
            for &(freq, mag) in points {
                let t = match port {
                    Port::Magnon1 => reflection_magnon1(&p, freq)?,
                    Port::Magnon2 => reflection_magnon2(&p, freq)?,
                    Port::Cavity => reflection_cavity(&p, freq)?,
                    Port::Combined => return Err(FitError::WrongPort(Port::Combined)),
                };
                out.push(t.norm() - mag);
            }
        }
        Ok(out)
    }

    fn sse(&self, x: &[f64]) -> Result<f64, FitError> {
        Ok(self.residuals(x)?.iter().map(|r| r * r).sum())
    }
}

fn clamp_to_bounds(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Solve the (small, symmetric) normal equations by Gaussian elimination.
#[allow(clippy::needless_range_loop)]
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                m[r][k] -= f * m[col][k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for k in r + 1..n {
            acc -= m[r][k] * x[k];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

const MAX_ITERATIONS: usize = 200;
const FTOL: f64 = 1e-10;
const GTOL: f64 = 1e-8;

struct LmOutcome {
    x: Vec<f64>,
    sse: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    jtj: Vec<Vec<f64>>,
}

fn levenberg_marquardt(
    obj: &Objective,
    x0: Vec<f64>,
    bounds: &[(f64, f64)],
) -> Result<LmOutcome, FitError> {
    let n = x0.len();
    let mut x = x0;
    clamp_to_bounds(&mut x, bounds);
    let mut sse = obj.sse(&x)?;
    let rms = |s: f64| (s / obj.n_residuals as f64).sqrt();
    let mut history = vec![rms(sse)];
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jtj_last = vec![vec![0.0; n]; n];

    if n == 0 {
        return Ok(LmOutcome {
            x,
            sse,
            iterations: 0,
            converged: true,
            history,
            jtj: jtj_last,
        });
    }

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let r = obj.residuals(&x)?;
        // central-difference Jacobian, step 1e-6 * max(|x_j|, 1)
        let mut jac: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let rp = obj.residuals(&xp)?;
            let rm = obj.residuals(&xm)?;
            jac.push(
                rp.iter()
                    .zip(&rm)
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect(),
            );
        }
        // gradient and normal matrix
        let grad: Vec<f64> = jac
            .iter()
            .map(|col| col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let gnorm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        let mut jtj = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a..n {
                let v: f64 = jac[a].iter().zip(&jac[b]).map(|(x1, x2)| x1 * x2).sum();
                jtj[a][b] = v;
                jtj[b][a] = v;
            }
        }
        jtj_last = jtj.clone();
        if gnorm < GTOL {
            converged = true;
            break;
        }

        // damped step, retried with stiffer damping until the residual drops
        let mut accepted = false;
        for _ in 0..60 {
            let mut lhs = jtj.clone();
            for (d, row) in lhs.iter_mut().enumerate() {
                row[d] += damping * jtj[d][d].max(1e-12);
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(step) = solve_dense(&lhs, &rhs) else {
                damping *= 3.0;
                continue;
            };
            let mut x_new: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            clamp_to_bounds(&mut x_new, bounds);
            let sse_new = obj.sse(&x_new)?;
            if sse_new <= sse {
                x = x_new;
                let drop = (sse - sse_new) / sse.max(1e-300);
                sse = sse_new;
                history.push(rms(sse));
                damping = (damping / 3.0).max(1e-14);
                accepted = true;
                if drop < FTOL {
                    converged = true;
                }
                break;
            }
            damping *= 3.0;
            if damping > 1e15 {
                break;
            }
        }
        if !accepted {
            // cannot improve: gradient check decides convergence
            converged = gnorm < GTOL * 100.0;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(LmOutcome {
        x,
        sse,
        iterations,
        converged,
        history,
        jtj: jtj_last,
    })
}

fn sensitivities(jtj: &[Vec<f64>], sse: f64, n_residuals: usize, n_params: usize) -> Option<Vec<f64>> {
    if n_params == 0 || n_residuals <= n_params {
        return None;
    }
    let sigma2 = sse / (n_residuals - n_params) as f64;
    let mut out = Vec::with_capacity(n_params);
    for i in 0..n_params {
        let mut e = vec![0.0; n_params];
        e[i] = 1.0;
        let col = solve_dense(jtj, &e)?;
        if col[i] < 0.0 {
            return None;
        }
        out.push((sigma2 * col[i]).sqrt());
    }
    Some(out)
}

fn finish(
    obj: &Objective,
    outcome: LmOutcome,
    bounds: &[(f64, f64)],
) -> FitResult {
    let names: Vec<String> = obj.free.iter().map(|s| s.to_string()).collect();
    let mut values = outcome.x.clone();
    for (name, v) in obj.free.iter().zip(values.iter_mut()) {
        if name.starts_with("phi") {
            *v = canonical_phase(*v);
        }
    }
    let pinned = obj
        .free
        .iter()
        .zip(&outcome.x)
        .zip(bounds)
        .filter(|((_, &v), &(lo, hi))| {
            let span = (hi - lo).abs().max(1.0);
            (lo.is_finite() && (v - lo).abs() < 1e-9 * span)
                || (hi.is_finite() && (v - hi).abs() < 1e-9 * span)
        })
        .map(|((name, _), _)| name.to_string())
        .collect();
    let sens = sensitivities(&outcome.jtj, outcome.sse, obj.n_residuals, obj.free.len());
    FitResult {
        names,
        values,
        residual: (outcome.sse / obj.n_residuals as f64).sqrt(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        sensitivities: sens,
        pinned,
        residual_history: outcome.history,
    }
}

/// Fits the drive phase of the measured port (phi13 for magnon 1, phi23 for
/// magnon 2), every other parameter held fixed. Coarse search over 32
/// equispaced phases, then damped Gauss-Newton refinement; the result is the
/// canonical representative in [0, pi].
pub fn fit_phase(measured: &MeasuredSpectrum, params: &SystemParams) -> Result<FitResult, FitError> {
    params.validate()?;
    let name = match measured.port {
        Port::Magnon1 => "phi13",
        Port::Magnon2 => "phi23",
        other => return Err(FitError::WrongPort(other)),
    };
    let free = [name];
    let obj = Objective::new(params, &free, std::slice::from_ref(measured))?;
    let mut best_phi = 0.0;
    let mut best_sse = f64::INFINITY;
    for k in 0..32 {
        let phi = -PI + 2.0 * PI * (k as f64 + 0.5) / 32.0;
        let sse = obj.sse(&[phi])?;
        if sse < best_sse {
            best_sse = sse;
            best_phi = phi;
        }
    }
    let bounds = [(f64::NEG_INFINITY, f64::INFINITY)];
    let outcome = levenberg_marquardt(&obj, vec![best_phi], &bounds)?;
    Ok(finish(&obj, outcome, &bounds))
}

/// Joint least squares over any set of named free parameters and any number of
/// measured spectra; `bounds` are per-parameter closed intervals (use
/// infinities for unbounded sides).
pub fn fit_params(
    measured: &[MeasuredSpectrum],
    free: &[&str],
    initial: &SystemParams,
    bounds: &[(f64, f64)],
) -> Result<FitResult, FitError> {
    initial.validate()?;
    if bounds.len() != free.len() {
        return Err(FitError::BadBounds(format!(
            "{} bounds for {} free parameters",
            bounds.len(),
            free.len()
        )));
    }
    for (name, &(lo, hi)) in free.iter().zip(bounds) {
        if lo > hi {
            return Err(FitError::BadBounds(format!("{name}: empty interval [{lo}, {hi}]")));
        }
    }
    let obj = Objective::new(initial, free, measured)?;
    let x0: Vec<f64> = free
        .iter()
        .map(|name| get_param(initial, name))
        .collect::<Result<_, _>>()?;
    let outcome = levenberg_marquardt(&obj, x0, bounds)?;
    Ok(finish(&obj, outcome, bounds))
}

/// The eigenvalue-extraction pipeline applied to fitted parameters: eliminate
/// the cavity, then solve the 2x2 Hamiltonian numerically.
pub fn eigvals_from_fit(params: &SystemParams) -> Result<(C64, C64), FitError> {
    let h = eliminate_cavity(params)?;
    Ok(eigvals_general(&h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, ModeParams};
    use crate::scattering::to_db;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Synthetic-fit configuration with strong antenna-cavity cross coupling,
    /// so the phase is well identified at the 1%-noise level.
    pub(crate) fn fit_config() -> SystemParams {
        SystemParams::new(
            ModeParams::new("magnon1", 2.7, 1.11, vec![1.11]),
            ModeParams::new("magnon2", -2.7, 1.11, vec![1.11]),
            ModeParams::new("cavity", 0.0, 3.0, vec![2.7, 0.9, 4.0]),
            6.65,
            6.41,
            0.0,
            0.0,
        )
    }

    pub(crate) fn synthetic_s11(
        params: &SystemParams,
        grid: &[f64],
    ) -> Vec<(f64, f64)> {
        grid.iter()
            .map(|&w| (w, reflection_magnon1(params, w).unwrap().norm()))
            .collect()
    }

    fn fit_grid() -> Vec<f64> {
        crate::scattering::linspace(-15.0, 15.0, 1201)
    }

    #[test]
    fn noiseless_phase_round_trip() {
        let base = fit_config();
        let mut truth = base.clone();
        truth.phi13 = 0.1 * PI;
        let data = MeasuredSpectrum::new(
            Port::Magnon1,
            synthetic_s11(&truth, &fit_grid()),
            Scale::Linear,
        )
        .unwrap();
        let fit = fit_phase(&data, &base).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.values[0] - 0.1 * PI).abs() < 1e-6,
            "recovered {} vs {}",
            fit.values[0],
            0.1 * PI
        );
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn zero_phase_round_trip() {
        // at phi = 0 the objective is quartic in phi (it depends on cos phi),
        // so the recovered angle is loose even though cos(phi) is recovered to
        // machine-level accuracy
        let base = fit_config();
        let data = MeasuredSpectrum::new(
            Port::Magnon1,
            synthetic_s11(&base, &fit_grid()),
            Scale::Linear,
        )
        .unwrap();
        let fit = fit_phase(&data, &base).unwrap();
        assert!(fit.values[0].abs() < 2e-3, "got {}", fit.values[0]);
        assert!(1.0 - fit.values[0].cos() < 1e-6);
        assert!(fit.residual < 1e-6);
    }

    #[test]
    fn noisy_phase_recovery_quick() {
        // 20-seed version of the acceptance Monte Carlo
        let base = fit_config();
        let mut truth = base.clone();
        truth.phi13 = 0.1 * PI;
        let grid = fit_grid();
        let clean = synthetic_s11(&truth, &grid);
        let mut errs = Vec::new();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<(f64, f64)> = clean
                .iter()
                .map(|&(f, m)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (f, m * (1.0 + 0.01 * z))
                })
                .collect();
            let data = MeasuredSpectrum::new(Port::Magnon1, noisy, Scale::Linear).unwrap();
            let fit = fit_phase(&data, &base).unwrap();
            errs.push((fit.values[0] - 0.1 * PI).abs());
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(errs[18] < 0.01, "p95-ish error {}", errs[18]);
    }

    #[test]
    fn db_scale_gives_same_phase_as_linear() {
        let base = fit_config();
        let mut truth = base.clone();
        truth.phi13 = 0.1 * PI;
        let grid = fit_grid();
        let linear = synthetic_s11(&truth, &grid);
        let db: Vec<(f64, f64)> = linear.iter().map(|&(f, m)| (f, to_db(m))).collect();
        let fit_lin = fit_phase(
            &MeasuredSpectrum::new(Port::Magnon1, linear, Scale::Linear).unwrap(),
            &base,
        )
        .unwrap();
        let fit_db = fit_phase(
            &MeasuredSpectrum::new(Port::Magnon2, db, Scale::Db)
                .map(|mut m| {
                    m.port = Port::Magnon1;
                    m
                })
                .unwrap(),
            &base,
        )
        .unwrap();
        assert!((fit_lin.values[0] - fit_db.values[0]).abs() < 1e-6);
    }

    #[test]
    fn phase_fit_rejects_cavity_port() {
        let base = fit_config();
        let data =
            MeasuredSpectrum::new(Port::Cavity, vec![(0.0, 0.5), (1.0, 0.6)], Scale::Linear)
                .unwrap();
        assert!(matches!(
            fit_phase(&data, &base),
            Err(FitError::WrongPort(Port::Cavity))
        ));
    }

    #[test]
    fn empty_free_set_returns_forward_residual() {
        let base = fit_config();
        let data = MeasuredSpectrum::new(
            Port::Magnon1,
            synthetic_s11(&base, &fit_grid()),
            Scale::Linear,
        )
        .unwrap();
        let fit = fit_params(&[data], &[], &base, &[]).unwrap();
        assert_eq!(fit.iterations, 0);
        assert!(fit.converged);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn coupling_round_trip_from_perturbed_start() {
        let truth = presets::magnon_readout().with_total_kappa(26.0).unwrap();
        let grid = crate::scattering::linspace(-20.0, 20.0, 401);
        let s11 = MeasuredSpectrum::new(Port::Magnon1, synthetic_s11(&truth, &grid), Scale::Linear)
            .unwrap();
        let s22: Vec<(f64, f64)> = grid
            .iter()
            .map(|&w| (w, reflection_magnon2(&truth, w).unwrap().norm()))
            .collect();
        let s22 = MeasuredSpectrum::new(Port::Magnon2, s22, Scale::Linear).unwrap();
        let mut initial = truth.clone();
        initial.g13 *= 1.2;
        initial.g23 *= 0.8;
        let fit = fit_params(
            &[s11, s22],
            &["g13", "g23"],
            &initial,
            &[(0.0, 20.0), (0.0, 20.0)],
        )
        .unwrap();
        assert!(fit.converged);
        assert!((fit.values[0] - truth.g13).abs() / truth.g13 < 0.01);
        assert!((fit.values[1] - truth.g23).abs() / truth.g23 < 0.01);
        assert!(fit.pinned.is_empty());
        // monotone accepted-step contract
        for w in fit.residual_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn noisy_four_parameter_recovery() {
        let truth = presets::magnon_readout().with_total_kappa(26.0).unwrap();
        let grid = crate::scattering::linspace(-20.0, 20.0, 401);
        let clean1 = synthetic_s11(&truth, &grid);
        let clean2: Vec<(f64, f64)> = grid
            .iter()
            .map(|&w| (w, reflection_magnon2(&truth, w).unwrap().norm()))
            .collect();
        let mut worst_rel = Vec::new();
        for seed in 0..15u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut noise = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
                pts.iter()
                    .map(|&(f, m)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (f, m * (1.0 + 0.01 * z))
                    })
                    .collect()
            };
            let s11 = MeasuredSpectrum::new(Port::Magnon1, noise(&clean1), Scale::Linear).unwrap();
            let s22 = MeasuredSpectrum::new(Port::Magnon2, noise(&clean2), Scale::Linear).unwrap();
            let mut initial = truth.clone();
            initial.g13 *= 1.0 + rng.gen_range(-0.2..0.2);
            initial.g23 *= 1.0 + rng.gen_range(-0.2..0.2);
            let fit = fit_params(
                &[s11, s22],
                &["g13", "g23", "gamma1", "gamma2"],
                &initial,
                &[(0.0, 30.0), (0.0, 30.0), (0.01, 20.0), (0.01, 20.0)],
            )
            .unwrap();
            let truths = [truth.g13, truth.g23, truth.gamma1(), truth.gamma2()];
            let rel = fit
                .values
                .iter()
                .zip(truths)
                .map(|(v, t)| (v - t).abs() / t)
                .fold(0.0_f64, f64::max);
            worst_rel.push(rel);
        }
        worst_rel.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            worst_rel[14] < 0.05,
            "p95-ish relative error {}",
            worst_rel[14]
        );
    }

    #[test]
    fn true_initial_guess_converges_to_zero_residual() {
        let truth = presets::magnon_readout().with_total_kappa(26.0).unwrap();
        let grid = crate::scattering::linspace(-15.0, 15.0, 201);
        let data = MeasuredSpectrum::new(Port::Magnon1, synthetic_s11(&truth, &grid), Scale::Linear)
            .unwrap();
        let fit = fit_params(
            &[data],
            &["g13", "g23"],
            &truth,
            &[(0.0, 30.0), (0.0, 30.0)],
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.residual < 1e-10, "residual {}", fit.residual);
    }

    #[test]
    fn bound_pinning_is_flagged() {
        let truth = presets::magnon_readout().with_total_kappa(26.0).unwrap();
        let grid = crate::scattering::linspace(-15.0, 15.0, 201);
        let data = MeasuredSpectrum::new(Port::Magnon1, synthetic_s11(&truth, &grid), Scale::Linear)
            .unwrap();
        // upper bound below the true value: the fit must pin and say so
        let mut initial = truth.clone();
        initial.g13 = 5.0;
        let fit = fit_params(&[data], &["g13"], &initial, &[(0.0, 6.0)]).unwrap();
        assert!((fit.values[0] - 6.0).abs() < 1e-6);
        assert_eq!(fit.pinned, vec!["g13".to_string()]);
    }

    #[test]
    fn richardson_consistency_of_directional_derivative() {
        // derivative of the objective wrt phi at steps h and h/2 must agree
        let base = fit_config();
        let mut truth = base.clone();
        truth.phi13 = 0.1 * PI;
        let grid = fit_grid();
        let data = MeasuredSpectrum::new(Port::Magnon1, synthetic_s11(&truth, &grid), Scale::Linear)
            .unwrap();
        let obj = Objective::new(&base, &["phi13"], std::slice::from_ref(&data)).unwrap();
        let phi0 = 0.7; // a generic point
        let d = |h: f64| {
            let a = obj.sse(&[phi0 + h]).unwrap();
            let b = obj.sse(&[phi0 - h]).unwrap();
            (a - b) / (2.0 * h)
        };
        let h = 1e-4;
        let ratio = d(h) / d(h / 2.0);
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn eigvals_from_fit_tracks_phase_structure() {
        let base = presets::magnon_readout();
        // large kappa: real parts near +-2.7
        let (lp, lm) = eigvals_from_fit(&base.with_total_kappa(105.0).unwrap()).unwrap();
        assert!((lp.re - 2.7).abs() / 2.7 < 0.05);
        assert!((lm.re + 2.7).abs() / 2.7 < 0.05);
        // near the EP: real parts close
        let (lp, lm) = eigvals_from_fit(&base.with_total_kappa(15.8).unwrap()).unwrap();
        assert!((lp.re - lm.re).abs() < 0.8);
        // symmetric side: imaginary parts split, real splitting collapses
        let (lp, lm) = eigvals_from_fit(&base.with_total_kappa(10.0).unwrap()).unwrap();
        assert!((lp.im - lm.im).abs() > 0.5);
        assert!((lp.re - lm.re).abs() < 0.5);
    }

    #[test]
    fn csv_ingestion_reports_offending_row() {
        let text = "freq_MHz,mag\n-5.0,0.9\n-4.0,0.8\n-4.0,0.7\n";
        let err = MeasuredSpectrum::from_csv(text.as_bytes(), Port::Magnon1, Scale::Linear)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 4"), "{msg}");
        assert!(msg.contains("strictly increasing"), "{msg}");

        let bad_header = "frequency,magnitude\n1.0,0.5\n";
        assert!(matches!(
            MeasuredSpectrum::from_csv(bad_header.as_bytes(), Port::Magnon1, Scale::Linear),
            Err(FitError::Ingest { line: 1, .. })
        ));

        let ok = "freq_MHz,mag\n1.0,0.5\n2.0,-3.1\n";
        let parsed = MeasuredSpectrum::from_csv(ok.as_bytes(), Port::Magnon1, Scale::Db).unwrap();
        assert_eq!(parsed.points.len(), 2);
        let linear = parsed.to_linear();
        assert!((linear[1].1 - 10f64.powf(-3.1 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn unknown_parameter_rejected() {
        let base = fit_config();
        let data = MeasuredSpectrum::new(Port::Magnon1, vec![(0.0, 0.5)], Scale::Linear).unwrap();
        assert!(matches!(
            fit_params(&[data], &["g14"], &base, &[(0.0, 1.0)]),
            Err(FitError::UnknownParameter(_))
        ));
    }
}
