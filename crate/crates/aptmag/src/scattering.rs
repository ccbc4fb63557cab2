//! Steady-state input-output reflection coefficients and spectra.
//!
//! Every reflection is computed two independent ways:
//!
//! * closed forms (`reflection_magnon1/2/cavity`) keeping the nested
//!   continued-fraction structure of the steady-state elimination, and
//! * a 3x3 linear solve (`steady_state` + `reflection_via_solve`), which is the
//!   oracle the closed forms are tested against.
//!
//! Probing a magnon drives both the magnon (rate gamma_i1) and the cavity
//! (rate kappa_i) through the same antenna with a relative phase phi_i3; the
//! output collects both return paths with the conjugate phase, so the
//! reflection coefficient depends on phi_i3 only through cos(phi_i3). The
//! cavity antenna drives the cavity alone and the reflection takes the usual
//! one-port form.

use crate::linalg::{solve3, C64};
use crate::model::{ModelError, SystemParams};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("probe port {0:?} has no external coupling (rate is zero)")]
    MissingProbePort(Port),
    #[error("the combined spectrum is derived, not directly probeable")]
    CombinedNotProbeable,
    #[error("probe grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("drive amplitude must be positive")]
    BadAmplitude,
    #[error("spectra disagree in grid or generating parameters")]
    SpectrumMismatch,
    #[error("combined spectrum expects the two magnon ports, got {0:?} and {1:?}")]
    WrongPorts(Port, Port),
    #[error("no dip found (flat spectrum at the detection threshold)")]
    NoDips,
    #[error("linear solve failed: {0}")]
    Solve(#[from] crate::linalg::LinalgError),
}

/// Probe/readout port identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Port {
    Magnon1,
    Magnon2,
    Cavity,
    /// Mean of the two magnon-readout magnitudes; output-only.
    Combined,
}

impl std::fmt::Display for Port {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Port::Magnon1 => write!(f, "magnon1"),
            Port::Magnon2 => write!(f, "magnon2"),
            Port::Cavity => write!(f, "cavity"),
            Port::Combined => write!(f, "combined"),
        }
    }
}

/// A probe request: port, frequency grid, drive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    port: Port,
    grid: Vec<f64>,
    amplitude: f64,
}

impl ProbeSpec {
    pub fn new(port: Port, grid: Vec<f64>, amplitude: f64) -> Result<Self, ScatteringError> {
        if port == Port::Combined {
            return Err(ScatteringError::CombinedNotProbeable);
        }
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScatteringError::BadGrid);
        }
        if amplitude.is_nan() || amplitude <= 0.0 {
            return Err(ScatteringError::BadAmplitude);
        }
        Ok(ProbeSpec {
            port,
            grid,
            amplitude,
        })
    }

    pub fn port(&self) -> Port {
        self.port
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

/// Uniform grid of `n >= 2` points spanning [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Default probe grid: 2001 points spanning the frame center +-25 MHz.
pub fn default_grid(center: f64) -> Vec<f64> {
    linspace(center - 25.0, center + 25.0, 2001)
}

/// One evaluated point of a reflection spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub omega_p: f64,
    pub t: C64,
    pub magnitude: f64,
}

/// A sampled reflection spectrum with its generating-parameter fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub port: Port,
    pub points: Vec<SpectrumPoint>,
    pub params_hash: u64,
}

impl Spectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.magnitude).collect()
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega_p).collect()
    }

    /// Writes the spectrum as CSV: `omega_p_MHz,re_t,im_t,mag,mag_dB`,
    /// 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_p_MHz,re_t,im_t,mag,mag_dB")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_sig(p.omega_p),
                fmt_sig(p.t.re),
                fmt_sig(p.t.im),
                fmt_sig(p.magnitude),
                fmt_sig(to_db(p.magnitude)),
            )?;
        }
        Ok(())
    }
}

/// Fixed 12-significant-digit formatting used by every CSV emitter.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Amplitude-reflection decibels: 20 log10 |t|.
pub fn to_db(mag: f64) -> f64 {
    20.0 * mag.log10()
}

// ---------------------------------------------------------------------------
// Steady state (linear-solve route)
// ---------------------------------------------------------------------------

/// Steady-state system matrix at probe frequency `omega_p`:
/// rows are (i Delta + rate) x + i g (phase) partners = drive.
fn system_matrix(p: &SystemParams, omega_p: f64) -> [[C64; 3]; 3] {
    let i = C64::new(0.0, 1.0);
    let e13 = C64::from_polar(1.0, p.coupling_phase13);
    let e23 = C64::from_polar(1.0, p.coupling_phase23);
    let z = C64::new(0.0, 0.0);
    [
        [
            C64::new(p.gamma1(), p.magnon1.omega - omega_p),
            z,
            i * p.g13 * e13,
        ],
        [
            z,
            C64::new(p.gamma2(), p.magnon2.omega - omega_p),
            i * p.g23 * e23,
        ],
        [
            i * p.g13,
            i * p.g23,
            C64::new(p.kappa(), p.cavity.omega - omega_p),
        ],
    ]
}

fn drive_vector(p: &SystemParams, port: Port, amplitude: f64) -> Result<[C64; 3], ScatteringError> {
    let z = C64::new(0.0, 0.0);
    match port {
        Port::Magnon1 => {
            if p.gamma11() <= 0.0 {
                return Err(ScatteringError::MissingProbePort(port));
            }
            Ok([
                C64::new((2.0 * p.gamma11()).sqrt() * amplitude, 0.0),
                z,
                C64::from_polar((2.0 * p.kappa1()).sqrt() * amplitude, -p.phi13),
            ])
        }
        Port::Magnon2 => {
            if p.gamma21() <= 0.0 {
                return Err(ScatteringError::MissingProbePort(port));
            }
            Ok([
                z,
                C64::new((2.0 * p.gamma21()).sqrt() * amplitude, 0.0),
                C64::from_polar((2.0 * p.kappa2()).sqrt() * amplitude, -p.phi23),
            ])
        }
        Port::Cavity => {
            if p.kappa3() <= 0.0 {
                return Err(ScatteringError::MissingProbePort(port));
            }
            Ok([z, z, C64::new((2.0 * p.kappa3()).sqrt() * amplitude, 0.0)])
        }
        Port::Combined => Err(ScatteringError::CombinedNotProbeable),
    }
}

/// Steady-state mode amplitudes (a, b, c) under a drive of amplitude
/// `amplitude` at `omega_p` through `port`, by exact linear solve.
pub fn steady_state(
    params: &SystemParams,
    port: Port,
    amplitude: f64,
    omega_p: f64,
) -> Result<[C64; 3], ScatteringError> {
    params.validate()?;
    if amplitude.is_nan() || amplitude <= 0.0 {
        return Err(ScatteringError::BadAmplitude);
    }
    let m = system_matrix(params, omega_p);
    let d = drive_vector(params, port, amplitude)?;
    Ok(solve3(&m, &d)?)
}

/// Reflection coefficient assembled from the steady state and the output
/// boundary condition: the independent oracle for the closed forms.
pub fn reflection_via_solve(
    params: &SystemParams,
    port: Port,
    omega_p: f64,
) -> Result<C64, ScatteringError> {
    let s = 1.0;
    let x = steady_state(params, port, s, omega_p)?;
    let out = match port {
        Port::Magnon1 => {
            (2.0 * params.gamma11()).sqrt() * x[0]
                + C64::from_polar((2.0 * params.kappa1()).sqrt(), params.phi13) * x[2]
        }
        Port::Magnon2 => {
            (2.0 * params.gamma21()).sqrt() * x[1]
                + C64::from_polar((2.0 * params.kappa2()).sqrt(), params.phi23) * x[2]
        }
        Port::Cavity => (2.0 * params.kappa3()).sqrt() * x[2],
        Port::Combined => return Err(ScatteringError::CombinedNotProbeable),
    };
    Ok(out / s - 1.0)
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

struct Denominators {
    d1: C64,
    d2: C64,
    d3: C64,
    g13_sq: C64,
    g23_sq: C64,
}

fn denominators(p: &SystemParams, omega_p: f64) -> Denominators {
    Denominators {
        d1: C64::new(p.gamma1(), p.magnon1.omega - omega_p),
        d2: C64::new(p.gamma2(), p.magnon2.omega - omega_p),
        d3: C64::new(p.kappa(), p.cavity.omega - omega_p),
        g13_sq: C64::from_polar(p.g13 * p.g13, p.coupling_phase13),
        g23_sq: C64::from_polar(p.g23 * p.g23, p.coupling_phase23),
    }
}

/// Closed-form magnon-1 reflection: prompt -1, the direct magnon return, the
/// cavity cross path (phase phi13), and the cavity return path, with the
/// magnon-2 self-energy nested inside every cavity denominator.
pub fn reflection_magnon1(params: &SystemParams, omega_p: f64) -> Result<C64, ScatteringError> {
    params.validate()?;
    if params.gamma11() <= 0.0 {
        return Err(ScatteringError::MissingProbePort(Port::Magnon1));
    }
    let q = denominators(params, omega_p);
    let i = C64::new(0.0, 1.0);
    let e13 = C64::from_polar(1.0, params.coupling_phase13);
    let cavity_inner = q.d3 + q.g23_sq / q.d2; // cavity dressed by magnon 2
    let magnon_dressed = q.d1 + q.g13_sq / cavity_inner;
    let cavity_dressed = q.d3 + q.g13_sq / q.d1 + q.g23_sq / q.d2;
    let cross = 2.0 * params.g13 * (params.gamma11() * params.kappa1()).sqrt();
    let phase_in = C64::from_polar(1.0, -params.phi13);
    let phase_out = C64::from_polar(1.0, params.phi13);
    let t = -1.0 + 2.0 * params.gamma11() / magnon_dressed
        - i * cross * e13 * phase_in / (cavity_inner * magnon_dressed)
        + (2.0 * params.kappa1() * phase_in - i * cross / q.d1) * phase_out / cavity_dressed;
    Ok(t)
}

/// Closed-form magnon-2 reflection: mirror of `reflection_magnon1` with the
/// magnon indices, couplings and phases swapped.
pub fn reflection_magnon2(params: &SystemParams, omega_p: f64) -> Result<C64, ScatteringError> {
    params.validate()?;
    if params.gamma21() <= 0.0 {
        return Err(ScatteringError::MissingProbePort(Port::Magnon2));
    }
    let q = denominators(params, omega_p);
    let i = C64::new(0.0, 1.0);
    let e23 = C64::from_polar(1.0, params.coupling_phase23);
    let cavity_inner = q.d3 + q.g13_sq / q.d1;
    let magnon_dressed = q.d2 + q.g23_sq / cavity_inner;
    let cavity_dressed = q.d3 + q.g13_sq / q.d1 + q.g23_sq / q.d2;
    let cross = 2.0 * params.g23 * (params.gamma21() * params.kappa2()).sqrt();
    let phase_in = C64::from_polar(1.0, -params.phi23);
    let phase_out = C64::from_polar(1.0, params.phi23);
    let t = -1.0 + 2.0 * params.gamma21() / magnon_dressed
        - i * cross * e23 * phase_in / (cavity_inner * magnon_dressed)
        + (2.0 * params.kappa2() * phase_in - i * cross / q.d2) * phase_out / cavity_dressed;
    Ok(t)
}

/// Closed-form cavity reflection: one-port form with both magnon self-energies
/// in the denominator.
pub fn reflection_cavity(params: &SystemParams, omega_p: f64) -> Result<C64, ScatteringError> {
    params.validate()?;
    if params.kappa3() <= 0.0 {
        return Err(ScatteringError::MissingProbePort(Port::Cavity));
    }
    let q = denominators(params, omega_p);
    let cavity_dressed = q.d3 + q.g13_sq / q.d1 + q.g23_sq / q.d2;
    Ok(-1.0 + 2.0 * params.kappa3() / cavity_dressed)
}

fn reflection(params: &SystemParams, port: Port, omega_p: f64) -> Result<C64, ScatteringError> {
    match port {
        Port::Magnon1 => reflection_magnon1(params, omega_p),
        Port::Magnon2 => reflection_magnon2(params, omega_p),
        Port::Cavity => reflection_cavity(params, omega_p),
        Port::Combined => Err(ScatteringError::CombinedNotProbeable),
    }
}

/// Evaluates the closed-form reflection on the probe grid, in grid order.
pub fn spectrum(params: &SystemParams, probe: &ProbeSpec) -> Result<Spectrum, ScatteringError> {
    params.validate()?;
    let mut points = Vec::with_capacity(probe.grid.len());
    for &omega_p in &probe.grid {
        let t = reflection(params, probe.port, omega_p)?;
        points.push(SpectrumPoint {
            omega_p,
            t,
            magnitude: t.norm(),
        });
    }
    Ok(Spectrum {
        port: probe.port,
        points,
        params_hash: params.params_hash(),
    })
}

/// Combined spectrum: pointwise mean of the two magnon-readout magnitudes.
/// The complex entry is set to the mean magnitude (no physical amplitude
/// corresponds to the combination), keeping magnitude == |t|.
pub fn combined_spectrum(s1: &Spectrum, s2: &Spectrum) -> Result<Spectrum, ScatteringError> {
    let ports = (s1.port, s2.port);
    let ok = matches!(
        ports,
        (Port::Magnon1, Port::Magnon2) | (Port::Magnon2, Port::Magnon1)
    );
    if !ok {
        return Err(ScatteringError::WrongPorts(s1.port, s2.port));
    }
    if s1.params_hash != s2.params_hash
        || s1.points.len() != s2.points.len()
        || s1
            .points
            .iter()
            .zip(&s2.points)
            .any(|(a, b)| a.omega_p != b.omega_p)
    {
        return Err(ScatteringError::SpectrumMismatch);
    }
    let points = s1
        .points
        .iter()
        .zip(&s2.points)
        .map(|(a, b)| {
            let mean = 0.5 * (a.magnitude + b.magnitude);
            SpectrumPoint {
                omega_p: a.omega_p,
                t: C64::new(mean, 0.0),
                magnitude: mean,
            }
        })
        .collect();
    Ok(Spectrum {
        port: Port::Combined,
        points,
        params_hash: s1.params_hash,
    })
}

// ---------------------------------------------------------------------------
// Dip analysis
// ---------------------------------------------------------------------------

/// A resonance dip: position and the magnitude at the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dip {
    pub frequency: f64,
    pub depth: f64,
}

/// Dips with their widths and a two-dip resolvability verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipReport {
    /// Dips sorted by frequency.
    pub dips: Vec<Dip>,
    /// Full width at half depth of each dip, parallel to `dips`.
    pub fwhm: Vec<f64>,
    /// Distance between the two deepest dips (zero for a single dip).
    pub separation: f64,
    /// separation > mean FWHM of the two deepest dips.
    pub resolvable: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DipOptions {
    /// Local minima qualify as dips when deeper than this fraction below baseline.
    pub depth_threshold: f64,
    /// Fraction of the grid (total across both ends) used for the baseline median.
    pub baseline_fraction: f64,
}

impl Default for DipOptions {
    fn default() -> Self {
        DipOptions {
            depth_threshold: 0.05,
            baseline_fraction: 0.10,
        }
    }
}

/// Finds dips with default options.
pub fn dip_analysis(spec: &Spectrum) -> Result<DipReport, ScatteringError> {
    dip_analysis_with(spec, &DipOptions::default())
}

/// Dip detection and width measurement.
///
/// Baseline = median magnitude over the outer `baseline_fraction` of the grid.
/// Each dip's width is measured at half depth, (baseline + depth)/2; the
/// crossing search is clamped at the dip's basin edge (the adjacent local
/// maximum), so overlapping dips do not inherit each other's width.
pub fn dip_analysis_with(
    spec: &Spectrum,
    opts: &DipOptions,
) -> Result<DipReport, ScatteringError> {
    let mag = spec.magnitudes();
    let grid = spec.grid();
    let n = mag.len();
    if n < 3 {
        return Err(ScatteringError::NoDips);
    }
    let edge = ((n as f64 * opts.baseline_fraction * 0.5) as usize).max(1);
    let mut outer: Vec<f64> = mag[..edge].iter().chain(&mag[n - edge..]).copied().collect();
    outer.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let baseline = if outer.len() % 2 == 1 {
        outer[outer.len() / 2]
    } else {
        0.5 * (outer[outer.len() / 2 - 1] + outer[outer.len() / 2])
    };

    let mut dips = Vec::new();
    let mut widths = Vec::new();
    for i in 1..n - 1 {
        let is_min = mag[i] <= mag[i - 1] && mag[i] < mag[i + 1];
        if !is_min || mag[i] >= baseline * (1.0 - opts.depth_threshold) {
            continue;
        }
        let depth = mag[i];
        let half = 0.5 * (baseline + depth);

        // leftward: first half-level crossing, clamped at a local maximum
        let mut lo = grid[0];
        for j in (1..=i).rev() {
            if mag[j - 1] >= half {
                let f = (half - mag[j]) / (mag[j - 1] - mag[j]);
                lo = grid[j] + f * (grid[j - 1] - grid[j]);
                break;
            }
            if j >= 2 && mag[j - 1] >= mag[j] && mag[j - 1] > mag[j - 2] {
                lo = grid[j - 1];
                break;
            }
        }
        // rightward, mirrored
        let mut hi = grid[n - 1];
        for j in i..n - 1 {
            if mag[j + 1] >= half {
                let f = (half - mag[j]) / (mag[j + 1] - mag[j]);
                hi = grid[j] + f * (grid[j + 1] - grid[j]);
                break;
            }
            if j + 2 < n && mag[j + 1] >= mag[j] && mag[j + 1] > mag[j + 2] {
                hi = grid[j + 1];
                break;
            }
        }
        dips.push(Dip {
            frequency: grid[i],
            depth,
        });
        widths.push(hi - lo);
    }
    if dips.is_empty() {
        return Err(ScatteringError::NoDips);
    }

    // two deepest dips determine separation and resolvability
    let mut order: Vec<usize> = (0..dips.len()).collect();
    order.sort_by(|&a, &b| dips[a].depth.partial_cmp(&dips[b].depth).unwrap());
    let (separation, mean_fwhm) = if order.len() >= 2 {
        let (a, b) = (order[0], order[1]);
        (
            (dips[a].frequency - dips[b].frequency).abs(),
            0.5 * (widths[a] + widths[b]),
        )
    } else {
        (0.0, widths[order[0]])
    };
    Ok(DipReport {
        dips,
        fwhm: widths,
        separation,
        resolvable: separation > mean_fwhm,
    })
}
