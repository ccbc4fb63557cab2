//! Domain types, parameter validation, unit conventions, and the 3-mode
//! dynamical matrix.
//!
//! Mode ordering is fixed everywhere: (magnon1, magnon2, cavity). Frequencies
//! and rates are MHz (2pi-MHz angular); mode frequencies are relative to the
//! rotating-frame center. Decay rates are amplitude (half-width) rates: a mode
//! with total rate g decays as exp(-g t) in amplitude, and an external port
//! with rate r couples a drive of amplitude s as sqrt(2 r) s.
//!
//! Port layout follows the experiment: each magnon carries at most one readout
//! port, and the cavity carries exactly three ports, in order: the cross
//! coupling of readout antenna 1 (kappa1), of readout antenna 2 (kappa2), and
//! the dedicated cavity antenna (kappa3, the tunable one). Shorter cavity port
//! lists are padded with zero-rate ports on construction.

use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("config error: {0}")]
    Config(String),
    #[error(
        "total cavity rate {requested} MHz is below the fixed contribution {fixed} MHz of the non-tunable ports"
    )]
    UnreachableKappa { requested: f64, fixed: f64 },
}

/// One resonator (magnon or cavity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub label: String,
    /// Resonance frequency \[MHz\], relative to the rotating-frame center.
    pub omega: f64,
    /// Intrinsic amplitude decay rate \[MHz\].
    pub gamma_int: f64,
    /// Per-port external amplitude decay rates \[MHz\].
    pub gamma_ports: Vec<f64>,
}

impl ModeParams {
    pub fn new(label: impl Into<String>, omega: f64, gamma_int: f64, gamma_ports: Vec<f64>) -> Self {
        ModeParams {
            label: label.into(),
            omega,
            gamma_int,
            gamma_ports,
        }
    }

    /// Total amplitude decay rate: intrinsic plus all ports.
    pub fn total_rate(&self) -> f64 {
        self.gamma_int + self.gamma_ports.iter().sum::<f64>()
    }

    pub fn port_rate(&self, idx: usize) -> f64 {
        self.gamma_ports.get(idx).copied().unwrap_or(0.0)
    }

    fn collect_violations(&self, out: &mut Vec<String>) {
        if !self.omega.is_finite() {
            out.push(format!("{}: non-finite frequency", self.label));
        }
        if self.gamma_int.is_nan() || self.gamma_int < 0.0 {
            out.push(format!(
                "{}: negative intrinsic decay rate ({})",
                self.label, self.gamma_int
            ));
        }
        for (i, r) in self.gamma_ports.iter().enumerate() {
            if r.is_nan() || *r < 0.0 {
                out.push(format!(
                    "{}: negative port {} decay rate ({})",
                    self.label,
                    i + 1,
                    r
                ));
            }
        }
        let total = self.total_rate();
        if total.is_nan() || total <= 0.0 {
            out.push(format!("{}: mode has zero total decay", self.label));
        }
    }
}

/// The full 3-mode network: two magnons, one cavity, their couplings, and the
/// relative phases with which the readout antennae drive the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub magnon1: ModeParams,
    pub magnon2: ModeParams,
    pub cavity: ModeParams,
    /// Magnon1-cavity coupling rate \[MHz\].
    pub g13: f64,
    /// Magnon2-cavity coupling rate \[MHz\].
    pub g23: f64,
    /// Relative phase of the antenna-1 drive into the cavity \[rad\].
    pub phi13: f64,
    /// Relative phase of the antenna-2 drive into the cavity \[rad\].
    pub phi23: f64,
    /// Optional magnon1-cavity coupling phase \[rad\], zero in the standard model.
    pub coupling_phase13: f64,
    /// Optional magnon2-cavity coupling phase \[rad\], zero in the standard model.
    pub coupling_phase23: f64,
}

impl SystemParams {
    /// Builds the parameter set, padding the cavity port list to the canonical
    /// three entries (kappa1, kappa2, kappa3).
    pub fn new(
        magnon1: ModeParams,
        magnon2: ModeParams,
        cavity: ModeParams,
        g13: f64,
        g23: f64,
        phi13: f64,
        phi23: f64,
    ) -> Self {
        let mut cavity = cavity;
        while cavity.gamma_ports.len() < 3 {
            cavity.gamma_ports.push(0.0);
        }
        SystemParams {
            magnon1,
            magnon2,
            cavity,
            g13,
            g23,
            phi13,
            phi23,
            coupling_phase13: 0.0,
            coupling_phase23: 0.0,
        }
    }

    /// Total decay rate of magnon 1.
    pub fn gamma1(&self) -> f64 {
        self.magnon1.total_rate()
    }

    /// Total decay rate of magnon 2.
    pub fn gamma2(&self) -> f64 {
        self.magnon2.total_rate()
    }

    /// Total decay rate of the cavity.
    pub fn kappa(&self) -> f64 {
        self.cavity.total_rate()
    }

    /// Readout-port rate of magnon 1 (zero if the magnon has no port).
    pub fn gamma11(&self) -> f64 {
        self.magnon1.port_rate(0)
    }

    /// Readout-port rate of magnon 2.
    pub fn gamma21(&self) -> f64 {
        self.magnon2.port_rate(0)
    }

    /// Cavity cross-coupling rate of readout antenna 1.
    pub fn kappa1(&self) -> f64 {
        self.cavity.port_rate(0)
    }

    /// Cavity cross-coupling rate of readout antenna 2.
    pub fn kappa2(&self) -> f64 {
        self.cavity.port_rate(1)
    }

    /// Rate of the dedicated (tunable) cavity antenna.
    pub fn kappa3(&self) -> f64 {
        self.cavity.port_rate(2)
    }

    /// Checks every type invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut v = Vec::new();
        self.magnon1.collect_violations(&mut v);
        self.magnon2.collect_violations(&mut v);
        self.cavity.collect_violations(&mut v);
        if self.g13.is_nan() || self.g13 < 0.0 {
            v.push(format!("negative coupling rate g13 = {}", self.g13));
        }
        if self.g23.is_nan() || self.g23 < 0.0 {
            v.push(format!("negative coupling rate g23 = {}", self.g23));
        }
        if self.magnon1.gamma_ports.len() > 1 {
            v.push("magnon1: more than one readout port is not supported".into());
        }
        if self.magnon2.gamma_ports.len() > 1 {
            v.push("magnon2: more than one readout port is not supported".into());
        }
        if self.cavity.gamma_ports.len() > 3 {
            v.push("cavity: more than three ports is not supported".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    /// Returns a copy whose total cavity rate equals `kappa_total`, adjusting
    /// only the tunable cavity antenna (the last port).
    pub fn with_total_kappa(&self, kappa_total: f64) -> Result<SystemParams, ModelError> {
        let fixed = self.cavity.gamma_int + self.kappa1() + self.kappa2();
        if kappa_total < fixed {
            return Err(ModelError::UnreachableKappa {
                requested: kappa_total,
                fixed,
            });
        }
        let mut out = self.clone();
        match out.cavity.gamma_ports.last_mut() {
            Some(rate) => *rate = kappa_total - fixed,
            None => out.cavity.gamma_ports.push(kappa_total - fixed),
        }
        Ok(out)
    }

    /// Swaps the roles of the two magnons (modes, couplings, phases). Useful
    /// for relabeling-symmetry checks.
    pub fn swap_magnons(&self) -> SystemParams {
        let mut out = self.clone();
        std::mem::swap(&mut out.magnon1, &mut out.magnon2);
        out.magnon1.label = self.magnon1.label.clone();
        out.magnon2.label = self.magnon2.label.clone();
        std::mem::swap(&mut out.g13, &mut out.g23);
        std::mem::swap(&mut out.phi13, &mut out.phi23);
        std::mem::swap(&mut out.coupling_phase13, &mut out.coupling_phase23);
        out.cavity.gamma_ports.swap(0, 1);
        out
    }

    /// Symmetrized inputs of the anti-PT reduction: detuning (omega1-omega2)/2,
    /// mean damping (gamma1+gamma2)/2, and mean coupling (g13+g23)/2.
    pub fn antipt_inputs(&self) -> AntiPtInputs {
        AntiPtInputs {
            detuning: 0.5 * (self.magnon1.omega - self.magnon2.omega),
            damping: 0.5 * (self.gamma1() + self.gamma2()),
            coupling: 0.5 * (self.g13 + self.g23),
        }
    }

    /// FNV-1a hash of the physical parameters, used to tag spectra so that
    /// combination operations can reject mismatched inputs.
    pub fn params_hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325_u64;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for m in [&self.magnon1, &self.magnon2, &self.cavity] {
            eat(m.omega);
            eat(m.gamma_int);
            eat(m.gamma_ports.len() as f64);
            for r in &m.gamma_ports {
                eat(*r);
            }
        }
        for x in [
            self.g13,
            self.g23,
            self.phi13,
            self.phi23,
            self.coupling_phase13,
            self.coupling_phase23,
        ] {
            eat(x);
        }
        h
    }

    /// Parses a config document (JSON schema described in the README).
    pub fn from_config_str(text: &str) -> Result<SystemParams, ModelError> {
        let cfg: ConfigFile = serde_json::from_str(text)
            .map_err(|e| ModelError::Config(format!("{e} (schema: see bundled configs)")))?;
        cfg.into_params()
    }

    pub fn from_config_path(path: impl AsRef<Path>) -> Result<SystemParams, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("cannot read {}: {e}", path.display())))?;
        SystemParams::from_config_str(&text)
    }
}

/// Symmetrized parameters entering the standard anti-PT form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntiPtInputs {
    pub detuning: f64,
    pub damping: f64,
    pub coupling: f64,
}

/// Static bias field acting on a magnon, with the gyromagnetic ratio and the
/// anisotropy offset. Absolute units: Tesla and GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasField {
    /// Magnetic flux density \[T\].
    pub flux_density: f64,
    /// Gyromagnetic ratio \[GHz/T\].
    pub gyromagnetic_ratio: f64,
    /// Anisotropy frequency offset \[GHz\].
    pub anisotropy_offset: f64,
}

impl BiasField {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut v = Vec::new();
        if self.flux_density.is_nan() || self.flux_density < 0.0 {
            v.push(format!("negative flux density ({})", self.flux_density));
        }
        if self.gyromagnetic_ratio.is_nan() || self.gyromagnetic_ratio <= 0.0 {
            v.push(format!(
                "non-positive gyromagnetic ratio ({})",
                self.gyromagnetic_ratio
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }
}

/// Uniform-mode magnon frequency \[GHz\]: affine in the bias field.
pub fn kittel_frequency(field: &BiasField) -> Result<f64, ModelError> {
    field.validate()?;
    Ok(field.gyromagnetic_ratio * field.flux_density + field.anisotropy_offset)
}

/// The 3x3 first-order coefficient matrix of the coupled-mode equations
/// d/dt (a, b, c)^T = M (a, b, c)^T in the fixed mode order
/// (magnon1, magnon2, cavity).
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMatrix {
    pub matrix: [[C64; 3]; 3],
}

/// Builds the dynamical matrix. Diagonal entries are -(i omega + rate); the
/// magnon-cavity couplings enter as -i g (with the optional coupling phase on
/// the cavity-to-magnon hop); there is no direct magnon-magnon coupling.
pub fn build_dynamical_matrix(params: &SystemParams) -> Result<DynamicalMatrix, ModelError> {
    params.validate()?;
    let i = C64::new(0.0, 1.0);
    let e13 = C64::from_polar(1.0, params.coupling_phase13);
    let e23 = C64::from_polar(1.0, params.coupling_phase23);
    let z = C64::new(0.0, 0.0);
    let m1 = &params.magnon1;
    let m2 = &params.magnon2;
    let cav = &params.cavity;
    let matrix = [
        [
            -(i * m1.omega + m1.total_rate()),
            z,
            -i * params.g13 * e13,
        ],
        [
            z,
            -(i * m2.omega + m2.total_rate()),
            -i * params.g23 * e23,
        ],
        [
            -i * params.g13,
            -i * params.g23,
            -(i * cav.omega + cav.total_rate()),
        ],
    ];
    Ok(DynamicalMatrix { matrix })
}

impl fmt::Display for DynamicalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.matrix {
            writeln!(f, "[{:.6} {:.6} {:.6}]", row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

/// Reference parameter sets transcribing the two readout configurations of the
/// experiment (rates in MHz; frequencies relative to the frame center).
pub mod presets {
    use super::{ModeParams, SystemParams};

    /// Magnon-readout configuration: critically coupled readout antennae on
    /// both magnons, cavity antenna tuned for a 105 MHz total cavity rate.
    pub fn magnon_readout() -> SystemParams {
        SystemParams::new(
            ModeParams::new("magnon1", 2.7, 1.11, vec![1.11]),
            ModeParams::new("magnon2", -2.7, 1.11, vec![1.11]),
            ModeParams::new("cavity", 0.0, 1.5, vec![0.45, 0.92, 102.13]),
            6.65,
            6.41,
            0.0,
            0.0,
        )
    }

    /// Cavity-readout configuration: magnon antennae removed, cavity antenna
    /// critically coupled to the intrinsic cavity loss.
    pub fn cavity_readout() -> SystemParams {
        SystemParams::new(
            ModeParams::new("magnon1", 2.7, 1.11, vec![]),
            ModeParams::new("magnon2", -2.7, 1.11, vec![]),
            ModeParams::new("cavity", 0.0, 5.0, vec![0.0, 0.0, 5.0]),
            9.77,
            9.61,
            0.0,
            0.0,
        )
    }
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    magnon1: ModeConfig,
    magnon2: ModeConfig,
    cavity: ModeConfig,
    #[serde(rename = "g13_MHz")]
    g13_mhz: f64,
    #[serde(rename = "g23_MHz")]
    g23_mhz: f64,
    #[serde(rename = "Phi13_rad", default)]
    coupling_phase13_rad: Option<f64>,
    #[serde(rename = "Phi23_rad", default)]
    coupling_phase23_rad: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeConfig {
    #[serde(rename = "omega_MHz", default)]
    omega_mhz: Option<f64>,
    #[serde(rename = "omega_GHz", default)]
    omega_ghz: Option<f64>,
    #[serde(rename = "gamma_int_MHz")]
    gamma_int_mhz: f64,
    #[serde(default)]
    ports: Vec<PortConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortConfig {
    #[serde(rename = "rate_MHz")]
    rate_mhz: f64,
    #[serde(rename = "phase_rad", default)]
    phase_rad: Option<f64>,
}

impl ModeConfig {
    /// Frequency in MHz, either given directly or converted from absolute GHz
    /// relative to `center_ghz`.
    fn omega_relative_mhz(&self, name: &str, center_ghz: Option<f64>) -> Result<f64, ModelError> {
        match (self.omega_mhz, self.omega_ghz, center_ghz) {
            (Some(v), None, None) => Ok(v),
            (None, Some(v), Some(center)) => {
                if v <= 0.0 {
                    return Err(ModelError::Config(format!(
                        "{name}: non-positive absolute frequency {v} GHz"
                    )));
                }
                Ok((v - center) * 1e3)
            }
            (Some(_), Some(_), _) => Err(ModelError::Config(format!(
                "{name}: give omega_MHz or omega_GHz, not both"
            ))),
            (None, None, _) => Err(ModelError::Config(format!(
                "{name}: missing omega_MHz (or omega_GHz)"
            ))),
            _ => Err(ModelError::Config(
                "mix of omega_MHz and omega_GHz across modes; use one unit for all".into(),
            )),
        }
    }
}

impl ConfigFile {
    fn into_params(self) -> Result<SystemParams, ModelError> {
        let absolute = [
            self.magnon1.omega_ghz.is_some(),
            self.magnon2.omega_ghz.is_some(),
            self.cavity.omega_ghz.is_some(),
        ];
        let center_ghz = if absolute.iter().any(|b| *b) {
            if !absolute.iter().all(|b| *b) {
                return Err(ModelError::Config(
                    "mix of omega_MHz and omega_GHz across modes; use one unit for all".into(),
                ));
            }
            Some(0.5 * (self.magnon1.omega_ghz.unwrap() + self.magnon2.omega_ghz.unwrap()))
        } else {
            None
        };

        for (name, mode) in [("magnon1", &self.magnon1), ("magnon2", &self.magnon2)] {
            for (i, p) in mode.ports.iter().enumerate() {
                if p.phase_rad.is_some() {
                    return Err(ModelError::Config(format!(
                        "{name}: port {} carries phase_rad; drive phases belong on cavity ports 1 and 2",
                        i + 1
                    )));
                }
            }
        }
        if let Some(p) = self.cavity.ports.get(2) {
            if p.phase_rad.is_some() {
                return Err(ModelError::Config(
                    "cavity: port 3 is the probe antenna and carries no drive phase".into(),
                ));
            }
        }

        let phi13 = self
            .cavity
            .ports
            .first()
            .and_then(|p| p.phase_rad)
            .unwrap_or(0.0);
        let phi23 = self
            .cavity
            .ports
            .get(1)
            .and_then(|p| p.phase_rad)
            .unwrap_or(0.0);

        let mk_mode = |name: &str, cfg: &ModeConfig| -> Result<ModeParams, ModelError> {
            Ok(ModeParams::new(
                name,
                cfg.omega_relative_mhz(name, center_ghz)?,
                cfg.gamma_int_mhz,
                cfg.ports.iter().map(|p| p.rate_mhz).collect(),
            ))
        };

        let mut params = SystemParams::new(
            mk_mode("magnon1", &self.magnon1)?,
            mk_mode("magnon2", &self.magnon2)?,
            mk_mode("cavity", &self.cavity)?,
            self.g13_mhz,
            self.g23_mhz,
            phi13,
            phi23,
        );
        params.coupling_phase13 = self.coupling_phase13_rad.unwrap_or(0.0);
        params.coupling_phase23 = self.coupling_phase23_rad.unwrap_or(0.0);
        params
            .validate()
            .map_err(|e| ModelError::Config(e.to_string()))?;
        Ok(params)
    }
}
