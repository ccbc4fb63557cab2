//! Adiabatic elimination of the cavity and the anti-PT effective description.
//!
//! When the cavity decays much faster than the magnons its amplitude follows
//! them instantaneously; integrating it out leaves a 2x2 non-Hermitian
//! Hamiltonian for the magnon pair. On resonance, with matched dampings and
//! couplings, that Hamiltonian takes the standard anti-PT form
//!
//! ```text
//! H = [ d - i(y + G)     -i G        ]
//!     [    -i G       -d - i(y + G)  ]
//! ```
//!
//! with detuning d, mean damping y and dissipative coupling G = g^2/kappa.
//! Its eigenvalues lambda_pm = -i(y+G) +- sqrt(d^2 - G^2) coalesce at
//! |d| = G: the exceptional point.

use crate::linalg::{eig2, eig3, C64};
use crate::model::{build_dynamical_matrix, ModelError, SystemParams};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EffectiveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cavity decay rate is zero; elimination undefined")]
    ZeroKappa,
    #[error("zero detuning: the exceptional point lies at infinite cavity decay")]
    ZeroDetuning,
}

/// Which algebraic form a 2x2 effective Hamiltonian is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HamiltonianForm {
    /// Exact-parameter elimination result (frequency-dependent self-energies).
    General,
    /// Symmetrized anti-PT form in the rotating frame.
    AntiPt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Frame {
    Lab,
    Rotating,
}

/// A 2x2 effective Hamiltonian with provenance tags.
///
/// Invariant: `form == AntiPt` implies `frame == Rotating` and the matrix
/// satisfies sx * conj(H) * sx == -H exactly (sx = index swap).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub matrix: [[C64; 2]; 2],
    pub form: HamiltonianForm,
    pub frame: Frame,
}

/// Phase taxonomy of the anti-PT Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// |detuning| < coupling: eigenvalues purely imaginary (in the rotating frame).
    Symmetric,
    /// |detuning| > coupling: real splitting with a common imaginary part.
    Broken,
    Exceptional,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Symmetric => write!(f, "symmetric"),
            Regime::Broken => write!(f, "broken"),
            Regime::Exceptional => write!(f, "exceptional"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRegime {
    pub regime: Regime,
    /// detuning^2 - coupling^2 \[MHz^2\].
    pub discriminant: f64,
}

/// Integrates out the cavity, producing the exact-parameter 2x2 Hamiltonian in
/// the lab frame. Diagonal entries acquire a complex self-energy
/// g^2/(kappa - i Delta); off-diagonals carry the dissipative cross coupling.
/// The optional coupling phases multiply each cavity-to-magnon hop.
pub fn eliminate_cavity(params: &SystemParams) -> Result<EffectiveHamiltonian, EffectiveError> {
    params.validate()?;
    let kappa = params.kappa();
    if kappa <= 0.0 {
        return Err(EffectiveError::ZeroKappa);
    }
    let i = C64::new(0.0, 1.0);
    let d13 = params.cavity.omega - params.magnon1.omega;
    let d23 = params.cavity.omega - params.magnon2.omega;
    let e13 = C64::from_polar(1.0, params.coupling_phase13);
    let e23 = C64::from_polar(1.0, params.coupling_phase23);
    let den13 = C64::new(kappa, -d13);
    let den23 = C64::new(kappa, -d23);
    let g13 = params.g13;
    let g23 = params.g23;
    let matrix = [
        [
            params.magnon1.omega - i * (params.gamma1() + g13 * g13 * e13 / den13),
            -i * g13 * g23 * e23 / den23,
        ],
        [
            -i * g13 * g23 * e13 / den13,
            params.magnon2.omega - i * (params.gamma2() + g23 * g23 * e23 / den23),
        ],
    ];
    Ok(EffectiveHamiltonian {
        matrix,
        form: HamiltonianForm::General,
        frame: Frame::Lab,
    })
}

/// Builds the symmetrized anti-PT Hamiltonian in the rotating frame, using the
/// mean damping and mean coupling of the two magnons.
pub fn reduce_to_antipt(params: &SystemParams) -> Result<EffectiveHamiltonian, EffectiveError> {
    params.validate()?;
    let inputs = params.antipt_inputs();
    let coupling = effective_coupling(inputs.coupling, params.kappa())?;
    let i = C64::new(0.0, 1.0);
    let diag_loss = i * (inputs.damping + coupling);
    let matrix = [
        [
            C64::new(inputs.detuning, 0.0) - diag_loss,
            -i * coupling,
        ],
        [
            -i * coupling,
            C64::new(-inputs.detuning, 0.0) - diag_loss,
        ],
    ];
    Ok(EffectiveHamiltonian {
        matrix,
        form: HamiltonianForm::AntiPt,
        frame: Frame::Rotating,
    })
}

/// Dissipative coupling rate mediated by the overdamped cavity: g^2/kappa.
pub fn effective_coupling(g: f64, kappa: f64) -> Result<f64, EffectiveError> {
    if kappa <= 0.0 {
        return Err(EffectiveError::ZeroKappa);
    }
    Ok(g * g / kappa)
}

/// Closed-form eigenvalues of the anti-PT Hamiltonian:
/// -i(damping + coupling) +- sqrt(detuning^2 - coupling^2),
/// ordered with the larger real part (ties: larger imaginary part) first.
pub fn eigvals_antipt(detuning: f64, dissipative_coupling: f64, damping: f64) -> (C64, C64) {
    let common = C64::new(0.0, -(damping + dissipative_coupling));
    let split = C64::new(
        detuning * detuning - dissipative_coupling * dissipative_coupling,
        0.0,
    )
    .sqrt();
    (common + split, common - split)
}

/// Numeric eigenvalues of a 2x2 effective Hamiltonian, same ordering
/// convention as `eigvals_antipt`.
pub fn eigvals_general(h: &EffectiveHamiltonian) -> (C64, C64) {
    eig2(&h.matrix)
}

/// Classifies the phase from the anti-PT discriminant with a relative
/// tolerance band around the exceptional point.
pub fn classify_phase(detuning: f64, dissipative_coupling: f64, tol: f64) -> PhaseRegime {
    let abs_det = detuning.abs();
    let scale = abs_det.max(dissipative_coupling);
    let discriminant = detuning * detuning - dissipative_coupling * dissipative_coupling;
    let regime = if dissipative_coupling - abs_det > tol * scale {
        Regime::Symmetric
    } else if abs_det - dissipative_coupling > tol * scale {
        Regime::Broken
    } else {
        Regime::Exceptional
    };
    PhaseRegime {
        regime,
        discriminant,
    }
}

/// Default relative tolerance for exceptional-point classification.
pub const DEFAULT_PHASE_TOL: f64 = 1e-9;

/// Cavity decay rate at which the exceptional point occurs: g^2/|detuning|.
pub fn ep_kappa(g: f64, detuning: f64) -> Result<f64, EffectiveError> {
    if detuning == 0.0 {
        return Err(EffectiveError::ZeroDetuning);
    }
    Ok(g * g / detuning.abs())
}

/// Anti-PT defect of a 2x2 matrix: max-norm of sx * conj(H') * sx + H', where
/// H' is H with its trace removed (the rotating-frame part).
pub fn antipt_residual(h: &[[C64; 2]; 2]) -> f64 {
    let half_trace = (h[0][0] + h[1][1]) * 0.5;
    let hp = [
        [h[0][0] - half_trace, h[0][1]],
        [h[1][0], h[1][1] - half_trace],
    ];
    // sx * conj(H') * sx swaps both indices and conjugates entries
    let r00 = hp[1][1].conj() + hp[0][0];
    let r01 = hp[1][0].conj() + hp[0][1];
    let r10 = hp[0][1].conj() + hp[1][0];
    let r11 = hp[0][0].conj() + hp[1][1];
    [r00, r01, r10, r11]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of the full 3-mode Hamiltonian restricted to the magnon branch:
/// the two eigenvectors with the smallest cavity-component weight. Ordered
/// like `eigvals_antipt`.
pub fn magnon_branch_eigvals(params: &SystemParams) -> Result<(C64, C64), EffectiveError> {
    let m = build_dynamical_matrix(params)?.matrix;
    let i = C64::new(0.0, 1.0);
    let mut pairs: Vec<(f64, C64)> = eig3(&m)
        .iter()
        .map(|e| {
            let norm: f64 = e.vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (e.vector[2].norm() / norm, i * e.value)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (a, b) = (pairs[0].1, pairs[1].1);
    if (a.re, a.im) >= (b.re, b.im) {
        Ok((a, b))
    } else {
        Ok((b, a))
    }
}

/// Numeric margins of the approximations behind the anti-PT reduction.
#[derive(Debug, Clone, Serialize)]
pub struct EliminationDiagnostics {
    pub kappa_over_gamma1: f64,
    pub kappa_over_gamma2: f64,
    /// kappa / |omega3 - omega1|; infinite when the detuning vanishes.
    pub kappa_over_detuning13: f64,
    pub kappa_over_detuning23: f64,
    /// |g13 - g23| / mean, in percent.
    pub coupling_asymmetry_pct: f64,
    /// |gamma1 - gamma2| / mean, in percent.
    pub damping_asymmetry_pct: f64,
    /// Anti-PT defect of the exact-parameter effective Hamiltonian \[MHz\].
    pub antipt_residual: f64,
}

pub fn elimination_diagnostics(
    params: &SystemParams,
) -> Result<EliminationDiagnostics, EffectiveError> {
    params.validate()?;
    let kappa = params.kappa();
    let (g1, g2) = (params.gamma1(), params.gamma2());
    let d13 = (params.cavity.omega - params.magnon1.omega).abs();
    let d23 = (params.cavity.omega - params.magnon2.omega).abs();
    let asym = |a: f64, b: f64| {
        let mean = 0.5 * (a + b);
        if mean == 0.0 {
            0.0
        } else {
            100.0 * (a - b).abs() / mean
        }
    };
    let h = eliminate_cavity(params)?;
    Ok(EliminationDiagnostics {
        kappa_over_gamma1: kappa / g1,
        kappa_over_gamma2: kappa / g2,
        kappa_over_detuning13: if d13 == 0.0 { f64::INFINITY } else { kappa / d13 },
        kappa_over_detuning23: if d23 == 0.0 { f64::INFINITY } else { kappa / d23 },
        coupling_asymmetry_pct: asym(params.g13, params.g23),
        damping_asymmetry_pct: asym(g1, g2),
        antipt_residual: antipt_residual(&h.matrix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, ModeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_at_kappa(kappa: f64) -> SystemParams {
        presets::magnon_readout().with_total_kappa(kappa).unwrap()
    }

    #[test]
    fn eliminate_cavity_decoupled_limit_is_diagonal() {
        let mut p = presets::magnon_readout();
        p.g13 = 0.0;
        p.g23 = 0.0;
        let h = eliminate_cavity(&p).unwrap().matrix;
        assert!((h[0][0] - C64::new(2.7, -2.22)).norm() < 1e-14);
        assert!((h[1][1] - C64::new(-2.7, -2.22)).norm() < 1e-14);
        assert_eq!(h[0][1], C64::new(0.0, 0.0));
        assert_eq!(h[1][0], C64::new(0.0, 0.0));
    }

    #[test]
    fn eliminate_cavity_matches_independent_transcription() {
        // frozen values from an independent transcription of the elimination
        // formula (kappa = 105, magnon-readout rates)
        let h = eliminate_cavity(&table_at_kappa(105.0)).unwrap().matrix;
        let expect = [
            [
                C64::new(2.68917715632928, -2.64088836497228),
                C64::new(0.0104322448013966, -0.405698408943202),
            ],
            [
                C64::new(-0.0104322448013966, -0.405698408943202),
                C64::new(-2.68994425726662, -2.61105666185352),
            ],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (h[r][c] - expect[r][c]).norm() < 1e-12,
                    "H[{r}][{c}] = {}, expected {}",
                    h[r][c],
                    expect[r][c]
                );
            }
        }
        // asymmetric detunings make the off-diagonals unequal
        assert!((h[0][1] - h[1][0]).norm() > 1e-3);
    }

    #[test]
    fn eliminate_cavity_equal_detunings_reduce_to_symmetric_form() {
        // all three modes on resonance, matched rates: every dissipative entry
        // carries the same g^2/kappa
        let p = SystemParams::new(
            ModeParams::new("magnon1", 0.0, 1.0, vec![]),
            ModeParams::new("magnon2", 0.0, 1.0, vec![]),
            ModeParams::new("cavity", 0.0, 20.0, vec![]),
            4.0,
            4.0,
            0.0,
            0.0,
        );
        let h = eliminate_cavity(&p).unwrap().matrix;
        let gamma_eff = 16.0 / 20.0;
        assert!((h[0][0] - C64::new(0.0, -(1.0 + gamma_eff))).norm() < 1e-14);
        assert!((h[0][1] - C64::new(0.0, -gamma_eff)).norm() < 1e-14);
        assert!((h[1][0] - h[0][1]).norm() < 1e-15);
        assert!((h[1][1] - h[0][0]).norm() < 1e-15);
    }

    #[test]
    fn antipt_form_satisfies_symmetry_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let om: f64 = rng.gen_range(0.1..6.0);
            let p = SystemParams::new(
                ModeParams::new("magnon1", om, rng.gen_range(0.1..3.0), vec![rng.gen_range(0.0..2.0)]),
                ModeParams::new("magnon2", -om, rng.gen_range(0.1..3.0), vec![rng.gen_range(0.0..2.0)]),
                ModeParams::new(
                    "cavity",
                    0.0,
                    rng.gen_range(0.2..3.0),
                    vec![0.3, 0.4, rng.gen_range(1.0..80.0)],
                ),
                rng.gen_range(0.0..12.0),
                rng.gen_range(0.0..12.0),
                0.0,
                0.0,
            );
            let h = reduce_to_antipt(&p).unwrap();
            assert_eq!(h.form, HamiltonianForm::AntiPt);
            assert_eq!(h.frame, Frame::Rotating);
            assert_eq!(antipt_residual(&h.matrix), 0.0);
        }
    }

    #[test]
    fn antipt_coupling_reaches_detuning_at_reported_ep() {
        let p = table_at_kappa(15.8);
        let inputs = p.antipt_inputs();
        assert!((inputs.coupling - 6.53).abs() < 1e-12);
        let gamma_c = effective_coupling(inputs.coupling, p.kappa()).unwrap();
        assert!((gamma_c - 2.7).abs() < 0.01, "Gamma = {gamma_c}");
    }

    #[test]
    fn antipt_decoupled_limit_diagonal() {
        let p = table_at_kappa(1e9);
        let h = reduce_to_antipt(&p).unwrap().matrix;
        assert!(h[0][1].norm() < 1e-7);
        assert!((h[0][0].re - 2.7).abs() < 1e-12);
        assert!((h[0][0].im + 2.22).abs() < 1e-7);
        assert!((h[1][1].re + 2.7).abs() < 1e-12);
    }

    #[test]
    fn effective_coupling_values() {
        assert!((effective_coupling(6.53, 15.8).unwrap() - 2.699).abs() < 1e-3);
        assert_eq!(effective_coupling(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(effective_coupling(1.0, 1.0).unwrap(), 1.0);
        assert!(effective_coupling(1.0, 0.0).is_err());
    }

    #[test]
    fn eigvals_antipt_reference_cases() {
        // exceptional point: both eigenvalues equal
        let (lp, lm) = eigvals_antipt(2.7, 2.7, 2.22);
        assert!((lp - lm).norm() < 1e-14);
        assert!((lp - C64::new(0.0, -(2.22 + 2.7))).norm() < 1e-14);
        // zero coupling: detuned lossy modes
        let (lp, lm) = eigvals_antipt(2.7, 0.0, 2.22);
        assert!((lp - C64::new(2.7, -2.22)).norm() < 1e-14);
        assert!((lm - C64::new(-2.7, -2.22)).norm() < 1e-14);
        // broken phase reference point: real parts +-sqrt(2.7^2 - 1.35^2)
        let (lp, lm) = eigvals_antipt(2.7, 1.35, 2.22);
        let split = (2.7_f64 * 2.7 - 1.35 * 1.35).sqrt();
        assert!((split - 2.338).abs() < 1e-3);
        assert!((lp.re - split).abs() < 1e-12);
        assert!((lm.re + split).abs() < 1e-12);
        assert!((lp.im - lm.im).abs() < 1e-15);
        assert!((lp.im + 3.57).abs() < 1e-12);
    }

    #[test]
    fn eigvals_antipt_agree_with_numeric_eigensolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let det = rng.gen_range(-5.0..5.0);
            let coupling = rng.gen_range(0.0..5.0);
            let damping = rng.gen_range(0.0..4.0);
            let (lp, lm) = eigvals_antipt(det, coupling, damping);
            let i = C64::new(0.0, 1.0);
            let h = [
                [C64::new(det, 0.0) - i * (damping + coupling), -i * coupling],
                [-i * coupling, C64::new(-det, 0.0) - i * (damping + coupling)],
            ];
            let (np, nm) = eig2(&h);
            let scale = lp.norm().max(lm.norm()).max(1e-12);
            assert!((lp - np).norm() / scale < 1e-12);
            assert!((lm - nm).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn eigvals_antipt_match_reduced_matrix_eigensolve() {
        // closed form vs numeric eigenvalues of the constructed matrix itself
        for kappa in [9.0, 15.8, 33.0, 105.0] {
            let p = table_at_kappa(kappa);
            let inputs = p.antipt_inputs();
            let coupling = effective_coupling(inputs.coupling, p.kappa()).unwrap();
            let (lp, lm) = eigvals_antipt(inputs.detuning, coupling, inputs.damping);
            let (np, nm) = eigvals_general(&reduce_to_antipt(&p).unwrap());
            let scale = lp.norm().max(1e-12);
            assert!((lp - np).norm() / scale < 1e-12);
            assert!((lm - nm).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn phase_structure_of_eigenvalues() {
        // symmetric phase: purely imaginary, distinct
        let (lp, lm) = eigvals_antipt(1.0, 2.0, 0.5);
        assert!(lp.re.abs() < 1e-14 && lm.re.abs() < 1e-14);
        assert!((lp.im - lm.im).abs() > 1e-6);
        // broken phase: common imaginary part, opposite real parts
        let (lp, lm) = eigvals_antipt(2.0, 1.0, 0.5);
        assert!((lp.im - lm.im).abs() < 1e-15);
        assert!((lp.re + lm.re).abs() < 1e-14 && lp.re > 0.0);
    }

    #[test]
    fn eigvals_general_reference_and_identities() {
        let h = eliminate_cavity(&table_at_kappa(105.0)).unwrap();
        let (lp, lm) = eigvals_general(&h);
        assert!((lp - C64::new(2.65838344725994, -2.64106111963405)).norm() < 1e-12);
        assert!((lm - C64::new(-2.65915054819728, -2.61088390719175)).norm() < 1e-12);
        // about 1.5% off the asymptotic +-2.7
        assert!((lp.re - 2.7).abs() / 2.7 < 0.05);
        assert!((lm.re + 2.7).abs() / 2.7 < 0.05);
        // trace and determinant identities
        let tr = h.matrix[0][0] + h.matrix[1][1];
        let det = h.matrix[0][0] * h.matrix[1][1] - h.matrix[0][1] * h.matrix[1][0];
        assert!((lp + lm - tr).norm() < 1e-12);
        assert!((lp * lm - det).norm() < 1e-11);
    }

    #[test]
    fn eigvals_general_diagonal_case() {
        let h = EffectiveHamiltonian {
            matrix: [
                [C64::new(1.0, -0.5), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new(-3.0, -0.1)],
            ],
            form: HamiltonianForm::General,
            frame: Frame::Lab,
        };
        let (lp, lm) = eigvals_general(&h);
        assert!((lp - C64::new(1.0, -0.5)).norm() < 1e-14);
        assert!((lm - C64::new(-3.0, -0.1)).norm() < 1e-14);
    }

    #[test]
    fn classify_phase_reference_points() {
        assert_eq!(classify_phase(2.7, 2.0, 1e-9).regime, Regime::Broken);
        assert_eq!(classify_phase(2.7, 3.5, 1e-9).regime, Regime::Symmetric);
        assert_eq!(classify_phase(2.7, 2.7, 1e-9).regime, Regime::Exceptional);
        assert!(classify_phase(2.7, 2.0, 1e-9).discriminant > 0.0);
        assert!(classify_phase(2.7, 3.5, 1e-9).discriminant < 0.0);
    }

    #[test]
    fn ep_kappa_reference_points() {
        assert!((ep_kappa(6.53, 2.7).unwrap() - 15.79).abs() < 0.01);
        assert!((ep_kappa(9.69, 2.7).unwrap() - 34.78).abs() < 0.01);
        assert_eq!(ep_kappa(1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(ep_kappa(1.0, 0.0), Err(EffectiveError::ZeroDetuning)));
    }

    #[test]
    fn ep_kappa_is_unique_phase_flip() {
        let (g, det) = (6.53, 2.7);
        let k0 = ep_kappa(g, det).unwrap();
        let mut flips = Vec::new();
        let n = 2000;
        let (lo, hi) = (5.0, 50.0);
        let mut prev = classify_phase(det, g * g / lo, 1e-12).regime;
        for k in 1..=n {
            let kappa = lo + (hi - lo) * k as f64 / n as f64;
            let now = classify_phase(det, g * g / kappa, 1e-12).regime;
            if now != prev && now != Regime::Exceptional && prev != Regime::Exceptional {
                flips.push(kappa);
            }
            prev = now;
        }
        assert_eq!(flips.len(), 1);
        assert!((flips[0] - k0).abs() < (hi - lo) / n as f64 * 2.0);
    }

    #[test]
    fn antipt_residual_zero_on_constructed_form() {
        let h = reduce_to_antipt(&table_at_kappa(33.0)).unwrap();
        assert_eq!(antipt_residual(&h.matrix), 0.0);
    }

    #[test]
    fn antipt_residual_decreases_with_kappa() {
        let mut prev = f64::INFINITY;
        for kappa in [20.0, 40.0, 80.0, 160.0] {
            let h = eliminate_cavity(&table_at_kappa(kappa)).unwrap();
            let r = antipt_residual(&h.matrix);
            assert!(r > 0.0, "residual should be nonzero for exact parameters");
            assert!(r < prev, "residual must decrease with kappa");
            prev = r;
        }
    }

    #[test]
    fn antipt_residual_positive_for_hermitian_swap_symmetric_matrix() {
        let h = [
            [C64::new(1.0, 0.0), C64::new(0.5, 0.0)],
            [C64::new(0.5, 0.0), C64::new(1.0, 0.0)],
        ];
        assert!(antipt_residual(&h) > 0.9);
    }

    #[test]
    fn elimination_reduces_to_antipt_form_in_symmetric_limit() {
        // equal detunings (all modes on resonance), matched rates and couplings:
        // the exact elimination equals the anti-PT matrix after removing the
        // frame shift, to floating-point accuracy
        let p = SystemParams::new(
            ModeParams::new("magnon1", 0.0, 0.7, vec![0.7]),
            ModeParams::new("magnon2", 0.0, 0.7, vec![0.7]),
            ModeParams::new("cavity", 0.0, 2.0, vec![0.5, 0.5, 30.0]),
            5.5,
            5.5,
            0.0,
            0.0,
        );
        let general = eliminate_cavity(&p).unwrap().matrix;
        let antipt = reduce_to_antipt(&p).unwrap().matrix;
        let center = 0.5 * (p.magnon1.omega + p.magnon2.omega);
        for r in 0..2 {
            for c in 0..2 {
                let shifted = if r == c {
                    general[r][c] - center
                } else {
                    general[r][c]
                };
                assert!(
                    (shifted - antipt[r][c]).norm() < 1e-13,
                    "entry ({r},{c}): {shifted} vs {}",
                    antipt[r][c]
                );
            }
        }
    }

    #[test]
    fn full_model_magnon_branch_converges_to_elimination() {
        let gamma = presets::magnon_readout().gamma1();
        let mut prev = f64::INFINITY;
        for mult in [50.0, 100.0, 200.0, 400.0] {
            let p = table_at_kappa(mult * gamma);
            let (fp, fm) = magnon_branch_eigvals(&p).unwrap();
            let (ep_, em) = eigvals_general(&eliminate_cavity(&p).unwrap());
            let err = ((fp - ep_).norm() / fp.norm()).max((fm - em).norm() / fm.norm());
            assert!(err < prev, "error must decrease monotonically");
            prev = err;
        }
        assert!(prev < 0.02, "relative error {prev} at the largest kappa");
    }

    #[test]
    fn diagnostics_report_expected_asymmetry() {
        let d = elimination_diagnostics(&presets::magnon_readout()).unwrap();
        assert!((d.coupling_asymmetry_pct - 3.675).abs() < 0.01);
        assert!(d.damping_asymmetry_pct.abs() < 1e-12);
        assert!(d.kappa_over_gamma1 > 40.0);
        assert!(d.antipt_residual > 0.0);
    }
}
