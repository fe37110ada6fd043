//! QND probe physics in free space and in an optical cavity.
//!
//! Interaction constants, probe-induced decoherence, cavity transmission and
//! the conditional Gaussian update that a homodyne readout of the probe
//! imprints on a [`CollectiveSpin`].

use std::f64::consts::{E, PI, TAU};

use nalgebra::{Matrix2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Result};
use crate::spin::CollectiveSpin;

/// Vacuum variance of a light quadrature.
pub const SHOT_NOISE_VARIANCE: f64 = 0.5;

/// Default relative tolerance for the `Omega^2/(Gamma gamma) = dF` check.
pub const DEFAULT_COOPERATIVITY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePulse {
    /// Photons driving the probe (free-space context).
    pub n_dr: f64,
    /// Photons detected (cavity context).
    pub n_det: f64,
    /// Natural linewidth of the probe transition, Hz.
    pub gamma: f64,
    /// Signed detuning from the cyclic transition, Hz.
    pub delta: f64,
    /// Resonant cross section over beam area.
    pub sigma_over_a: f64,
}

impl ProbePulse {
    pub fn validate(&self) -> Result<()> {
        require_nonnegative("n_dr", self.n_dr)?;
        require_nonnegative("n_det", self.n_det)?;
        require_positive("gamma", self.gamma)?;
        require_positive("sigma_over_a", self.sigma_over_a)?;
        if !self.delta.is_finite() || self.delta == 0.0 {
            return Err(invalid("delta", "detuning must be finite and nonzero"));
        }
        Ok(())
    }

    /// Free-space spontaneous emission parameter `n_dr (gamma/Delta)^2 sigma/A`.
    pub fn eta(&self) -> f64 {
        self.n_dr * self.scattering_per_photon()
    }

    /// Same parameter evaluated with the detected photon number.
    pub fn eta_detected(&self) -> f64 {
        self.n_det * self.scattering_per_photon()
    }

    pub fn scattering_per_photon(&self) -> f64 {
        (self.gamma / self.delta).powi(2) * self.sigma_over_a
    }

    /// Copy with `delta` negated (the second probe of the Stark-cancelling pair).
    pub fn mirrored(&self) -> Self {
        Self {
            delta: -self.delta,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub t1: f64,
    pub t2: f64,
    /// Single-pass intracavity power loss.
    pub loss: f64,
    /// Metres; informational.
    pub length: f64,
    /// Cavity linewidth, Hz.
    pub big_gamma: f64,
    /// Single-atom vacuum Rabi frequency, Hz; informational.
    pub omega_single: f64,
    /// Resonant single-pass optical depth of the ensemble.
    pub d: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid(name, format!("transmission must lie in (0, 1), got {t}")));
            }
        }
        require_nonnegative("loss", self.loss)?;
        require_nonnegative("length", self.length)?;
        require_nonnegative("big_gamma", self.big_gamma)?;
        require_nonnegative("omega_single", self.omega_single)?;
        require_nonnegative("d", self.d)?;
        if self.finesse() <= 1.0 {
            return Err(invalid("finesse", format!("must exceed 1, got {}", self.finesse())));
        }
        Ok(())
    }

    /// Round-trip loss `T1 + T2 + 2L`.
    pub fn round_trip_loss(&self) -> f64 {
        self.t1 + self.t2 + 2.0 * self.loss
    }

    /// `F = 2 pi / (T1 + T2 + 2L)`.
    pub fn finesse(&self) -> f64 {
        TAU / self.round_trip_loss()
    }

    /// True while `T1 + T2 + 2L` is small enough for the first-order cavity formulas.
    pub fn small_loss_regime(&self) -> bool {
        self.round_trip_loss() < 0.1
    }
}

/// Free-space QND interaction constant `sqrt(d eta e^{-eta})`.
pub fn kappa_free(d: f64, eta: f64) -> Result<f64> {
    require_positive("d", d)?;
    require_nonnegative("eta", eta)?;
    Ok((d * eta * (-eta).exp()).sqrt())
}

/// Cavity-enhanced interaction constant `sqrt(d eta_n e^{-eta_n}) 2F/pi`, with
/// `eta_n` the decoherence parameter of the detected photon number.
pub fn kappa_cavity(d: f64, finesse: f64, eta_n: f64) -> Result<f64> {
    require_positive("d", d)?;
    require_positive("finesse", finesse)?;
    require_nonnegative("eta_n", eta_n)?;
    Ok((d * eta_n * (-eta_n).exp()).sqrt() * 2.0 * finesse / PI)
}

/// Cavity interaction constant written in terms of the intracavity decoherence:
/// `sqrt(4 d F eta_cav e^{-eta_cav} / pi)`.
///
/// Differs from [`kappa_cavity`] only in the exponent, which here uses
/// `eta_cav = eta_n F / pi` instead of `eta_n`.
pub fn kappa_cavity_substituted(d: f64, finesse: f64, eta_cav: f64) -> Result<f64> {
    require_positive("d", d)?;
    require_positive("finesse", finesse)?;
    require_nonnegative("eta_cav", eta_cav)?;
    Ok((4.0 * d * finesse * eta_cav * (-eta_cav).exp() / PI).sqrt())
}

/// Intracavity spontaneous emission `eta_n F / pi`.
pub fn eta_cav(eta_n: f64, finesse: f64) -> Result<f64> {
    require_nonnegative("eta_n", eta_n)?;
    require_positive("finesse", finesse)?;
    Ok(eta_n * finesse / PI)
}

/// Inverse of [`eta_cav`].
pub fn eta_n_for_cav(eta_cav: f64, finesse: f64) -> Result<f64> {
    require_nonnegative("eta_cav", eta_cav)?;
    require_positive("finesse", finesse)?;
    Ok(eta_cav * PI / finesse)
}

/// Squeezing after a QND measurement from a CSS: `1 / (e^{-eta} (1 + kappa^2))`.
pub fn xi_after_qnd(kappa: f64, eta: f64) -> f64 {
    1.0 / ((-eta).exp() * (1.0 + kappa * kappa))
}

/// Large-`d` free-space optimum `2e/d`, reached at `eta = 1/2`.
pub fn xi_min_free(d: f64) -> f64 {
    2.0 * E / d
}

/// Cavity optimum `e pi / (2 d F)`, reached at `eta_cav = 1/2`.
pub fn xi_min_cavity(d: f64, finesse: f64) -> f64 {
    E * PI / (2.0 * d * finesse)
}

/// Squeezing in decibels, `-10 log10(xi)`.
pub fn xi_to_db(xi: f64) -> f64 {
    -10.0 * xi.log10()
}

/// Clock precision `sqrt(xi_min / N)` at the cavity optimum with `d = N sigma/A`.
pub fn cavity_clock_precision(n_atoms: f64, sigma_over_a: f64, finesse: f64) -> f64 {
    let d = n_atoms * sigma_over_a;
    (xi_min_cavity(d, finesse) / n_atoms).sqrt()
}

/// The closed form `sqrt(2 pi e A / (sigma F)) / N` as printed alongside the
/// cavity optimum. It is larger than [`cavity_clock_precision`] by exactly 2.
pub fn cavity_clock_precision_printed(n_atoms: f64, sigma_over_a: f64, finesse: f64) -> f64 {
    (TAU * E / (sigma_over_a * finesse)).sqrt() / n_atoms
}

/// Detuned single-pass absorption at `eta = 1/2`: `N / (2n)`.
pub fn d_delta(n_atoms: f64, n_photons: f64) -> Result<f64> {
    require_positive("n_photons", n_photons)?;
    Ok(n_atoms / (2.0 * n_photons))
}

/// Gaussian conditional update for a homodyne readout of `P_L^out = P_L^in + kappa X_A`,
/// where `X_A = J_z / sqrt(J)`, followed by decoherence `eta`.
///
/// Returns the updated state and the sampled outcome. Back-action adds
/// `kappa^2/2` to the conjugate quadrature, so a CSS prior ends in a minimum
/// uncertainty state.
pub fn qnd_update<R: Rng + ?Sized>(
    spin: &CollectiveSpin,
    kappa: f64,
    eta: f64,
    rng: &mut R,
) -> Result<(CollectiveSpin, f64)> {
    require_nonnegative("kappa", kappa)?;
    require_nonnegative("eta", eta)?;
    if spin.j_len() <= 0.0 {
        return Err(crate::Error::ZeroSpinLength);
    }
    let z = Vector3::z();
    let sqrt_j = spin.j_len().sqrt();
    let q = spin.body_weights(&z);
    // back-action: the probe rotates the spin about z
    let kick = spin.body_weights(&z.cross(&spin.mean_dir));
    let mut cov = spin.body_cov + kick * kick.transpose() * (kappa * kappa * SHOT_NOISE_VARIANCE);
    let mut mean = spin.body_mean;

    let predicted = kappa * (sqrt_j * spin.mean_dir.z + q.dot(&mean));
    let cq = cov * q;
    let innovation_var = kappa * kappa * q.dot(&cq) + SHOT_NOISE_VARIANCE;
    let outcome = predicted
        + Normal::new(0.0, innovation_var.sqrt())
            .expect("positive variance")
            .sample(rng);

    let gain = cq * (kappa / innovation_var);
    mean += gain * (outcome - predicted);
    cov -= gain * cq.transpose() * kappa;
    let cov = Matrix2::new(
        cov[(0, 0)],
        0.5 * (cov[(0, 1)] + cov[(1, 0)]),
        0.5 * (cov[(0, 1)] + cov[(1, 0)]),
        cov[(1, 1)],
    );

    let mut out = spin.clone();
    out.replace_gaussian(mean, cov);
    Ok((out.apply_decoherence(eta)?, outcome))
}

/// Probe phase shift in a cavity: deterministic signal and shot-noise rms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseShift {
    pub mean: f64,
    pub shot_noise_rms: f64,
}

impl PhaseShift {
    /// Both terms multiplied by `sqrt(n)`: the vacuum term becomes 1 and the
    /// signal becomes `kappa_cav <X_A>`.
    pub fn in_quadrature_units(&self, n_det: f64) -> (f64, f64) {
        (self.shot_noise_rms * n_det.sqrt(), self.mean * n_det.sqrt())
    }
}

/// `phi = n^{-1/2} + sqrt(d e^{-eta_n}) (gamma/Delta) sqrt(sigma/A) (2F/pi) <X_A>`.
pub fn phase_shift(spin: &CollectiveSpin, probe: &ProbePulse, cav: &CavityParams) -> Result<PhaseShift> {
    if probe.n_det.is_nan() || probe.n_det < 1.0 {
        return Err(invalid("n_det", "at least one detected photon is required"));
    }
    probe.validate()?;
    let eta_n = probe.eta_detected();
    let x_mean = spin.quadrature_mean()[0] + spin.j_len().sqrt() * spin.mean_dir().z;
    let gain =
        (cav.d * (-eta_n).exp()).sqrt() * (probe.gamma / probe.delta) * probe.sigma_over_a.sqrt() * 2.0 * cav.finesse()
            / PI;
    Ok(PhaseShift {
        mean: gain * x_mean,
        shot_noise_rms: probe.n_det.powf(-0.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    /// `4 T1 T2 / (T1 + T2 + 2L + 2 d_Delta)^2`
    pub exact: f64,
    /// `4 T1 T2 / (T1 + T2 + 2L)^2 * (1 - 2 F d_Delta / pi)`
    pub first_order: f64,
}

/// Resonant power transmission of the loaded cavity.
pub fn cavity_transmission(cav: &CavityParams, d_delta: f64) -> Result<Transmission> {
    require_nonnegative("d_delta", d_delta)?;
    require_nonnegative("loss", cav.loss)?;
    require_nonnegative("t1", cav.t1)?;
    require_nonnegative("t2", cav.t2)?;
    let bare = cav.round_trip_loss();
    let loaded = bare + 2.0 * d_delta;
    if bare <= 0.0 || loaded <= 0.0 {
        return Err(invalid("t1 + t2 + 2 loss", "denominator is zero"));
    }
    let peak = 4.0 * cav.t1 * cav.t2;
    Ok(Transmission {
        exact: peak / (loaded * loaded),
        first_order: peak / (bare * bare) * (1.0 - 2.0 * cav.finesse() * d_delta / PI),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CooperativityCheck {
    /// `Omega^2 / (Gamma gamma)`
    pub cooperativity: f64,
    /// `d F` from the cavity parameters.
    pub d_times_finesse: f64,
    pub relative_mismatch: f64,
    pub consistent: bool,
}

/// Collective vacuum Rabi frequency `Omega_1 sqrt(N)`.
pub fn collective_rabi(omega_single: f64, n_atoms: f64) -> f64 {
    omega_single * n_atoms.sqrt()
}

/// Compares `Omega^2/(Gamma gamma)` with `d F`. A mismatch is reported, not
/// returned as an error.
pub fn cooperativity_check(
    cav: &CavityParams,
    omega_collective: f64,
    gamma: f64,
    tolerance: f64,
) -> Result<CooperativityCheck> {
    require_positive("omega_collective", omega_collective)?;
    require_positive("gamma", gamma)?;
    require_positive("big_gamma", cav.big_gamma)?;
    let cooperativity = omega_collective * omega_collective / (cav.big_gamma * gamma);
    let d_times_finesse = cav.d * cav.finesse();
    let relative_mismatch = (cooperativity - d_times_finesse).abs() / d_times_finesse;
    Ok(CooperativityCheck {
        cooperativity,
        d_times_finesse,
        relative_mismatch,
        consistent: relative_mismatch <= tolerance,
    })
}

/// Holstein-Primakoff limit of the cavity treatment: `sigma F / A < 2 pi e`.
pub fn hp_validity(sigma_over_a: f64, finesse: f64) -> bool {
    sigma_over_a * finesse < TAU * E
}
