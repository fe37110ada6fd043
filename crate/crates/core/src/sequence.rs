//! Monte Carlo of the squeezed Ramsey clock sequence.
//!
//! Each shot samples the collective spin as a classical vector in phase space
//! (Gaussian Holstein-Primakoff statistics) and pushes it through the
//! sequence:
//!
//! * (a) coherent state along `+z` with a jittered atom number;
//! * (b) `pi/2` about `y` with a random pulse-area error;
//! * (c) QND probe at `+Delta`, `pi` swap about `x`, second probe at `-Delta`;
//! * (d) `pi/2` about `x`, turning `J_z` squeezing into phase squeezing;
//! * (e) free precession by the clock phase (plus any accumulated light shift);
//! * (f) `pi/2` about `y` and destructive readout of `J_z`.
//!
//! Each QND probe measures the population of `|1>`, i.e. `N/2 + J_z`. The
//! swap flips the sign of `J_z`, so the difference of the two outcomes
//! measures `J_z` free of the atom-number offset and their sum measures `N`.
//! The sequence reads out mid-fringe: step (e) includes a fixed `pi/2` bias
//! so that `J_z` after (f) is `J sin(phi)` plus the squeezed quadrature.
//!
//! Decoherence follows the Gaussian model of [`crate::spin`]: each probe
//! shrinks the longitudinal component by `e^{-eta_i}` and transverse
//! components by `e^{-eta_i/2}`, which leaves the quadratures unchanged.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Error, Result};
use crate::optics::{
    eta_cav, hp_validity, kappa_cavity, kappa_cavity_substituted, xi_after_qnd, CavityParams, ProbePulse,
    SHOT_NOISE_VARIANCE,
};
use crate::spin::{Axis, CSS_VARIANCE};
use crate::stats::{log_log_slope, stream_rng, LinearFit, Summary};

/// Bound on `max quadrature variance / J` used by the per-shot check. At the
/// cavity optimum the antisqueezed quadrature reaches about 0.8 J.
pub const DEFAULT_SEQUENCE_HP_RATIO: f64 = 1.0;

/// Which of the two cavity interaction constants drives the probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    /// `sqrt(4 d F eta_cav e^{-eta_cav} / pi)`.
    #[default]
    Substituted,
    /// `sqrt(d eta_n e^{-eta_n}) 2F/pi`.
    Literal,
}

/// Detuning signs of the two QND probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSigns {
    /// `+Delta` then `-Delta`: the mean light shifts cancel.
    #[default]
    Alternating,
    /// Both probes at `+Delta`.
    Same,
}

fn default_hp_ratio() -> f64 {
    DEFAULT_SEQUENCE_HP_RATIO
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub n_atoms: u64,
    /// One QND probe pulse; the sequence applies two.
    pub probe: ProbePulse,
    pub cavity: CavityParams,
    /// True clock phase accumulated during step (e), radians.
    pub precession_angle: f64,
    /// rms area error of the preparation `pi/2` pulse, radians.
    pub pulse_error_rms: f64,
    /// Fractional rms fluctuation of the atom number.
    pub atom_number_jitter_rms: f64,
    pub shots: usize,
    pub seed: u64,
    /// rms area error of the swap `pi` pulse, radians.
    #[serde(default)]
    pub swap_error_rms: f64,
    /// rms noise of the final population readout, in units of `J_z`.
    #[serde(default)]
    pub detector_noise_rms: f64,
    /// Mean light shift per driving photon at `+Delta`, radians. The shift of
    /// a probe is `sign(Delta) * stark_per_photon * n_dr`.
    #[serde(default)]
    pub stark_per_photon: f64,
    #[serde(default)]
    pub probe_signs: ProbeSigns,
    #[serde(default)]
    pub kappa_form: KappaForm,
    #[serde(default = "default_hp_ratio")]
    pub hp_ratio: f64,
}

/// Interaction constant and decoherence of one probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseCoupling {
    pub kappa: f64,
    pub eta: f64,
}

impl PulseCoupling {
    /// Squeezing parameter after both pulses, `e^{eta}/(1 + kappa^2)` with
    /// totals `kappa^2 = 2 kappa_1^2` and `eta = 2 eta_1`.
    pub fn xi(&self) -> f64 {
        xi_after_qnd((2.0f64).sqrt() * self.kappa, 2.0 * self.eta)
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid("n_atoms", "at least one atom is required"));
        }
        if self.shots == 0 {
            return Err(invalid("shots", "at least one shot is required"));
        }
        self.probe.validate()?;
        self.cavity.validate()?;
        if !self.precession_angle.is_finite() || self.precession_angle.abs() > FRAC_PI_2 {
            return Err(invalid("precession_angle", "must lie within [-pi/2, pi/2]"));
        }
        require_nonnegative("pulse_error_rms", self.pulse_error_rms)?;
        require_nonnegative("atom_number_jitter_rms", self.atom_number_jitter_rms)?;
        require_nonnegative("swap_error_rms", self.swap_error_rms)?;
        require_nonnegative("detector_noise_rms", self.detector_noise_rms)?;
        require_positive("hp_ratio", self.hp_ratio)?;
        if !self.stark_per_photon.is_finite() {
            return Err(invalid("stark_per_photon", "must be finite"));
        }
        if !hp_validity(self.probe.sigma_over_a, self.cavity.finesse()) {
            return Err(Error::HolsteinPrimakoff(format!(
                "sigma F / A = {:.3} exceeds 2 pi e",
                self.probe.sigma_over_a * self.cavity.finesse()
            )));
        }
        Ok(())
    }

    pub fn coupling(&self) -> Result<PulseCoupling> {
        let f = self.cavity.finesse();
        let eta_n = self.probe.eta_detected();
        let eta = eta_cav(eta_n, f)?;
        let kappa = if eta_n == 0.0 {
            0.0
        } else {
            match self.kappa_form {
                KappaForm::Substituted => kappa_cavity_substituted(self.cavity.d, f, eta)?,
                KappaForm::Literal => kappa_cavity(self.cavity.d, f, eta_n)?,
            }
        };
        Ok(PulseCoupling { kappa, eta })
    }

    /// Copy with the detected photon number set so the two probes together
    /// scatter `eta_total` in the cavity.
    pub fn with_total_eta(&self, eta_total: f64) -> Result<Self> {
        require_nonnegative("eta_total", eta_total)?;
        let eta_n = 0.5 * eta_total * PI / self.cavity.finesse();
        let mut out = *self;
        out.probe.n_det = eta_n / self.probe.scattering_per_photon();
        Ok(out)
    }

    /// Copy without QND probing: a plain Ramsey clock with a coherent state.
    pub fn css_control(&self) -> Self {
        let mut out = *self;
        out.probe.n_det = 0.0;
        out.probe.n_dr = 0.0;
        out
    }

    /// Model value of the mean light shift of one probe at `+Delta`.
    pub fn single_probe_shift(&self) -> f64 {
        self.stark_per_photon * self.probe.n_dr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub index: u64,
    pub n_atoms: u64,
    pub qnd1_outcome: f64,
    pub qnd2_outcome: f64,
    /// `J_z = (N_1 - N_2)/2` at the final readout.
    pub final_population_signal: f64,
    pub estimator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub shots: usize,
    /// Shots skipped because the Gaussian description broke down.
    pub aborted_shots: usize,
    pub first_abort: Option<String>,
    pub kappa_per_pulse: f64,
    pub eta_per_pulse: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error_mean: f64,
    pub std_error_std: f64,
    pub xi_predicted: f64,
    /// `N Var(estimator)`.
    pub xi_measured: f64,
    /// `sqrt(xi_predicted / N)`.
    pub predicted_std: f64,
    /// `sqrt(1/N)`, the coherent-state limit.
    pub css_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRun {
    pub records: Vec<ShotRecord>,
    pub summary: SequenceSummary,
}

pub fn run_sequence(cfg: &SequenceConfig) -> Result<SequenceRun> {
    cfg.validate()?;
    let coupling = cfg.coupling()?;
    let outcomes: Vec<Result<ShotRecord>> = (0..cfg.shots as u64)
        .into_par_iter()
        .map(|i| simulate_shot(cfg, coupling, i, &mut stream_rng(cfg.seed, i)))
        .collect();

    let mut records = Vec::with_capacity(cfg.shots);
    let mut aborted = 0;
    let mut first_abort = None;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(e @ Error::HolsteinPrimakoff(_)) => {
                aborted += 1;
                first_abort.get_or_insert_with(|| e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::HolsteinPrimakoff(format!(
            "all {aborted} shots aborted: {}",
            first_abort.unwrap_or_default()
        )));
    }

    let est: Vec<f64> = records.iter().map(|r| r.estimator).collect();
    let s = Summary::of(&est);
    let n = cfg.n_atoms as f64;
    let xi = coupling.xi();
    Ok(SequenceRun {
        summary: SequenceSummary {
            shots: records.len(),
            aborted_shots: aborted,
            first_abort,
            kappa_per_pulse: coupling.kappa,
            eta_per_pulse: coupling.eta,
            mean: s.mean,
            std_dev: s.std_dev,
            std_error_mean: s.std_error_of_mean(),
            std_error_std: s.std_error_of_std(),
            xi_predicted: xi,
            xi_measured: n * s.variance(),
            predicted_std: (xi / n).sqrt(),
            css_std: (1.0 / n).sqrt(),
        },
        records,
    })
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One pass through steps (a) to (f). The random draws happen in a fixed
/// order whatever the noise amplitudes, so runs that differ only in those
/// amplitudes share their underlying samples.
fn simulate_shot<R: Rng + ?Sized>(
    cfg: &SequenceConfig,
    coupling: PulseCoupling,
    index: u64,
    rng: &mut R,
) -> Result<ShotRecord> {
    let n_nom = cfg.n_atoms as f64;
    let j_nom = n_nom / 2.0;
    let PulseCoupling { kappa, eta } = coupling;

    // (a)
    let n_shot = (n_nom * (1.0 + cfg.atom_number_jitter_rms * normal(rng)))
        .round()
        .max(1.0);
    let j_shot = n_shot / 2.0;
    let css = (j_shot * CSS_VARIANCE).sqrt();
    let mut v = Vector3::new(css * normal(rng), css * normal(rng), j_shot);

    // (b)
    v = Axis::Y.rotation(FRAC_PI_2 + cfg.pulse_error_rms * normal(rng)) * v;

    // (c)
    let mut j_cur = j_shot;
    let mut light_shift = 0.0;
    let signs = match cfg.probe_signs {
        ProbeSigns::Alternating => [1.0, -1.0],
        ProbeSigns::Same => [1.0, 1.0],
    };
    let mut outcomes = [0.0; 2];
    for (k, sign) in signs.into_iter().enumerate() {
        if k == 1 {
            v = Axis::X.rotation(PI + cfg.swap_error_rms * normal(rng)) * v;
        }
        let x = v.z / j_cur.sqrt();
        let shot_noise = SHOT_NOISE_VARIANCE.sqrt() * normal(rng);
        outcomes[k] = kappa * (n_shot / (2.0 * j_nom.sqrt()) + x) + shot_noise;
        // back-action rotates the spin about z
        let light_x = SHOT_NOISE_VARIANCE.sqrt() * normal(rng);
        v.y += sign * kappa * light_x * j_cur.sqrt();
        light_shift += sign * cfg.single_probe_shift();
        v.x *= (-eta).exp();
        v.y *= (-0.5 * eta).exp();
        v.z *= (-0.5 * eta).exp();
        j_cur *= (-eta).exp();
    }
    let max_var = CSS_VARIANCE * (1.0 + 2.0 * kappa * kappa);
    if max_var > cfg.hp_ratio * j_cur {
        return Err(Error::HolsteinPrimakoff(format!(
            "shot {index}: antisqueezed variance {max_var:.3e} exceeds {} J = {:.3e}",
            cfg.hp_ratio,
            cfg.hp_ratio * j_cur
        )));
    }

    // (d), (e), (f)
    v = Axis::X.rotation(FRAC_PI_2) * v;
    v = Axis::Z.rotation(FRAC_PI_2 + cfg.precession_angle + light_shift) * v;
    v = Axis::Y.rotation(FRAC_PI_2) * v;
    let signal = v.z + cfg.detector_noise_rms * normal(rng);

    // estimate J_z after (b) from the difference, N from the sum
    let [y1, y2] = outcomes;
    let prior = CSS_VARIANCE;
    let gain = kappa * prior / (kappa * kappa * prior + 0.5 * SHOT_NOISE_VARIANCE);
    let x_hat = gain * 0.5 * (y1 - y2);
    let n_hat = if kappa > 0.0 {
        (j_nom.sqrt() * (y1 + y2) / kappa).max(1.0)
    } else {
        n_nom
    };
    let j_final = (-2.0 * eta).exp() * n_hat / 2.0;
    let predicted = j_final.sqrt() * x_hat;
    let estimator = ((signal - predicted) / j_final).clamp(-1.0, 1.0).asin();

    let record = ShotRecord {
        index,
        n_atoms: n_shot as u64,
        qnd1_outcome: y1,
        qnd2_outcome: y2,
        final_population_signal: signal,
        estimator,
    };
    if [y1, y2, signal, estimator].iter().all(|v| v.is_finite()) {
        Ok(record)
    } else {
        Err(Error::Unphysical(format!("shot {index} produced a non-finite value")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarkCheck {
    /// Mean phase offset with `+Delta, -Delta` probes.
    pub residual_mean_shift: f64,
    pub residual_std_error: f64,
    /// Mean phase offset with both probes at `+Delta`.
    pub same_sign_shift: f64,
    pub same_sign_std_error: f64,
    /// Model light shift of one probe.
    pub per_sign_shift: f64,
}

pub fn stark_cancellation_check(cfg: &SequenceConfig) -> Result<StarkCheck> {
    let offset = |signs| -> Result<(f64, f64)> {
        let run = run_sequence(&SequenceConfig {
            probe_signs: signs,
            ..*cfg
        })?;
        Ok((run.summary.mean - cfg.precession_angle, run.summary.std_error_mean))
    };
    let (residual_mean_shift, residual_std_error) = offset(ProbeSigns::Alternating)?;
    let (same_sign_shift, same_sign_std_error) = offset(ProbeSigns::Same)?;
    Ok(StarkCheck {
        residual_mean_shift,
        residual_std_error,
        same_sign_shift,
        same_sign_std_error,
        per_sign_shift: cfg.single_probe_shift(),
    })
}

/// How the optical depth follows the atom number in a precision scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthScaling {
    /// `d` fixed at the configured value.
    Fixed,
    /// `d` proportional to `N`, matching the configured value at `cfg.n_atoms`.
    #[default]
    ProportionalToN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub n_atoms: u64,
    pub measured: f64,
    pub measured_std_error: f64,
    /// `sqrt(xi/N)` with the closed-form squeezing parameter.
    pub predicted: f64,
    /// Heisenberg reference `1/N`.
    pub heisenberg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionScan {
    pub rows: Vec<ScanRow>,
    /// log-log fit of measured precision against `N`.
    pub fit: LinearFit,
}

pub fn precision_scan(cfg: &SequenceConfig, n_list: &[u64], scaling: DepthScaling) -> Result<PrecisionScan> {
    if n_list.len() < 2 {
        return Err(invalid("n_list", "need at least two atom numbers"));
    }
    let rows = n_list
        .iter()
        .map(|&n| {
            let mut c = *cfg;
            c.n_atoms = n;
            if scaling == DepthScaling::ProportionalToN {
                c.cavity.d = cfg.cavity.d * n as f64 / cfg.n_atoms as f64;
            }
            let s = run_sequence(&c)?.summary;
            Ok(ScanRow {
                n_atoms: n,
                measured: s.std_dev,
                measured_std_error: s.std_error_std,
                predicted: s.predicted_std,
                heisenberg: 1.0 / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n_atoms as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.measured).collect();
    Ok(PrecisionScan {
        fit: log_log_slope(&x, &y),
        rows,
    })
}
