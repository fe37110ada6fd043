//! Scenario files: parsing, validation, presets, execution and export.
//!
//! A scenario is a TOML document with a top-level `mode`, an optional `seed`,
//! one section named after the mode and optional `[sweep]`, `[output]` and
//! `[tolerances]` tables. Unknown keys are rejected.
//!
//! ```toml
//! mode = "chain"
//!
//! [chain]
//! m = 4
//! total_transmission = 0.5
//! n_atoms = 1000
//! d = 0.012
//! finesse = 1e5
//! ```

mod output;
mod presets;
mod run;

pub use output::{
    write_outputs, Column, OutputFormat, Quantity, ResultRecord, Series, Value, WrittenFiles, SCHEMA_VERSION,
};
pub use presets::{preset, preset_names, PRESETS};
pub use run::{run, run_to_dir};

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epr::{CouplingRates, Eavesdropper, RoundLimit};
use crate::network::TransmissionConvention;
use crate::network::{FreeParams, OptimizerSettings};
use crate::optics::{CavityParams, ProbePulse, DEFAULT_COOPERATIVITY_TOLERANCE};
use crate::sequence::{DepthScaling, KappaForm, ProbeSigns, DEFAULT_SEQUENCE_HP_RATIO};
use crate::spin::DEFAULT_HP_RATIO;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Squeeze,
    Cavity,
    Chain,
    Sequence,
    Epr,
    Protocol,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Squeeze => "squeeze",
            Mode::Cavity => "cavity",
            Mode::Chain => "chain",
            Mode::Sequence => "sequence",
            Mode::Epr => "epr",
            Mode::Protocol => "protocol",
        }
    }

    /// Parameters a `[sweep]` may vary in this mode.
    pub fn sweep_parameters(self) -> &'static [&'static str] {
        match self {
            Mode::Squeeze => &["eta", "d", "n_atoms"],
            Mode::Cavity => &["d", "n_atoms", "eta_cav"],
            Mode::Chain => &["m", "total_transmission", "finesse", "d", "n_atoms"],
            Mode::Sequence => &[
                "n_atoms",
                "precession_angle",
                "n_dr",
                "n_det",
                "atom_number_jitter_rms",
                "pulse_error_rms",
            ],
            Mode::Epr => &["mu_over_nu", "extra_loss"],
            Mode::Protocol => &["mu_over_nu", "fraction"],
        }
    }
}

/// Strontium probe: 7.4 kHz line, 100 linewidths detuned.
pub fn default_probe() -> ProbePulse {
    ProbePulse {
        n_dr: 1e4,
        n_det: 1e4,
        gamma: 7.4e3,
        delta: 7.4e5,
        sigma_over_a: 1.2e-5,
    }
}

/// 5 cm cavity with `F = 1e5` and `dF = 1200`.
pub fn default_cavity() -> CavityParams {
    CavityParams {
        t1: 3e-5,
        t2: 3e-5,
        loss: PI * 1e-5 - 3e-5,
        length: 0.05,
        big_gamma: 29e3,
        omega_single: 16e3,
        d: 0.012,
    }
}

fn half() -> f64 {
    0.5
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Free-space squeezing by one QND measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeSection {
    pub n_atoms: i64,
    pub d: f64,
    #[serde(default = "half")]
    pub eta: f64,
    #[serde(default = "default_probe")]
    pub probe: ProbePulse,
    #[serde(default = "default_cavity")]
    pub cavity: CavityParams,
}

/// Cavity-enhanced squeezing at a given intracavity decoherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub n_atoms: i64,
    /// Collective vacuum Rabi frequency, Hz. Defaults to `omega_single sqrt(N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_collective: Option<f64>,
    /// Linewidth of the probe transition, Hz.
    pub gamma: f64,
    pub sigma_over_a: f64,
    #[serde(default = "half")]
    pub eta_cav: f64,
    /// Detuned single-pass absorption for the transmission report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_delta: Option<f64>,
    #[serde(default = "default_cavity")]
    pub resonator: CavityParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinesseAllocation {
    /// `F_i = F_M e^{(i-M) r}`, equal `eta_i` for one probe.
    #[default]
    Optimal,
    /// All clocks at `F_M`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub m: i64,
    pub total_transmission: f64,
    #[serde(default)]
    pub convention: TransmissionConvention,
    pub n_atoms: i64,
    pub d: f64,
    /// Finesse of the clock next to the detector, `F_M`.
    pub finesse: f64,
    #[serde(default = "half")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub allocation: FinesseAllocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<FreeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSettings>,
}

fn default_shots() -> i64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub n_list: Vec<i64>,
    #[serde(default)]
    pub depth_scaling: DepthScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub n_atoms: i64,
    #[serde(default = "default_shots")]
    pub shots: i64,
    #[serde(default)]
    pub precession_angle: f64,
    #[serde(default)]
    pub pulse_error_rms: f64,
    #[serde(default)]
    pub atom_number_jitter_rms: f64,
    #[serde(default)]
    pub swap_error_rms: f64,
    #[serde(default)]
    pub detector_noise_rms: f64,
    #[serde(default)]
    pub stark_per_photon: f64,
    #[serde(default)]
    pub probe_signs: ProbeSigns,
    #[serde(default)]
    pub kappa_form: KappaForm,
    /// When set, overrides `probe.n_det` so both probes together scatter this `eta_cav`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_eta: Option<f64>,
    /// Run without QND probing.
    #[serde(default, skip_serializing_if = "is_default")]
    pub css_control: bool,
    /// Also run the `+Delta, +Delta` vs `+Delta, -Delta` comparison.
    #[serde(default, skip_serializing_if = "is_default")]
    pub stark_check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default = "default_probe")]
    pub probe: ProbePulse,
    #[serde(default = "default_cavity")]
    pub cavity: CavityParams,
}

/// Optional time-resolved relaxation from two coherent states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub dt: f64,
    pub steps: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprSection {
    pub n_atoms: i64,
    pub rates: CouplingRates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveSection>,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_min_sifted() -> i64 {
    10
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n_atoms: i64,
    /// Rates of the steady state shared by the two clocks.
    pub rates: CouplingRates,
    pub limit: RoundLimit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eavesdropper: Option<Eavesdropper>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_min_sifted")]
    pub min_sifted: i64,
    /// Independent repetitions; above 1 the output reports flag rates.
    #[serde(default = "one")]
    pub trials: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub steps: i64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub scale: SweepScale,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps.max(1) as usize;
        if n == 1 {
            return vec![self.start];
        }
        (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                match self.scale {
                    SweepScale::Linear => self.start + f * (self.stop - self.start),
                    SweepScale::Log => (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    /// File name stem; defaults to the scenario name or the mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

fn default_cooperativity_tolerance() -> f64 {
    DEFAULT_COOPERATIVITY_TOLERANCE
}

fn default_spin_hp_ratio() -> f64 {
    DEFAULT_HP_RATIO
}

fn default_sequence_hp_ratio() -> f64 {
    DEFAULT_SEQUENCE_HP_RATIO
}

fn default_asymptotic_tolerance() -> f64 {
    0.1
}

/// Module tolerances with their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative mismatch allowed between `Omega^2/(Gamma gamma)` and `dF`.
    #[serde(default = "default_cooperativity_tolerance")]
    pub cooperativity: f64,
    /// `max_eig(cov)/J` bound for the single-measurement squeeze report.
    #[serde(default = "default_spin_hp_ratio")]
    pub spin_hp_ratio: f64,
    /// Per-shot bound in the clock sequence.
    #[serde(default = "default_sequence_hp_ratio")]
    pub sequence_hp_ratio: f64,
    /// Relative gap at which the dense-chain precision is flagged unreliable.
    #[serde(default = "default_asymptotic_tolerance")]
    pub chain_asymptotic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cooperativity: default_cooperativity_tolerance(),
            spin_hp_ratio: default_spin_hp_ratio(),
            sequence_hp_ratio: default_sequence_hp_ratio(),
            chain_asymptotic: default_asymptotic_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<SqueezeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epr: Option<EprSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot read scenario: {0}")]
    Read(String),

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: crate::Error,
    },

    #[error("cannot write output: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit code: 2 parse, 3 validation, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. } | ScenarioError::Read(_) => 2,
            ScenarioError::Validation { .. } => 3,
            ScenarioError::Runtime { .. } | ScenarioError::Io(_) => 4,
        }
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type ScenarioResult<T> = std::result::Result<T, ScenarioError>;

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str) -> ScenarioResult<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ScenarioError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_scenario(path: &Path) -> ScenarioResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text)
}

fn positive_count(key: &str, v: i64) -> ScenarioResult<u64> {
    if v > 0 {
        Ok(v as u64)
    } else {
        Err(ScenarioError::validation(
            key,
            format!("must be a positive integer, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    /// Canonical TOML form; `parse(to_toml(c)) == c`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .or_else(|| self.name.clone())
            .unwrap_or_else(|| self.mode.name().to_string())
    }

    fn sections(&self) -> [(&'static str, bool); 6] {
        [
            ("squeeze", self.squeeze.is_some()),
            ("cavity", self.cavity.is_some()),
            ("chain", self.chain.is_some()),
            ("sequence", self.sequence.is_some()),
            ("epr", self.epr.is_some()),
            ("protocol", self.protocol.is_some()),
        ]
    }

    /// Checks section presence, sweep parameters and every module invariant
    /// that can be checked without running the simulation.
    pub fn validate(&self) -> ScenarioResult<()> {
        let mode = self.mode.name();
        for (name, present) in self.sections() {
            if name == mode && !present {
                return Err(ScenarioError::validation(
                    name,
                    format!("mode `{mode}` requires a [{name}] section"),
                ));
            }
            if name != mode && present {
                return Err(ScenarioError::validation(
                    name,
                    format!("section is not used by mode `{mode}`"),
                ));
            }
        }
        if let Some(s) = &self.sweep {
            if !self.mode.sweep_parameters().contains(&s.parameter.as_str()) {
                return Err(ScenarioError::validation(
                    "sweep.parameter",
                    format!(
                        "`{}` cannot be swept in mode `{mode}`; choose one of {:?}",
                        s.parameter,
                        self.mode.sweep_parameters()
                    ),
                ));
            }
            if s.steps < 1 {
                return Err(ScenarioError::validation(
                    "sweep.steps",
                    "range must contain at least one point",
                ));
            }
            if !(s.start.is_finite() && s.stop.is_finite()) {
                return Err(ScenarioError::validation("sweep.start", "range bounds must be finite"));
            }
            if s.scale == SweepScale::Log && !(s.start > 0.0 && s.stop > 0.0) {
                return Err(ScenarioError::validation(
                    "sweep.start",
                    "log sweeps need positive bounds",
                ));
            }
            for v in s.values() {
                run::apply_sweep(self, &s.parameter, v)?.validate_point()?;
            }
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.cooperativity", t.cooperativity),
            ("tolerances.spin_hp_ratio", t.spin_hp_ratio),
            ("tolerances.sequence_hp_ratio", t.sequence_hp_ratio),
            ("tolerances.chain_asymptotic", t.chain_asymptotic),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::validation(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        self.validate_point()
    }

    /// Validation of a single parameter point (no sweep).
    fn validate_point(&self) -> ScenarioResult<()> {
        run::build(self).map(|_| ())
    }
}

#[cfg(test)]
mod tests;
