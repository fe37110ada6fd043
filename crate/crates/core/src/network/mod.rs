//! A chain of `M` cavity clocks read out by one cascaded QND probe.
//!
//! The probe passes clock 1 first and clock `M` last before reaching the
//! detector; `r_i` is the accumulated attenuation exponent from clock `i` to
//! the detector. Signals from all clocks add while the noise stays the shot
//! noise of the detected light, so
//!
//! ```text
//! S/N = sum_i sqrt(4 d N F_i eta_i e^{-2 eta_i} e^{-r_i} / pi)
//! ```

mod optimize;

pub use optimize::{optimize_chain, FreeParams, Optimized, OptimizerSettings};

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Result};
use crate::optics::hp_validity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainClock {
    pub n_atoms: u64,
    /// Resonant optical depth.
    pub d: f64,
    pub finesse: f64,
    /// Probe-induced decoherence budget.
    pub eta: f64,
}

impl ChainClock {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid("n_atoms", "at least one atom is required"));
        }
        require_positive("d", self.d)?;
        require_positive("finesse", self.finesse)?;
        require_positive("eta", self.eta)?;
        Ok(())
    }

    /// `sigma F / A` for this clock, using `d = N sigma / A`.
    pub fn hp_valid(&self) -> bool {
        hp_validity(self.d / self.n_atoms as f64, self.finesse)
    }

    /// S/N contribution of this clock seen through attenuation `r`.
    pub fn snr_term(&self, r: f64) -> f64 {
        snr_term(self.d, self.n_atoms as f64, self.finesse, self.eta, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSegment {
    /// Attenuation exponent; the segment transmits `e^{-r}`.
    pub r: f64,
}

/// How a total channel transmission `t` is split into per-hop exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionConvention {
    /// `t` is already the per-hop transmission `e^{-r}`.
    PerHopExponent,
    /// `r = |ln t| / M`. Reproduces the quoted 3.1 and 6 improvements.
    #[default]
    #[serde(rename = "total_over_m")]
    TotalOverM,
    /// `r = |ln t| / (M - 1)`, i.e. `t = e^{-(M-1) r}` between first and last clock.
    #[serde(rename = "total_over_m_minus_1")]
    TotalOverMMinus1,
}

/// Per-hop exponent for `m` clocks sharing a channel of transmission `t`.
pub fn hop_exponent(m: usize, t: f64, convention: TransmissionConvention) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m", "a chain needs at least one clock"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid("total_transmission", format!("must lie in (0, 1], got {t}")));
    }
    let total = t.ln().abs();
    Ok(match convention {
        TransmissionConvention::PerHopExponent => total,
        TransmissionConvention::TotalOverM => total / m as f64,
        TransmissionConvention::TotalOverMMinus1 if m == 1 => 0.0,
        TransmissionConvention::TotalOverMMinus1 => total / (m - 1) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Index 0 is the clock farthest from the detector.
    pub clocks: Vec<ChainClock>,
    /// `segments[i]` follows clock `i`; the last one leads to the detector.
    pub segments: Vec<ChannelSegment>,
    #[serde(default)]
    pub convention: TransmissionConvention,
}

impl ChainConfig {
    /// `m` copies of `clock`, equal hop exponent `r` between neighbours and a
    /// lossless link from the last clock to the detector, so `r_i = (M - i) r`.
    pub fn uniform(m: usize, clock: ChainClock, r: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "a chain needs at least one clock"));
        }
        require_nonnegative("r", r)?;
        let mut segments = vec![ChannelSegment { r }; m];
        segments[m - 1].r = 0.0;
        let cfg = Self {
            clocks: vec![clock; m],
            segments,
            convention: TransmissionConvention::PerHopExponent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uniform chain with the hop exponent derived from a total transmission.
    pub fn uniform_with_transmission(
        m: usize,
        clock: ChainClock,
        t: f64,
        convention: TransmissionConvention,
    ) -> Result<Self> {
        let r = hop_exponent(m, t, convention)?;
        let mut cfg = Self::uniform(m, clock, r)?;
        cfg.convention = convention;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clocks.is_empty() {
            return Err(invalid("clocks", "a chain needs at least one clock"));
        }
        if self.segments.len() != self.clocks.len() {
            return Err(invalid(
                "segments",
                format!("expected {} segments, got {}", self.clocks.len(), self.segments.len()),
            ));
        }
        for c in &self.clocks {
            c.validate()?;
        }
        for s in &self.segments {
            require_nonnegative("r", s.r)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.clocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clocks.is_empty()
    }

    /// `r_i`, the attenuation from clock `i` to the detector. Nonincreasing in `i`.
    pub fn accumulated_attenuation(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.segments.len()];
        let mut acc = 0.0;
        for (i, seg) in self.segments.iter().enumerate().rev() {
            acc += seg.r;
            out[i] = acc;
        }
        out
    }

    /// Clocks whose `sigma F / A` exceeds the Holstein-Primakoff limit.
    pub fn hp_violations(&self) -> Vec<usize> {
        self.clocks
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.hp_valid())
            .map(|(i, _)| i)
            .collect()
    }
}

/// One clock's S/N term `sqrt(4 d N F eta e^{-2 eta} e^{-r} / pi)`.
pub fn snr_term(d: f64, n_atoms: f64, finesse: f64, eta: f64, r: f64) -> f64 {
    (4.0 * d * n_atoms * finesse * eta * (-2.0 * eta).exp() * (-r).exp() / PI).sqrt()
}

/// Collective S/N of the chain.
pub fn chain_snr(cfg: &ChainConfig) -> f64 {
    cfg.clocks
        .iter()
        .zip(cfg.accumulated_attenuation())
        .map(|(c, r)| c.snr_term(r))
        .sum()
}

/// `F_i = F_M e^{(i-M) r}`: with one probe of fixed photon number this keeps
/// every `eta_i` equal.
pub fn allocate_finesse(f_last: f64, m: usize, r: f64) -> Result<Vec<f64>> {
    require_positive("f_last", f_last)?;
    require_nonnegative("r", r)?;
    if m == 0 {
        return Err(invalid("m", "a chain needs at least one clock"));
    }
    Ok((1..=m).map(|i| f_last * ((i as f64 - m as f64) * r).exp()).collect())
}

/// Decoherence of clock `i` for a probe whose detected photon number gives
/// `scatter = n (gamma/Delta)^2 sigma/A`: `eta_i = scatter e^{r_i} F_i / pi`.
pub fn eta_from_photons(scatter: f64, r_i: f64, finesse: f64) -> f64 {
    scatter * r_i.exp() * finesse / PI
}

/// Chain precision improvement over one clock of finesse `F_M`:
/// `sum_{k=0}^{M-1} e^{-k r}` with `r` from [`hop_exponent`].
pub fn chain_improvement(m: usize, total_transmission: f64, convention: TransmissionConvention) -> Result<f64> {
    if total_transmission == 0.0 {
        return Err(invalid("total_transmission", "zero transmission carries no signal"));
    }
    let r = hop_exponent(m, total_transmission, convention)?;
    Ok((0..m).map(|k| (-(k as f64) * r).exp()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainPrecision {
    /// `(S/N)^{-1}` from the exact sum at `eta_i = 1/2` with the finesse allocation.
    pub exact: f64,
    /// Dense-chain form `|ln t| / (M S_1)` with `|ln t| = M r` and `S_1` the
    /// single-clock S/N at finesse `F_M`.
    pub asymptotic: f64,
    pub relative_difference: f64,
    /// False when exact and asymptotic differ by more than 10%.
    pub asymptotic_reliable: bool,
}

/// Single-clock S/N at `eta = 1/2`, `sqrt(2 d N F / (pi e))`.
pub fn optimal_single_clock_snr(d: f64, n_atoms: f64, finesse: f64) -> f64 {
    (2.0 * d * n_atoms * finesse / (PI * E)).sqrt()
}

pub fn chain_precision(m: usize, r: f64, d: f64, n_atoms: u64, f_last: f64) -> Result<ChainPrecision> {
    let finesses = allocate_finesse(f_last, m, r)?;
    let clock = ChainClock {
        n_atoms,
        d,
        finesse: f_last,
        eta: 0.5,
    };
    let mut cfg = ChainConfig::uniform(m, clock, r)?;
    for (c, f) in cfg.clocks.iter_mut().zip(finesses) {
        c.finesse = f;
    }
    let exact = 1.0 / chain_snr(&cfg);
    let single = optimal_single_clock_snr(d, n_atoms as f64, f_last);
    let asymptotic = if r > 0.0 {
        (m as f64 * r) / (m as f64 * single)
    } else {
        1.0 / (m as f64 * single)
    };
    let relative_difference = (asymptotic - exact).abs() / exact;
    Ok(ChainPrecision {
        exact,
        asymptotic,
        relative_difference,
        asymptotic_reliable: relative_difference <= 0.1,
    })
}

/// One row of the per-clock export table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockRow {
    /// 1-based, 1 = farthest from the detector.
    pub index: usize,
    pub r: f64,
    pub finesse: f64,
    pub eta: f64,
    pub snr_term: f64,
}

pub fn per_clock_table(cfg: &ChainConfig) -> Vec<ClockRow> {
    cfg.clocks
        .iter()
        .zip(cfg.accumulated_attenuation())
        .enumerate()
        .map(|(i, (c, r))| ClockRow {
            index: i + 1,
            r,
            finesse: c.finesse,
            eta: c.eta,
            snr_term: c.snr_term(r),
        })
        .collect()
}
