//! Secret time sharing with an EPR pair of clocks.
//!
//! In every round each owner flips a fair coin and either reads `J_z`
//! directly (choice 0) or applies a `pi/2` pulse about `x` first, which maps
//! `J_y` onto `J_z` (choice 1). Choices are announced, outcomes are not.
//! Rounds with equal choices are kept; for those, the normalized sum of the
//! two outcomes is `X1 + X2` or `P1 - P2`, whose variance sits below the
//! uncorrelated value 1 for an entangled pair.
//!
//! Eavesdropping is modelled as intercept-resend on clock 2: the attacker
//! measures one quadrature in a random basis and resends a coherent state
//! displaced to the result. A two-sided chi-square test of the sifted sample
//! variance against the no-attack value flags the attack.

use std::io::Write;

use nalgebra::Vector4;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EprState;
use crate::error::{invalid, require_positive, Error, Result};
use crate::stats::{stream_rng, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "count")]
pub enum RoundLimit {
    /// Fixed number of rounds.
    Total(usize),
    /// Run until this many rounds survive sifting.
    Sifted(usize),
}

/// Intercept-resend attack on clock 2, applied to a random `fraction` of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eavesdropper {
    pub fraction: f64,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_min_sifted() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSettings {
    pub limit: RoundLimit,
    #[serde(default)]
    pub eavesdropper: Option<Eavesdropper>,
    /// Significance level of the variance test.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_min_sifted")]
    pub min_sifted: usize,
    pub seed: u64,
}

impl ProtocolSettings {
    pub fn new(limit: RoundLimit, seed: u64) -> Self {
        Self {
            limit,
            eavesdropper: None,
            alpha: default_alpha(),
            min_sifted: default_min_sifted(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "significance must lie in (0, 1)"));
        }
        if self.min_sifted < 2 {
            return Err(invalid("min_sifted", "the variance test needs at least 2 rounds"));
        }
        if let Some(e) = self.eavesdropper {
            if !(0.0..=1.0).contains(&e.fraction) {
                return Err(invalid("fraction", "attack fraction must lie in [0, 1]"));
            }
        }
        match self.limit {
            RoundLimit::Total(0) | RoundLimit::Sifted(0) => Err(invalid("rounds", "at least one round is required")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRound {
    pub index: u64,
    pub choice1: u8,
    pub choice2: u8,
    /// `J_z` read by each owner after the optional pulse.
    pub outcome1: f64,
    pub outcome2: f64,
    pub sifted: bool,
    pub attacked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolSummary {
    pub rounds: usize,
    pub sifted_rounds: usize,
    pub sift_fraction: f64,
    /// Sample variance of `(outcome1 + outcome2)/sqrt(J)` over sifted rounds.
    pub joint_variance: f64,
    /// No-attack value, criterion / 2J.
    pub expected_variance: f64,
    /// Variance of `outcome1/sqrt(J)` over all rounds: what clock 1 sees alone.
    pub single_party_variance: f64,
    pub chi2_statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub eavesdrop_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolTranscript {
    pub rounds: Vec<ProtocolRound>,
    pub summary: ProtocolSummary,
}

impl ProtocolTranscript {
    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn secret_time_protocol(s: &EprState, settings: &ProtocolSettings) -> Result<ProtocolTranscript> {
    run_protocol(s, settings, &mut stream_rng(settings.seed, 0))
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn run_protocol<R: Rng + ?Sized>(s: &EprState, settings: &ProtocolSettings, rng: &mut R) -> Result<ProtocolTranscript> {
    settings.validate()?;
    require_positive("j_len", s.j_len)?;
    let chol = s
        .cov4
        .cholesky()
        .ok_or_else(|| Error::Unphysical("covariance is not positive definite".into()))?;
    let l = chol.l();
    let sqrt_j = s.j_len.sqrt();
    let vacuum = 0.5f64.sqrt();

    let mut rounds = Vec::new();
    let mut sifted_count = 0;
    let done = |total: usize, sifted: usize| match settings.limit {
        RoundLimit::Total(n) => total >= n,
        RoundLimit::Sifted(n) => sifted >= n,
    };
    while !done(rounds.len(), sifted_count) {
        let z = Vector4::from_fn(|_, _| normal(rng));
        let mut q = s.mean4 + l * z;
        let choice1 = rng.random::<bool>() as u8;
        let choice2 = rng.random::<bool>() as u8;

        let attacked = match settings.eavesdropper {
            Some(e) => rng.random::<f64>() < e.fraction,
            None => false,
        };
        if attacked {
            // measure one quadrature of clock 2, resend a coherent state there
            let (keep, lose) = if rng.random::<bool>() { (3, 2) } else { (2, 3) };
            q[keep] += vacuum * normal(rng);
            q[lose] = vacuum * normal(rng);
        }

        let (outcome1, outcome2) = (
            sqrt_j * if choice1 == 0 { q[0] } else { q[1] },
            // J_y2 = -sqrt(J) P2
            sqrt_j * if choice2 == 0 { q[2] } else { -q[3] },
        );
        let sifted = choice1 == choice2;
        sifted_count += sifted as usize;
        rounds.push(ProtocolRound {
            index: rounds.len() as u64,
            choice1,
            choice2,
            outcome1,
            outcome2,
            sifted,
            attacked,
        });
    }

    let sums: Vec<f64> = rounds
        .iter()
        .filter(|r| r.sifted)
        .map(|r| (r.outcome1 + r.outcome2) / sqrt_j)
        .collect();
    if sums.len() < settings.min_sifted {
        return Err(Error::TooFewRounds {
            got: sums.len(),
            min: settings.min_sifted,
        });
    }
    let own: Vec<f64> = rounds.iter().map(|r| r.outcome1 / sqrt_j).collect();
    let c = &s.cov4;
    let expected = 0.5 * (c[(0, 0)] + c[(2, 2)] + 2.0 * c[(0, 2)] + c[(1, 1)] + c[(3, 3)] - 2.0 * c[(1, 3)]);

    let joint = Summary::of(&sums).variance();
    let dof = (sums.len() - 1) as f64;
    let chi2 = dof * joint / expected;
    let dist = ChiSquared::new(dof).map_err(|e| invalid("dof", e.to_string()))?;
    let lower = dist.cdf(chi2);
    let p_value = (2.0 * lower.min(1.0 - lower)).min(1.0);

    Ok(ProtocolTranscript {
        summary: ProtocolSummary {
            rounds: rounds.len(),
            sifted_rounds: sums.len(),
            sift_fraction: sums.len() as f64 / rounds.len() as f64,
            joint_variance: joint,
            expected_variance: expected,
            single_party_variance: Summary::of(&own).variance(),
            chi2_statistic: chi2,
            p_value,
            alpha: settings.alpha,
            eavesdrop_flag: p_value < settings.alpha,
        },
        rounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialStats {
    pub trials: usize,
    /// Fraction of trials that flagged eavesdropping.
    pub flag_rate: f64,
    pub mean_sift_fraction: f64,
    pub mean_joint_variance: f64,
}

/// Independent repetitions of the protocol, trial `k` seeded from `(seed, k)`.
pub fn protocol_trials(s: &EprState, settings: &ProtocolSettings, trials: usize) -> Result<TrialStats> {
    if trials == 0 {
        return Err(invalid("trials", "at least one trial is required"));
    }
    let summaries = (0..trials as u64)
        .into_par_iter()
        .map(|k| run_protocol(s, settings, &mut stream_rng(settings.seed, k)).map(|t| t.summary))
        .collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    Ok(TrialStats {
        trials,
        flag_rate: summaries.iter().filter(|s| s.eavesdrop_flag).count() as f64 / n,
        mean_sift_fraction: summaries.iter().map(|s| s.sift_fraction).sum::<f64>() / n,
        mean_joint_variance: summaries.iter().map(|s| s.joint_variance).sum::<f64>() / n,
    })
}
