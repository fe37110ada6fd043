//! Deterministic maximization of the chain S/N.
//!
//! Coordinate ascent over the free per-clock parameters. Each coordinate is
//! optimized by a grid scan followed by golden-section refinement inside the
//! best grid bracket, so boundary optima and multimodal slices are handled
//! without a separate fallback pass. A sweep that improves S/N by less than
//! `rel_tol` (relative) ends the search.

use serde::{Deserialize, Serialize};

use super::{chain_snr, eta_from_photons, ChainConfig};
use crate::error::{invalid, require_positive, Result};

/// Which parameters the optimizer may move, and under what constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FreeParams {
    /// Each `eta_i` free in `(0, eta_max]`; finesses fixed.
    Eta { eta_max: f64 },
    /// Each finesse free in `(0, f_max]` with one probe of fixed detected photon
    /// number, so `eta_i = scatter e^{r_i} F_i / pi` follows the finesse and may
    /// not exceed `eta_budget`. `scatter` is `n (gamma/Delta)^2 sigma/A`.
    FinesseFixedPhotons { scatter: f64, f_max: f64, eta_budget: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub grid_points: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            rel_tol: 1e-10,
            grid_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimized {
    pub config: ChainConfig,
    pub snr: f64,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out; `config` is then the best found.
    pub converged: bool,
}

pub fn optimize_chain(cfg: &ChainConfig, free: FreeParams, settings: &OptimizerSettings) -> Result<Optimized> {
    cfg.validate()?;
    if settings.grid_points < 3 {
        return Err(invalid("grid_points", "need at least 3 grid points"));
    }
    match free {
        FreeParams::Eta { eta_max } => require_positive("eta_max", eta_max)?,
        FreeParams::FinesseFixedPhotons {
            scatter,
            f_max,
            eta_budget,
        } => {
            require_positive("scatter", scatter)?;
            require_positive("f_max", f_max)?;
            require_positive("eta_budget", eta_budget)?;
        }
    }

    let r = cfg.accumulated_attenuation();
    let mut current = cfg.clone();
    if let FreeParams::FinesseFixedPhotons { scatter, .. } = free {
        sync_eta(&mut current, &r, scatter);
    }
    let mut best = chain_snr(&current);

    for sweep in 1..=settings.max_sweeps {
        let start = best;
        for (i, &ri) in r.iter().enumerate() {
            let (lo, hi) = bounds(free, ri);
            let objective = |x: f64| {
                let mut c = current.clocks[i];
                set_coordinate(&mut c, free, ri, x);
                c.snr_term(ri)
            };
            let x = line_search(objective, lo, hi, settings.grid_points);
            let mut trial = current.clone();
            set_coordinate(&mut trial.clocks[i], free, ri, x);
            let s = chain_snr(&trial);
            if s >= best {
                current = trial;
                best = s;
            }
        }
        if (best - start).abs() <= settings.rel_tol * best.abs() {
            return Ok(Optimized {
                config: current,
                snr: best,
                sweeps: sweep,
                converged: true,
            });
        }
    }
    Ok(Optimized {
        config: current,
        snr: best,
        sweeps: settings.max_sweeps,
        converged: false,
    })
}

fn bounds(free: FreeParams, r_i: f64) -> (f64, f64) {
    match free {
        FreeParams::Eta { eta_max } => (eta_max * 1e-9, eta_max),
        FreeParams::FinesseFixedPhotons {
            scatter,
            f_max,
            eta_budget,
        } => {
            // largest finesse that keeps eta_i within budget
            let cap = eta_budget / eta_from_photons(scatter, r_i, 1.0);
            let hi = f_max.min(cap);
            (hi * 1e-9, hi)
        }
    }
}

fn set_coordinate(clock: &mut super::ChainClock, free: FreeParams, r_i: f64, x: f64) {
    match free {
        FreeParams::Eta { .. } => clock.eta = x,
        FreeParams::FinesseFixedPhotons { scatter, .. } => {
            clock.finesse = x;
            clock.eta = eta_from_photons(scatter, r_i, x);
        }
    }
}

fn sync_eta(cfg: &mut ChainConfig, r: &[f64], scatter: f64) {
    for (c, ri) in cfg.clocks.iter_mut().zip(r) {
        c.eta = eta_from_photons(scatter, *ri, c.finesse);
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer of `f` on `[lo, hi]`.
pub(crate) fn line_search<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid_points: usize) -> f64 {
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|k| lo + step * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let k = values
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v > values[best] { k } else { best });

    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(grid_points - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-13 * (a.abs() + b.abs()).max(1e-300) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints of the bracket were never evaluated by the golden section
    [(0.5 * (a + b)), grid[k], lo, hi]
        .into_iter()
        .map(|x| (x, f(x)))
        .fold((grid[k], values[k]), |best, p| if p.1 > best.1 { p } else { best })
        .0
}
