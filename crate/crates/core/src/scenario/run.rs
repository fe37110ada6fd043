//! Dispatch of a validated scenario to the physics modules.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::output::{tool_version, Quantity, ResultRecord, Series, WrittenFiles, SCHEMA_VERSION};
use super::{write_outputs, FinesseAllocation, Mode, OutputFormat, ScenarioConfig, ScenarioError, ScenarioResult};
use crate::epr::{
    self, epr_criterion, lyapunov_residual, matched_criterion, protocol_trials, secret_time_protocol,
    single_party_variance, steady_state, CouplingRates, Eavesdropper, EprState, Party, ProtocolSettings,
};
use crate::network::{
    allocate_finesse, chain_improvement, chain_precision, chain_snr, per_clock_table, snr_term, ChainClock, ChainConfig,
};
use crate::network::{optimize_chain, FreeParams, OptimizerSettings};
use crate::optics::{
    cavity_clock_precision, cavity_clock_precision_printed, cavity_transmission, collective_rabi, cooperativity_check,
    eta_n_for_cav, hp_validity, kappa_cavity, kappa_cavity_substituted, kappa_free, qnd_update, xi_after_qnd,
    xi_min_cavity, xi_min_free, xi_to_db, CavityParams, ProbePulse,
};
use crate::sequence::{precision_scan, run_sequence, stark_cancellation_check, DepthScaling, SequenceConfig};
use crate::spin::CollectiveSpin;
use crate::Error;

/// Module inputs assembled from a scenario.
pub(crate) enum Built {
    Squeeze {
        n_atoms: u64,
        d: f64,
        eta: f64,
        probe: ProbePulse,
        cavity: CavityParams,
    },
    Cavity {
        n_atoms: u64,
        omega_collective: f64,
        gamma: f64,
        sigma_over_a: f64,
        eta_cav: f64,
        d_delta: Option<f64>,
        resonator: CavityParams,
    },
    Chain {
        config: ChainConfig,
        total_transmission: f64,
        free: Option<FreeParams>,
        settings: OptimizerSettings,
    },
    Sequence {
        config: SequenceConfig,
        scan: Option<(Vec<u64>, DepthScaling)>,
        stark_check: bool,
    },
    Epr {
        j_len: f64,
        rates: CouplingRates,
        evolve: Option<(f64, usize)>,
    },
    Protocol {
        state: EprState,
        rates: CouplingRates,
        settings: ProtocolSettings,
        trials: usize,
    },
}

fn count(key: &str, v: i64) -> ScenarioResult<u64> {
    super::positive_count(key, v)
}

/// Attaches the section name to a module error raised while checking inputs.
fn invalid_in(section: &'static str) -> impl Fn(Error) -> ScenarioError {
    move |e| match e {
        Error::InvalidParameter { name, reason } => ScenarioError::validation(format!("{section}.{name}"), reason),
        other => ScenarioError::validation(section, other.to_string()),
    }
}

fn runtime(context: &str) -> impl Fn(Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Runtime {
        context: context.to_string(),
        source,
    }
}

pub(crate) fn build(cfg: &ScenarioConfig) -> ScenarioResult<Built> {
    Ok(match cfg.mode {
        Mode::Squeeze => {
            let s = cfg.squeeze.as_ref().expect("validated section");
            let check = invalid_in("squeeze");
            let n_atoms = count("squeeze.n_atoms", s.n_atoms)?;
            kappa_free(s.d, s.eta).map_err(&check)?;
            s.probe.validate().map_err(&check)?;
            s.cavity.validate().map_err(&check)?;
            Built::Squeeze {
                n_atoms,
                d: s.d,
                eta: s.eta,
                probe: s.probe,
                cavity: s.cavity,
            }
        }
        Mode::Cavity => {
            let s = cfg.cavity.as_ref().expect("validated section");
            let check = invalid_in("cavity");
            let n_atoms = count("cavity.n_atoms", s.n_atoms)?;
            s.resonator.validate().map_err(&check)?;
            let omega_collective = s
                .omega_collective
                .unwrap_or_else(|| collective_rabi(s.resonator.omega_single, n_atoms as f64));
            crate::error::require_positive("omega_collective", omega_collective).map_err(&check)?;
            crate::error::require_positive("gamma", s.gamma).map_err(&check)?;
            crate::error::require_positive("sigma_over_a", s.sigma_over_a).map_err(&check)?;
            crate::error::require_positive("big_gamma", s.resonator.big_gamma).map_err(&check)?;
            crate::error::require_positive("d", s.resonator.d).map_err(&check)?;
            crate::error::require_nonnegative("eta_cav", s.eta_cav).map_err(&check)?;
            if let Some(dd) = s.d_delta {
                crate::error::require_nonnegative("d_delta", dd).map_err(&check)?;
            }
            Built::Cavity {
                n_atoms,
                omega_collective,
                gamma: s.gamma,
                sigma_over_a: s.sigma_over_a,
                eta_cav: s.eta_cav,
                d_delta: s.d_delta,
                resonator: s.resonator,
            }
        }
        Mode::Chain => {
            let s = cfg.chain.as_ref().expect("validated section");
            let check = invalid_in("chain");
            let m = count("chain.m", s.m)? as usize;
            let clock = ChainClock {
                n_atoms: count("chain.n_atoms", s.n_atoms)?,
                d: s.d,
                finesse: s.finesse,
                eta: s.eta,
            };
            clock.validate().map_err(&check)?;
            let mut config =
                ChainConfig::uniform_with_transmission(m, clock, s.total_transmission, s.convention).map_err(&check)?;
            if s.allocation == FinesseAllocation::Optimal {
                let r = config.segments[0].r;
                for (c, f) in config
                    .clocks
                    .iter_mut()
                    .zip(allocate_finesse(s.finesse, m, r).map_err(&check)?)
                {
                    c.finesse = f;
                }
            }
            let settings = s.optimizer.unwrap_or_default();
            if let Some(free) = s.optimize {
                // an empty run checks the optimizer inputs
                let probe = OptimizerSettings {
                    max_sweeps: 0,
                    ..settings
                };
                optimize_chain(&config, free, &probe).map_err(invalid_in("chain.optimize"))?;
            }
            if settings.grid_points < 3 {
                return Err(ScenarioError::validation(
                    "chain.optimizer.grid_points",
                    "need at least 3 grid points",
                ));
            }
            Built::Chain {
                config,
                total_transmission: s.total_transmission,
                free: s.optimize,
                settings,
            }
        }
        Mode::Sequence => {
            let s = cfg.sequence.as_ref().expect("validated section");
            let check = invalid_in("sequence");
            let mut config = SequenceConfig {
                n_atoms: count("sequence.n_atoms", s.n_atoms)?,
                probe: s.probe,
                cavity: s.cavity,
                precession_angle: s.precession_angle,
                pulse_error_rms: s.pulse_error_rms,
                atom_number_jitter_rms: s.atom_number_jitter_rms,
                shots: count("sequence.shots", s.shots)? as usize,
                seed: cfg.seed,
                swap_error_rms: s.swap_error_rms,
                detector_noise_rms: s.detector_noise_rms,
                stark_per_photon: s.stark_per_photon,
                probe_signs: s.probe_signs,
                kappa_form: s.kappa_form,
                hp_ratio: cfg.tolerances.sequence_hp_ratio,
            };
            config.validate().map_err(&check)?;
            if let Some(eta) = s.total_eta {
                config = config.with_total_eta(eta).map_err(&check)?;
            }
            if s.css_control {
                config = config.css_control();
            }
            let scan = match &s.scan {
                Some(scan) => {
                    if scan.n_list.len() < 2 {
                        return Err(ScenarioError::validation(
                            "sequence.scan.n_list",
                            "need at least two atom numbers",
                        ));
                    }
                    let n = scan
                        .n_list
                        .iter()
                        .map(|&n| count("sequence.scan.n_list", n))
                        .collect::<ScenarioResult<Vec<_>>>()?;
                    Some((n, scan.depth_scaling))
                }
                None => None,
            };
            Built::Sequence {
                config,
                scan,
                stark_check: s.stark_check,
            }
        }
        Mode::Epr => {
            let s = cfg.epr.as_ref().expect("validated section");
            let check = invalid_in("epr");
            let n = count("epr.n_atoms", s.n_atoms)?;
            s.rates.validate().map_err(&check)?;
            let evolve = match s.evolve {
                Some(e) => {
                    crate::error::require_positive("dt", e.dt).map_err(invalid_in("epr.evolve"))?;
                    Some((e.dt, count("epr.evolve.steps", e.steps)? as usize))
                }
                None => None,
            };
            Built::Epr {
                j_len: n as f64 / 2.0,
                rates: s.rates,
                evolve,
            }
        }
        Mode::Protocol => {
            let s = cfg.protocol.as_ref().expect("validated section");
            let check = invalid_in("protocol");
            let n = count("protocol.n_atoms", s.n_atoms)?;
            let state = steady_state(&s.rates, n as f64 / 2.0).map_err(invalid_in("protocol.rates"))?;
            let settings = ProtocolSettings {
                limit: s.limit,
                eavesdropper: s.eavesdropper,
                alpha: s.alpha,
                min_sifted: count("protocol.min_sifted", s.min_sifted)? as usize,
                seed: cfg.seed,
            };
            settings.validate().map_err(&check)?;
            Built::Protocol {
                state,
                rates: s.rates,
                settings,
                trials: count("protocol.trials", s.trials)? as usize,
            }
        }
    })
}

/// Copy of `cfg` with one sweep parameter set to `value`.
pub(crate) fn apply_sweep(cfg: &ScenarioConfig, parameter: &str, value: f64) -> ScenarioResult<ScenarioConfig> {
    let mut c = cfg.clone();
    c.sweep = None;
    let int = || value.round() as i64;
    let unknown = || ScenarioError::validation("sweep.parameter", format!("`{parameter}` cannot be swept"));
    match c.mode {
        Mode::Squeeze => {
            let s = c.squeeze.as_mut().ok_or_else(unknown)?;
            match parameter {
                "eta" => s.eta = value,
                "d" => s.d = value,
                "n_atoms" => s.n_atoms = int(),
                _ => return Err(unknown()),
            }
        }
        Mode::Cavity => {
            let s = c.cavity.as_mut().ok_or_else(unknown)?;
            match parameter {
                "d" => s.resonator.d = value,
                "n_atoms" => s.n_atoms = int(),
                "eta_cav" => s.eta_cav = value,
                _ => return Err(unknown()),
            }
        }
        Mode::Chain => {
            let s = c.chain.as_mut().ok_or_else(unknown)?;
            match parameter {
                "m" => s.m = int(),
                "total_transmission" => s.total_transmission = value,
                "finesse" => s.finesse = value,
                "d" => s.d = value,
                "n_atoms" => s.n_atoms = int(),
                _ => return Err(unknown()),
            }
        }
        Mode::Sequence => {
            let s = c.sequence.as_mut().ok_or_else(unknown)?;
            match parameter {
                "n_atoms" => s.n_atoms = int(),
                "precession_angle" => s.precession_angle = value,
                "n_dr" => s.probe.n_dr = value,
                "n_det" => s.probe.n_det = value,
                "atom_number_jitter_rms" => s.atom_number_jitter_rms = value,
                "pulse_error_rms" => s.pulse_error_rms = value,
                _ => return Err(unknown()),
            }
        }
        Mode::Epr => {
            let s = c.epr.as_mut().ok_or_else(unknown)?;
            match parameter {
                "mu_over_nu" => set_ratio(&mut s.rates, value),
                "extra_loss" => s.rates.extra_loss = value,
                _ => return Err(unknown()),
            }
        }
        Mode::Protocol => {
            let s = c.protocol.as_mut().ok_or_else(unknown)?;
            match parameter {
                "mu_over_nu" => set_ratio(&mut s.rates, value),
                "fraction" => s.eavesdropper = Some(Eavesdropper { fraction: value }),
                _ => return Err(unknown()),
            }
        }
    }
    Ok(c)
}

/// Matched rates with `mu = ratio nu`, keeping `nu1`.
fn set_ratio(rates: &mut CouplingRates, ratio: f64) {
    *rates = CouplingRates::matched(ratio * rates.nu1, rates.nu1, rates.extra_loss);
}

fn parameter_unit(parameter: &str) -> &'static str {
    match parameter {
        "n_atoms" => "atoms",
        "m" => "clocks",
        "precession_angle" | "pulse_error_rms" => "rad",
        "n_dr" | "n_det" => "photons",
        "extra_loss" => "1/s",
        _ => "dimensionless",
    }
}

/// Record contents before the run metadata is attached.
pub(crate) struct PointOutput {
    pub outputs: Vec<Quantity>,
    pub series: Option<Series>,
    pub extra: Vec<(String, String)>,
}

fn num(name: &str, value: f64, unit: &str) -> Quantity {
    Quantity::number(name, value, unit)
}

const DL: &str = "dimensionless";

fn run_point(cfg: &ScenarioConfig) -> ScenarioResult<PointOutput> {
    let built = build(cfg)?;
    let tol = cfg.tolerances;
    let mut outputs = Vec::new();
    let mut series = None;
    let mut extra = Vec::new();
    match built {
        Built::Squeeze {
            n_atoms,
            d,
            eta,
            probe,
            cavity,
        } => {
            let err = runtime("squeeze");
            let kappa = kappa_free(d, eta).map_err(&err)?;
            let xi = xi_after_qnd(kappa, eta);
            let css = CollectiveSpin::new_css(n_atoms).map_err(&err)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (after, outcome) = qnd_update(&css, kappa, eta, &mut rng).map_err(&err)?;
            outputs.extend([
                num("kappa", kappa, DL),
                num("xi", xi, DL),
                num("xi_db", xi_to_db(xi), "dB"),
                num("xi_min_free", xi_min_free(d), DL),
                num("min_detectable_angle", (xi / n_atoms as f64).sqrt(), "rad"),
                num("css_angle", (1.0 / n_atoms as f64).sqrt(), "rad"),
                num("xi_gaussian_update", after.squeezing_parameter().map_err(&err)?, DL),
                num("qnd_outcome", outcome, DL),
                Quantity::flag("hp_valid", after.is_hp_valid(tol.spin_hp_ratio)),
                num("probe_eta", probe.eta(), DL),
                num("cavity_finesse", cavity.finesse(), DL),
                num("cavity_xi_min", xi_min_cavity(cavity.d, cavity.finesse()), DL),
            ]);
        }
        Built::Cavity {
            n_atoms,
            omega_collective,
            gamma,
            sigma_over_a,
            eta_cav,
            d_delta,
            resonator,
        } => {
            let err = runtime("cavity");
            let f = resonator.finesse();
            let d = resonator.d;
            let coop = cooperativity_check(&resonator, omega_collective, gamma, tol.cooperativity).map_err(&err)?;
            let kappa = kappa_cavity_substituted(d, f, eta_cav).map_err(&err)?;
            let eta_n = eta_n_for_cav(eta_cav, f).map_err(&err)?;
            let kappa_literal = kappa_cavity(d, f, eta_n).map_err(&err)?;
            let xi_min = xi_min_cavity(d, f);
            let n = n_atoms as f64;
            outputs.extend([
                num("finesse", f, DL),
                num("round_trip_loss", resonator.round_trip_loss(), DL),
                num("cooperativity", coop.cooperativity, DL),
                num("d_times_finesse", coop.d_times_finesse, DL),
                num("cooperativity_mismatch", coop.relative_mismatch, DL),
                Quantity::flag("cooperativity_consistent", coop.consistent),
                num("omega_collective", omega_collective, "Hz"),
                num("eta_cav", eta_cav, DL),
                num("eta_n", eta_n, DL),
                num("kappa_cav", kappa, DL),
                num("kappa_cav_literal", kappa_literal, DL),
                num("xi", xi_after_qnd(kappa, eta_cav), DL),
                num("xi_min", xi_min, DL),
                num("xi_min_db", xi_to_db(xi_min), "dB"),
                num("xi_min_from_cooperativity", xi_min_cavity(coop.cooperativity, 1.0), DL),
                num("clock_precision", (xi_min / n).sqrt(), "rad"),
                num(
                    "clock_precision_sigma_form",
                    cavity_clock_precision(n, sigma_over_a, f),
                    "rad",
                ),
                num(
                    "clock_precision_printed",
                    cavity_clock_precision_printed(n, sigma_over_a, f),
                    "rad",
                ),
                num("sigma_f_over_a", sigma_over_a * f, DL),
                Quantity::flag("hp_valid", hp_validity(sigma_over_a, f)),
                Quantity::flag("small_loss_regime", resonator.small_loss_regime()),
            ]);
            if let Some(dd) = d_delta {
                let t = cavity_transmission(&resonator, dd).map_err(&err)?;
                outputs.push(num("transmission_exact", t.exact, DL));
                outputs.push(num("transmission_first_order", t.first_order, DL));
            }
        }
        Built::Chain {
            config,
            total_transmission,
            free,
            settings,
        } => {
            let err = runtime("chain");
            let m = config.len();
            let last = config.clocks[m - 1];
            let r = config.segments[0].r;
            let snr = chain_snr(&config);
            let single = snr_term(last.d, last.n_atoms as f64, last.finesse, last.eta, 0.0);
            let precision = chain_precision(m, r, last.d, last.n_atoms, last.finesse).map_err(&err)?;
            outputs.extend([
                num("m", m as f64, "clocks"),
                num("hop_exponent", r, DL),
                num("snr", snr, DL),
                num("single_clock_snr", single, DL),
                num("improvement", snr / single, DL),
                num(
                    "improvement_closed_form",
                    chain_improvement(m, total_transmission, config.convention).map_err(&err)?,
                    DL,
                ),
                num("precision", 1.0 / snr, "rad"),
                num("precision_optimal_eta", precision.exact, "rad"),
                num("precision_asymptotic", precision.asymptotic, "rad"),
                num("asymptotic_relative_difference", precision.relative_difference, DL),
                Quantity::flag(
                    "asymptotic_reliable",
                    precision.relative_difference <= tol.chain_asymptotic,
                ),
                num("hp_violations", config.hp_violations().len() as f64, "clocks"),
            ]);
            let mut table_cfg = config.clone();
            if let Some(free) = free {
                let opt = optimize_chain(&config, free, &settings).map_err(&err)?;
                outputs.extend([
                    num("optimized_snr", opt.snr, DL),
                    num("optimized_improvement", opt.snr / single, DL),
                    num("optimizer_sweeps", opt.sweeps as f64, "count"),
                    Quantity::flag("optimizer_converged", opt.converged),
                ]);
                table_cfg = opt.config;
            }
            let mut s = Series::new(&[
                ("index", "clocks"),
                ("r", DL),
                ("finesse", DL),
                ("eta", DL),
                ("snr_term", DL),
            ]);
            for row in per_clock_table(&table_cfg) {
                s.rows
                    .push(vec![row.index as f64, row.r, row.finesse, row.eta, row.snr_term]);
            }
            series = Some(s);
        }
        Built::Sequence {
            config,
            scan,
            stark_check,
        } => {
            let err = runtime("sequence");
            let run = run_sequence(&config).map_err(&err)?;
            let sm = &run.summary;
            outputs.extend([
                num("shots", sm.shots as f64, "count"),
                num("aborted_shots", sm.aborted_shots as f64, "count"),
                num("kappa_per_pulse", sm.kappa_per_pulse, DL),
                num("eta_per_pulse", sm.eta_per_pulse, DL),
                num("mean", sm.mean, "rad"),
                num("std", sm.std_dev, "rad"),
                num("std_error_mean", sm.std_error_mean, "rad"),
                num("std_error_std", sm.std_error_std, "rad"),
                num("xi_predicted", sm.xi_predicted, DL),
                num("xi_measured", sm.xi_measured, DL),
                num("predicted_std", sm.predicted_std, "rad"),
                num("css_std", sm.css_std, "rad"),
            ]);
            if let Some(msg) = &sm.first_abort {
                outputs.push(Quantity::text("first_abort", msg.clone()));
            }
            if stark_check {
                let c = stark_cancellation_check(&config).map_err(&err)?;
                outputs.extend([
                    num("stark_residual", c.residual_mean_shift, "rad"),
                    num("stark_residual_std_error", c.residual_std_error, "rad"),
                    num("stark_same_sign_shift", c.same_sign_shift, "rad"),
                    num("stark_same_sign_std_error", c.same_sign_std_error, "rad"),
                    num("stark_per_probe_model", c.per_sign_shift, "rad"),
                ]);
            }
            if let Some((n_list, scaling)) = scan {
                let scan = precision_scan(&config, &n_list, scaling).map_err(&err)?;
                outputs.extend([
                    num("scan_slope", scan.fit.slope, DL),
                    num("scan_r_squared", scan.fit.r_squared, DL),
                ]);
                let mut s = Series::new(&[
                    ("n_atoms", "atoms"),
                    ("measured", "rad"),
                    ("measured_std_error", "rad"),
                    ("predicted", "rad"),
                    ("heisenberg", "rad"),
                ]);
                for r in scan.rows {
                    s.rows.push(vec![
                        r.n_atoms as f64,
                        r.measured,
                        r.measured_std_error,
                        r.predicted,
                        r.heisenberg,
                    ]);
                }
                series = Some(s);
            } else {
                let mut s = Series::new(&[
                    ("index", "count"),
                    ("n_atoms", "atoms"),
                    ("qnd1_outcome", DL),
                    ("qnd2_outcome", DL),
                    ("final_population_signal", "atoms"),
                    ("estimator", "rad"),
                ]);
                for r in &run.records {
                    s.rows.push(vec![
                        r.index as f64,
                        r.n_atoms as f64,
                        r.qnd1_outcome,
                        r.qnd2_outcome,
                        r.final_population_signal,
                        r.estimator,
                    ]);
                }
                series = Some(s);
            }
        }
        Built::Epr { j_len, rates, evolve } => {
            let err = runtime("epr");
            let state = steady_state(&rates, j_len).map_err(&err)?;
            let c = epr_criterion(&state).map_err(&err)?;
            outputs.extend([
                num("j_len", j_len, DL),
                num("criterion", c.value, DL),
                num("bound", c.bound, DL),
                Quantity::flag("entangled", c.entangled),
                Quantity::flag("matched", rates.is_matched()),
                num("single_party_variance_1", single_party_variance(&state, Party::One), DL),
                num("single_party_variance_2", single_party_variance(&state, Party::Two), DL),
                num(
                    "lyapunov_residual",
                    lyapunov_residual(&rates, &state).map_err(&err)?,
                    DL,
                ),
            ]);
            if rates.is_matched() && rates.extra_loss == 0.0 {
                outputs.push(num(
                    "criterion_closed_form",
                    matched_criterion(j_len, rates.mu1, rates.nu1),
                    DL,
                ));
            }
            if let Some((dt, steps)) = evolve {
                let mut s = Series::new(&[("t", "s"), ("criterion", DL), ("distance_to_steady", DL)]);
                let mut cur = EprState::coherent_pair(j_len).map_err(&err)?;
                for k in 1..=steps {
                    cur = epr::evolve(&cur, &rates, dt).map_err(&err)?;
                    let v = epr_criterion(&cur).map_err(&err)?.value;
                    s.rows.push(vec![k as f64 * dt, v, (cur.cov4 - state.cov4).norm()]);
                }
                series = Some(s);
            }
        }
        Built::Protocol {
            state,
            rates,
            settings,
            trials,
        } => {
            let err = runtime("protocol");
            let c = epr_criterion(&state).map_err(&err)?;
            let t = secret_time_protocol(&state, &settings).map_err(&err)?;
            let sm = t.summary;
            outputs.extend([
                num("criterion", c.value, DL),
                Quantity::flag("matched", rates.is_matched()),
                num("rounds", sm.rounds as f64, "count"),
                num("sifted_rounds", sm.sifted_rounds as f64, "count"),
                num("sift_fraction", sm.sift_fraction, DL),
                num("joint_variance", sm.joint_variance, DL),
                num("expected_variance", sm.expected_variance, DL),
                num("single_party_variance", sm.single_party_variance, DL),
                num("chi2_statistic", sm.chi2_statistic, DL),
                num("p_value", sm.p_value, DL),
                num("alpha", sm.alpha, DL),
                Quantity::flag("eavesdrop_flag", sm.eavesdrop_flag),
            ]);
            if trials > 1 {
                let st = protocol_trials(&state, &settings, trials).map_err(&err)?;
                outputs.extend([
                    num("trials", st.trials as f64, "count"),
                    num("flag_rate", st.flag_rate, DL),
                    num("mean_sift_fraction", st.mean_sift_fraction, DL),
                    num("mean_joint_variance", st.mean_joint_variance, DL),
                ]);
            }
            let mut s = Series::new(&[
                ("index", "count"),
                ("choice1", "bit"),
                ("choice2", "bit"),
                ("outcome1", DL),
                ("outcome2", DL),
                ("sifted", "boolean"),
                ("attacked", "boolean"),
            ]);
            for r in &t.rounds {
                s.rows.push(vec![
                    r.index as f64,
                    r.choice1 as f64,
                    r.choice2 as f64,
                    r.outcome1,
                    r.outcome2,
                    r.sifted as u8 as f64,
                    r.attacked as u8 as f64,
                ]);
            }
            series = Some(s);
            let mut jsonl = Vec::new();
            t.write_jsonl(&mut jsonl)
                .map_err(|e| ScenarioError::Io(e.to_string()))?;
            extra.push((
                "rounds.jsonl".to_string(),
                String::from_utf8(jsonl).expect("JSON is UTF-8"),
            ));
        }
    }
    Ok(PointOutput { outputs, series, extra })
}

/// Runs the scenario (every sweep point, if any) and returns the record plus
/// extra artifacts as `(file suffix, contents)`.
pub fn run(cfg: &ScenarioConfig) -> ScenarioResult<(ResultRecord, Vec<(String, String)>)> {
    cfg.validate()?;
    let point = match &cfg.sweep {
        None => run_point(cfg)?,
        Some(sweep) => {
            let mut series: Option<Series> = None;
            for v in sweep.values() {
                let p = run_point(&apply_sweep(cfg, &sweep.parameter, v)?)?;
                let numeric: Vec<&Quantity> = p.outputs.iter().filter(|q| q.value.as_f64().is_some()).collect();
                let s = series.get_or_insert_with(|| {
                    let mut s = Series::new(&[(sweep.parameter.as_str(), parameter_unit(&sweep.parameter))]);
                    s.columns.extend(numeric.iter().map(|q| super::Column {
                        name: q.name.clone(),
                        unit: q.unit.clone(),
                    }));
                    s
                });
                let mut row = vec![v];
                row.extend(numeric.iter().map(|q| q.value.as_f64().expect("filtered")));
                if row.len() != s.columns.len() {
                    return Err(ScenarioError::Runtime {
                        context: "sweep".into(),
                        source: Error::Unphysical(format!("output set changed at {} = {v}", sweep.parameter)),
                    });
                }
                s.rows.push(row);
            }
            PointOutput {
                outputs: vec![
                    Quantity::text("sweep_parameter", sweep.parameter.clone()),
                    num("sweep_points", sweep.values().len() as f64, "count"),
                ],
                series,
                extra: Vec::new(),
            }
        }
    };
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        tool_version: tool_version(),
        scenario_hash: cfg.hash(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        mode: cfg.mode.name().to_string(),
        seed: cfg.seed,
        outputs: point.outputs,
        series: point.series,
    };
    Ok((record, point.extra))
}

/// Runs the scenario and writes its files into `dir`.
pub fn run_to_dir(
    cfg: &ScenarioConfig,
    dir: &Path,
    format: OutputFormat,
) -> ScenarioResult<(ResultRecord, WrittenFiles)> {
    let (record, extra) = run(cfg)?;
    let files = write_outputs(&record, &extra, dir, &cfg.stem(), format)?;
    Ok((record, files))
}
