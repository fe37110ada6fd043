use super::*;
use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

/// Two truncated oscillators, `n <= CUTOFF - 1` each.
const CUTOFF: usize = 9;

struct Fock {
    x: [DMatrix<C>; 4],
    b1: DMatrix<C>,
    b2: DMatrix<C>,
}

impl Fock {
    fn new() -> Self {
        let mut a = DMatrix::<C>::zeros(CUTOFF, CUTOFF);
        for n in 1..CUTOFF {
            a[(n - 1, n)] = C::new((n as f64).sqrt(), 0.0);
        }
        let id = DMatrix::<C>::identity(CUTOFF, CUTOFF);
        let b1 = a.kronecker(&id);
        let b2 = id.kronecker(&a);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let quad = |b: &DMatrix<C>| {
            let bd = b.adjoint();
            ((b + &bd) * C::new(s, 0.0), (b - &bd) * C::new(0.0, -s))
        };
        let (x1, p1) = quad(&b1);
        let (x2, p2) = quad(&b2);
        Self {
            x: [x1, p1, x2, p2],
            b1,
            b2,
        }
    }

    fn jumps(&self, r: &CouplingRates) -> Vec<DMatrix<C>> {
        let c = |v: f64| C::new(v, 0.0);
        let mut out = vec![
            self.b1.adjoint() * c(r.mu1) + &self.b2 * c(r.nu2),
            self.b2.adjoint() * c(r.mu2) + &self.b1 * c(r.nu1),
        ];
        if r.extra_loss > 0.0 {
            out.push(&self.b1 * c(r.extra_loss.sqrt()));
            out.push(&self.b2 * c(r.extra_loss.sqrt()));
        }
        out
    }

    /// `d<O>/dt = sum_k <L^dag O L - {L^dag L, O}/2>`.
    fn rate(&self, rho: &DMatrix<C>, jumps: &[DMatrix<C>], o: &DMatrix<C>) -> f64 {
        jumps
            .iter()
            .map(|l| {
                let ld = l.adjoint();
                let ll = &ld * l;
                let gen = &ld * o * l - (&ll * o + o * &ll) * C::new(0.5, 0.0);
                (rho * gen).trace().re
            })
            .sum()
    }

    fn expect(rho: &DMatrix<C>, o: &DMatrix<C>) -> f64 {
        (rho * o).trace().re
    }

    /// Random mixed state supported on `n1, n2 <= 2`.
    fn random_state(seed: u64) -> DMatrix<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = CUTOFF * CUTOFF;
        let mut rho = DMatrix::<C>::zeros(dim, dim);
        for _ in 0..3 {
            let mut psi = DMatrix::<C>::zeros(dim, 1);
            for n1 in 0..3 {
                for n2 in 0..3 {
                    psi[(n1 * CUTOFF + n2, 0)] = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            rho += &psi * psi.adjoint() * C::new(rng.random::<f64>(), 0.0);
        }
        let tr = rho.trace();
        rho / tr
    }
}

/// Checks `dm/dt = A m` and `dSigma/dt = A Sigma + Sigma A^T + D` against the
/// exact moment equations of the master equation.
fn check_against_fock(rates: CouplingRates, seed: u64) {
    let f = Fock::new();
    let rho = Fock::random_state(seed);
    let jumps = f.jumps(&rates);
    let dd = linear_dynamics(&rates).unwrap();

    let m = Vector4::from_fn(|i, _| Fock::expect(&rho, &f.x[i]));
    let dm = Vector4::from_fn(|i, _| f.rate(&rho, &jumps, &f.x[i]));
    let sym = |i: usize, j: usize| (&f.x[i] * &f.x[j] + &f.x[j] * &f.x[i]) * C::new(0.5, 0.0);
    let cov = Matrix4::from_fn(|i, j| Fock::expect(&rho, &sym(i, j)) - m[i] * m[j]);
    let dcov = Matrix4::from_fn(|i, j| f.rate(&rho, &jumps, &sym(i, j)) - dm[i] * m[j] - m[i] * dm[j]);

    let scale = dd.drift.norm() + dd.diffusion.norm();
    assert!((dm - dd.drift * m).norm() < 1e-10 * scale, "mean");
    assert!((dcov - dd.rhs(&cov)).norm() < 1e-10 * scale, "{dcov}\n{}", dd.rhs(&cov));
}

#[test]
fn drift_diffusion_matches_fock_space_dynamics() {
    check_against_fock(CouplingRates::matched(0.4, 1.1, 0.0), 1);
    check_against_fock(
        CouplingRates {
            mu1: 0.3,
            mu2: 0.7,
            nu1: 1.3,
            nu2: 0.9,
            extra_loss: 0.25,
        },
        2,
    );
    check_against_fock(CouplingRates::matched(0.0, 1.0, 0.0), 3);
}

#[test]
fn single_mode_damping_and_gain() {
    // nu only: each mode damps at nu^2/2 toward vacuum
    let dd = linear_dynamics(&CouplingRates::matched(0.0, 2.0, 0.0)).unwrap();
    assert_relative_eq!(dd.drift, Matrix4::identity() * -2.0, epsilon = 1e-14);
    assert_relative_eq!(dd.diffusion, Matrix4::identity() * 2.0, epsilon = 1e-14);
    // mu only: pure gain
    let dd = linear_dynamics(&CouplingRates::matched(2.0, 0.0, 0.0)).unwrap();
    assert_relative_eq!(dd.drift, Matrix4::identity() * 2.0, epsilon = 1e-14);
}

#[test]
fn coherent_pair_sits_on_the_bound() {
    let s = EprState::coherent_pair(500.0).unwrap();
    let c = epr_criterion(&s).unwrap();
    assert_eq!(c.value, 1000.0);
    assert!(!c.entangled);
}

#[test]
fn two_mode_squeezed_criterion() {
    for r in [0.1, 0.5, 1.0, 2.0] {
        let s = EprState::two_mode_squeezed(250.0, r).unwrap();
        let c = epr_criterion(&s).unwrap();
        assert_relative_eq!(c.value, 500.0 * (-2.0 * r).exp(), max_relative = 1e-12);
        assert!(c.entangled);
        assert!(s.physicality_margin() > -1e-12);
    }
}

#[test]
fn thermal_side_is_not_entangled() {
    let cov = Matrix4::from_diagonal(&Vector4::new(0.5, 0.5, 1e6, 1e6));
    let c = epr_criterion(&EprState::new(10.0, cov, Vector4::zeros()).unwrap()).unwrap();
    assert!(!c.entangled);
}

#[test]
fn rejects_invalid_states() {
    let squeezed_too_far = Matrix4::from_diagonal(&Vector4::new(0.1, 0.5, 0.5, 0.5));
    assert!(EprState::new(1.0, squeezed_too_far, Vector4::zeros()).is_err());
    let s = EprState {
        cov4: Matrix4::identity() * 0.5,
        mean4: Vector4::zeros(),
        j_len: 0.0,
    };
    assert_eq!(epr_criterion(&s), Err(Error::ZeroSpinLength));
}

#[test]
fn single_party_noise() {
    let s = EprState::two_mode_squeezed(1.0, 0.0).unwrap();
    assert_eq!(single_party_variance(&s, Party::One), 0.5);
    let s = EprState::two_mode_squeezed(1.0, 1.0).unwrap();
    assert_relative_eq!(
        single_party_variance(&s, Party::Two),
        2f64.cosh() / 2.0,
        max_relative = 1e-14
    );
    assert!((single_party_variance(&s, Party::One) - 1.881).abs() < 1e-3);

    let mut last = (0.0, f64::INFINITY);
    for k in 0..20 {
        let s = EprState::two_mode_squeezed(1.0, 0.1 * k as f64).unwrap();
        let now = (single_party_variance(&s, Party::One), epr_criterion(&s).unwrap().value);
        if k > 0 {
            assert!(now.0 > last.0 && now.1 < last.1);
        }
        last = now;
    }
}

#[test]
fn no_gain_relaxes_to_vacuum() {
    let s = steady_state(&CouplingRates::matched(0.0, 1.0, 0.0), 100.0).unwrap();
    assert_relative_eq!(s.cov4, Matrix4::identity() * 0.5, epsilon = 1e-13);
    assert_relative_eq!(epr_criterion(&s).unwrap().value, 200.0, max_relative = 1e-12);
}

#[test]
fn unstable_drift_is_reported() {
    for rates in [
        CouplingRates::matched(1.0, 0.0, 0.0),
        CouplingRates::matched(1.0, 1.0, 0.0),
    ] {
        assert!(matches!(drift_diffusion(&rates), Err(Error::UnstableDrift { .. })));
        assert!(steady_state(&rates, 1.0).is_err());
    }
    // loss can stabilize weak gain
    assert!(steady_state(&CouplingRates::matched(1.0, 1.0, 0.5), 1.0).is_ok());
}

#[test]
fn matched_steady_state_is_two_mode_squeezed() {
    for k in 0..=19 {
        let ratio = 0.05 * k as f64;
        let rates = CouplingRates::matched(ratio * 2.0, 2.0, 0.0);
        let s = steady_state(&rates, 500.0).unwrap();
        let r = ratio.atanh();
        assert!((s.cov4 - two_mode_squeezed_cov(r)).norm() < 1e-10 * (2.0 * r).cosh());
        let c = epr_criterion(&s).unwrap();
        assert!((c.value - matched_criterion(500.0, ratio * 2.0, 2.0)).abs() < 1e-8 * 1000.0);
        assert!(lyapunov_residual(&rates, &s).unwrap() < 1e-10);
    }
    let s = steady_state(&CouplingRates::matched(1.0, 3.0, 0.0), 7.0).unwrap();
    assert_relative_eq!(epr_criterion(&s).unwrap().value, 7.0, max_relative = 1e-12);
}

#[test]
fn heavy_loss_washes_out_entanglement() {
    let mut last = 0.0;
    for loss in [0.0, 1.0, 10.0, 1e3, 1e6] {
        let s = steady_state(&CouplingRates::matched(1.0, 3.0, loss), 1.0).unwrap();
        let v = epr_criterion(&s).unwrap().value;
        assert!(v > last && v < 2.0);
        last = v;
    }
    assert!((2.0 - last) < 1e-5);
}

#[test]
fn evolution_converges_to_steady_state() {
    for ratio in [0.0, 0.5, 0.9] {
        let rates = CouplingRates::matched(ratio, 1.0, 0.0);
        let target = steady_state(&rates, 10.0).unwrap();
        let mut s = EprState::coherent_pair(10.0).unwrap();
        let rate = (1.0 - ratio * ratio) / 2.0;
        let dt = 0.05;
        let steps = (40.0 / (rate * dt)) as usize;
        for _ in 0..steps {
            s = evolve(&s, &rates, dt).unwrap();
            assert!(s.is_physical(PHYSICALITY_TOLERANCE));
        }
        assert!(
            (s.cov4 - target.cov4).norm() < 1e-8,
            "{ratio}: {}",
            (s.cov4 - target.cov4).norm()
        );
    }
}

#[test]
fn tiny_step_is_identity() {
    let rates = CouplingRates::matched(0.3, 1.0, 0.1);
    let s = EprState::two_mode_squeezed(1.0, 0.4).unwrap();
    let next = evolve(&s, &rates, 1e-14).unwrap();
    assert!((next.cov4 - s.cov4).norm() < 1e-12);
}

#[test]
fn heun_local_error_is_third_order() {
    let rates = CouplingRates {
        mu1: 0.2,
        mu2: 0.4,
        nu1: 1.0,
        nu2: 1.2,
        extra_loss: 0.1,
    };
    let s = EprState::coherent_pair(1.0).unwrap();
    let gap = |dt: f64| {
        let full = evolve(&s, &rates, dt).unwrap();
        let half = evolve(&evolve(&s, &rates, dt / 2.0).unwrap(), &rates, dt / 2.0).unwrap();
        (full.cov4 - half.cov4).norm()
    };
    let ratio = gap(0.1) / gap(0.05);
    assert!((ratio - 8.0).abs() < 0.5, "{ratio}");
}

#[test]
fn oversized_steps_are_subdivided() {
    let rates = CouplingRates::matched(0.5, 1.0, 0.0);
    let target = steady_state(&rates, 1.0).unwrap();
    let s = evolve_for(&EprState::coherent_pair(1.0).unwrap(), &rates, 50.0, 4).unwrap();
    assert!((s.cov4 - target.cov4).norm() < 1e-8);
}

#[test]
fn mean_decays_with_drift() {
    let rates = CouplingRates::matched(0.0, 1.0, 0.0);
    let mut s = EprState::coherent_pair(1.0).unwrap();
    s.mean4 = Vector4::new(1.0, -2.0, 0.5, 0.0);
    let t = evolve_for(&s, &rates, 0.01, 100).unwrap();
    assert_relative_eq!(t.mean4, s.mean4 * (-0.5f64).exp(), max_relative = 1e-5);
}

proptest! {
    #[test]
    fn mismatch_degrades_criterion(
        mu in 0.05f64..0.8,
        dmu in 0.01f64..0.2,
        dnu in 0.0f64..0.2,
    ) {
        let nu = 1.0;
        let matched = steady_state(&CouplingRates::matched(mu, nu, 0.0), 1.0).unwrap();
        let rates = CouplingRates {
            mu1: mu + dmu,
            mu2: (mu - dmu).max(0.0),
            nu1: nu + dnu,
            nu2: nu - dnu,
            extra_loss: 0.0,
        };
        prop_assume!(rates.mu1 + rates.mu2 == 2.0 * mu);
        if let Ok(s) = steady_state(&rates, 1.0) {
            let a = epr_criterion(&matched).unwrap().value;
            let b = epr_criterion(&s).unwrap().value;
            prop_assert!(b > a, "matched {a}, mismatched {b}");
        }
    }

    #[test]
    fn evolution_stays_physical(
        mu in 0.0f64..0.9,
        loss in 0.0f64..1.0,
        dt in 0.01f64..5.0,
    ) {
        let rates = CouplingRates::matched(mu, 1.0, loss);
        let mut s = EprState::coherent_pair(1.0).unwrap();
        for _ in 0..20 {
            s = evolve(&s, &rates, dt).unwrap();
            prop_assert!(s.is_physical(PHYSICALITY_TOLERANCE));
        }
    }
}

mod protocol {
    use super::*;

    fn state() -> EprState {
        steady_state(&CouplingRates::matched(1.0, 3.0, 0.0), 500.0).unwrap()
    }

    #[test]
    fn clean_run_is_below_projection_noise() {
        let s = state();
        let t = secret_time_protocol(&s, &ProtocolSettings::new(RoundLimit::Total(20_000), 3)).unwrap();
        let sm = t.summary;
        assert!((sm.sift_fraction - 0.5).abs() < 0.02);
        assert_relative_eq!(
            sm.expected_variance,
            epr_criterion(&s).unwrap().value / 1000.0,
            max_relative = 1e-10
        );
        assert!((sm.joint_variance - 0.5).abs() < 0.03, "{sm:?}");
        // alone, each owner sees the thermal marginal
        assert!((sm.single_party_variance - single_party_variance(&s, Party::One)).abs() < 0.05);
        for r in &t.rounds {
            assert_eq!(r.sifted, r.choice1 == r.choice2);
        }
    }

    #[test]
    fn sifted_limit_and_transcript() {
        let t = secret_time_protocol(&state(), &ProtocolSettings::new(RoundLimit::Sifted(1000), 9)).unwrap();
        assert_eq!(t.summary.sifted_rounds, 1000);
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), t.rounds.len());
        let first: ProtocolRound = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, t.rounds[0]);
    }

    #[test]
    fn intercept_resend_is_detected() {
        let settings = ProtocolSettings {
            eavesdropper: Some(Eavesdropper { fraction: 1.0 }),
            ..ProtocolSettings::new(RoundLimit::Sifted(1000), 5)
        };
        let stats = protocol_trials(&state(), &settings, 200).unwrap();
        assert!(stats.mean_joint_variance >= 1.0, "{stats:?}");
        assert!(stats.flag_rate > 0.99);
    }

    #[test]
    fn false_alarms_follow_alpha() {
        let settings = ProtocolSettings::new(RoundLimit::Sifted(500), 21);
        let stats = protocol_trials(&state(), &settings, 2000).unwrap();
        let sigma = (0.01f64 * 0.99 / 2000.0).sqrt();
        assert!((stats.flag_rate - 0.01).abs() < 3.0 * sigma, "{stats:?}");
    }

    #[test]
    fn same_seed_same_transcript() {
        let settings = ProtocolSettings {
            eavesdropper: Some(Eavesdropper { fraction: 0.3 }),
            ..ProtocolSettings::new(RoundLimit::Total(300), 2)
        };
        let a = secret_time_protocol(&state(), &settings).unwrap();
        let b = secret_time_protocol(&state(), &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_rounds_rejected() {
        let r = secret_time_protocol(&state(), &ProtocolSettings::new(RoundLimit::Total(4), 1));
        assert!(matches!(r, Err(Error::TooFewRounds { .. })));
        let bad = ProtocolSettings {
            alpha: 1.5,
            ..ProtocolSettings::new(RoundLimit::Total(100), 1)
        };
        assert!(secret_time_protocol(&state(), &bad).is_err());
    }
}
