use super::*;

fn chain_preset(m: usize) -> ScenarioConfig {
    preset(&format!("paper-chain-{m}")).unwrap()
}

#[test]
fn minimal_squeeze_fills_defaults() {
    let cfg = parse_scenario_str("mode = \"squeeze\"\n[squeeze]\nn_atoms = 1000\nd = 100\n").unwrap();
    let s = cfg.squeeze.unwrap();
    assert_eq!(s.eta, 0.5);
    assert_eq!(s.probe, default_probe());
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.tolerances, Tolerances::default());
    let (rec, _) = run(&cfg).unwrap();
    let xi = rec.number("xi").unwrap();
    assert!((xi - crate::optics::xi_after_qnd((0.5f64 * 100.0 * (-0.5f64).exp()).sqrt(), 0.5)).abs() < 1e-15);
    assert_eq!(rec.mode, "squeeze");
    assert_eq!(rec.schema_version, SCHEMA_VERSION);
}

#[test]
fn negative_count_is_a_validation_error() {
    let err = parse_scenario_str("mode = \"squeeze\"\n[squeeze]\nn_atoms = -5\nd = 1\n").unwrap_err();
    match &err {
        ScenarioError::Validation { key, .. } => assert!(key.contains("n_atoms"), "{key}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn parse_errors_carry_position() {
    let err = parse_scenario_str("mode = \"chain\"\n[chain]\nm = = 4\n").unwrap_err();
    match err {
        ScenarioError::Parse { line, column, .. } => {
            assert_eq!(line, 3);
            assert!(column >= 5, "column {column}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_keys_and_foreign_sections_are_rejected() {
    let err = parse_scenario_str("mode = \"squeeze\"\n[squeeze]\nn_atoms = 10\nd = 1\nfinnesse = 3\n").unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = parse_scenario_str("mode = \"squeeze\"\n[squeeze]\nn_atoms = 10\nd = 1\n[epr]\nn_atoms = 2\nrates = { mu1 = 1, mu2 = 1, nu1 = 2, nu2 = 2 }\n")
        .unwrap_err();
    assert!(matches!(err, ScenarioError::Validation { ref key, .. } if key == "epr"));
    let err = parse_scenario_str("mode = \"cavity\"\n").unwrap_err();
    assert!(matches!(err, ScenarioError::Validation { ref key, .. } if key == "cavity"));
}

#[test]
fn bad_sweep_parameter_is_rejected() {
    let mut cfg = chain_preset(4);
    cfg.sweep = Some(SweepSpec {
        parameter: "gamma".into(),
        start: 1.0,
        stop: 2.0,
        steps: 3,
        scale: SweepScale::Linear,
    });
    let err = cfg.validate().unwrap_err();
    assert!(matches!(err, ScenarioError::Validation { ref key, .. } if key == "sweep.parameter"));
}

#[test]
fn canonical_form_round_trips() {
    for name in preset_names() {
        let cfg = preset(name).unwrap();
        let text = cfg.to_toml();
        let again = parse_scenario_str(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), text);
        assert_eq!(again.hash(), cfg.hash());
    }
}

#[test]
#[allow(clippy::approx_constant)] // 3.14 is the chain figure
fn chain_preset_improvement() {
    let (rec, _) = run(&chain_preset(4)).unwrap();
    let imp = rec.number("improvement").unwrap();
    let r = 2f64.ln() / 4.0;
    let oracle: f64 = (0..4).map(|k| (-(k as f64) * r).exp()).sum();
    assert!((imp - oracle).abs() < 1e-12);
    assert!((imp - 3.14).abs() < 0.005, "{imp}");
    assert!((rec.number("improvement_closed_form").unwrap() - oracle).abs() < 1e-12);
    assert_eq!(rec.series.as_ref().unwrap().rows.len(), 4);
}

#[test]
fn chain_sweep_over_m_is_monotone() {
    let mut cfg = chain_preset(4);
    cfg.sweep = Some(SweepSpec {
        parameter: "m".into(),
        start: 1.0,
        stop: 8.0,
        steps: 8,
        scale: SweepScale::Linear,
    });
    let (rec, _) = run(&cfg).unwrap();
    let s = rec.series.unwrap();
    assert_eq!(s.columns[0].name, "m");
    let imp = s.column("improvement").unwrap();
    assert_eq!(imp.len(), 8);
    assert!((imp[0] - 1.0).abs() < 1e-12);
    assert!(imp.windows(2).all(|w| w[1] > w[0]));
    assert!((imp[7] - 6.03).abs() < 0.01, "{}", imp[7]);
}

#[test]
fn epr_ratio_sweep_matches_closed_form() {
    let cfg = parse_scenario_str(
        "mode = \"epr\"\n[epr]\nn_atoms = 2000\nrates = { mu1 = 1, mu2 = 1, nu1 = 2, nu2 = 2 }\n\
         [sweep]\nparameter = \"mu_over_nu\"\nstart = 0.05\nstop = 0.95\nsteps = 10\n",
    )
    .unwrap();
    let (rec, _) = run(&cfg).unwrap();
    let s = rec.series.unwrap();
    let ratio = s.column("mu_over_nu").unwrap();
    let crit = s.column("criterion").unwrap();
    for (x, c) in ratio.iter().zip(&crit) {
        let expected = 2.0 * 1000.0 * (1.0 - x) / (1.0 + x);
        assert!((c - expected).abs() <= 1e-8 * expected, "{x}: {c} vs {expected}");
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let text = "mode = \"protocol\"\nseed = 11\n[protocol]\nn_atoms = 1000\n\
                rates = { mu1 = 1, mu2 = 1, nu1 = 3, nu2 = 3 }\nlimit = { kind = \"total\", count = 500 }\n";
    let cfg = parse_scenario_str(text).unwrap();
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(
        a.0.series.as_ref().unwrap().to_csv(),
        b.0.series.as_ref().unwrap().to_csv()
    );
    assert_eq!(a.1, b.1);
    assert_eq!(a.1[0].0, "rounds.jsonl");
}

#[test]
fn csv_values_parse_back_exactly() {
    let cfg =
        parse_scenario_str("mode = \"sequence\"\nseed = 3\n[sequence]\nn_atoms = 1000\nshots = 200\ntotal_eta = 0.5\n")
            .unwrap();
    let (rec, _) = run(&cfg).unwrap();
    let s = rec.series.unwrap();
    let csv = s.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), s.columns.len());
    for (line, row) in lines.zip(&s.rows) {
        let parsed: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&parsed, row);
    }
}

#[test]
fn files_are_written_atomically_to_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_preset(8);
    let (rec, files) = run_to_dir(&cfg, dir.path(), OutputFormat::Both).unwrap();
    let json = std::fs::read_to_string(files.json.unwrap()).unwrap();
    let back: ResultRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rec);
    assert!(files.csv.unwrap().ends_with("paper-chain-8.csv"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn cavity_preset_reports_cooperativity() {
    let (rec, _) = run(&preset("paper-cavity-sr").unwrap()).unwrap();
    let c = rec.number("cooperativity").unwrap();
    assert!((c - 500e3f64.powi(2) / (29e3 * 7e3)).abs() < 1e-9);
    assert_eq!(rec.get("cooperativity_consistent"), Some(&Value::Flag(true)));
    assert!((rec.number("d_times_finesse").unwrap() - 1200.0).abs() < 1e-6);
}
