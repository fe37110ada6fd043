//! Built-in scenarios with published parameter values.

use super::{parse_scenario_str, ScenarioConfig};

/// `(name, TOML)` for every preset.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "paper-chain-4",
        r#"mode = "chain"
name = "paper-chain-4"

[chain]
m = 4
total_transmission = 0.5
convention = "total_over_m"
n_atoms = 1000
d = 0.012
finesse = 1e5
eta = 0.5
"#,
    ),
    (
        "paper-chain-8",
        r#"mode = "chain"
name = "paper-chain-8"

[chain]
m = 8
total_transmission = 0.5
convention = "total_over_m"
n_atoms = 1000
d = 0.012
finesse = 1e5
eta = 0.5
"#,
    ),
    (
        "paper-cavity-sr",
        r#"mode = "cavity"
name = "paper-cavity-sr"

[cavity]
n_atoms = 1000
omega_collective = 500e3
gamma = 7e3
sigma_over_a = 1.2e-5
eta_cav = 0.5
"#,
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_scenario_str(text).expect("built-in presets are valid"))
}
