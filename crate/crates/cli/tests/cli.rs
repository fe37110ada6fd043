use std::path::Path;
use std::process::{Command, Output};

fn clocknet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clocknet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CLOCKNET_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const PROTOCOL: &str = "mode = \"protocol\"\nseed = 5\n[protocol]\nn_atoms = 1000\n\
rates = { mu1 = 1, mu2 = 1, nu1 = 3, nu2 = 3 }\nlimit = { kind = \"total\", count = 400 }\n";

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = clocknet(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["paper-chain-4", "paper-chain-8", "paper-cavity-sr"] {
        assert!(text.lines().any(|l| l == name), "{text}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let parse = write(d, "parse.toml", "mode = \"chain\"\n[chain\n");
    let unknown = write(
        d,
        "unknown.toml",
        "mode = \"squeeze\"\n[squeeze]\nn_atoms = 10\nd = 1\ntypo = 1\n",
    );
    let invalid = write(
        d,
        "invalid.toml",
        "mode = \"squeeze\"\n[squeeze]\nn_atoms = -1\nd = 1\n",
    );
    let ok = write(d, "ok.toml", "mode = \"squeeze\"\n[squeeze]\nn_atoms = 1000\nd = 10\n");

    assert_eq!(clocknet(&["validate", &parse], d).status.code(), Some(2));
    assert_eq!(clocknet(&["validate", &unknown], d).status.code(), Some(2));
    assert_eq!(clocknet(&["validate", "missing.toml"], d).status.code(), Some(2));
    let out = clocknet(&["validate", &invalid], d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_atoms"));
    assert_eq!(clocknet(&["validate", &ok], d).status.code(), Some(0));

    // an output path that is a regular file cannot be used as a directory
    let blocker = write(d, "blocker", "");
    let out = clocknet(&["run", &ok, "--out", &blocker], d);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn same_seed_gives_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let file = write(d, "p.toml", PROTOCOL);
    for sub in ["a", "b"] {
        let out = clocknet(&["run", &file, "--out", sub, "--format", "csv"], d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(d.join("a/protocol.csv")).unwrap();
    let b = std::fs::read(d.join("b/protocol.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!d.join("a/protocol.json").exists());
    assert!(d.join("a/protocol.rounds.jsonl").exists());

    let out = clocknet(&["run", &file, "--out", "c", "--seed", "6", "--format", "csv"], d);
    assert!(out.status.success());
    assert_ne!(a, std::fs::read(d.join("c/protocol.csv")).unwrap());
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let status = Command::new(env!("CARGO_BIN_EXE_clocknet"))
        .args(["run", "paper-chain-4", "--format", "json"])
        .current_dir(d)
        .env("CLOCKNET_OUT_DIR", d.join("env"))
        .status()
        .unwrap();
    assert!(status.success());
    let json = std::fs::read_to_string(d.join("env/paper-chain-4.json")).unwrap();
    assert!(json.contains("\"schema_version\": 1"));
    assert!(json.contains("\"improvement\""));

    let out = clocknet(&["run", "paper-chain-8", "--out", "flag"], d);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(d.join("flag/paper-chain-8.csv")).unwrap();
    assert!(csv.starts_with("index,r,finesse,eta,snr_term\n"));
    assert_eq!(csv.lines().count(), 9);
    assert!(!csv.contains('\r'));
}
