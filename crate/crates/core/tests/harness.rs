use std::collections::BTreeSet;
use std::path::Path;

use mbm_core::harness::config::{parse_config_with, Overrides};
use mbm_core::harness::{mc_ensemble, parse_config, run_experiment, Report, Verdict};
use mbm_core::stats::energy_test_1d;
use mbm_core::Error;

const BASE: &str = r#"
version = 1
seed = 11
replicas = 40
representation = "fbm-exact"

[hurst]
kind = "constant"
params = [0.5]

[grid]
t0 = 0.0
dt = 0.0009765625
n = 1025
"#;

/// `BASE` with `replicas` and `[grid]` replaced when given, then `tail`.
fn doc(replicas: Option<usize>, grid: Option<&str>, tail: &str) -> String {
    let mut s = BASE.to_string();
    if let Some(r) = replicas {
        s = s.replace("replicas = 40", &format!("replicas = {r}"));
    }
    if let Some(g) = grid {
        s = s.replace("t0 = 0.0\ndt = 0.0009765625\nn = 1025", g);
    }
    format!("{s}\n{tail}")
}

fn with(tail: &str) -> String {
    doc(None, None, tail)
}

fn violations(text: &str) -> Vec<(String, String)> {
    match parse_config(text) {
        Err(Error::Config(v)) => v.into_iter().map(|v| (v.path, v.message)).collect(),
        other => panic!("expected config violations, got {other:?}"),
    }
}

fn run_in(dir: &Path, text: &str) -> Report {
    let cfg = parse_config_with(
        text,
        &Overrides {
            output: Some(dir.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap();
    run_experiment(&cfg).unwrap()
}

#[test]
fn minimal_config_parses() {
    let cfg = parse_config(&with("[[statistics]]\nname = \"occupation-identity\"\n")).unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.statistics.len(), 1);
    assert_eq!(cfg.statistics[0].name(), "occupation-identity");
}

#[test]
fn every_violation_is_reported_with_its_path() {
    let text = r#"
version = 1
replicas = 10
colour = "blue"

[grid]
dt = 0.001
n = 11
stride = 2

[[statistics]]
name = "chung"
delta_maximum = 0.1

[[statistics]]
name = "no-such-statistic"
"#;
    let v = violations(text);
    let paths: BTreeSet<&str> = v.iter().map(|(p, _)| p.as_str()).collect();
    for want in ["seed", "colour", "grid.stride", "statistics[0].delta_maximum", "statistics[1].name"] {
        assert!(paths.contains(want), "missing {want} in {v:?}");
    }
}

#[test]
fn holder_condition_is_checked() {
    let text = r#"
version = 1
seed = 1
[hurst]
kind = "linear"
params = [0.3, 0.4]
beta = 0.6
holder_constant = 0.4
"#;
    let v = violations(text);
    assert!(v.iter().any(|(p, m)| p == "hurst.beta" && m.contains("H_beta")), "{v:?}");
}

#[test]
fn scaling_pair_below_h0_is_rejected() {
    let v = violations(&doc(
        Some(200),
        None,
        "[[statistics]]\nname = \"weighted-occupation\"\nt0 = 0.5\na = 0.4\n",
    ));
    assert!(
        v.iter().any(|(p, m)| p == "statistics[0].a" && m.contains("o(1)")),
        "{v:?}"
    );
}

#[test]
fn flags_override_config_values() {
    let cfg = parse_config_with(
        BASE,
        &Overrides {
            seed: Some(99),
            replicas: Some(7),
            output: None,
        },
    )
    .unwrap();
    assert_eq!((cfg.seed, cfg.replicas), (99, 7));
    let missing = BASE.replace("seed = 11\n", "");
    assert!(parse_config(&missing).is_err());
    assert!(parse_config_with(&missing, &Overrides { seed: Some(3), ..Default::default() }).is_ok());
}

#[test]
fn occupation_identity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), &with("[[statistics]]\nname = \"occupation-identity\"\n"));
    assert_eq!(r.exit_code, 0, "{}", r.render());
    assert!(dir.path().join("00-occupation-identity/errors.csv").exists());
}

#[test]
fn wrong_lil_exponent_is_a_statistical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = doc(
        Some(200),
        Some("t0 = 0.0\ndt = 1.52587890625e-6\nn = 65537"),
        "[[statistics]]\nname = \"lil\"\ndelta_max = 0.05\nexponent_shift = 0.2\n",
    );
    let r = run_in(dir.path(), &text);
    assert_eq!(r.statistics[0].verdict, Verdict::Fail, "{}", r.render());
    assert_eq!(r.exit_code, 2);
}

#[test]
fn empty_selection_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), BASE);
    assert_eq!(r.exit_code, 0);
    assert!(r.statistics.is_empty());
    assert_eq!(r.config["seed"], 11);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn failing_statistic_does_not_suppress_others() {
    let dir = tempfile::tempdir().unwrap();
    // the moment window runs past the grid end
    let r = run_in(
        dir.path(),
        &doc(
            Some(100),
            None,
            "[[statistics]]\nname = \"moments\"\nwindow = 5.0\n\n[[statistics]]\nname = \"occupation-identity\"\n",
        ),
    );
    assert_eq!(r.statistics[0].verdict, Verdict::Error);
    assert!(r.statistics[0].error.is_some());
    assert_eq!(r.statistics[1].verdict, Verdict::Pass);
    assert_eq!(r.exit_code, 1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let text = with(
        "[[statistics]]\nname = \"occupation-identity\"\n\n[[statistics]]\nname = \"holder-path\"\ndelta_max = 0.125\n",
    );
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_in(a.path(), &text), run_in(b.path(), &text));
    assert_eq!(ra.deterministic_json().unwrap(), rb.deterministic_json().unwrap());
    for f in ra.statistics.iter().flat_map(|s| &s.files) {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn report_schema_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &with("[[statistics]]\nname = \"occupation-identity\"\n"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let keys = |v: &serde_json::Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(
        keys(&v),
        ["config", "exit_code", "format_version", "runtime", "statistics", "verdict"]
    );
    assert_eq!(v["format_version"], 1);
    assert_eq!(
        keys(&v["statistics"][0]),
        ["error", "failures", "files", "index", "name", "replicas", "summary", "verdict"]
    );
    assert_eq!(
        keys(&v["runtime"]),
        ["elapsed_ms", "output_dir", "started_unix_ms", "threads"]
    );
    assert_eq!(
        keys(&v["config"]),
        [
            "grid",
            "hurst",
            "localtime",
            "replicas",
            "representation",
            "seed",
            "statistics",
            "synthesis",
            "thresholds",
            "version"
        ]
    );
    assert_eq!(v["statistics"][0]["verdict"], "pass");
    let back = Report::read(dir.path()).unwrap();
    assert_eq!(back.format_version, 1);
}

#[test]
fn ensembles_are_reproducible_and_seed_independent_in_law() {
    let cfg = parse_config(&doc(Some(300), None, "")).unwrap();
    let a = mc_ensemble(&cfg).unwrap();
    let b = mc_ensemble(&cfg).unwrap();
    assert_eq!(a.items, b.items);

    let mut other = cfg.clone();
    other.seed = 12;
    let c = mc_ensemble(&other).unwrap();
    let end = |e: &mbm_core::Ensemble<mbm_core::SamplePath>| e.map(|p| *p.values.last().unwrap());
    let t = energy_test_1d(&end(&a), &end(&c), 500, 5).unwrap();
    assert!(t.p_value > 0.01, "p = {}", t.p_value);
}
