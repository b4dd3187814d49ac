use std::fs;
use std::path::Path;
use std::process::Command;

use slipflow::carrier::default_cutoffs;
use slipflow::geometry::ChannelGeometry;
use slipflow_cli::parse_config;

const MINIMAL: &str = "[flow]\nflux = 0.5\n[domain]\nT = 10\nh = 0.25\n";

fn slipflow(command: &str, config: &str, dir: &Path) -> (i32, String) {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_slipflow"))
        .args([command, "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("out/manifest.toml")).unwrap().parse().unwrap()
}

#[test]
fn minimal_config_resolves_cutoffs_by_policy() {
    let c = parse_config(MINIMAL).unwrap();
    let policy = default_cutoffs(&ChannelGeometry::bump(0.2, 1.5, 2.0).unwrap(), 0.25).cutoffs;
    assert_eq!(c.cutoffs.epsilon, policy.epsilon);
    assert_eq!(c.cutoffs.dist, policy.dist);
    assert_eq!(c.flow.flux, 0.5);
    assert_eq!(c.domain.half_length, 10.0);
    let echoed = c.to_toml();
    assert!(echoed.contains("epsilon = ") && echoed.contains("dist = 3.0"), "{echoed}");
}

#[test]
fn negative_epsilon_names_the_interval() {
    let e = parse_config(&format!("{MINIMAL}[cutoffs]\nepsilon = -0.1\n")).unwrap_err();
    assert!(e.problems.iter().any(|p| p.contains("ε ∈ (0, 1)")), "{e}");
}

#[test]
fn domain_as_short_as_the_bump_cites_the_length_condition() {
    let e = parse_config("[flow]\nflux = 0.5\n[domain]\nT = 1.5\nh = 0.25\n").unwrap_err();
    assert!(e.problems.iter().any(|p| p.contains("T ≥ L + 1")), "{e}");
}

#[test]
fn all_problems_are_reported_together() {
    let text = "[flow]\nflux = \"fast\"\n[domain]\nh = 0.25\ncolour = 3\n[solver]\nmax_iters = 0\n[extras]\n";
    let e = parse_config(text).unwrap_err();
    let joined = e.problems.join("\n");
    for needle in ["flow.flux: expected a number", "missing required key domain.T", "unknown key domain.colour", "max_iters", "unknown section [extras]"] {
        assert!(joined.contains(needle), "missing {needle:?} in\n{joined}");
    }
}

#[test]
fn invalid_config_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = slipflow("solve", "[flow]\nflux = 0.5\n", dir.path());
    assert_eq!(code, 1);
    assert!(stderr.contains("domain.T"), "{stderr}");
}

#[test]
fn zero_flux_solve_takes_one_step_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = slipflow("solve", "[flow]\nflux = 0\n[domain]\nT = 4\nh = 0.25\n", dir.path());
    assert_eq!(code, 0, "{stderr}");
    let m = manifest(dir.path());
    let s = m["summary"].as_table().unwrap();
    assert_eq!(s["iterations"].as_integer(), Some(1));
    assert_eq!(s["v_h1"].as_float(), Some(0.0));
    assert!(dir.path().join("out/solution.vtk").exists());
}

#[test]
fn single_iteration_probe_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = slipflow("probe-uniqueness", &format!("{MINIMAL}[solver]\nmax_iters = 1\n"), dir.path());
    assert_ne!(code, 0);
    let m = manifest(dir.path());
    assert_eq!(m["summary"]["verdict"].as_str(), Some("inconclusive"));
    let probe = fs::read_to_string(dir.path().join("out/probe.csv")).unwrap();
    assert!(probe.contains("summary,verdict,inconclusive"), "{probe}");
}

#[test]
fn carrier_verification_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = slipflow("verify-carrier", MINIMAL, dir.path());
    assert_eq!(code, 0, "{stderr}");
    let csv = fs::read_to_string(dir.path().join("out/carrier.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("name,value,tolerance,pass"));
    assert!(lines.all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn identical_runs_write_identical_reports() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let (code, stderr) = slipflow("solve", MINIMAL, dir.path());
            assert_eq!(code, 0, "{stderr}");
            dir
        })
        .collect();
    for name in ["history.csv", "norms.csv", "manifest.toml", "config.toml"] {
        let a = fs::read(runs[0].path().join("out").join(name)).unwrap();
        let b = fs::read(runs[1].path().join("out").join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
}

#[test]
fn manifest_reruns_the_same_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = slipflow("verify-carrier", MINIMAL, dir.path());
    assert_eq!(code, 0);
    let m = manifest(dir.path());
    let p = m["parameters"].as_table().unwrap();
    for key in ["epsilon", "dist", "h", "T", "seed"] {
        assert!(p.contains_key(key), "manifest lacks {key}");
    }
    let resolved = fs::read_to_string(dir.path().join("out/config.toml")).unwrap();
    let again = parse_config(&resolved).unwrap();
    assert_eq!(again.to_toml(), parse_config(MINIMAL).unwrap().to_toml());
}
