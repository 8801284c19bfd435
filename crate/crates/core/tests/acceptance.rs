//! Acceptance criteria 1 to 10. Each test prints one `criterion N: PASS|FAIL`
//! line (visible with `--nocapture`) and asserts the same condition.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use teb::agent::random_walk_coverage;
use teb::harness::config::ExperimentConfig;
use teb::harness::run_maze::{median, run_maze, Variant};
use teb::harness::verify::{run_suite, Suite, SuiteReport, VerifyOptions};

const MINUTE: Duration = Duration::from_secs(60);

/// Minimum relative gain of the shaped median over the unshaped median.
const MIN_MEDIAN_GAIN: f64 = 0.15;
/// Minimum paired seeds (of 10) where shaped coverage is strictly higher.
const MIN_WINS: usize = 8;

fn report(n: usize, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn suite(n: usize, s: Suite, budget: Duration) -> SuiteReport {
    let t = Instant::now();
    let rep = run_suite(s, &VerifyOptions::default()).expect("suite runs");
    let elapsed = t.elapsed();
    let pass = rep.passed() && elapsed < budget;
    let mut checks: Vec<&str> = Vec::new();
    for r in &rep.results {
        if !checks.contains(&r.check.as_str()) {
            checks.push(&r.check);
        }
    }
    let worst: Vec<String> = checks.iter().map(|c| format!("{c}={:.3e}", rep.max_residual(c))).collect();
    report(
        n,
        pass,
        &format!("{}/{} instances, worst {}, {:.1}s", rep.n_passed(), rep.results.len(), worst.join(" "), elapsed.as_secs_f64()),
    );
    for r in rep.results.iter().filter(|r| !r.pass) {
        println!("  failed {} #{} seed {}: {:.3e} > {:.0e} {}", r.check, r.instance, r.seed, r.residual, r.limit, r.detail);
    }
    assert!(rep.passed(), "criterion {n} failed");
    assert!(elapsed < budget, "criterion {n} took {elapsed:?}");
    rep
}

#[test]
fn criterion_01_contraction() {
    let rep = suite(1, Suite::Contraction, MINUTE);
    let mdps: std::collections::BTreeSet<usize> = rep.results.iter().map(|r| r.instance).collect();
    assert_eq!(mdps.len(), 50);
    assert_eq!(rep.results.len(), 100);
}

#[test]
fn criterion_02_fixed_point_and_diameter() {
    suite(2, Suite::Diameter, 2 * MINUTE);
}

#[test]
fn criterion_03_degeneracy() {
    suite(3, Suite::Degeneracy, MINUTE);
}

#[test]
fn criterion_04_value_difference_bound() {
    let rep = suite(4, Suite::ValueBound, 2 * MINUTE);
    assert_eq!(rep.results.len(), 100);
}

#[test]
fn criterion_05_policy_invariance() {
    let rep = suite(5, Suite::Invariance, 2 * MINUTE);
    assert_eq!(rep.results.len(), 100);
}

#[test]
fn criterion_06_discrepancy_oracle() {
    let rep = suite(6, Suite::Discrepancy, MINUTE);
    assert_eq!(rep.results.len(), 20);
}

#[test]
fn criterion_07_transport() {
    let rep = suite(7, Suite::Transport, MINUTE);
    assert_eq!(rep.results.iter().filter(|r| r.check == "exhaustive").count(), 200);
}

#[test]
fn criterion_08_embedding_gradients() {
    suite(8, Suite::Gradients, MINUTE);
}

#[test]
fn criterion_09_exploration_benefit() {
    let t = Instant::now();
    let mut all_pass = true;
    let mut lines = Vec::new();
    for layout in ["bottleneck", "tree"] {
        let mut cfg = ExperimentConfig::default();
        cfg.maze.layout = layout.into();
        cfg.maze.seeds = 10;
        cfg.agent.total_steps = 100_000;
        let rep = run_maze(&cfg).expect("runs");
        let u = rep.summary(Variant::Unshaped);
        let s = rep.summary(Variant::Shaped);
        let gain = rep.median_gain();
        let wins = rep.shaped_wins();
        let pairs = rep.pairs().len();
        let ok = pairs == 10 && gain >= MIN_MEDIAN_GAIN && wins >= MIN_WINS;
        all_pass &= ok;
        // Uniform random walk with the same seeds, for context only.
        let walk: Vec<f64> = cfg
            .run_seeds()
            .unwrap()
            .into_iter()
            .map(|seed| *random_walk_coverage(&rep.spec, 100_000, seed).unwrap().last().unwrap())
            .collect();
        lines.push(format!(
            "  {layout}: unshaped median {:.3}, shaped median {:.3}, gain {:+.1}%, wins {wins}/{pairs} [{}]; eps=1 walk median {:.3} (informational)",
            u.median,
            s.median,
            100.0 * gain,
            if ok { "ok" } else { "short" },
            median(&walk)
        ));
    }
    let elapsed = t.elapsed();
    all_pass &= elapsed < 20 * MINUTE;
    report(9, all_pass, &format!("{:.0}s", elapsed.as_secs_f64()));
    for l in &lines {
        println!("{l}");
    }
    assert!(all_pass, "criterion 9 failed:\n{}", lines.join("\n"));
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn teb(args: &[&str], out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_teb"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("teb runs");
    assert!(status.success(), "teb {args:?} exited with {status}");
}

#[test]
fn criterion_10_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        teb(&["verify", "--seed", "11", "--seeds", "20"], dir);
        teb(&["run-maze", "--seed", "11", "--seeds", "3", "--steps", "20000", "--layout", "tree"], dir);
    }
    let (fa, fb) = (read_tree(&a), read_tree(&b));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    let pass = !fa.is_empty() && fa.len() == fb.len() && differing.is_empty();
    report(10, pass, &format!("{} files compared, {} differ", fa.len(), differing.len()));
    assert!(pass, "differing files: {differing:?}");
}
