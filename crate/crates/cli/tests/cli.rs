//! End-to-end runs of the `qprogan` binary on small synthetic cohorts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qprogan::genomics::{format_fasta, parse_fasta, SpikeCohort, SPIKE_LEN};

fn qprogan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprogan"))
        .args(args)
        .current_dir(cwd)
        .env("QPROGAN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = qprogan(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A cohort prepared from `sequences` synthetic records.
fn cohort(dir: &Path, sequences: usize) -> PathBuf {
    let n = sequences.to_string();
    ok(&["synth", "--seed", "4", "--sequences", &n, "--out", "aligned.fasta"], dir);
    ok(&["prep", "--seed", "4", "aligned.fasta", "--out-dir", "prep"], dir);
    dir.join("prep/cohort.json")
}

/// A short 6-qubit run reaching depth 2.
fn trained(dir: &Path) -> PathBuf {
    cohort(dir, 30);
    ok(
        &[
            "train", "--preset", "test", "--seed", "9", "--steps", "120", "--cohort", "prep/cohort.json", "--out-dir", "run",
        ],
        dir,
    );
    dir.join("run/checkpoint.qgan")
}

#[test]
fn prep_keeps_1024_positions_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = cohort(dir.path(), 10);
    let first = fs::read(&path).unwrap();
    let c = SpikeCohort::from_json(std::str::from_utf8(&first).unwrap()).unwrap();
    assert_eq!(c.kept.len(), 1024);
    assert_eq!(c.len(), 10);
    ok(&["prep", "--seed", "4", "aligned.fasta", "--out-dir", "prep"], dir.path());
    assert_eq!(fs::read(&path).unwrap(), first);
    let summary = fs::read_to_string(dir.path().join("prep/summary.json")).unwrap();
    assert!(summary.contains("\"sequences\": 10"));
}

#[test]
fn prep_joins_split_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--seed", "1", "--sequences", "774", "--out", "all.fasta"], d);
    let records = parse_fasta(&fs::read_to_string(d.join("all.fasta")).unwrap()).unwrap();
    fs::write(d.join("first.fasta"), format_fasta(&records[..735])).unwrap();
    fs::write(d.join("second.fasta"), format_fasta(&records[735..])).unwrap();
    ok(&["prep", "--seed", "3", "first.fasta", "second.fasta", "--out-dir", "prep"], d);
    let c = SpikeCohort::load(d.join("prep/cohort.json")).unwrap();
    assert_eq!(c.len(), 774);
    ok(&["synth", "--seed", "1", "--sequences", "5", "--no-reference", "--out", "tail.fasta"], d);
    let tail = parse_fasta(&fs::read_to_string(d.join("tail.fasta")).unwrap()).unwrap();
    assert_eq!(tail.len(), 5);
    assert!(tail.iter().all(|r| r.id != records[0].id));
}

#[test]
fn prep_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.fasta"), ">ref\nACGT\n>s\nACGA\n").unwrap();
    let out = qprogan(&["prep", "--seed", "1", "short.fasta"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("window"));
    let out = qprogan(&["prep", "short.fasta"], dir.path());
    assert_eq!(code(&out), 1, "a seed is mandatory");
}

#[test]
fn zero_step_run_writes_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    cohort(dir.path(), 10);
    ok(&["train", "--preset", "test", "--seed", "1", "--steps", "0", "--cohort", "prep/cohort.json", "--out-dir", "run"], dir.path());
    assert_eq!(fs::read_to_string(dir.path().join("run/loss.csv")).unwrap(), "step,loss_g,loss_d,depth,alpha\n");
}

#[test]
fn training_logs_at_cadence_and_resumes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cohort(d, 30);
    let base = ["train", "--preset", "test", "--seed", "9", "--cohort", "prep/cohort.json"];
    let full: Vec<&str> = base.iter().copied().chain(["--steps", "200", "--out-dir", "full"]).collect();
    ok(&full, d);
    let csv = fs::read_to_string(d.join("full/loss.csv")).unwrap();
    let steps: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["0", "74", "148"]);

    let half: Vec<&str> = base.iter().copied().chain(["--steps", "90", "--out-dir", "half"]).collect();
    ok(&half, d);
    let resumed: Vec<&str> = base
        .iter()
        .copied()
        .chain(["--steps", "200", "--out-dir", "resumed", "--resume", "half/checkpoint.qgan"])
        .collect();
    ok(&resumed, d);
    assert_eq!(fs::read(d.join("full/checkpoint.qgan")).unwrap(), fs::read(d.join("resumed/checkpoint.qgan")).unwrap());
    assert_eq!(csv, fs::read_to_string(d.join("resumed/loss.csv")).unwrap());
}

#[test]
fn numeric_breakdown_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cohort(d, 10);
    fs::write(d.join("hot.toml"), "seed = 2\n[model]\nmax_qubits = 4\n[train]\nsteps = 50\nlearning_rate = 1e300\nstable_steps = 5\nfade_steps = 5\n").unwrap();
    let out = qprogan(&["--config", "hot.toml", "train", "--cohort", "prep/cohort.json", "--out-dir", "run"], d);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("abandoned"));
    assert!(d.join("run/checkpoint.qgan").exists());
}

#[test]
fn quantum_penalty_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cohort(d, 10);
    fs::write(d.join("bad.toml"), "seed = 2\n[train]\npenalty = true\n").unwrap();
    let out = qprogan(&["--config", "bad.toml", "train", "--cohort", "prep/cohort.json"], d);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("classical"));
}

#[test]
fn generate_decodes_and_maps_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let args = |out: &'static str, n: &'static str, strain: &'static str| {
        vec![
            "generate", "--checkpoint", "run/checkpoint.qgan", "--seed", "5", "--n", n, "--strain", strain, "--cohort",
            "prep/cohort.json", "--out-dir", out,
        ]
    };
    ok(&args("a", "1000", "delta"), d);
    ok(&args("b", "1000", "delta"), d);
    for f in ["variations.json", "generated.fasta"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap());
    }
    let vs: Vec<qprogan::genomics::VariationStructure> = serde_json::from_str(&fs::read_to_string(d.join("a/variations.json")).unwrap()).unwrap();
    assert_eq!(vs.len(), 1000);
    assert!(vs.iter().all(|v| v.k == 21 && v.positions_1024.len() == 21));
    let fasta = parse_fasta(&fs::read_to_string(d.join("a/generated.fasta")).unwrap()).unwrap();
    assert_eq!(fasta.len(), 1000);
    assert!(fasta.iter().all(|r| r.seq.len() == SPIKE_LEN));

    ok(&args("o", "3", "omicron"), d);
    let vs: Vec<qprogan::genomics::VariationStructure> = serde_json::from_str(&fs::read_to_string(d.join("o/variations.json")).unwrap()).unwrap();
    assert!(vs.iter().all(|v| v.k == 31));

    ok(&args("empty", "0", "delta"), d);
    assert_eq!(fs::read_to_string(d.join("empty/variations.json")).unwrap().trim(), "[]");
    assert_eq!(fs::read_to_string(d.join("empty/generated.fasta")).unwrap(), "");

    let mut dump = args("dump", "2", "delta");
    dump.push("--dump-states");
    ok(&dump, d);
    let state = qprogan::densmat::DensityMatrix::load_qdm(d.join("dump/states/generated_0001.qdm")).unwrap();
    state.validate(1e-9).unwrap();
}

#[test]
fn generate_rejects_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    fs::write(d.join("other.toml"), "seed = 1\n[model]\nmax_qubits = 6\nchannels = 4\n").unwrap();
    let out = qprogan(&["--config", "other.toml", "generate", "--checkpoint", "run/checkpoint.qgan", "--cohort", "prep/cohort.json"], d);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("different model config"));
    let out = qprogan(&["generate", "--seed", "1", "--checkpoint", "missing.qgan", "--cohort", "prep/cohort.json"], d);
    assert_eq!(code(&out), 1);
}

fn grid(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fidelity_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let base = ["fidelity", "--checkpoint", "run/checkpoint.qgan", "--seed", "3", "--cohort", "prep/cohort.json"];
    let out = ok(&base, d);
    let csv = String::from_utf8(out.stdout).unwrap();
    let g = grid(&csv);
    assert_eq!((g.len(), g[0].len()), (10, 10));
    assert!(g.iter().flatten().all(|f| (0.0..=1.0).contains(f)));

    let with = |extra: &[&'static str]| -> Vec<Vec<f64>> {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        grid(&String::from_utf8(ok(&args, d).stdout).unwrap())
    };
    let sup = with(&["--self-compare", "--n-gen", "6"]);
    let uhl = with(&["--self-compare", "--n-gen", "6", "--metric", "uhlmann"]);
    for i in 0..6 {
        assert!((sup[i][i] - 1.0).abs() < 1e-9);
        for j in 0..6 {
            // generated states are pure, where one metric is the square of the other
            assert!((sup[i][j] - uhl[i][j] * uhl[i][j]).abs() < 1e-7, "{i},{j}: {} vs {}", sup[i][j], uhl[i][j]);
        }
    }
    let out = qprogan(&["fidelity", "--seed", "3", "--checkpoint", "run/checkpoint.qgan", "--cohort", "nope.json"], d);
    assert_eq!(code(&out), 1);
}

#[test]
fn freq_reports_sections() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let reference: Vec<u8> = (0..SPIKE_LEN).map(|i| b"ACGT"[i % 4]).collect();
    let reference_fasta = format!(">ref\n{}\n", String::from_utf8_lossy(&reference));
    fs::write(d.join("ref.fasta"), &reference_fasta).unwrap();
    fs::write(d.join("same.fasta"), reference_fasta.replace(">ref", ">a")).unwrap();
    let out = ok(&["freq", "same.fasta", "--reference", "ref.fasta"], d);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("position,count,section"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));

    // hotspot at 1-based position 2000, planted in 5 of 6 fragments
    let mut records = String::new();
    for i in 0..6 {
        let mut f = reference.clone();
        if i < 5 {
            f[1999] = if f[1999] == b'A' { b'C' } else { b'A' };
        }
        records.push_str(&format!(">f{i}\n{}\n", String::from_utf8_lossy(&f)));
    }
    fs::write(d.join("hot.fasta"), records).unwrap();
    ok(&["freq", "hot.fasta", "--reference", "ref.fasta", "--out", "freq.csv"], d);
    let csv = fs::read_to_string(d.join("freq.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(2000).unwrap().split(',').collect();
    assert_eq!(row, ["2000", "5", "1912-2867"]);
    let labels: Vec<&str> = [1, 956, 957, 1911, 1912, 2867, 2868, 3822]
        .iter()
        .map(|&p| csv.lines().nth(p).unwrap().rsplit(',').next().unwrap())
        .collect();
    assert_eq!(labels, ["1-956", "1-956", "957-1911", "957-1911", "1912-2867", "1912-2867", "2868-3822", "2868-3822"]);

    fs::write(d.join("short.fasta"), ">x\nACGT\n").unwrap();
    assert_eq!(code(&qprogan(&["freq", "short.fasta", "--reference", "ref.fasta"], d)), 1);
    assert_eq!(code(&qprogan(&["freq", "absent.fasta", "--reference", "ref.fasta"], d)), 1);
}
