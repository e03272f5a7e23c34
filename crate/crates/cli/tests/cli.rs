use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clickadapt::neuro::Checkpoint;
use clickadapt::session::BenchmarkReport;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickadapt")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_checkpoint(dir: &Path, steps: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("ck-{steps}-{seed}.bin"));
    let o = run(&[
        "pretrain", "--family", "a", "--steps", &steps.to_string(), "--seed", &seed.to_string(),
        "--resolution", "24x24", "--pool", "8", "--batch", "2", "--hidden", "4", "--kernels", "1",
        "--quiet", "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn small_manifest(dir: &Path) -> PathBuf {
    let out = dir.join("data");
    let o = run(&["synth", "--family", "b", "--count", "4", "--seed", "5", "--resolution", "24x24", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("manifest.txt")
}

#[test]
fn pretrain_is_deterministic_and_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_checkpoint(dir.path(), 6, 1);
    let b = dir.path().join("again.bin");
    std::fs::copy(&a, &b).unwrap();
    let c = small_checkpoint(dir.path(), 6, 1);
    assert_eq!(std::fs::read(&c).unwrap(), std::fs::read(&b).unwrap());

    let o = run(&["inspect", s(&a)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("step count      6"), "{}", stdout(&o));
    let o = run(&["inspect", "--json", s(&a)]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["step_count"], 6);
    assert_eq!(v["hidden"], 4);
    assert_eq!(v["random_kernels"], 1);
}

#[test]
fn zero_step_pretrain_and_reset() {
    let dir = tempfile::tempdir().unwrap();
    let ck = Checkpoint::load(small_checkpoint(dir.path(), 0, 3)).unwrap();
    assert_eq!(ck.decoder.step_count(), 0);
}

#[test]
fn corrupted_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_checkpoint(dir.path(), 1, 0);
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();
    let o = run(&["inspect", s(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum mismatch"), "{}", stderr(&o));
}

#[test]
fn missing_checkpoint_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let missing = dir.path().join("nowhere.ckpt");
    let out = dir.path().join("r.json");
    let o = run(&["bench", "--manifest", s(&manifest), "--checkpoint", s(&missing), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ck = small_checkpoint(dir.path(), 0, 0);
    let manifest = small_manifest(dir.path());
    let out = dir.path().join("r.json");
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "ca = sometimes\n").unwrap();
    let o = run(&["bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--config", s(&cfg), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("bad.cfg"));

    let o = run(&["bench", "--manifest", "/no/such/manifest.txt", "--checkpoint", s(&ck), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--output", s(&out), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--output", s(&out), "--lr", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bench", "--manifest", s(&manifest)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["pretrain", "--batch", "0", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_pairs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b50");
    let o = run(&["synth", "--family", "b", "--count", "50", "--resolution", "32x32", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let count = |sub: &str| std::fs::read_dir(out.join(sub)).unwrap().count();
    assert_eq!(count("images"), 50);
    assert_eq!(count("masks"), 50);
    let text = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    let entries = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#') && !l.starts_with('@')).count();
    assert_eq!(entries, 50);
    let (_, ds) = clickadapt::data::load_manifest(out.join("manifest.txt")).unwrap();
    assert_eq!(ds.resolution, (32, 32));
}

#[test]
fn bench_labels_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let ck = small_checkpoint(dir.path(), 4, 2);
    let manifest = small_manifest(dir.path());

    let base = dir.path().join("base.json");
    let o = run(&[
        "bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--output", s(&base),
        "--ca", "none", "--rm", "none", "--cm", "off", "--budget", "5", "--threshold", "0.8", "--seed", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("baseline: NoC_5@80"), "{}", stdout(&o));
    let report = BenchmarkReport::from_json(&std::fs::read_to_string(&base).unwrap()).unwrap();
    assert_eq!(report.label, "baseline");
    assert_eq!(report.records.len(), 4);
    assert_eq!(report.seeds["master"], 2);
    assert!(report.seeds.contains_key("feature"));
    assert_eq!(report.total_steps, 0);

    let cfg = dir.path().join("full.cfg");
    std::fs::write(&cfg, "# complete method\nca = reset\nrm = eroded\ncm = on\nk = 1\n").unwrap();
    let full = dir.path().join("full.json");
    let decoders = dir.path().join("decoders");
    let o = run(&[
        "bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--config", s(&cfg), "--output", s(&full),
        "--budget", "5", "--save-decoders", s(&decoders),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = BenchmarkReport::from_json(&std::fs::read_to_string(&full).unwrap()).unwrap();
    assert_eq!(report.label, "full-method");
    assert_eq!(report.config.erosion_iters, 1);
    assert_eq!(report.budget, 5);
    let saved = Checkpoint::load(decoders.join("default.ckpt")).unwrap();
    assert_eq!(saved.decoder.step_count(), 4 + report.records.iter().map(|r| r.post_steps as u64).sum::<u64>());

    // identical flags give identical reports
    let again = dir.path().join("again.json");
    let o = run(&[
        "bench", "--manifest", s(&manifest), "--checkpoint", s(&ck), "--config", s(&cfg), "--output", s(&again),
        "--budget", "5",
    ]);
    assert!(o.status.success());
    let r2 = BenchmarkReport::from_json(&std::fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(report.without_timing(), r2.without_timing());
}
