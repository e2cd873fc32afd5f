use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freqsynth::checkpoint::load_checkpoint;
use freqsynth::curve::read_curve;
use freqsynth::fsv::read_volume;
use freqsynth::report::read_report;
use freqsynth_core::frequency::{decompose, GaussianSpec};
use freqsynth_core::DomainTag;

fn freqsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqsynth")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = freqsynth(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p));
        } else {
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn param_count_table_rows() {
    let rows = [
        ("stack3d", 3, 32, 3, 82_944),
        ("stack3d", 6, 32, 3, 165_888),
        ("stack3d", 9, 32, 3, 248_832),
        ("large-kernel", 3, 32, 5, 384_000),
        ("large-kernel", 3, 32, 7, 1_053_696),
        ("factorized", 1, 32, 13, 119_808),
        ("factorized", 1, 32, 19, 175_104),
    ];
    for (arr, l, c, k, want) in rows {
        let out = ok(&[
            "param-count",
            "--arrangement",
            arr,
            "--layers",
            &l.to_string(),
            "--channels",
            &c.to_string(),
            "--k",
            &k.to_string(),
        ]);
        assert_eq!(out.trim(), want.to_string());
    }
    assert_eq!(ok(&["param-count", "--arrangement", "factorized", "--channels", "32", "--k", "13"]).trim(), "119808");
    assert_eq!(
        ok(&["param-count", "--arrangement", "factorized", "--channels", "32", "--k", "13", "--per-pair"]).trim(),
        "117 2197"
    );
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["param-count", "--arrangement", "factorized", "--channels", "32", "--k", "13", "--bogus"][..],
        &["no-such-command"],
        &[],
        &["gen-data", "--dims", "8,8", "--pairs", "1", "--out", "x"],
        &["gen-data", "--pairs", "many", "--out", "x"],
    ] {
        let out = freqsynth(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let help = freqsynth(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("gen-data"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope").join("manifest.txt");
    let out = freqsynth(&["train", "--manifest", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));

    let out = freqsynth(&["param-count", "--arrangement", "stack3d", "--channels", "32", "--k", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = freqsynth(&["param-count", "--arrangement", "hexagonal", "--channels", "32", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.fsv");
    fs::write(&bad, b"XXXX0000").unwrap();
    let out = freqsynth(&["decompose", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("offset 0") && err.contains("bad.fsv"), "{err}");
}

#[test]
fn gen_data_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(&["gen-data", "--dims", "24,24,24", "--pairs", "2", "--seed", "7", "--out", s(&d.join("d"))]);
    }
    let ta = tree(&a.path().join("d"));
    let tb = tree(&b.path().join("d"));
    // The provenance echoes the output path, which differs between the two.
    let strip = |t: Vec<(PathBuf, Vec<u8>)>| -> Vec<_> {
        t.into_iter().filter(|(p, _)| p != Path::new("provenance.txt")).collect()
    };
    assert_eq!(ta.len(), 6);
    assert_eq!(strip(ta), strip(tb));

    let d = a.path().join("d");
    let before = tree(&d);
    ok(&["gen-data", "--dims", "24,24,24", "--pairs", "2", "--seed", "7", "--out", s(&d)]);
    assert_eq!(tree(&d), before);
    let prov = fs::read_to_string(d.join("provenance.txt")).unwrap();
    assert!(prov.contains("command = gen-data") && prov.contains("seed = 7"));
}

#[test]
fn decompose_writes_bands() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-data", "--dims", "8,8,8", "--pairs", "1", "--seed", "3", "--out", s(dir.path())]);
    let ct = dir.path().join("pair_000.ct.fsv");
    ok(&["decompose", "--input", s(&ct), "--sigma", "1.5"]);
    let low = read_volume(&dir.path().join("pair_000.ct.low.fsv")).unwrap();
    let high = read_volume(&dir.path().join("pair_000.ct.high.fsv")).unwrap();
    assert_eq!((low.tag(), high.tag()), (DomainTag::CtLowFreq, DomainTag::CtHighFreq));
    let v = read_volume(&ct).unwrap();
    let want = decompose(&v, &GaussianSpec::new(1.5).unwrap()).unwrap();
    assert_eq!((low, high), (want.low, want.high));
    assert!(dir.path().join("pair_000.ct.decompose.provenance.txt").exists());

    let out_dir = dir.path().join("bands");
    ok(&["decompose", "--input", s(&ct), "--out-dir", s(&out_dir)]);
    assert!(out_dir.join("pair_000.ct.high.fsv").exists());

    let out = freqsynth(&["decompose", "--input", s(&dir.path().join("pair_000.mr.fsv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["gen-data", "--dims", "12,12,12", "--pairs", "2", "--seed", "5", "--out", s(&p.join("data"))]);
    let cfg = p.join("train.cfg");
    fs::write(&cfg, "base_kind = fcnet\nchannels = 2\nrefine_k = 3\ncrop = 8\nepochs = 4\n").unwrap();
    let run = p.join("run");
    ok(&[
        "train",
        "--manifest",
        s(&p.join("data/manifest.txt")),
        "--config",
        s(&cfg),
        "--set",
        "lr=0.002",
        "--checkpoint-every",
        "2",
        "--out",
        s(&run),
        "--quiet",
    ]);
    for f in ["model.fsc", "loss.csv", "config.txt", "provenance.txt", "epoch_00002.fsc", "epoch_00004.fsc"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let curve = read_curve(&run.join("loss.csv")).unwrap();
    assert_eq!(curve.len(), 4);
    let config = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("lr = 0.002") && config.contains("base_kind = fcnet"));
    let prov = fs::read_to_string(run.join("provenance.txt")).unwrap();
    assert!(prov.contains("config.channels = 2") && prov.contains("head = frequency-supervised"));
    let ck = load_checkpoint(&run.join("model.fsc")).unwrap();
    assert_eq!(ck.model.config().base.channels, 2);
    assert_eq!(load_checkpoint(&run.join("epoch_00004.fsc")).unwrap().model, ck.model);

    let ct = p.join("pred.fsv");
    let stdout = ok(&[
        "infer",
        "--checkpoint",
        s(&run.join("model.fsc")),
        "--input",
        s(&p.join("data/pair_000.mr.fsv")),
        "--out",
        s(&ct),
        "--window",
        "8,8,8",
        "--stride",
        "4",
        "--emit-bands",
    ]);
    assert_eq!(stdout.lines().count(), 3);
    let pred = read_volume(&ct).unwrap();
    assert_eq!(pred.tag(), DomainTag::CtHu);
    assert_eq!(pred.dims(), [12; 3]);
    assert!(pred.data().iter().all(|&v| (-1024.0..=2252.7).contains(&v)));
    let low = read_volume(&p.join("pred.low.fsv")).unwrap();
    let high = read_volume(&p.join("pred.high.fsv")).unwrap();
    assert_eq!((low.tag(), high.tag()), (DomainTag::CtLowFreq, DomainTag::CtHighFreq));
    let prov = fs::read_to_string(p.join("pred.infer.provenance.txt")).unwrap();
    assert!(prov.contains("window = 8,8,8") && prov.contains("stride = 4,4,4") && prov.contains("windows = 8"));

    let report = p.join("report.txt");
    let printed = ok(&[
        "eval",
        "--pred",
        s(&ct),
        "--gt",
        s(&p.join("data/pair_000.ct.fsv")),
        "--out",
        s(&report),
        "--csv",
        s(&p.join("report.csv")),
        "--label",
        "tiny",
    ]);
    let r = read_report(&report).unwrap();
    assert_eq!(printed, fs::read_to_string(&report).unwrap());
    assert!(r.mae > 0.0 && r.mae.is_finite());
    assert!(r.ssim <= 1.0);
    let csv = fs::read_to_string(p.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("tiny,"));

    let slices = p.join("slices");
    ok(&["export-slices", "--pred", s(&ct), "--gt", s(&p.join("data/pair_000.ct.fsv")), "--out-dir", s(&slices), "--slices", "0,6"]);
    for f in ["pred_z000.pgm", "gt_z006.pgm", "error_z006.pgm", "provenance.txt"] {
        assert!(slices.join(f).exists(), "{f}");
    }
    let pgm = fs::read(slices.join("gt_z000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n12 12\n255\n"));
    let out = freqsynth(&["export-slices", "--pred", s(&ct), "--gt", s(&ct), "--out-dir", s(&slices), "--slices", "12"]);
    assert_eq!(out.status.code(), Some(2));

    // A baseline run has no bands to emit.
    let base = p.join("base");
    ok(&["train", "--manifest", s(&p.join("data/manifest.txt")), "--config", s(&cfg), "--baseline", "--out", s(&base), "--quiet"]);
    let out = freqsynth(&[
        "infer",
        "--checkpoint",
        s(&base.join("model.fsc")),
        "--input",
        s(&p.join("data/pair_000.mr.fsv")),
        "--out",
        s(&p.join("b.fsv")),
        "--emit-bands",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = freqsynth(&["train", "--manifest", s(&p.join("data/manifest.txt")), "--config", s(&cfg), "--baseline", "--adversarial", "--out", s(&base)]);
    assert_eq!(out.status.code(), Some(2));

    // Resuming from a checkpoint with a different network is refused.
    let out = freqsynth(&[
        "train",
        "--manifest",
        s(&p.join("data/manifest.txt")),
        "--init",
        s(&run.join("model.fsc")),
        "--out",
        s(&p.join("resume")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    ok(&[
        "train",
        "--manifest",
        s(&p.join("data/manifest.txt")),
        "--config",
        s(&cfg),
        "--init",
        s(&run.join("model.fsc")),
        "--epochs",
        "1",
        "--out",
        s(&p.join("resume")),
        "--quiet",
    ]);
}
