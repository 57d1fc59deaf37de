use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attrikit::corpus::{save_manifest, SampleRecord, Split};
use attrikit::evalkit::load_report;
use attrikit::pixelops::Image;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attrikit"));
    c.env_remove("ATTRIKIT_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    if !out.status.success() && out.status.code() != Some(2) {
        panic!("attrikit {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "run.meta.json" {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out", name, "--train", "8", "--val", "3", "--test", "4", "--size", "48"];
    args.extend_from_slice(extra);
    run(dir, &args);
    dir.join(name).join("manifest.jsonl")
}

fn quick_train(dir: &Path, manifest: &str, out: &str) -> Output {
    run(
        dir,
        &["train", "--manifest", manifest, "--out", out, "--epochs", "30", "--warmup-epochs", "3", "--lr", "0.01"],
    )
}

#[test]
fn synth_writes_the_requested_corpus_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    run(tmp.path(), &["synth", "--out", "a", "--size", "32", "--seed", "5"]);
    run(tmp.path(), &["synth", "--out", "b", "--size", "32", "--seed", "5"]);
    let text = fs::read_to_string(tmp.path().join("a/manifest.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 150);
    let m = attrikit::corpus::load_manifest(tmp.path().join("a/manifest.jsonl")).unwrap();
    assert_eq!(m.classes().len(), 5);
    let (mut a, mut b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    let (ca, cb) = (a.remove(Path::new("run.toml")).unwrap(), b.remove(Path::new("run.toml")).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(ca).unwrap().replace("\"a\"", "\"b\""), String::from_utf8(cb).unwrap());
    assert!(tmp.path().join("a/run.meta.json").exists());
}

#[test]
fn extract_caches_every_record_and_logs_broken_images() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "c", &[]);
    let m = attrikit::corpus::load_manifest(&manifest).unwrap();
    let out = run(tmp.path(), &["extract", "--manifest", "c/manifest.jsonl", "--out", "f"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_dir(tmp.path().join("f/features")).unwrap().count(), m.len());
    let first = files(&tmp.path().join("f"));
    run(tmp.path(), &["extract", "--manifest", "c/manifest.jsonl", "--out", "f"]);
    assert_eq!(files(&tmp.path().join("f")), first);
    assert!(!tmp.path().join("f/failures.tsv").exists());

    let broken = &m.records()[3].image_path;
    fs::write(m.resolve(broken), b"definitely not an image").unwrap();
    let out = run(tmp.path(), &["extract", "--manifest", "c/manifest.jsonl", "--out", "g"]);
    assert_eq!(out.status.code(), Some(2));
    let log = fs::read_to_string(tmp.path().join("g/failures.tsv")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.starts_with(broken.as_str()));
    let index = fs::read_to_string(tmp.path().join("g/index.jsonl")).unwrap();
    assert_eq!(index.lines().count(), m.len() - 1);
}

#[test]
fn training_is_deterministic_and_keeps_the_best_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "c", &[]);
    let out = quick_train(tmp.path(), "c/manifest.jsonl", "m1");
    quick_train(tmp.path(), "c/manifest.jsonl", "m2");
    let a = fs::read(tmp.path().join("m1/head.ahd")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("m2/head.ahd")).unwrap());
    assert_eq!(
        fs::read(tmp.path().join("m1/history.csv")).unwrap(),
        fs::read(tmp.path().join("m2/history.csv")).unwrap()
    );

    let history = fs::read_to_string(tmp.path().join("m1/history.csv")).unwrap();
    let val: Vec<f64> = history.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(val.len(), 30);
    let max = val.iter().cloned().fold(f64::MIN, f64::max);
    let argmax = val.iter().position(|&v| v == max).unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with(&format!("best epoch {argmax} of 30")), "{stdout}");
}

#[test]
fn eval_reports_and_records_perturbations() {
    let tmp = tempfile::tempdir().unwrap();
    run(tmp.path(), &["synth", "--out", "c", "--train", "8", "--val", "3", "--test", "4", "--size", "64"]);
    run(
        tmp.path(),
        &[
            "train", "--manifest", "c/manifest.jsonl", "--out", "m", "--epochs", "150", "--warmup-epochs", "10",
            "--lr", "0.01", "--batch-size", "16", "--min-lr", "0.0001",
        ],
    );
    run(tmp.path(), &["eval", "--model", "m", "--manifest", "c/manifest.jsonl", "--split", "train", "--out", "tr"]);
    let train = load_report(tmp.path().join("tr/report.json")).unwrap();
    assert_eq!(train.total, 40);
    assert!(train.accuracy >= 0.99, "train accuracy {}", train.accuracy);
    assert_eq!(train.meta.perturbation, None);
    assert!(fs::read_to_string(tmp.path().join("tr/report.csv")).unwrap().starts_with("metric,value\n"));

    run(
        tmp.path(),
        &["eval", "--model", "m", "--manifest", "c/manifest.jsonl", "--out", "nz", "--perturb", "noise:sigma=0.1,seed=4"],
    );
    let noisy = load_report(tmp.path().join("nz/report.json")).unwrap();
    assert_eq!(noisy.meta.perturbation.as_deref(), Some("gaussian_noise:sigma=0.1,seed=4"));
    assert_eq!(noisy.total, 20);
    assert_eq!(noisy.meta.model_id, train.meta.model_id);

    let out = run(tmp.path(), &["report", "tr/report.json", "nz/report.json"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("\"gaussian_noise:sigma=0.1,seed=4\""));
}

#[test]
fn eval_fails_soft_on_broken_images_and_bins_edits() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), "c", &["--edit-ratios", "0.1,0.25,0.5", "--edit-per-class", "2"]);
    quick_train(tmp.path(), "c/manifest.jsonl", "m");
    run(
        tmp.path(),
        &["eval", "--model", "m", "--manifest", "c/edited.jsonl", "--split", "all", "--out", "e", "--post-edit"],
    );
    let bins = fs::read_to_string(tmp.path().join("e/edit_bins.csv")).unwrap();
    let rows: Vec<&str> = bins.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, vec!["small", "medium", "large"]);

    let m = attrikit::corpus::load_manifest(&manifest).unwrap();
    let victim = m.records().iter().find(|r| r.split == Split::Test).unwrap();
    fs::write(m.resolve(&victim.image_path), b"junk").unwrap();
    let out = run(tmp.path(), &["eval", "--model", "m", "--manifest", "c/manifest.jsonl", "--out", "b"]);
    assert_eq!(out.status.code(), Some(2));
    let r = load_report(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(r.meta.failures.len(), 1);
    assert_eq!(r.total, 19);
    assert!(fs::read_to_string(tmp.path().join("b/failures.tsv")).unwrap().starts_with(&victim.image_path));
}

#[test]
fn patch_sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    run(tmp.path(), &["synth", "--out", "c", "--train", "3", "--val", "1", "--test", "1", "--size", "256"]);
    run(
        tmp.path(),
        &[
            "sweep", "--manifest", "c/manifest.jsonl", "--out", "s", "--axis", "patch_k", "--values",
            "2,4,8,16,32,64,128,256", "--repr", "pixel", "--grid", "2", "--epochs", "5", "--warmup-epochs", "1",
        ],
    );
    let csv = fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis_value,accuracy,macro_precision,macro_recall,macro_f1");
    let ks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, vec!["2", "4", "8", "16", "32", "64", "128", "256"]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("s/sweep.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 8);
}

#[test]
fn color_density_integrates_to_one_per_channel() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "c", &[]);
    run(tmp.path(), &["analyze", "--manifest", "c/manifest.jsonl", "--out", "a", "--bins", "20"]);
    let csv = fs::read_to_string(tmp.path().join("a/gen_sine_color_density.csv")).unwrap();
    let mut sums = [0.0; 3];
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        for c in 0..3 {
            sums[c] += v[2 + c] * (v[1] - v[0]);
        }
    }
    assert_eq!(csv.lines().count(), 21);
    for s in sums {
        assert!((s - 1.0).abs() < 1e-9, "{s}");
    }

    run(tmp.path(), &["analyze", "--manifest", "c/manifest.jsonl", "--out", "g", "--kind", "gram_density"]);
    assert_eq!(fs::read_dir(tmp.path().join("g")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with("_gram_density.csv")
    }).count(), 5);
}

#[test]
fn composition_counts_inserted_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let full = Image::from_fn(4, 4, 1, |_, _, _| 1.0);
    let left = Image::from_fn(4, 4, 1, |x, _, _| if x < 2 { 1.0 } else { 0.0 });
    let empty = Image::from_fn(4, 4, 1, |_, _, _| 0.0);
    for (name, img) in [("full", &full), ("left", &left), ("empty", &empty)] {
        img.save_png(tmp.path().join(format!("{name}.png"))).unwrap();
    }
    let layouts: [&[(&str, &str)]; 3] = [
        &[("person", "full"), ("dog", "left"), ("car", "left")],
        &[("person", "left"), ("dog", "left")],
        &[("person", "empty"), ("car", "empty"), ("tree", "full")],
    ];
    let records: Vec<SampleRecord> = layouts
        .iter()
        .enumerate()
        .map(|(i, layout)| {
            let mut r = SampleRecord::new(format!("img{i}.png"), "gen", Split::Test);
            for (class, mask) in layout.iter() {
                r.aux_maps.insert(format!("seg:{class}"), format!("{mask}.png"));
            }
            r
        })
        .collect();
    let manifest = attrikit::corpus::Manifest::from_records(records).unwrap();
    save_manifest(&manifest, tmp.path().join("m.jsonl")).unwrap();
    run(
        tmp.path(),
        &["analyze", "--manifest", "m.jsonl", "--out", "o", "--kind", "composition", "--focus", "person", "--top-k", "2"],
    );
    let counts = fs::read_to_string(tmp.path().join("o/composition.csv")).unwrap();
    assert_eq!(
        counts,
        "class,rank,inserted_class,image_count,total_images\nperson,1,dog,2,3\nperson,2,car,1,3\n"
    );
    let mask = fs::read_to_string(tmp.path().join("o/person_mask.csv")).unwrap();
    let first_row: Vec<f64> = mask.lines().next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first_row, vec![2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    assert!(tmp.path().join("o/person_mask.png").exists());
}

#[test]
fn flags_override_config_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("synth.toml"),
        "out = \"from_file\"\ntrain = 2\nval = 1\ntest = 1\nsize = 24\nseed = 9\n",
    )
    .unwrap();
    run(tmp.path(), &["--config", "synth.toml", "synth", "--seed", "4"]);
    let resolved: toml::Table = fs::read_to_string(tmp.path().join("from_file/run.toml")).unwrap().parse().unwrap();
    assert_eq!(resolved["seed"].as_integer(), Some(4));
    assert_eq!(resolved["size"].as_integer(), Some(24));
    assert_eq!(resolved["train"].as_integer(), Some(2));
    assert_eq!(resolved["edit_per_class"].as_integer(), Some(20));
    let m = attrikit::corpus::load_manifest(tmp.path().join("from_file/manifest.jsonl")).unwrap();
    assert_eq!(m.len(), 20);

    fs::write(tmp.path().join("train.toml"), "[train]\nepochs = 4\nwarmup_epochs = 1\nlr = 0.5\n").unwrap();
    run(
        tmp.path(),
        &["train", "--config", "train.toml", "--manifest", "from_file/manifest.jsonl", "--out", "m", "--lr", "0.02"],
    );
    let resolved: toml::Table = fs::read_to_string(tmp.path().join("m/run.toml")).unwrap().parse().unwrap();
    let train = resolved["train"].as_table().unwrap();
    assert_eq!(train["epochs"].as_integer(), Some(4));
    assert_eq!(train["lr"].as_float(), Some(0.02));
    assert_eq!(train["batch_size"].as_integer(), Some(128));
    assert_eq!(fs::read_to_string(tmp.path().join("m/history.csv")).unwrap().lines().count(), 5);
}

#[test]
fn invalid_input_exits_with_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "unknown_key = 1\n").unwrap();
    let out = bin().current_dir(tmp.path()).args(["--config", "bad.toml", "synth", "--out", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().current_dir(tmp.path()).args(["train", "--out", "m"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--manifest"));
    let out = bin()
        .current_dir(tmp.path())
        .args(["eval", "--model", "nowhere", "--manifest", "m.jsonl", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
