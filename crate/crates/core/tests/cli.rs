mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{fixture, png_bytes, write_script};

fn gridsight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsight")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn image_dir(root: &Path, n: usize) -> PathBuf {
    let dir = root.join("images");
    fs::create_dir_all(&dir).unwrap();
    for i in 0..n {
        let img = image::RgbImage::from_fn(20, 15, |x, y| image::Rgb([(x * 10) as u8, (y * 15) as u8, i as u8]));
        img.save(dir.join(format!("img{i:03}.png"))).unwrap();
    }
    dir
}

/// Files under `root`, relative, sorted.
fn tree(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let o = gridsight(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&gridsight(&[])), 1);
    for sub in ["split", "preprocess", "augment", "evaluate", "train", "fetch-tiles", "census", "report"] {
        let o = gridsight(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--output"), "{sub}");
    }
    assert_eq!(code(&gridsight(&["split", "--input", "x"])), 1);
}

#[test]
fn split_is_reproducible_and_stays_in_output() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_dir(dir.path(), 20);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o =
            gridsight(&["split", "--input", s(&images), "--ratios", "0.7,0.2,0.1", "--seed", "42", "--output", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(tree(&a), vec!["manifest.json"]);
    let m = gridsight::model::DatasetManifest::load(&a.join("manifest.json")).unwrap();
    assert_eq!(m.count(gridsight::model::Split::Train), 14);

    let o = gridsight(&["split", "--input", s(&images), "--ratios", "0.7,0.2,0.2", "--output", s(&a)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_dir(dir.path(), 10);
    let cfg = dir.path().join("gridsight.toml");
    fs::write(&cfg, "[split]\nratios = [0.5, 0.5, 0.0]\nseed = 9\n").unwrap();
    let out = dir.path().join("o");
    let o = gridsight(&["--config", s(&cfg), "split", "--input", s(&images), "--output", s(&out), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = gridsight::model::DatasetManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.seed, 3);
    assert_eq!(m.count(gridsight::model::Split::Val), 5);
}

#[test]
fn preprocess_then_augment_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_dir(dir.path(), 6);
    let labels = dir.path().join("labels");
    fs::create_dir_all(&labels).unwrap();
    for i in 0..6 {
        fs::write(labels.join(format!("img{i:03}.txt")), "0 0.5 0.5 0.4 0.4\n").unwrap();
    }
    let pre = dir.path().join("pre");
    let o = gridsight(&[
        "preprocess",
        "--input",
        s(&images),
        "--labels",
        s(&labels),
        "--target",
        "32",
        "--output",
        s(&pre),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = image::open(pre.join("images/img000.png")).unwrap();
    assert_eq!((img.width(), img.height()), (32, 32));
    let l = fs::read_to_string(pre.join("labels/img000.txt")).unwrap();
    assert_eq!(l, "0 0.500000 0.500000 0.400000 0.300000\n");

    let split = dir.path().join("split");
    let o = gridsight(&["split", "--input", s(&pre.join("images")), "--ratios", "0.5,0.5,0", "--output", s(&split)]);
    assert_eq!(code(&o), 0);
    let aug = dir.path().join("aug");
    let o = gridsight(&[
        "augment",
        "--manifest",
        s(&split.join("manifest.json")),
        "--images",
        s(&pre.join("images")),
        "--labels",
        s(&pre.join("labels")),
        "--rotations",
        "15,-15",
        "--hue-copies",
        "1",
        "--output",
        s(&aug),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = gridsight::model::DatasetManifest::load(&aug.join("manifest.json")).unwrap();
    assert_eq!(m.count(gridsight::model::Split::Train), 3 * 3 * 2);
    assert_eq!(fs::read_dir(aug.join("images")).unwrap().count(), 15);
}

#[test]
fn evaluate_writes_metrics_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    fs::create_dir_all(&gt).unwrap();
    fs::create_dir_all(&pred).unwrap();
    fs::write(gt.join("a.txt"), "0 0.3 0.3 0.2 0.2\n1 0.7 0.7 0.2 0.2\n").unwrap();
    fs::write(pred.join("a.txt"), "0 0.3 0.3 0.2 0.2 0.9\n1 0.1 0.9 0.1 0.1 0.8\n").unwrap();
    let out = dir.path().join("eval");
    let o = gridsight(&[
        "evaluate",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--iou",
        "0.5",
        "--format",
        "json",
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["map50"], 0.5);
    assert!(out.join("metrics.json").is_file() && out.join("report.txt").is_file());

    fs::write(pred.join("a.txt"), "0 0.3 0.3 0.2\n").unwrap();
    let o = gridsight(&["evaluate", "--gt", s(&gt), "--pred", s(&pred), "--output", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_live_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "t.sh",
        "for i in 1 2 3 4 5 6; do [ -f \"$GRIDSIGHT_STOP_FILE\" ] && exit 0; echo \"{\\\"epoch\\\": $i, \\\"map50\\\": 0.5, \\\"seconds\\\": 1.5}\"; sleep 0.05; done\n",
    );
    let run = dir.path().join("run");
    let o = gridsight(&[
        "train",
        "--adapter",
        s(&script),
        "--model",
        "m",
        "--component",
        "reactor",
        "--patience",
        "2",
        "--format",
        "json",
        "--output",
        s(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: gridsight::harness::TrainRunResult = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((r.best_epoch, r.last_epoch), (1, 3));
    assert!(run.join("STOP").exists());

    let replay = dir.path().join("replay");
    let o = gridsight(&[
        "train",
        "--replay",
        s(&run.join("history")),
        "--model",
        "m",
        "--component",
        "reactor",
        "--patience",
        "2",
        "--format",
        "json",
        "--output",
        s(&replay),
    ]);
    assert_eq!(code(&o), 0);
    let again: gridsight::harness::TrainRunResult = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(again, r.without_wall_clock());

    let crash = write_script(dir.path(), "c.sh", "exit 7\n");
    let o = gridsight(&[
        "train",
        "--adapter",
        s(&crash),
        "--model",
        "m",
        "--component",
        "c",
        "--output",
        s(&dir.path().join("c")),
    ]);
    assert_eq!(code(&o), 4);
}

#[test]
fn fetch_then_census_with_detector() {
    let dir = tempfile::tempdir().unwrap();
    let provider = dir.path().join("provider");
    fs::create_dir_all(&provider).unwrap();
    for id in ["S1", "S2", "S3", "S4"] {
        fs::write(provider.join(format!("{id}.png")), png_bytes(8, 8, [5, 5, 5])).unwrap();
    }
    let tiles = dir.path().join("tiles");
    let sites = fixture("census/sites.csv");
    let o = gridsight(&[
        "fetch-tiles",
        "--sites",
        s(&sites),
        "--provider-dir",
        s(&provider),
        "--provider-max-px",
        "2048",
        "--jobs",
        "2",
        "--output",
        s(&tiles),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let index = gridsight::geotile::TileIndex::load(&tiles).unwrap();
    assert_eq!(index.tiles.iter().filter(|t| t.ok).count(), 4);
    assert_eq!(index.rejected_rows.len(), 1);
    assert!(index.tiles.iter().filter(|t| t.ok).all(|t| t.px == Some(2048)));

    let detect = write_script(dir.path(), "detect.sh", "echo '2 0.5 0.5 0.1 0.1 0.77' > \"$2\"\n");
    let out = dir.path().join("census");
    let o = gridsight(&[
        "census",
        "--sites",
        s(&sites),
        "--tiles",
        s(&tiles),
        "--detector",
        &format!("{} {{image}} {{output}}", s(&detect)),
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("Reactors\t4\n"), "{summary}");
    assert!(summary.contains("# sites_failed: 1\n"));
}

#[test]
fn fetch_with_every_site_failing_is_an_external_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let o = gridsight(&[
        "fetch-tiles",
        "--sites",
        s(&fixture("census/sites.csv")),
        "--provider-dir",
        s(&empty),
        "--output",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn census_from_predictions_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let args = |fmt: &'static str, out: &Path| -> Vec<String> {
        [
            "census",
            "--sites",
            s(&fixture("census/sites.csv")),
            "--predictions",
            s(&fixture("census/predictions")),
            "--format",
            fmt,
            "--output",
            s(out),
        ]
        .iter()
        .map(|x| x.to_string())
        .collect()
    };
    let out = dir.path().join("a");
    let a = args("table", &out);
    let o = gridsight(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.ends_with("Component\t# of Components\nCircuit Breakers\t5\nTransformers\t4\nReactors\t2\n"),
        "{text}"
    );
    let mut files = tree(&out);
    files.sort();
    assert_eq!(files, vec!["sites.csv", "sites.geojson", "summary.txt"]);
    let b = args("json", &dir.path().join("b"));
    let o = gridsight(&b.iter().map(String::as_str).collect::<Vec<_>>());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failed_site_ids"], serde_json::json!(["S5"]));
}

#[test]
fn report_renders_fixture_results() {
    let dir = tempfile::tempdir().unwrap();
    let results: Vec<gridsight::harness::TrainRunResult> =
        serde_json::from_str(&fs::read_to_string(fixture("comparison_results.json")).unwrap()).unwrap();
    let mut paths = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let p = dir.path().join(format!("r{i}.json"));
        fs::write(&p, serde_json::to_string(r).unwrap()).unwrap();
        paths.push(p);
    }
    let out = dir.path().join("report");
    let mut args = vec!["report".to_string(), "--output".into(), s(&out).into(), "--results".into()];
    args.extend(paths.iter().map(|p| s(p).to_string()));
    let o = gridsight(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with(&fs::read_to_string(fixture("model_table.golden")).unwrap()));
    assert!(out.join("report.json").is_file());
}
