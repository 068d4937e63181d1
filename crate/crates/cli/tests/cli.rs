use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_barypot");
const ENV: &str = "BARYPOT_OUTPUT_DIR";

fn barypot(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove(ENV);
    if let Some(dir) = out {
        cmd.env(ENV, dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a config into `dir` with `outputs` pointing at `dir/out`.
fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let out = dir.join("out");
    fs::write(&path, format!("outputs = {:?}\n{body}", out.to_str().unwrap())).unwrap();
    path
}

fn run_ok(cfg: &Path, out: Option<&Path>) {
    let o = barypot(&["run", cfg.to_str().unwrap()], out);
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                acc.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    if dir.exists() {
        walk(dir, dir, &mut acc);
    }
    acc
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn examples() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn uniform_nodes_n4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "scenario = \"nodes\"\nn_list = [4]\n[density]\nname = \"uniform\"\n");
    run_ok(&cfg, None);
    let csv = fs::read_to_string(tmp.path().join("out/n4/nodes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,x"));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let (i, x) = l.split_once(',').unwrap();
            (i.parse().unwrap(), x.parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, -1.0), (1, -0.5), (2, 0.0), (3, 0.5), (4, 1.0)]);
}

#[test]
fn manifest_lists_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "scenario = \"lebesgue\"\nn_list = [6, 10]\n");
    run_ok(&cfg, None);
    let out = tmp.path().join("out");
    let m = manifest(&out);
    assert_eq!(m["scenario"], "lebesgue");
    assert!(m["version"].as_str().unwrap().starts_with("barypot "));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["config"]["n_list"], serde_json::json!([6, 10]));
    let listed = m["files"].as_array().unwrap();
    assert_eq!(listed.len(), 4);
    for f in listed {
        let text = fs::read_to_string(out.join(f["path"].as_str().unwrap())).unwrap();
        assert!(!text.is_empty());
        if let Some(rows) = f["rows"].as_u64() {
            assert_eq!(text.lines().count() - 1, rows as usize);
        }
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("n6/lebesgue.json")).unwrap()).unwrap();
    for key in ["n", "lambda", "argmax_x"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(files(&out).len(), 5);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let bodies = [
        "scenario = \"weights\"\nn_list = [8, 16]\n[field]\nkind = \"poles\"\npoles = [{ re = 0.3, im = 0.4 }]\n",
        "scenario = \"sweep\"\nn_list = [10, 20, 40]\n[density]\nname = \"truncated_gaussian\"\nparams = [1.0]\n",
        "scenario = \"fh\"\nn_list = [10, 20, 30]\n[fh]\nmode = \"proportional\"\nc_fh = 0.5\n",
        "scenario = \"contour\"\nn_list = [8]\n[grid.contour]\nre_range = [-1.2, 1.2]\nim_range = [-0.5, 0.5]\nnx = 13\nny = 7\n",
    ];
    for body in bodies {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path(), body);
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        run_ok(&cfg, Some(&a));
        run_ok(&cfg, Some(&b));
        let (mut fa, mut fb) = (files(&a), files(&b));
        // The manifest carries the wall time; everything else must match.
        let (ma, mb) = (fa.remove("manifest.json").unwrap(), fb.remove("manifest.json").unwrap());
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{body}");
        let strip = |bytes: &[u8]| {
            let mut v: Value = serde_json::from_slice(bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        };
        assert_eq!(strip(&ma), strip(&mb));
    }
}

#[test]
fn csv_headers() {
    let cases = [
        ("scenario = \"weights\"\nn_list = [4]\n", "n4/weights.csv", "k,x,sign,log_abs_w"),
        ("scenario = \"lebesgue\"\nn_list = [4]\n", "n4/lebesgue.csv", "x,lambda"),
        ("scenario = \"contour\"\nn_list = [4]\n", "n4/contour.csv", "re,im,u"),
        (
            "scenario = \"sweep\"\nn_list = [10, 20, 40]\n",
            "sweep.csv",
            "n,lambda,log_lambda,weight_ratio_log,delta_minus,delta_plus,d,rho,lb_thm41_log,ub_thm53,ok_thm34,ok_cor,ok_thm41,ok_thm53",
        ),
        ("scenario = \"fh\"\nn_list = [10]\n[fh]\nmode = \"fixed\"\nd = 3\n", "fh_report.csv", "n,d,range_u_hat,ratio_log"),
        ("scenario = \"fh\"\nn_list = [10]\n[fh]\nmode = \"fixed\"\nd = 3\n", "n10/poles.csv", "re,im,residual"),
    ];
    for (body, file, header) in cases {
        let tmp = tempfile::tempdir().unwrap();
        run_ok(&config(tmp.path(), body), None);
        let text = fs::read_to_string(tmp.path().join("out").join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{file}");
    }
}

#[test]
fn contour_marks_nodes_with_inf() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "scenario = \"contour\"\nn_list = [2]\n[grid.contour]\nre_range = [-1.0, 1.0]\nim_range = [0.0, 1.0]\nnx = 3\nny = 2\n";
    run_ok(&config(tmp.path(), body), None);
    let text = fs::read_to_string(tmp.path().join("out/n2/contour.csv")).unwrap();
    let u: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(&u[..3], ["inf", "inf", "inf"]);
    assert!(u[3..].iter().all(|s| s.parse::<f64>().unwrap().is_finite()));
}

#[test]
fn repro_fig1_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "scenario = \"repro_fig1\"\nn_list = [20, 40, 80]\n");
    run_ok(&cfg, None);
    let out = tmp.path().join("out");
    for tag in ["a", "b", "c"] {
        let text = fs::read_to_string(out.join(format!("fig1_{tag}_sweep.csv"))).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert!(header.contains(&"lambda") && header.contains(&"weight_ratio_log"));
        assert_eq!(text.lines().count(), 4);
    }
    let rates: Value = serde_json::from_str(&fs::read_to_string(out.join("fig1_rates.json")).unwrap()).unwrap();
    assert!((rates["d_1"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-8);
    for k in ["d_2", "d_3"] {
        assert!(rates[k].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn repro_fig4_pointwise_series() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&config(tmp.path(), "scenario = \"repro_fig4\"\nn_list = [20, 40, 60]\n"), None);
    let out = tmp.path().join("out");
    for k in 1..=3 {
        assert!(out.join(format!("fig4_example{k}_sweep.csv")).exists());
    }
    let text = fs::read_to_string(out.join("fig4_pointwise.csv")).unwrap();
    let x_hats: std::collections::BTreeSet<String> =
        text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    let got: Vec<f64> = x_hats.iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(got.len(), 4);
    for x in [0.0, 0.25, 0.5, 0.75] {
        assert!(got.contains(&x));
    }
}

#[test]
fn example_configs_validate() {
    let configs = examples();
    assert_eq!(configs.len(), 9);
    for path in configs {
        let o = barypot(&["validate", path.to_str().unwrap()], None);
        assert_eq!(code(&o), 0, "{}: {}", path.display(), stderr(&o));
    }
}

#[test]
fn validate_reports_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("scenario = \"nodes\"\nn_list = []\n", "n_list"),
        ("scenario = \"nodes\"\nn_list = [8, 4]\n", "n_list"),
        ("scenario = \"nodes\"\nn_list = [4]\nbogus = 1\n", "bogus"),
        ("scenario = \"lebesgue\"\nn_list = [4]\n[grid]\nsamples_per_gap = 3\n", "samples_per_gap"),
        (
            "scenario = \"weights\"\nn_list = [4]\n[field]\nkind = \"poles\"\npoles = [{ re = 0.5, im = 0.0 }]\n",
            "0.5",
        ),
        ("scenario = \"nodes\"\nn_list = [4]\n[density]\nname = \"lorentzian\"\n", "density"),
    ];
    for (body, needle) in cases {
        let cfg = config(tmp.path(), body);
        let o = barypot(&["validate", cfg.to_str().unwrap()], None);
        assert_eq!(code(&o), 1, "{body}");
        assert!(stderr(&o).contains(needle), "{body}: {}", stderr(&o));
    }
    let fig6 = config(tmp.path(), "scenario = \"repro_fig6\"\n");
    let o = barypot(&["validate", fig6.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
}

#[test]
fn missing_config_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("absent.toml");
    for sub in ["validate", "run"] {
        assert_eq!(code(&barypot(&[sub, path.to_str().unwrap()], None)), 3);
    }
}

#[test]
fn numerical_failure_exits_2_and_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    // n = 80 is beyond the pole-recovery cap; n = 20 alone would succeed.
    let cfg = config(tmp.path(), "scenario = \"fh\"\nn_list = [20, 80]\n[fh]\nmode = \"fixed\"\nd = 2\n");
    let o = barypot(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(files(&tmp.path().join("out")).is_empty());
}

#[test]
fn failed_rerun_keeps_previous_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let good = config(tmp.path(), "scenario = \"nodes\"\nn_list = [4]\n");
    run_ok(&good, None);
    let before = files(&tmp.path().join("out"));
    let bad = config(tmp.path(), "scenario = \"fh\"\nn_list = [80]\n[fh]\nmode = \"fixed\"\nd = 2\n");
    assert_eq!(code(&barypot(&["run", bad.to_str().unwrap()], None)), 2);
    // Nothing was computed successfully, so the previous run stays intact.
    assert_eq!(files(&tmp.path().join("out")), before);
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = config(tmp.path(), "scenario = \"nodes\"\nn_list = [4]\n");
    let o = barypot(&["run", cfg.to_str().unwrap()], Some(&blocker.join("sub")));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn env_overrides_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "scenario = \"nodes\"\nn_list = [3]\n");
    let elsewhere = tmp.path().join("elsewhere");
    run_ok(&cfg, Some(&elsewhere));
    assert!(elsewhere.join("n3/nodes.csv").exists());
    assert!(elsewhere.join("manifest.json").exists());
    assert!(!tmp.path().join("out").exists());
}
