use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qg")).args(args).output().expect("qg runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_torus_has_unit_meridian_curvature() {
    let out = qg(&["generate", "--kind", "torus", "--set", "r=1", "--set", "R=3", "--grid-nu", "64"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = json(&out);
    assert_eq!((s["nu"].as_u64(), s["nv"].as_u64()), (Some(64), Some(64)));
    let k1 = s["kappa1"].as_array().unwrap();
    assert_eq!(k1.len(), 64 * 64);
    assert!(k1.iter().all(|k| (k.as_f64().unwrap() - 1.0).abs() < 1e-14));
    assert_eq!(s["curvature_line"], Value::Bool(true));
}

#[test]
fn generate_flags() {
    let s = json(&qg(&["generate", "--kind", "sphere", "--grid-nu", "9"]));
    assert_eq!(s["umbilic"], Value::Bool(true));
    let g = json(&qg(&["generate", "--kind", "quadric_graph", "--grid-nu", "9"]));
    assert_eq!(g["asymptotic"], Value::Bool(true));
    assert_eq!(g["geometry"], "projective3");
}

#[test]
fn invalid_generator_parameters_fail() {
    let out = qg(&["generate", "--kind", "torus", "--set", "r=3", "--set", "R=1", "--grid-nu", "9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("0 < r < R"), "{}", stderr(&out));
}

#[test]
fn quadric_has_zero_energy() {
    let e = json(&qg(&["energy", "--kind", "quadric_graph", "--grid-nu", "17"]));
    assert!(e["total"].as_f64().unwrap().abs() <= 1e-10, "{}", e["total"]);
    assert_eq!(e["density"].as_array().unwrap().len(), 17 * 17);
}

#[test]
fn config_file_then_flags_then_set() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# ellipsoid patch\nkind = ellipsoid\ngrid_nu = 9\ngrid-nv = 11\n").unwrap();
    let c = cfg.to_str().unwrap();
    let s = json(&qg(&["generate", "--config", c]));
    assert_eq!((s["nu"].as_u64(), s["nv"].as_u64()), (Some(9), Some(11)));
    let s = json(&qg(&["generate", "--config", c, "--grid-nu", "13"]));
    assert_eq!((s["nu"].as_u64(), s["nv"].as_u64()), (Some(13), Some(11)));
    let s = json(&qg(&["generate", "--config", c, "--grid-nu", "13", "--set", "grid-nu=7"]));
    assert_eq!(s["nu"].as_u64(), Some(7));
}

#[test]
fn usage_errors_exit_two() {
    let out = qg(&["check", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown suite"));
    assert_eq!(qg(&["check"]).status.code(), Some(2));
    assert_eq!(qg(&["generate", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(qg(&["generate", "--kind", "torus", "--grid-nu", "3"]).status.code(), Some(2));
    assert_eq!(qg(&["lift"]).status.code(), Some(2));
    assert_eq!(qg(&["merge"]).status.code(), Some(2));
}

#[test]
fn pq_identity_on_ellipsoid_passes() {
    let out = qg(&["check", "pq-identity", "--kind", "ellipsoid", "--grid-nu", "65"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["suite"], "pq-identity");
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["metrics"]["max_deviation"].as_f64().unwrap() <= 1e-3);
    assert!(r["convergence_orders"]["max_deviation"].as_f64().unwrap() >= 1.8);
}

#[test]
fn conformality_on_torus_passes() {
    let out = qg(&["check", "conformality", "--kind", "torus", "--grid-nu", "33"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["pass"], Value::Bool(true));
}

#[test]
fn missed_threshold_exits_one() {
    let out = qg(&["check", "orthogonality", "--grid-nu", "17", "--tolerance", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["pass"], Value::Bool(false));
    assert_eq!(r["checks"][0]["limit"].as_f64(), Some(1e-12));
}

#[test]
fn reports_are_deterministic_and_record_the_seed() {
    let args = ["check", "invariance", "--grid-nu", "33", "--set", "transforms=3", "--set", "levels=2", "--seed", "5"];
    let (a, b) = (qg(&args), qg(&args));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"].as_u64(), Some(5));
    let mut other = args.to_vec();
    other[9] = "6";
    let c = json(&qg(&other));
    assert_eq!(c["seed"].as_u64(), Some(6));
    assert_ne!(c["metrics"]["group_deviation"], json(&a)["metrics"]["group_deviation"]);
}

#[test]
fn merge_fits_orders_across_refinements() {
    let dir = TempDir::new().unwrap();
    let mut paths = Vec::new();
    for n in ["17", "33", "65"] {
        let p = dir.path().join(format!("pq{n}.json"));
        let out = qg(&["check", "pq-identity", "--grid-nu", n, "--set", "levels=1", "--tolerance", "1e-2", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        paths.push(p.to_str().unwrap().to_string());
    }
    let args: Vec<&str> = std::iter::once("merge").chain(paths.iter().map(|s| s.as_str())).collect();
    let out = qg(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = json(&out);
    assert_eq!(m["reports"].as_u64(), Some(3));
    let order = m["orders"]["pq-identity/ellipsoid"]["max_deviation"].as_f64().unwrap();
    assert!(order >= 1.8, "{order}");
    assert_eq!(m["matrix"]["pq-identity/ellipsoid"]["65x65"], Value::Bool(true));

    let single = json(&qg(&["merge", &paths[0]]));
    assert_eq!(single["inputs"][0], read(Path::new(&paths[0])));
}

#[test]
fn merge_rejects_foreign_files() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("surface.json");
    assert!(qg(&["generate", "--kind", "sphere", "--grid-nu", "5", "--out", p.to_str().unwrap()]).status.success());
    let out = qg(&["merge", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not a check report"), "{}", stderr(&out));
}

#[test]
fn pipeline_commands_read_generated_files() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("ellipsoid.json");
    let ps = p.to_str().unwrap();
    assert!(qg(&["generate", "--kind", "ellipsoid", "--grid-nu", "21", "--out", ps]).status.success());

    let lift = json(&qg(&["lift", "--input", ps]));
    assert_eq!(lift["signature"], serde_json::json!([4, 2]));
    assert_eq!(lift["l"].as_array().unwrap().len(), 21 * 21);
    assert!(lift["residuals"]["nullity"].as_f64().unwrap() < 1e-12);

    let gauss = json(&qg(&["gauss", "--input", ps]));
    assert_eq!(gauss["signature_z"], "(1,1)");
    assert_eq!(gauss["projector"][0].as_array().unwrap().len(), 36);

    let t = json(&qg(&["tension", "--input", ps]));
    assert!(t["image_angle"].as_f64().unwrap() < 1e-2);

    let conf = qg(&["check", "conformality", "--input", ps]);
    assert!(conf.status.success(), "{}", stderr(&conf));
    let r = json(&conf);
    assert_eq!(r["surface"], ps);
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("single grid")));
}

#[test]
fn deform_and_dualize_outputs() {
    let d = json(&qg(&["deform", "--kind", "torus", "--grid-nu", "17", "--lambda-re", "-2"]));
    assert_eq!(d["lambda"], serde_json::json!([-2.0, 0.0]));
    assert_eq!(d["connection"]["lambda"], serde_json::json!([-2.0, 0.0]));
    assert!(d["projector_change"].as_f64().unwrap() < 1e-9);

    let bad = qg(&["deform", "--kind", "torus", "--grid-nu", "17", "--lambda-im", "1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("not admissible"), "{}", stderr(&bad));
    let nonharmonic = qg(&["deform", "--kind", "ellipsoid", "--grid-nu", "17"]);
    assert!(stderr(&nonharmonic).contains("not harmonic"), "{}", stderr(&nonharmonic));

    let u = json(&qg(&["dualize", "--kind", "ellipsoid", "--grid-nu", "17"]));
    assert_eq!(u["signature"], serde_json::json!([4, 2]));
    assert_eq!(u["dual_signature"], serde_json::json!([3, 3]));
    assert!(u["dual_imaginary"].as_f64().unwrap() <= 1e-10);
    assert!(u["round_trip"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn descent_output_is_monotone() {
    let d = json(&qg(&["descent", "--kind", "ellipsoid", "--grid-nu", "17", "--set", "steps=5"]));
    let e: Vec<f64> = d["energies"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(e.len(), 6);
    assert!(e.windows(2).all(|w| w[1] <= w[0]), "{e:?}");
    assert_eq!(d["surface"]["nu"].as_u64(), Some(17));
}
