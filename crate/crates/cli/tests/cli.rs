use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fforge")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fforge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gw_prints_the_table() {
    let out = fforge(&["gw", "--r", "2", "--max-degree", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "1 2 1"));
    assert!(text.lines().any(|l| l == "3 8 12"));
    assert!(text.contains("verdict: pass"));
}

#[test]
fn bad_parameters_exit_with_two() {
    assert_eq!(fforge(&["gw", "--r", "0", "--max-degree", "2"]).status.code(), Some(2));
    assert_eq!(fforge(&["gw", "--r", "2"]).status.code(), Some(2));
    assert_eq!(fforge(&["fan", "--n", "7"]).status.code(), Some(2));
    assert_eq!(fforge(&["an", "--n", "1", "--random"]).status.code(), Some(2));
    assert_eq!(fforge(&["an", "--n", "3"]).status.code(), Some(2));
    assert_eq!(fforge(&["wdvv", "--potential", "/nonexistent", "--metric", "/nonexistent"]).status.code(), Some(2));
    assert_eq!(fforge(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn written_documents_check_clean() {
    let (phi, metric, euler, report) =
        (scratch("phi.json"), scratch("metric.json"), scratch("euler.json"), scratch("report.json"));
    let out = fforge(&[
        "gw",
        "--r",
        "2",
        "--max-degree",
        "3",
        "--check",
        "--potential-out",
        path_str(&phi),
        "--metric-out",
        path_str(&metric),
        "--euler-out",
        path_str(&euler),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let out = fforge(&[
        "--json",
        path_str(&report),
        "wdvv",
        "--potential",
        path_str(&phi),
        "--metric",
        path_str(&metric),
        "--euler",
        path_str(&euler),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["verdict"], "pass");
    assert_eq!(json["command"], "wdvv");
    assert_eq!(json["residuals"]["wdvv"], 0.0);
}

#[test]
fn tampered_potential_fails_with_one() {
    let (phi, metric) = (scratch("phi-bad.json"), scratch("metric-bad.json"));
    let out = fforge(&[
        "gw",
        "--r",
        "2",
        "--max-degree",
        "2",
        "--potential-out",
        path_str(&phi),
        "--metric-out",
        path_str(&metric),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&phi).unwrap()).unwrap();
    let terms = doc["terms"].as_array_mut().unwrap();
    let last = terms.last_mut().unwrap();
    last["num"] = serde_json::Value::String("7".into());
    std::fs::write(&phi, doc.to_string()).unwrap();
    let out = fforge(&["wdvv", "--potential", path_str(&phi), "--metric", path_str(&metric)]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL  wdvv"));
}

#[test]
fn fan_summary_line() {
    let out = fforge(&["fan", "--n", "4", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("75 cones, 24 maximal, verify: pass"));
    let out = fforge(&["fan", "--n", "3", "--locate", "3,-1,2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("[[1],[3],[2]]"));
}

#[test]
fn a2_point_from_file() {
    let coeffs = scratch("a2.json");
    std::fs::write(&coeffs, "[-3, 0]").unwrap();
    let out = fforge(&["an", "--n", "2", "--coeffs", path_str(&coeffs)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("rho    = [-1.000000000000+0.000000000000i, 1.000000000000+0.000000000000i]"), "{text}");
    assert!(text.contains("u      = [2.000000000000+0.000000000000i, -2.000000000000+0.000000000000i]"));
}

#[test]
fn random_unfoldings_pass() {
    let out = fforge(&["--seed", "4", "an", "--n", "4", "--random", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn twist_round_trip() {
    let (alg, twisted, back) = (scratch("alg.json"), scratch("twisted.json"), scratch("back.json"));
    std::fs::write(
        &alg,
        r#"{"dim": 2, "mode": "rational", "structure": [[["1","0"],["0","0"]],[["0","0"],["0","1"]]]}"#,
    )
    .unwrap();
    let out = fforge(&["twist", "--algebra", path_str(&alg), "--epsilon", "2,-1/3", "--out", path_str(&twisted)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    // Twisting back by the old identity restores the diagonal product.
    let out = fforge(&["twist", "--algebra", path_str(&twisted), "--epsilon", "1,1", "--out", path_str(&back)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&back).unwrap()).unwrap();
    assert_eq!(doc["structure"][0][0][0]["num"], "1");
    assert_eq!(doc["structure"][1][1][1]["num"], "1");
    assert_eq!(doc["structure"][0][1][0]["num"], "0");

    let out = fforge(&["twist", "--algebra", path_str(&alg), "--epsilon", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn algebra_reports_blocks() {
    let alg = scratch("jets.json");
    std::fs::write(
        &alg,
        r#"{"dim": 2, "mode": "rational", "structure": [[["1","0"],["0","1"]],[["0","1"],["0","0"]]]}"#,
    )
    .unwrap();
    let out = fforge(&["algebra", "--algebra", path_str(&alg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("blocks: [2]"));
    assert!(stdout(&out).contains("semisimple: false"));

    let broken = scratch("broken.json");
    std::fs::write(
        &broken,
        r#"{"dim": 2, "mode": "rational", "structure": [[["1","1"],["0","1"]],[["0","1"],["1","0"]]]}"#,
    )
    .unwrap();
    assert_eq!(fforge(&["algebra", "--algebra", path_str(&broken)]).status.code(), Some(1));
}

#[test]
fn assoc_accepts_potentials_and_tensors() {
    use fforge::algebra::PointAlgebra;
    use fforge::potentials::VectorPotential;
    use fforge::series::{int, TruncatedSeries};

    let c = VectorPotential::cubic_from_algebra(&PointAlgebra::diagonal(3), 4).unwrap();
    let (good, bad, tensor) = (scratch("c-good.json"), scratch("c-bad.json"), scratch("t.json"));
    std::fs::write(&good, serde_json::to_string(&c.to_doc()).unwrap()).unwrap();
    let out = fforge(&["assoc", "--potential", path_str(&good)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let t = c.structure_tensor().unwrap();
    std::fs::write(&tensor, serde_json::to_string(&t.to_doc()).unwrap()).unwrap();
    let out = fforge(&["assoc", "--tensor", path_str(&tensor)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let mut components = c.components().to_vec();
    let s = &components[0];
    let bump = TruncatedSeries::monomial(s.vars().clone(), s.order(), vec![1, 1, 1], int(1)).unwrap();
    components[0] = s.add(&bump).unwrap();
    let planted = VectorPotential::new(components).unwrap();
    std::fs::write(&bad, serde_json::to_string(&planted.to_doc()).unwrap()).unwrap();
    let out = fforge(&["assoc", "--potential", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS  flatness_agrees"));

    assert_eq!(fforge(&["assoc"]).status.code(), Some(2));
}
