use std::process::Command;

use thicklab::presets::PresetReport;
use thicklab::theorem::ConditionReport;
use thicklab::thickness::ThicknessReport;
use thicklab::verify::{CertifyOutcome, CoverReport};

fn thicklab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_thicklab")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn thickness_examples() {
    let (code, out, _) = thicklab(&["thickness", "--json", "--set", r#"{"type":"homogeneous_ifs","lambda":"1/3"}"#]);
    assert_eq!(code, 0);
    let r: ThicknessReport = serde_json::from_str(&out).unwrap();
    assert!(r.exact);
    assert_eq!(r.value.endpoint_strings(), ("1".to_string(), "1".to_string()));

    let two = r#"{"type":"two_map_ifs","lambda1":"1/2","lambda2":"1/5"}"#;
    let (code, out, _) = thicklab(&["thickness", "--json", "--set", two]);
    assert_eq!(code, 0, "{out}");
    let r: ThicknessReport = serde_json::from_str(&out).unwrap();
    assert_eq!(r.value.endpoint_strings().0, "2/3");

    let cf = r#"{"type":"continued_fraction","t":1,"digits":[1,2,3,4,5,6,7]}"#;
    let (code, out, _) = thicklab(&["thickness", "--json", "--set", cf, "--depth", "3"]);
    assert_eq!(code, 0);
    let r: ThicknessReport = serde_json::from_str(&out).unwrap();
    let target = (42.0 + 24.0 * 77f64.sqrt()) / 91.0;
    assert!(r.value.lo_f64() <= target && target <= r.value.hi_f64());
}

#[test]
fn check_examples() {
    let (code, out, _) = thicklab(&["check", "--json", "--f", "x+y", "--set", "C", "--set", "C"]);
    assert_eq!(code, 0);
    let r: ConditionReport = serde_json::from_str(&out).unwrap();
    assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&serde_json::from_str::<ConditionReport>(&out).unwrap()).unwrap());
    let (code, out, _) = thicklab(&["check", "--f", "x*y", "--set", "C", "--set", "C"]);
    assert!(code == 1 || code == 2);
    assert!(out.contains("witness"), "{out}");
    let (code, _, err) = thicklab(&["check", "--f", "x+y", "--set", "C"]);
    assert_eq!(code, 3);
    assert!(err.contains("arity"), "{err}");
}

#[test]
fn cover_certify_examples() {
    let (code, out, _) = thicklab(&["cover", "--f", "x*y", "--set", "C", "--set", "C", "--depth", "1"]);
    assert_eq!(code, 0);
    assert!(out.contains("gap (1/3, 4/9)"), "{out}");
    let (_, out, _) = thicklab(&["cover", "--json", "--f", "x*y", "--set", "C", "--set", "C", "--depth", "3"]);
    let r: CoverReport = serde_json::from_str(&out).unwrap();
    assert_eq!(serde_json::from_str::<CoverReport>(&serde_json::to_string(&r).unwrap()).unwrap(), r);

    let (code, out, _) = thicklab(&["certify", "--json", "--f", "x*y", "--set", "C", "--set", "C", "--z", "2/5"]);
    assert_eq!(code, 0);
    match serde_json::from_str::<CertifyOutcome>(&out).unwrap() {
        CertifyOutcome::Certified(c) => assert_eq!(c.depth, 1),
        other => panic!("{other:?}"),
    }
    let (code, _, _) = thicklab(&["certify", "--f", "x+y", "--set", "C", "--set", "C", "--z", "1", "--max-depth", "6"]);
    assert_eq!(code, 2);
}

#[test]
fn presets_from_cli() {
    let (code, out, _) = thicklab(&["reproduce", "--json", "steinhaus_sum"]);
    assert_eq!(code, 0);
    let r: PresetReport = serde_json::from_str(&out).unwrap();
    assert!(r.passed);
    let (code, out, _) = thicklab(&["list-presets"]);
    assert_eq!(code, 0);
    assert!(out.contains("divis_f3_gap"));
    assert_eq!(thicklab(&["reproduce", "no_such_preset"]).0, 3);
}

#[test]
fn fault_injection_exits_3() {
    assert_eq!(thicklab(&["thickness", "--set", r#"{"type":"homogeneous_ifs","lambda":"#]).0, 3);
    assert_eq!(thicklab(&["thickness", "--set", r#"{"type":"homogeneous_ifs","lambda":"3/5"}"#]).0, 3);
    assert_eq!(thicklab(&["check", "--f", "x+*y", "--set", "C", "--set", "C"]).0, 3);
    assert_eq!(thicklab(&["check", "--f", "x^-1 + y", "--set", "C", "--set", "C"]).0, 3);
    assert_eq!(thicklab(&["check", "--f", "x+y", "--set", "C", "--set", "C", "--tol", "0"]).0, 3);
    assert_eq!(thicklab(&["cover", "--f", "x+y", "--set", "C", "--set", "C", "--depth", "6", "--budget", "100"]).0, 3);
    let out = Command::new(env!("CARGO_BIN_EXE_thicklab"))
        .args(["cover", "--f", "x+y", "--set", "C", "--set", "C", "--depth", "6"])
        .env("THICKLAB_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(thicklab(&["frobnicate"]).0, 3);
}

#[test]
fn set_from_file() {
    let dir = std::env::temp_dir().join(format!("thicklab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("k.json");
    std::fs::write(&path, r#"{"type":"homogeneous_ifs","lambda":"2/5"}"#).unwrap();
    let (code, out, _) = thicklab(&["thickness", "--set", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("[2, 2]"), "{out}");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn output_independent_of_threads() {
    let args = ["cover", "--json", "--f", "x*y + y", "--set", "C", "--set", "C", "--depth", "6"];
    let one = thicklab(&[&args[..], &["--threads", "1"]].concat());
    let four = thicklab(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(one.1, four.1);
}
