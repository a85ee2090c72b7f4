use std::process::{Command, Output};

use serde_json::Value;

fn qka(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qka"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = qka(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn honest_original_report() {
    let r = report(&[
        "run", "--scenario", "honest-original", "--participants", "4", "--clusters", "8",
        "--trials", "10", "--seed", "7",
    ]);
    assert_eq!(r["aggregates"]["agreement_rate"], 1.0);
    assert_eq!(r["aggregates"]["detection_rate"], 0.0);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["spec"]["scenario"], "honest-original");
    assert_eq!(r["trials"].as_array().unwrap().len(), 10);
    assert!(r["version"].as_str().unwrap().starts_with("qka-sim/"));
    assert!(r["generated_at_unix"].is_u64());
}

#[test]
fn collusion_report_fixes_the_key() {
    let r = report(&[
        "run", "--scenario", "collusion-original", "--target-key", "0xabababab",
        "--trials", "10", "--seed", "5",
    ]);
    assert_eq!(r["aggregates"]["manipulation_success_rate"], 1.0);
    assert_eq!(r["aggregates"]["detection_rate"], 0.0);
    for t in r["trials"].as_array().unwrap() {
        assert_eq!(t["final_key"], "abababab");
    }
}

#[test]
fn shield_toggle_changes_the_improved_attack() {
    let base = [
        "run", "--scenario", "collusion-improved", "--photons", "16", "--target-key", "beef",
        "--trials", "40", "--seed", "2",
    ];
    let shielded = report(&base);
    assert!(shielded["aggregates"]["manipulation_success_rate"].as_f64().unwrap() < 0.2);
    let mut open = base.to_vec();
    open.push("--no-shield");
    let open = report(&open);
    assert_eq!(open["aggregates"]["manipulation_success_rate"], 1.0);
    assert_eq!(open["aggregates"]["extraction_accuracy_mean"], 1.0);
    assert_eq!(open["spec"]["hadamard_shield"], false);
}

#[test]
fn reports_match_apart_from_the_timestamp() {
    let dir = std::env::temp_dir().join(format!("qka-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.join(name);
        let out = qka(&[
            "run", "--scenario", "eve-improved", "--eve-fraction", "0.3", "--trials", "20",
            "--seed", "99", "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let text = std::fs::read_to_string(&path).unwrap();
        let stripped: Vec<&str> = text.lines().filter(|l| !l.contains("generated_at_unix")).collect();
        texts.push(stripped.join("\n"));
    }
    assert_eq!(texts[0], texts[1]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn transcript_flag_adds_transcripts() {
    let r = report(&["run", "--scenario", "honest-improved", "--trials", "1", "--transcript", "--photons", "4"]);
    let events = r["trials"][0]["transcript"].as_array().unwrap();
    assert!(events.iter().any(|e| e["event"] == "quantum"));
    let r = report(&["run", "--scenario", "honest-improved", "--trials", "1", "--photons", "4"]);
    assert!(r["trials"][0].get("transcript").is_none());
}

#[test]
fn invalid_specs_exit_with_one_and_name_the_field() {
    let cases: &[(&[&str], &str)] = &[
        (&["run", "--scenario", "collusion-original"], "target-key"),
        (&["run", "--scenario", "honest-original", "--target-key", "ff"], "target-key"),
        (&["run", "--scenario", "honest-original", "--participants", "2"], "participants"),
        (&["run", "--scenario", "honest-original", "--trials", "0"], "trials"),
        (&["run", "--scenario", "honest-original", "--params", "1,1,1,1"], "params"),
        (&["run", "--scenario", "honest-original", "--params", "0.6,0.6,0.5291502622129181,0"], "params"),
        (&["run", "--scenario", "eve-original", "--eve-fraction", "2"], "eve-fraction"),
        (&["run", "--scenario", "nope"], "scenario"),
        (&["run", "--scenario", "honest-original", "--threshold", "1.5"], "threshold"),
    ];
    for (args, field) in cases {
        let out = qka(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains(field), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(qka(&["run", "--bogus"]).status.code(), Some(1));
}

#[test]
fn table_dump() {
    let out = qka(&["table"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 256);
    assert_eq!(rows[0], "1 0000 1 +1");
    assert!(rows.iter().all(|r| r.split(' ').count() == 4));
}

#[test]
fn povm_dump() {
    let out = qka(&["povm"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("conclusive 1.000000000").count(), 16);
    let out = qka(&["povm", "--params", "0.6,0.5,0.4,0.479583152331272"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches(": ok").count(), 4);
    assert!(!text.contains("FAILED"));
    let out = qka(&["povm", "--params", "0.6,0.6,0.5291502622129181,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("coefficient d"), "{}", stderr(&out));
}
