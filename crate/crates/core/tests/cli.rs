mod common;

use std::path::Path;

use serde_json::{json, Value};

use common::{fixture, read_fixture};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let mut argv = vec!["intenbot".to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = intenbot::cli::run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn path(rel: &str) -> String {
    fixture(rel).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("frobnicate"), "{}", o.stderr);
    assert_eq!(run(&[]).code, 2);
    assert_eq!(run(&["resolve"]).code, 2, "resolve needs --events or --scenario");
    assert_eq!(run(&["sweep", "--corpus", "/does/not/exist.jsonl"]).code, 2);
    assert_eq!(run(&["--config", "/does/not/exist.toml", "report", "--corpus", &path("corpora/taxonomy.jsonl")]).code, 2);
    let help = run(&["--help"]);
    assert_eq!(help.code, 0);
    for sub in ["serve", "resolve", "replay", "sweep", "plan", "report"] {
        assert!(help.stdout.contains(sub), "help lists {sub}");
    }
}

#[test]
fn resolve_dock_scenario_prints_nine_candidates() {
    let o = run(&["resolve", "--scene", &path("scenes/meeting.json"), "--scenario", &path("scenarios/fig8_dock.json")]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let ranked: Vec<&str> = o.stdout.lines().filter(|l| l.trim_start().split('.').next().is_some_and(|n| n.parse::<u8>().is_ok())).collect();
    assert_eq!(ranked.len(), 9, "{}", o.stdout);
    assert!(ranked[0].trim_start().starts_with("1."));
    assert!(ranked[0].to_lowercase().contains("dock"), "{}", ranked[0]);
    assert!(o.stdout.contains("match: rank 1"));
}

#[test]
fn resolve_confirm_prints_plan_and_trace() {
    // Scene taken from the scenario's scene_ref.
    let o = run(&["resolve", "--scenario", &path("scenarios/fig8_come_back.json"), "--confirm", "1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains(r#"<Action skill="NavigateTo" goal="door"/>"#), "{}", o.stdout);
    assert!(o.stdout.contains("Success NavigateTo(door)"), "{}", o.stdout);

    let o = run(&["resolve", "--scenario", &path("scenarios/fig8_tv.json"), "--format", "json"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(doc["candidates"]["candidates"].as_array().unwrap().len(), 9);
    assert_eq!(doc["candidates"]["candidates"][0]["task"], "CheckState");
    assert_eq!(doc["match_rank"], 1);
}

#[test]
fn resolve_from_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let lines = [
        json!({"type": "touch", "t": 0}),
        json!({"type": "snapshot", "gaze": {"origin": [0, 0, 1.2], "direction": [0, -5, -0.2]}, "head": {"position": [0, 0, 1.2]}}),
        json!({"type": "press", "t": 100}),
        json!({"type": "release", "t": 600}),
    ];
    std::fs::write(&log, lines.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let scene = path("scenes/meeting.json");
    let o = run(&["resolve", "--scene", &scene, "--events", s(&log), "--transcript", "Come back", "--confirm", "1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("goal=\"door\""), "{}", o.stdout);

    std::fs::write(&log, "{\"type\":\"press\",\"t\":0}\n").unwrap();
    let o = run(&["resolve", "--scene", &scene, "--events", s(&log)]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("not allowed"), "{}", o.stderr);
}

#[test]
fn sweep_reports_peak_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("heatmap.csv");
    let o = run(&["sweep", "--corpus", &path("corpora/planted.jsonl"), "--csv", s(&csv), "--top", "3"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let peak: Vec<&str> = o.stdout.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(peak, ["14", "11", "1.0000"]);
    assert_eq!(o.stdout.lines().count(), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("phase,gaze_range,point_range,accuracy,matched,total\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("coarse,")).count(), 11);
    assert!(text.contains("fine,14,11,1.000000,"));
}

#[test]
fn replay_checks_expectations() {
    let o = run(&["replay", "--corpus", &path("corpora/taxonomy.jsonl")]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("accuracy 0.8000 (20/25)"), "{}", o.stdout);
    assert!(o.stdout.contains("miss Separation"));

    // Same scenario, wrong expectation.
    let dir = tempfile::tempdir().unwrap();
    let mut scenario: Value = serde_json::from_str(&read_fixture("scenarios/fig8_dock.json")).unwrap();
    scenario["scene_ref"] = json!(path("scenes/meeting.json"));
    scenario["expect"] = json!({"match_rank": 2});
    let corpus = dir.path().join("bad.jsonl");
    std::fs::write(&corpus, format!("{scenario}\n")).unwrap();
    let out = dir.path().join("trials.jsonl");
    let o = run(&["replay", "--corpus", s(&corpus), "--out", s(&out)]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("expected rank Some(2)"), "{}", o.stderr);
    let trial: Value = serde_json::from_str(std::fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(trial["match_rank"], 1);
}

#[test]
fn plan_compiles_validates_and_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let instruction = dir.path().join("instruction.json");
    let confirmed = json!({
        "instruction": {"rank": 1, "task": "Fetch", "targets": ["water_bottle"],
                        "display_text": "Bring me the water bottle", "explanation": "named"},
        "user_pose": [0.0, 0.0, 1.2]
    });
    std::fs::write(&instruction, confirmed.to_string()).unwrap();
    let scene = path("scenes/meeting.json");
    let o = run(&["plan", "--scene", &scene, "--instruction", s(&instruction), "--simulate"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let xml_end = o.stdout.find("</root>").expect("xml printed") + "</root>".len();
    let xml = &o.stdout[..xml_end];
    assert!(xml.contains(r#"<Action skill="Pick" object="water_bottle"/>"#), "{xml}");
    let trace: Value = serde_json::from_str(o.stdout[xml_end..].trim()).unwrap();
    assert_eq!(trace["status"], "success");

    let xml_file = dir.path().join("plan.xml");
    std::fs::write(&xml_file, xml).unwrap();
    let o = run(&["plan", "--validate", s(&xml_file)]);
    assert_eq!((o.code, o.stdout.trim()), (0, "valid"));

    std::fs::write(&xml_file, xml.replace("skill=\"Pick\"", "skill=\"Juggle\"")).unwrap();
    let o = run(&["plan", "--validate", s(&xml_file)]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("Juggle"), "{}", o.stderr);

    let bad = json!({"instruction": {"rank": 1, "task": "Fetch", "targets": ["unicorn"], "display_text": "x", "explanation": ""},
                     "user_pose": [0, 0, 0]});
    std::fs::write(&instruction, bad.to_string()).unwrap();
    assert_eq!(run(&["plan", "--scene", &scene, "--instruction", s(&instruction)]).code, 2);
}

#[test]
fn report_breaks_down_by_tag_and_class() {
    let o = run(&["report", "--corpus", &path("corpora/taxonomy.jsonl"), "--format", "json"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(doc["overall"]["total"], 25);
    assert_eq!(doc["overall"]["matched"], 20);
    for class in ["VoiceInput", "Pointing", "Interpretation", "Separation", "Other"] {
        assert_eq!(doc["error_counts"][class], 1, "{class}");
    }
    let text = run(&["report", "--corpus", &path("corpora/taxonomy.jsonl")]);
    assert!(text.stdout.starts_with("overall      0.8000 (20/25)"), "{}", text.stdout);
}
