use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cori(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cori"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "expected one summary line, got {stdout:?}");
    serde_json::from_str(lines[0]).unwrap()
}

fn ko_word(surface: &str, start: usize) -> String {
    let tokens: Vec<String> = surface.chars().map(|c| format!("\"{c}\"")).collect();
    let end = start + surface.chars().count();
    format!(r#"{{"surface":"{surface}","tokens":[{}],"roman":"","span":[{start},{end}]}}"#, tokens.join(","))
}

#[test]
fn romanize_korean_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let line = format!(
        r#"{{"lang":"KO","text":"고전 과학 문학 신학","words":[{},{},{},{}]}}"#,
        ko_word("고전", 0),
        ko_word("과학", 3),
        ko_word("문학", 6),
        ko_word("신학", 9)
    );
    fs::write(dir.path().join("a.jsonl"), format!("{line}\n")).unwrap();
    let out = cori(&["romanize", "--lang", "ko", "--in", "a.jsonl", "--out", "b.jsonl"], dir.path());
    assert!(out.status.success());
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["result"]["words"], 4);
    let b: Value = serde_json::from_str(fs::read_to_string(dir.path().join("b.jsonl")).unwrap().trim()).unwrap();
    let romans: Vec<&str> = b["words"].as_array().unwrap().iter().map(|w| w["roman"].as_str().unwrap()).collect();
    assert_eq!(romans, ["gojeon", "gwahak", "munhak", "sinhak"]);
}

#[test]
fn cka_of_a_file_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.tsv"), "a\t1\t0.5\nb\t2\t-1\nc\t0\t3\n").unwrap();
    let out = cori(&["cka", "--a", "x.tsv", "--b", "x.tsv"], dir.path());
    assert!(out.status.success());
    assert_eq!(summary(&out)["result"]["cka"], 1.0);
}

#[test]
fn train_toy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["train-toy", "--mode", "both", "--cl", "on", "--seed", "7"];
    let a = cori(&args, dir.path());
    let b = cori(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let s = summary(&a);
    assert_eq!(s["config"]["seed"], 7);
    assert_eq!(s["config"]["mode"], "both");
    assert!(s["result"]["cka"].as_f64().unwrap() > 0.0);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = cori(&["train-toy", "--seed", "3", "--steps", "15", "--mode", "roman"], dir.path());
    let s = summary(&first);
    let mut toml = String::new();
    for (k, v) in s["config"].as_object().unwrap() {
        match v {
            Value::Null => {}
            Value::String(x) => toml.push_str(&format!("{k} = {x:?}\n")),
            other => toml.push_str(&format!("{k} = {other}\n")),
        }
    }
    fs::write(dir.path().join("run.toml"), toml).unwrap();
    let second = cori(&["train-toy", "--config", "run.toml"], dir.path());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "seed = 1\nsteps = 5\nsentences = 24\n").unwrap();
    let out = cori(&["train-toy", "--config", "c.toml", "--seed", "2"], dir.path());
    let s = summary(&out);
    assert_eq!(s["config"]["seed"], 2);
    assert_eq!(s["config"]["steps"], 5);
}

#[test]
fn ablation_reports_four_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cori(
        &["train-toy", "--ablation", "--steps", "10", "--sentences", "40", "--jobs", "2", "--embeddings", "emb"],
        dir.path(),
    );
    assert!(out.status.success());
    let s = summary(&out);
    let names: Vec<&str> = s["result"]["runs"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ortho", "roman", "both", "both-cl"]);
    for n in names {
        assert!(dir.path().join(format!("emb/{n}.source.tsv")).exists());
    }
    let cka = cori(&["cka", "--a", "emb/both.source.tsv", "--b", "emb/both.target.tsv"], dir.path());
    let v = summary(&cka)["result"]["cka"].as_f64().unwrap();
    let reported = s["result"]["runs"][2]["cka"].as_f64().unwrap();
    assert!((v - reported).abs() < 1e-9, "{v} vs {reported}");
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = cori(&["cka", "--a", "x", "--b", "y", "--nope"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    let missing = cori(&["cka", "--a", "x.tsv", "--b", "y.tsv"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(summary(&missing)["category"], "missing-file");

    fs::write(dir.path().join("bad.jsonl"), "{\"lang\":\"KO\"}\n").unwrap();
    let bad = cori(&["romanize", "--lang", "ko", "--in", "bad.jsonl", "--out", "o.jsonl"], dir.path());
    assert_eq!(bad.status.code(), Some(4));
    assert_eq!(summary(&bad)["category"], "schema");

    fs::write(dir.path().join("bad.toml"), "seed = = 1").unwrap();
    let cfg = cori(&["train-toy", "--config", "bad.toml"], dir.path());
    assert_eq!(cfg.status.code(), Some(4));

    let conflict = cori(&["train-toy", "--ablation", "--checkpoint", "m.ckpt"], dir.path());
    assert_eq!(conflict.status.code(), Some(2));
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let expected: &[(&str, &[&str])] = &[
        ("segment", &["--lang", "--in", "--out", "--lexicon", "--romanize", "--config", "--jobs"]),
        ("romanize", &["--lang", "--in", "--out", "--lexicon", "--table", "--strip-tones", "--config", "--jobs"]),
        (
            "augment",
            &["--lang", "--in", "--out", "--dict", "--ratio", "--seed", "--view", "--single-target", "--config", "--jobs"],
        ),
        (
            "build",
            &[
                "--task", "--in", "--out", "--split", "--src", "--targets", "--lexicon", "--table", "--strip-tones",
                "--mt", "--fixtures", "--strict-mock", "--endpoint", "--cache-dir", "--max-concurrent", "--mask",
                "--config", "--jobs",
            ],
        ),
        (
            "train-toy",
            &[
                "--mode", "--cl", "--seed", "--steps", "--batch-size", "--sentences", "--embed-dim", "--layers",
                "--heads", "--lr", "--ratio", "--tau", "--cl-weight", "--ablation", "--embeddings", "--checkpoint",
                "--config", "--jobs",
            ],
        ),
        ("eval", &["--task", "--gold", "--pred", "--split", "--config", "--jobs"]),
        ("cka", &["--a", "--b", "--config", "--jobs"]),
    ];
    for (sub, flags) in expected {
        let out = cori(&[sub, "--help"], dir.path());
        assert!(out.status.success());
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in *flags {
            let lines: Vec<&str> = help.lines().collect();
            let i = lines
                .iter()
                .position(|l| l.trim_start().starts_with(&format!("{flag} ")) || l.trim() == *flag)
                .unwrap_or_else(|| panic!("{sub} --help lacks {flag}"));
            let line = lines[i];
            // the description follows the flag, or wraps onto the next line
            let inline = line.split("  ").filter(|p| !p.trim().is_empty()).count() > 1;
            let wrapped = lines.get(i + 1).is_some_and(|n| !n.trim().is_empty() && !n.trim_start().starts_with('-'));
            let described = inline || wrapped;
            assert!(described, "{sub} {flag} has no description: {line:?}");
        }
    }
}

#[test]
fn build_pawsx_with_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("raw.jsonl"),
        concat!(
            r#"{"id":"1","sentence1":"scholar","sentence2":"science","label":1}"#,
            "\n",
            r#"{"id":"2","sentence1":"science","sentence2":"scholar","label":0}"#,
            "\n"
        ),
    )
    .unwrap();
    fs::write(
        dir.path().join("fx.json"),
        r#"{"EN|ZH|scholar":"学者","EN|ZH|science":"科学","EN|KO|scholar":"학자","EN|KO|science":"과학"}"#,
    )
    .unwrap();
    fs::write(dir.path().join("zh.tsv"), "学者\t\txuézhě\n科学\t\tkēxué\n").unwrap();
    let args = [
        "build", "--task", "pawsx", "--in", "raw.jsonl", "--out", "out", "--targets", "zh,ko", "--fixtures", "fx.json",
        "--strict-mock", "--lexicon", "zh=zh.tsv", "--cache-dir", "cache",
    ];
    let out = cori(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&out);
    assert_eq!(s["result"]["backend_calls"], 4);
    let zh = fs::read_to_string(dir.path().join("out/pawsx.test.zh.jsonl")).unwrap();
    assert_eq!(zh.lines().count(), 2);
    assert!(zh.contains("xuézhě"));
    let first = fs::read(dir.path().join("out/pawsx.test.ko.jsonl")).unwrap();

    // warm cache: no backend calls, identical bytes
    let again = cori(&args, dir.path());
    assert_eq!(summary(&again)["result"]["backend_calls"], 0);
    assert_eq!(fs::read(dir.path().join("out/pawsx.test.ko.jsonl")).unwrap(), first);

    let eval = cori(
        &["eval", "--task", "pawsx", "--gold", "out/pawsx.test.ko.jsonl", "--pred", "out/pawsx.test.ko.jsonl"],
        dir.path(),
    );
    assert_eq!(summary(&eval)["result"]["metrics"]["accuracy"], 1.0);
}

#[test]
fn segment_then_augment_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..40).map(|i| if i % 2 == 0 { "古典科学\n" } else { "学者古典\n" }).collect();
    fs::write(dir.path().join("zh.txt"), text).unwrap();
    fs::write(dir.path().join("zh.tsv"), "古典\t\tgǔdiǎn\n科学\t\tkēxué\n学者\t\txuézhě\n").unwrap();
    fs::write(dir.path().join("dict.tsv"), "古典\tko\t고전\tgojeon\n科学\tko\t과학\tgwahak\n学者\tja\t学者\tgakusha\n").unwrap();
    let seg = cori(
        &["segment", "--lang", "zh", "--in", "zh.txt", "--out", "seg.jsonl", "--lexicon", "zh.tsv", "--romanize"],
        dir.path(),
    );
    assert_eq!(summary(&seg)["result"]["words"], 80);
    let run = |jobs: &str, out: &str| {
        let o = cori(
            &["augment", "--lang", "zh", "--in", "seg.jsonl", "--out", out, "--dict", "dict.tsv", "--seed", "5", "--jobs", jobs],
            dir.path(),
        );
        assert!(o.status.success());
        summary(&o)["result"]["switched"].as_u64().unwrap()
    };
    let a = run("1", "a.jsonl");
    let b = run("4", "b.jsonl");
    assert_eq!(a, b);
    assert!(a > 0 && a < 80);
    assert_eq!(fs::read(dir.path().join("a.jsonl")).unwrap(), fs::read(dir.path().join("b.jsonl")).unwrap());
}
