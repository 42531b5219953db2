//! End-to-end runs of the `jostlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("jostlab-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn jostlab(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jostlab"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// The subset of JSON Schema the published schemas use.
fn validate(v: &Value, s: &Value, at: &str) -> Result<(), String> {
    let fail = |why: &str| Err(format!("{at}: {why}"));
    if let Some(options) = s.get("oneOf").and_then(Value::as_array) {
        let matches = options.iter().filter(|o| validate(v, o, at).is_ok()).count();
        return if matches == 1 { Ok(()) } else { fail(&format!("{matches} oneOf branches match")) };
    }
    if let Some(c) = s.get("const") {
        if v != c {
            return fail(&format!("expected {c}"));
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return fail(&format!("{v} not in {options:?}"));
        }
    }
    if let Some(t) = s.get("type") {
        let types: Vec<&str> = match t {
            Value::String(one) => vec![one.as_str()],
            Value::Array(many) => many.iter().filter_map(Value::as_str).collect(),
            _ => return fail("bad type keyword"),
        };
        let ok = types.iter().any(|&t| match t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "number" => v.is_number(),
            "integer" => v.is_i64() || v.is_u64(),
            "boolean" => v.is_boolean(),
            "string" => v.is_string(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return fail(&format!("{v} is not {types:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        if s.get("exclusiveMinimum").and_then(Value::as_f64).is_some_and(|m| x <= m)
            || s.get("exclusiveMaximum").and_then(Value::as_f64).is_some_and(|m| x >= m)
            || s.get("minimum").and_then(Value::as_f64).is_some_and(|m| x < m)
        {
            return fail(&format!("{x} out of range"));
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                return fail(&format!("missing {key}"));
            }
        }
        for (key, value) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => validate(value, sub, &format!("{at}.{key}"))?,
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => return fail(&format!("unexpected {key}")),
                None => {}
            }
        }
    }
    if let Some(items) = v.as_array() {
        let len = items.len() as u64;
        if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m)
            || s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m)
        {
            return fail("wrong length");
        }
        let prefix = s.get("prefixItems").and_then(Value::as_array);
        for (k, item) in items.iter().enumerate() {
            let sub = prefix.and_then(|p| p.get(k)).or_else(|| s.get("items"));
            if let Some(sub) = sub {
                validate(item, sub, &format!("{at}[{k}]"))?;
            }
        }
    }
    Ok(())
}

#[test]
fn validator_rejects_malformed_documents() {
    let s = schema("spectrum.schema.json");
    assert!(validate(&serde_json::json!([{"kappa": 1.0, "energy": -1.0, "norm_const": 1.0}]), &s, "$").is_ok());
    assert!(validate(&serde_json::json!([{"kappa": 1.0, "energy": -1.0}]), &s, "$").is_err());
    assert!(validate(&serde_json::json!([{"kappa": -1.0, "energy": -1.0, "norm_const": 1.0}]), &s, "$").is_err());
    assert!(validate(&serde_json::json!([{"kappa": 1.0, "energy": -1.0, "norm_const": 1.0, "extra": 0}]), &s, "$").is_err());
    let c = schema("config.schema.json");
    let good = serde_json::json!({"alpha": [{"j": 0, "value": -2.0}], "initial": {"kind": "box", "left": -1.0, "right": 1.0}});
    assert!(validate(&good, &c, "$").is_ok());
    assert!(validate(&serde_json::json!({"alpha": [{"j": 0.5, "value": -2.0}]}), &c, "$").is_err());
}

#[test]
fn resonance_on_free_config() {
    let dir = Scratch::new("resonance");
    let config = dir.file("free.json", r#"{"alpha": []}"#);
    let out = jostlab(&["resonance"], &config);
    let v = stdout_json(&out);
    assert_eq!(v, serde_json::json!({"W0": [0.0, 0.0], "resonant": true}));
    validate(&v, &schema("resonance.schema.json"), "$").unwrap();

    let config = dir.file("single.json", r#"{"alpha": [{"j": 0, "value": -2.0}]}"#);
    let v = stdout_json(&jostlab(&["resonance"], &config));
    assert_eq!(v["resonant"], Value::Bool(false));
    assert_eq!(v["W0"][0].as_f64(), Some(-2.0));
}

#[test]
fn spectrum_of_single_delta() {
    let dir = Scratch::new("spectrum");
    let config = dir.file("single.json", r#"{"alpha": [{"j": 0, "value": -2.0}]}"#);
    let v = stdout_json(&jostlab(&["spectrum"], &config));
    validate(&v, &schema("spectrum.schema.json"), "$").unwrap();
    let states = v.as_array().unwrap();
    assert_eq!(states.len(), 1);
    assert!((states[0]["kappa"].as_f64().unwrap() - 1.0).abs() <= 1e-10);

    let config = dir.file("repulsive.json", r#"{"alpha": [{"j": 0, "value": 2.0}]}"#);
    assert_eq!(stdout_json(&jostlab(&["spectrum"], &config)), serde_json::json!([]));
}

#[test]
fn exit_codes() {
    let dir = Scratch::new("exit");
    let config = dir.file("single.json", r#"{"alpha": [{"j": 0, "value": -2.0}]}"#);
    let code = |out: Output| out.status.code().unwrap();

    let regime = jostlab(&["born-check", "--lambda-grid", "1:2:3"], &config);
    assert!(String::from_utf8_lossy(&regime.stderr).contains("Born series"));
    assert_eq!(code(regime), 3);
    assert_eq!(code(jostlab(&["scatter", "--lambda-grid", "1:0:3"], &config)), 2);
    assert_eq!(code(jostlab(&["scatter", "--tol", "-1"], &config)), 2);
    assert_eq!(code(jostlab(&["resonance"], &dir.path("missing.json"))), 5);
    let bad = dir.file("bad.json", r#"{"alpha": [{"j": 0, "value": -2.0}], "beta": 1}"#);
    assert_eq!(code(jostlab(&["resonance"], &bad)), 2);
    // repeated sites add up
    let merged = dir.file("merged.json", r#"{"alpha": [{"j": 0, "value": -1.5}, {"j": 0, "value": -0.5}]}"#);
    assert_eq!(stdout_json(&jostlab(&["resonance"], &merged))["W0"][0].as_f64(), Some(-2.0));
    let huge = dir.file("huge.json", r#"{"alpha": [{"j": 0, "value": 1e999}]}"#);
    assert_eq!(code(jostlab(&["resonance"], &huge)), 2);
    let unwritable = dir.path("no/such/dir/out.csv");
    assert_eq!(code(jostlab(&["scatter", "--out", unwritable.to_str().unwrap()], &config)), 5);
}

#[test]
fn scatter_csv_is_deterministic_across_thread_counts() {
    let dir = Scratch::new("scatter");
    let config = dir.file("c.json", r#"{"alpha": [{"j": -1, "value": 0.7}, {"j": 2, "value": -1.4}]}"#);
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_jostlab"))
            .env("JOSTLAB_THREADS", threads)
            .args(["scatter", "--config"])
            .arg(&config)
            .args(["--lambda-grid", "0:5:101"])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let text = String::from_utf8(one).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,re_W,im_W,re_b,im_b,re_a_minus,im_a_minus,unitarity_residual"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r.len() == 8));
    // 17 significant digits round-trip
    let lambda: f64 = rows[37][0].parse().unwrap();
    assert_eq!(lambda, 37.0 * 0.05);
    assert!(rows[1..].iter().all(|r| r[7].parse::<f64>().unwrap() <= 1e-10));

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_jostlab"))
        .env("JOSTLAB_THREADS", "zero")
        .args(["resonance", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn kernel_and_born_check_rows() {
    let dir = Scratch::new("kernel");
    let config = dir.file("single.json", r#"{"alpha": [{"j": 0, "value": -2.0}]}"#);
    let out = jostlab(&["kernel", "--lambda-grid", "1:1:1", "--x-grid", "-1:-1:1", "--y", "1"], &config);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,x,y,re,im,method,residual"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    // f₋(1, −1) f₊(1, 1) / W(1) with W = −2i − 2 and both Jost factors e^{i}
    let expected = num_complex::Complex64::new(0.0, 2.0).exp() / num_complex::Complex64::new(-2.0, -2.0);
    let (re, im): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
    assert!((re - expected.re).abs() < 1e-12 && (im - expected.im).abs() < 1e-12, "{row:?} vs {expected}");
    assert_eq!(row[5], "jost");

    let out = jostlab(&["born-check", "--lambda-grid", "5:5:1", "--x-grid", "-1:1:3", "--y", "0.5"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().any(|r| r[5] == "born"));
    for r in rows.iter().filter(|r| r[5] == "born") {
        assert!(r[6].parse::<f64>().unwrap() <= 1e-12);
    }
}

#[test]
fn evolve_writes_csv_and_summary() {
    let dir = Scratch::new("evolve");
    let config = dir.file(
        "c.json",
        r#"{"alpha": [{"j": 0, "value": 1.0}], "initial": {"kind": "gaussian", "center": 0.0, "width": 1.0}}"#,
    );
    let csv = dir.path("u.csv");
    let summary = dir.path("u.json");
    let out = Command::new(env!("CARGO_BIN_EXE_jostlab"))
        .args(["evolve", "--config"])
        .arg(&config)
        .args(["--t-grid", "1:4:3", "--x-grid", "-4:4:9", "--method", "oracle", "--grid-h", "0.0625", "--grid-L", "40"])
        .arg("--out")
        .arg(&csv)
        .arg("--summary")
        .arg(&summary)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,re_u,im_u,abs_u"));
    assert_eq!(text.lines().count(), 1 + 3 * 9);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    validate(&v, &schema("evolve-summary.schema.json"), "$").unwrap();
    assert_eq!(v["times"].as_array().unwrap().len(), 3);
}

#[test]
fn decay_scan_summary_validates() {
    let dir = Scratch::new("decay");
    let config = dir.file("c.json", r#"{"alpha": [{"j": 0, "value": 1.0}]}"#);
    let csv = dir.path("peaks.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_jostlab"))
        .args(["decay-scan", "--config"])
        .arg(&config)
        .args(["--t-grid", "1:20:10:log", "--grid-h", "0.125", "--grid-L", "320"])
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 11);
    let mut summary = csv.clone().into_os_string();
    summary.push(".summary.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    validate(&v, &schema("decay-summary.schema.json"), "$").unwrap();
    let p = v["exponent"].as_f64().unwrap();
    assert!((-0.7..=-0.3).contains(&p), "{p}");
}
