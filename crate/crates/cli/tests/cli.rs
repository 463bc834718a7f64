use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;

use manipbench_core::bus::{
    Component, ComponentDescriptor, ComponentError, ComponentServer, InputKind, Message, OutputKind,
};
use manipbench_core::types::Value;
use serde_json::json;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_manipbench"));
    c.env_remove("MANIPBENCH_LOG");
    c
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example(rel: &str) -> String {
    examples().join(rel).to_string_lossy().into_owned()
}

/// Writes a config into `dir` whose paths point at the shipped example files.
fn config_in(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let base = examples().join("noisy");
    let mut c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(base.join("config.json")).unwrap()).unwrap();
    c["scenario"] = json!(base.join("scenario.json"));
    c["protocol"] = json!(base.join("protocol.json"));
    c["behaviors"] = json!([
        examples().join("behaviors/pick.json"),
        examples().join("behaviors/reset.json")
    ]);
    edit(&mut c);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn assert_error_line(o: &Output, expected: i32) {
    assert_eq!(code(o), expected, "stderr: {}", stderr(o));
    let err = stderr(o);
    let last = err.lines().last().unwrap_or_default();
    assert!(last.starts_with(&format!("ERROR {expected}: ")), "{err}");
}

#[test]
fn shipped_configs_validate() {
    for c in [
        "exp1_replica/config.json",
        "exp1_replica/config_arm_b.json",
        "exp2_reset/config.json",
        "exp3_swap/config_top_surface.json",
        "exp3_swap/config_centroid_rect.json",
        "noisy/config.json",
    ] {
        let o = run(&["validate", "--config", &example(c)]);
        assert_eq!(code(&o), 0, "{c}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn missing_binding_names_the_slot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), |c| {
        c["bindings"]
            .as_object_mut()
            .unwrap()
            .remove("motion_planner");
    });
    let o = run(&["validate", "--config", &cfg]);
    assert_error_line(&o, 1);
    assert!(
        stdout(&o).contains("slot `motion_planner`"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn unreadable_config_is_a_file_error() {
    let o = run(&["validate", "--config", "/nonexistent/config.json"]);
    assert_error_line(&o, 2);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{not json").unwrap();
    assert_error_line(&run(&["run", "--config", p.to_str().unwrap()]), 2);
}

fn run_noisy(out: &Path, extra: &[&str]) -> String {
    let out_s = out.to_string_lossy().into_owned();
    let cfg = example("noisy/config.json");
    let mut args = vec!["run", "--config", &cfg];
    args.extend(["--out", &out_s, "--no-timestamps"]);
    args.extend(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::read_to_string(out.join("trials.jsonl")).unwrap()
}

#[test]
fn run_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_noisy(&dir.path().join("a"), &[]);
    let b = run_noisy(&dir.path().join("b"), &[]);
    assert_eq!(a.lines().count(), 8);
    assert_eq!(a, b);
    let c = run_noisy(&dir.path().join("c"), &["--seed", "0"]);
    let outcomes = |log: &str| -> Vec<bool> {
        log.lines()
            .map(|l| l.contains(r#""kind":"success""#))
            .collect()
    };
    assert_ne!(outcomes(&a), outcomes(&c));
}

#[test]
fn report_reproduces_what_run_wrote() {
    let dir = tempfile::tempdir().unwrap();
    run_noisy(dir.path(), &[]);
    let trials = dir.path().join("trials.jsonl");
    let t = trials.to_str().unwrap();
    let text = run(&["report", "--trials", t, "--by", "lighting,texture"]);
    assert_eq!(code(&text), 0);
    assert_eq!(
        stdout(&text),
        std::fs::read_to_string(dir.path().join("report.txt")).unwrap()
    );
    let js = run(&[
        "report",
        "--trials",
        t,
        "--by",
        "lighting,texture",
        "--json",
    ]);
    let live: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let back: serde_json::Value = serde_json::from_str(&stdout(&js)).unwrap();
    assert_eq!(live, back);
}

#[test]
fn malformed_trial_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    run_noisy(dir.path(), &[]);
    let trials = dir.path().join("trials.jsonl");
    let mut text = std::fs::read_to_string(&trials).unwrap();
    text.insert_str(text.find('\n').unwrap() + 1, "{\"oops\": 1}\n");
    std::fs::write(&trials, text).unwrap();
    let o = run(&["report", "--trials", trials.to_str().unwrap()]);
    assert_error_line(&o, 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn list_shows_the_reference_components() {
    let o = run(&["components", "list"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "{out}");
    for id in ["top_surface", "centroid_rect", "line_motion", "plane_crop"] {
        assert!(rows.iter().any(|r| r.starts_with(id)));
    }
    let with_sim = run(&[
        "components",
        "list",
        "--config",
        &example("noisy/config.json"),
    ]);
    assert_eq!(stdout(&with_sim).lines().count(), 7);
}

#[test]
fn conformance_by_id() {
    assert_eq!(
        code(&run(&["components", "conformance", "--id", "top_surface"])),
        0
    );
    assert_error_line(&run(&["components", "conformance", "--id", "no_such"]), 1);
}

/// Answers grasp requests with a malformed candidate list.
struct Broken(ComponentDescriptor);

impl Component for Broken {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.0
    }

    fn handle(&self, _op: &str, _request: &Message) -> Result<Message, ComponentError> {
        Ok(
            [("candidates".to_owned(), Value::Text("not a list".into()))]
                .into_iter()
                .collect(),
        )
    }
}

#[test]
fn conformance_over_endpoints() {
    let d =
        ComponentDescriptor::grasp_planner("broken", &[InputKind::PointCloud], OutputKind::Pose);
    let server = ComponentServer::bind("127.0.0.1:0", Arc::new(Broken(d)))
        .unwrap()
        .spawn()
        .unwrap();
    let o = run(&[
        "components",
        "conformance",
        "--endpoint",
        &server.endpoint(),
    ]);
    assert_error_line(&o, 1);
    assert!(stdout(&o).contains("FAIL"));

    let served = Served::start("centroid_rect");
    let o = run(&["components", "conformance", "--endpoint", &served.addr]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = closed.local_addr().unwrap().to_string();
    drop(closed);
    assert_error_line(&run(&["components", "conformance", "--endpoint", &addr]), 3);
}

/// `manipbench serve` as a child process.
struct Served {
    child: Child,
    addr: String,
}

impl Served {
    fn start(id: &str) -> Self {
        let mut child = bin()
            .args(["serve", "--id", id])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line.trim().rsplit(' ').next().unwrap().to_owned();
        Served { child, addr }
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn unreachable_component_at_start() {
    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = closed.local_addr().unwrap().to_string();
    drop(closed);
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), |c| {
        c["components"] = json!([{
            "id": "ext", "interface": "grasp_planner", "accepted_inputs": ["point_cloud"], "output_kind": "pose",
            "transport": {"kind": "socket", "endpoint": addr}
        }]);
        c["bindings"]["grasp_planner"] = json!("ext");
        c["timeouts"] = json!({"grasp_planner": 2.0});
    });
    let out = dir.path().join("out");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_error_line(&o, 3);
    assert!(stderr(&o).contains("ext"));

    let o = run(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--lazy",
        "--no-timestamps",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 8);
    assert!(log.lines().all(|l| l.contains(r#""kind":"aborted""#)));
}

#[test]
fn external_planner_drops_into_a_run() {
    let served = Served::start("top_surface");
    let dir = tempfile::tempdir().unwrap();
    let addr = served.addr.clone();
    let cfg = config_in(dir.path(), |c| {
        c["components"] = json!([{
            "id": "remote_top", "interface": "grasp_planner", "accepted_inputs": ["point_cloud"],
            "output_kind": "pose_with_quality", "transport": {"kind": "socket", "endpoint": addr}
        }]);
        c["bindings"]["grasp_planner"] = json!("remote_top");
    });
    let remote = dir.path().join("remote");
    let o = run(&[
        "run",
        "--config",
        &cfg,
        "--out",
        remote.to_str().unwrap(),
        "--no-timestamps",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let local = run_noisy(&dir.path().join("local"), &[]);
    let remote_log = std::fs::read_to_string(remote.join("trials.jsonl")).unwrap();
    assert_eq!(remote_log.replace("remote_top", "top_surface"), local);
}
