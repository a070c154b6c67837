use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_activediag"));
    c.env_remove("RUST_BACKTRACE").env_remove("RUST_LOG").env_remove("ACTIVEDIAG_URL");
    c
}

fn ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    out
}

const ALPHA3: &str = "a=0,b=0,i=1,o1=0,o2=1,o3=1,o4=1";

#[test]
fn parse_reports_encoding() {
    let out = ok(&["parse", "--model", "demux"]);
    assert!(out.contains("variables  19"));
    assert!(out.contains("controls   a b"));
    let out = ok(&["parse", "--model", "74182"]);
    assert!(out.contains("variables  47"));
    assert!(out.contains("clauses    150"));
}

#[test]
fn parse_emit_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demux.bench");
    std::fs::write(&path, ok(&["parse", "--model", "demux", "--emit"])).unwrap();
    let out = ok(&["parse", "--model", path.to_str().unwrap(), "--controls", "a,b"]);
    assert!(out.contains("variables  19"));
}

#[test]
fn diagnose_lists_minimal_sets() {
    let out = ok(&["diagnose", "--model", "demux", "--semantics", "weak", "--obs", "a=0,b=0,i=1,o1=0,o4=1"]);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().all(|l| l.starts_with('{') && l.matches('h').count() == 2));
}

#[test]
fn expect_is_exact_on_small_models() {
    let out = ok(&["expect", "--model", "demux", "--obs", ALPHA3, "--control", "a=1,b=1"]);
    assert!(out.contains("ratio      7/5"), "{out}");
    let sampled = ok(&["expect", "--model", "demux", "--obs", ALPHA3, "--control", "a=1,b=1", "--eval", "sampled", "--seed", "3"]);
    let again = ok(&["expect", "--model", "demux", "--obs", ALPHA3, "--control", "a=1,b=1", "--eval", "sampled", "--seed", "3"]);
    assert_eq!(sampled, again);
    assert!(sampled.contains("exact      false"));
}

#[test]
fn suggest_prints_a_probe() {
    let out = ok(&["suggest", "--model", "demux", "--controls", "i", "--policy", "probe", "--obs", ALPHA3]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["probe"], "p");
    assert!((v["predicted"].as_f64().unwrap() - 2.6).abs() < 1e-12);
}

#[test]
fn run_bench_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let out = ok(&[
        "run", "--model", "74182", "--policy", "greedy,random", "--scenarios", "3", "--steps", "4", "--seed", "5",
        "--out", runs.to_str().unwrap(),
    ]);
    assert!(out.lines().any(|l| l.starts_with("74182") && l.contains("greedy")));
    for name in ["greedy_5.csv", "greedy_7.csv", "random_6.csv", "summary.csv"] {
        assert!(runs.join(name).exists(), "{name}");
    }
    let bench = dir.path().join("bench.csv");
    ok(&["bench", "--faults", "60", "--top", "10", "--seed", "1", "--out", bench.to_str().unwrap()]);
    let text = std::fs::read_to_string(&bench).unwrap();
    assert_eq!(text.lines().next(), Some("draw,injected,observation,mc_count"));
    assert_eq!(text.lines().count(), 11);

    let series = dir.path().join("series.csv");
    std::fs::write(&series, "k,remaining\n0,10\n1,6\n2,4\n3,3\n").unwrap();
    let fit: serde_json::Value = serde_json::from_str(&ok(&["fit", series.to_str().unwrap()])).unwrap();
    assert!((fit["p"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!((fit["n_inf"].as_f64().unwrap() - 2.0).abs() < 1e-2);
}

#[test]
fn errors_exit_nonzero() {
    let out = fails(&["diagnose", "--model", "no-such-model", "--obs", "a"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-model"));
    fails(&["diagnose", "--model", "demux", "--obs", "zz=1"]);
    fails(&["suggest", "--policy", "bogus", "--obs", ""]);
    fails(&["expect", "--model", "demux", "--obs", ALPHA3, "--control", "i=1"]);
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "5\n3\n").unwrap();
    fails(&["fit", short.to_str().unwrap()]);
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server() -> (Server, String) {
    let mut child = bin().args(["serve", "--addr", "127.0.0.1:0"]).stdout(Stdio::piped()).stderr(Stdio::null()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    (Server(child), url)
}

#[test]
fn session_commands_drive_the_service() {
    let (_server, url) = start_server();
    let session = |args: &[&str]| {
        let mut full = vec!["session", "--url", url.as_str()];
        full.extend_from_slice(args);
        ok(&full)
    };
    assert!(session(&["models"]).contains("demux"));
    let created = session(&[
        "create", "--model", "demux", "--mode", "simulated", "--obs", "i=1,a=0,b=0", "--inject", "h1,h7,h8",
    ]);
    let id = created.split_whitespace().next().unwrap().to_string();
    assert!(created.contains("remaining=5"), "{created}");

    let suggestion: serde_json::Value = serde_json::from_str(&session(&["suggest", &id])).unwrap();
    assert_eq!(suggestion["control"], serde_json::json!({"a": 1, "b": 1}));
    assert!(session(&["observe", &id]).contains("remaining=2"));
    session(&["suggest", &id]);
    assert!(session(&["observe", &id]).contains("outcome=Isolated"));

    let snap: serde_json::Value = serde_json::from_str(&session(&["show", &id])).unwrap();
    assert_eq!(snap["history"].as_array().unwrap().len(), 3);
    assert!(session(&["trace", &id]).starts_with("k,action_kind"));

    let mut full = vec!["session", "--url", url.as_str(), "suggest", &id];
    let out = fails(&full);
    assert!(String::from_utf8_lossy(&out.stderr).contains("terminal"));
    full[4] = "s999";
    fails(&full);
}
