use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::OnceLock;

use serde_json::Value;

fn sdi() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sdi"));
    cmd.env("RUST_LOG", "warn").env_remove("SDI_BIND").env_remove("SDI_SNAPSHOT").env_remove("SDI_CONFIG");
    cmd
}

fn e2e(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e").join(name)
}

fn run_ok(cmd: &mut Command) -> String {
    let out: Output = cmd.output().unwrap();
    assert!(out.status.success(), "{cmd:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_json(cmd: &mut Command) -> Value {
    serde_json::from_str(&run_ok(cmd)).unwrap()
}

fn catalog_args(cmd: &mut Command) -> &mut Command {
    cmd.arg("--agents").arg(e2e("agents.jsonl")).arg("--clusters").arg(e2e("clusters.tsv"))
}

/// A synthetic DDI corpus, its instances and a trained model, shared by
/// the tests below.
struct Trained {
    dir: tempfile::TempDir,
}

impl Trained {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Trained { dir: tempfile::tempdir().unwrap() };
        let summary = run_json(sdi().args(["synth", "--preset", "ddi2013", "--seed", "5", "--out"]).arg(t.path("ddi")));
        assert_eq!(summary["kept_pairs"], 26119);
        run_json(
            sdi()
                .args(["convert", "--preset", "ddi2013", "--input"])
                .arg(t.path("ddi"))
                .arg("--out")
                .arg(t.path("inst.jsonl")),
        );
        run_json(
            sdi().arg("train").arg("--instances").arg(t.path("inst.jsonl")).arg("--out").arg(t.path("model.json")),
        );
        t
    })
}

#[test]
fn train_and_eval_reports() {
    let t = trained();
    let table =
        run_ok(sdi().arg("eval").arg("--instances").arg(t.path("inst.jsonl")).arg("--model").arg(t.path("model.json")));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "Evaluation set\tPrec.\tRec.\tF1");
    assert!(lines.iter().any(|l| l.starts_with("DDI-2013 (Medline)\t")), "{table}");

    let ablation = run_ok(
        sdi()
            .arg("eval")
            .arg("--instances")
            .arg(t.path("inst.jsonl"))
            .arg("--ablation")
            .arg(format!("DDI-2013={}", t.path("model.json").display())),
    );
    let lines: Vec<&str> = ablation.lines().collect();
    assert_eq!(lines[0], "Test dataset\tNum. pairwise instances\tDDI-2013");
    assert!(lines.iter().any(|l| l.starts_with("DDI-2013 (All)\t5688\t")), "{ablation}");
    assert!(lines.iter().any(|l| l.starts_with("DDI-2013 (DrugBank)\t5251\t")), "{ablation}");
    assert!(lines.iter().any(|l| l.starts_with("DDI-2013 (Medline)\t437\t")), "{ablation}");
}

struct Server(Child, String);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_listening(cmd: &mut Command) -> Server {
    let mut child = cmd.stdout(Stdio::piped()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let base =
        line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_string();
    Server(child, base)
}

fn get(base: &str, path: &str) -> (u16, Value) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent.get(&format!("{base}{path}")).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
}

fn build_snapshot(work: &Path, scorer: &mut dyn FnMut(&mut Command) -> &mut Command) -> PathBuf {
    let cand = work.join("cand.jsonl");
    let ingest =
        run_json(catalog_args(sdi().arg("ingest").arg("--corpus").arg(e2e("papers.jsonl")).arg("--out").arg(&cand)));
    assert_eq!(ingest["papers"], 25);
    let ev = work.join("ev.jsonl");
    let summary =
        run_json(scorer(catalog_args(sdi().arg("classify").arg("--candidates").arg(&cand).arg("--out").arg(&ev))));
    assert_eq!(summary["rejected"]["blocklisted"], 1);
    let snap = work.join("snap");
    let built = run_json(catalog_args(
        sdi().arg("build").arg("--evidence").arg(&ev).arg("--corpus").arg(e2e("papers.jsonl")).arg("--out").arg(&snap),
    ));
    assert_eq!(built["manifest"]["counts"]["interactions"], 6);
    snap
}

#[test]
fn pipeline_build_export_and_serve() {
    let t = trained();
    let work = tempfile::tempdir().unwrap();
    let snap = build_snapshot(work.path(), &mut |c| c.arg("--model").arg(t.path("model.json")));

    let copy = work.path().join("copy");
    let manifest = run_json(sdi().arg("export").arg("--snapshot").arg(&snap).arg("--out").arg(&copy));
    assert_eq!(manifest["counts"]["interactions"], 6);
    assert_eq!(
        std::fs::read(snap.join("interactions.jsonl")).unwrap(),
        std::fs::read(copy.join("interactions.jsonl")).unwrap()
    );
    let again = sdi().arg("export").arg("--snapshot").arg(&snap).arg("--out").arg(&copy).output().unwrap();
    assert!(!again.status.success());

    let server = spawn_listening(sdi().arg("serve").arg("--bind").arg("127.0.0.1:0").env("SDI_SNAPSHOT", &copy));
    let (status, meta) = get(&server.1, "/api/meta");
    assert_eq!(status, 200);
    assert_eq!(meta["manifest"]["counts"]["evidence"], 9);
    let (_, hits) = get(&server.1, "/api/agent/search?q=ginkgo");
    assert_eq!(hits["results"][0]["cui"], "C0330205");
    let (_, page) = get(&server.1, "/api/interaction/C0043031-C0330205?per_page=2");
    assert_eq!(page["total"], 3);
    assert_eq!(page["items"].as_array().unwrap().len(), 2);
    let (status, _) = get(&server.1, "/api/interaction/C0330205-C0043031");
    assert_eq!(status, 400);
}

#[test]
fn config_selects_subprocess_scorer() {
    let t = trained();
    let work = tempfile::tempdir().unwrap();
    let direct =
        build_snapshot(&work.path().join("direct").tap_mkdir(), &mut |c| c.arg("--model").arg(t.path("model.json")));

    let config = work.path().join("sdi.toml");
    let exe = env!("CARGO_BIN_EXE_sdi").replace('\\', "\\\\");
    let model = t.path("model.json").display().to_string().replace('\\', "\\\\");
    std::fs::write(
        &config,
        format!(
            "tau = 0.5\n\n[scorer]\nbackend = \"subprocess\"\ncommand = [\"{exe}\", \"serve-scorer\", \"--model\", \"{model}\"]\nbatch_size = 4\ntimeout_secs = 20\n"
        ),
    )
    .unwrap();
    let via = build_snapshot(&work.path().join("via").tap_mkdir(), &mut |c| c.arg("--config").arg(&config));
    let read = |p: &Path| std::fs::read_to_string(p.join("interactions.jsonl")).unwrap();
    assert_eq!(read(&direct), read(&via));
}

trait TapMkdir {
    fn tap_mkdir(self) -> Self;
}

impl TapMkdir for PathBuf {
    fn tap_mkdir(self) -> Self {
        std::fs::create_dir_all(&self).unwrap();
        self
    }
}

#[test]
fn serve_scorer_speaks_the_line_protocol() {
    let t = trained();
    let mut child = sdi()
        .arg("serve-scorer")
        .arg("--model")
        .arg(t.path("model.json"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let stdin = child.stdin.as_mut().unwrap();
        writeln!(stdin, r#"{{"id":"a","text":"[Arg1] may potentiate the anticoagulant effect of [Arg2]"}}"#).unwrap();
        writeln!(stdin, r#"{{"id":"b"}}"#).unwrap();
        writeln!(stdin, "not json").unwrap();
        writeln!(stdin, r#"{{"id":"c","text":"[Arg1] and [Arg2] were administered on separate days"}}"#).unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["id"], "a");
    assert!(lines[0]["score"].as_f64().unwrap() > 0.5);
    assert_eq!(lines[1]["id"], "b");
    assert!(lines[1]["error"].is_string());
    assert!(lines[2]["id"].is_null() && lines[2]["error"].is_string());
    assert_eq!(lines[3]["id"], "c");
    assert!(lines[3]["score"].as_f64().unwrap() < 0.5);
}

#[test]
fn serve_scorer_http_batches() {
    let t = trained();
    let server = spawn_listening(
        sdi().arg("serve-scorer").arg("--model").arg(t.path("model.json")).arg("--http").arg("127.0.0.1:0"),
    );
    let agent: ureq::Agent = ureq::Agent::config_builder().build().into();
    let body: Vec<Value> = (0..64)
        .map(|i| serde_json::json!({"id": format!("q{i}"), "text": "[Arg1] inhibits the hepatic metabolism of [Arg2]"}))
        .collect();
    let reply: Vec<Value> =
        agent.post(&format!("{}/score", server.1)).send_json(&body).unwrap().body_mut().read_json().unwrap();
    assert_eq!(reply.len(), 64);
    for (i, r) in reply.iter().enumerate() {
        assert_eq!(r["id"], format!("q{i}"));
        assert!(r["score"].as_f64().unwrap() > 0.5);
    }
}

#[test]
fn usage_errors_fail_cleanly() {
    let out = sdi().arg("serve").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no snapshot"));

    let work = tempfile::tempdir().unwrap();
    let out = catalog_args(
        sdi().arg("build").args(["--tau", "1.5", "--evidence", "x", "--corpus", "y", "--out"]).arg(work.path()),
    )
    .output()
    .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));

    let out = sdi().args(["convert", "--preset", "bogus", "--input", "x", "--out", "y"]).output().unwrap();
    assert!(!out.status.success());

    let bad = work.path().join("bad.toml");
    std::fs::write(&bad, "tau = 0.5\nunknown_key = 1\n").unwrap();
    let out = sdi().arg("--config").arg(&bad).arg("serve").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}
