use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::routing::post;
use axum::{Json, Router};
use serde_json::Value;

use sdi_core::classifier::scorer::{
    encode_request, encode_response, match_responses, parse_response_line, serve_http_batch, serve_lines, HttpScorer,
    ProtocolError, Scorer, ScorerError, ScorerRequest, ScorerResponse, SubprocessScorer,
};

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/protocol").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn golden_texts() -> Vec<String> {
    vec![
        "[Arg1] may potentiate the effect of [Arg2].".to_string(),
        "[Arg1] \"with\" [Arg2]\tµg\\n".to_string(),
        "中文 [Arg1] [Arg2] 😀".to_string(),
    ]
}

const GOLDEN_SCORES: [f64; 3] = [0.91, 0.0, 1.0];

struct Table(HashMap<String, f64>);

impl Scorer for Table {
    fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        texts
            .iter()
            .map(|t| self.0.get(t).copied().ok_or_else(|| ScorerError::InvalidInput(format!("unknown text {t:?}"))))
            .collect()
    }
}

fn golden_table() -> Table {
    Table(golden_texts().into_iter().zip(GOLDEN_SCORES).collect())
}

#[test]
fn requests_encode_byte_identical_to_golden() {
    let mut encoded = String::new();
    for (i, text) in golden_texts().into_iter().enumerate() {
        encoded.push_str(&encode_request(&ScorerRequest { id: format!("r{}", i + 1), text }));
        encoded.push('\n');
    }
    assert_eq!(encoded, golden("requests.ndjson"));
}

#[test]
fn responses_encode_byte_identical_to_golden() {
    let mut encoded = String::new();
    for (i, score) in GOLDEN_SCORES.into_iter().enumerate() {
        encoded.push_str(&encode_response(&ScorerResponse { id: format!("r{}", i + 1), score }));
        encoded.push('\n');
    }
    assert_eq!(encoded, golden("responses.ndjson"));
}

#[test]
fn golden_responses_parse_and_match_in_any_order() {
    let ids: Vec<String> = (1..=3).map(|i| format!("r{i}")).collect();
    for file in ["responses.ndjson", "responses_shuffled.ndjson"] {
        let text = golden(file);
        assert_eq!(match_responses(&ids, text.lines()).unwrap(), GOLDEN_SCORES);
    }
    let first = parse_response_line(golden("responses.ndjson").lines().next().unwrap()).unwrap();
    assert_eq!(first, ScorerResponse { id: "r1".into(), score: 0.91 });
}

#[test]
fn serve_lines_reproduces_golden_responses() {
    let mut out = Vec::new();
    let served = serve_lines(&mut golden_table(), golden("requests.ndjson").as_bytes(), &mut out).unwrap();
    assert_eq!(served, 3);
    assert_eq!(String::from_utf8(out).unwrap(), golden("responses.ndjson"));
}

// Subprocess scorers written in POSIX sh. Each answers with a score
// derived from the byte length of the request line.

const ECHO_LENGTH: &str = r#"
while IFS= read -r line; do
  id=${line#*\"id\":\"}; id=${id%%\"*}
  printf '{"id":"%s","score":0.%02d}\n' "$id" $(( ${#line} % 100 ))
done
"#;

const REVERSE_TRIPLES: &str = r#"
while IFS= read -r a && IFS= read -r b && IFS= read -r c; do
  for line in "$c" "$b" "$a"; do
    id=${line#*\"id\":\"}; id=${id%%\"*}
    printf '{"id":"%s","score":0.%02d}\n' "$id" $(( ${#line} % 100 ))
  done
done
"#;

const ANSWER_TWO_THEN_EXIT: &str = r#"
n=0
while IFS= read -r line; do
  n=$((n + 1))
  [ "$n" -gt 2 ] && exit 0
  id=${line#*\"id\":\"}; id=${id%%\"*}
  printf '{"id":"%s","score":0.5}\n' "$id"
done
"#;

fn sh(script: &str, batch: usize, timeout: Duration) -> SubprocessScorer {
    SubprocessScorer::spawn("sh", &["-c".to_string(), script.to_string()], batch, timeout).unwrap()
}

fn ascii_texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("[Arg1] {} [Arg2]", "x".repeat(i * 7 % 40))).collect()
}

fn length_scores(texts: &[String], first_id: usize) -> Vec<f64> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let line = encode_request(&ScorerRequest { id: format!("r{}", first_id + i), text: t.clone() });
            (line.len() % 100) as f64 / 100.0
        })
        .collect()
}

#[test]
fn subprocess_scores_follow_input_order() {
    let texts = ascii_texts(10);
    let mut scorer = sh(ECHO_LENGTH, 4, Duration::from_secs(10));
    assert_eq!(scorer.score_batch(&texts).unwrap(), length_scores(&texts, 1));
    let more = ascii_texts(3);
    assert_eq!(scorer.score_batch(&more).unwrap(), length_scores(&more, 11));
}

#[test]
fn subprocess_reordered_responses_are_matched_by_id() {
    let texts = ascii_texts(9);
    let mut scorer = sh(REVERSE_TRIPLES, 3, Duration::from_secs(10));
    assert_eq!(scorer.score_batch(&texts).unwrap(), length_scores(&texts, 1));
}

#[test]
fn subprocess_truncated_stream_names_missing_id() {
    let mut scorer = sh(ANSWER_TWO_THEN_EXIT, 8, Duration::from_secs(10));
    match scorer.score_batch(&ascii_texts(3)) {
        Err(ScorerError::Protocol(ProtocolError::MissingIds(ids))) => assert_eq!(ids, vec!["r3".to_string()]),
        other => panic!("expected missing r3, got {other:?}"),
    }
    assert!(matches!(scorer.score_batch(&ascii_texts(1)), Err(ScorerError::Transport(_))));
}

#[test]
fn subprocess_silence_times_out() {
    let timeout = Duration::from_millis(300);
    let mut scorer = sh("sleep 5", 4, timeout);
    let start = Instant::now();
    match scorer.score_batch(&ascii_texts(2)) {
        Err(ScorerError::Timeout(t)) => assert_eq!(t, timeout),
        other => panic!("expected timeout, got {other:?}"),
    }
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn subprocess_protocol_faults_surface() {
    let cases = [
        (r#"read -r l; echo 'not json'"#, "malformed"),
        (r#"read -r l; echo '{"id":"r1","score":1.5}'"#, "range"),
        (r#"read -r l; echo '{"id":"r9","score":0.5}'"#, "unknown"),
        (r#"read -r l; echo '{"id":"r1","error":"model offline"}'"#, "remote"),
    ];
    for (script, kind) in cases {
        let mut s = sh(script, 4, Duration::from_secs(10));
        let err = s.score_batch(&ascii_texts(1)).unwrap_err();
        let ok = match (&err, kind) {
            (ScorerError::Protocol(ProtocolError::Malformed { .. }), "malformed") => true,
            (ScorerError::Protocol(ProtocolError::ScoreOutOfRange { score, .. }), "range") => *score == 1.5,
            (ScorerError::Protocol(ProtocolError::UnknownId(id)), "unknown") => id == "r9",
            (ScorerError::Protocol(ProtocolError::Remote { message, .. }), "remote") => message == "model offline",
            _ => false,
        };
        assert!(ok, "{kind}: {err:?}");
    }
}

#[test]
fn missing_program_is_a_transport_error() {
    let err = SubprocessScorer::spawn("/nonexistent/scorer", &[], 4, Duration::from_secs(1)).err().unwrap();
    assert!(matches!(err, ScorerError::Transport(_)));
}

struct HttpFixture {
    url: String,
    batches: Arc<Mutex<Vec<usize>>>,
    _runtime: tokio::runtime::Runtime,
}

fn http_fixture(delay: Duration) -> HttpFixture {
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(1).enable_all().build().unwrap();
    let batches = Arc::new(Mutex::new(Vec::new()));
    let seen = batches.clone();
    let app = Router::new().route(
        "/score",
        post(move |Json(body): Json<Vec<Value>>| async move {
            tokio::time::sleep(delay).await;
            seen.lock().unwrap().push(body.len());
            let mut reply = serve_http_batch(&mut golden_table(), &body);
            reply.reverse();
            Json(reply)
        }),
    );
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });
    HttpFixture { url, batches, _runtime: runtime }
}

#[test]
fn http_scorer_matches_reversed_batches() {
    let fx = http_fixture(Duration::ZERO);
    let mut texts = golden_texts();
    texts.extend(golden_texts());
    texts.push(golden_texts()[0].clone());
    let mut scorer = HttpScorer::new(fx.url.clone(), 3, Duration::from_secs(10));
    let scores = scorer.score_batch(&texts).unwrap();
    assert_eq!(scores, [0.91, 0.0, 1.0, 0.91, 0.0, 1.0, 0.91]);
    assert_eq!(*fx.batches.lock().unwrap(), vec![3, 3, 1]);
}

#[test]
fn http_scorer_reports_remote_errors_and_timeouts() {
    let fx = http_fixture(Duration::ZERO);
    let mut scorer = HttpScorer::new(fx.url.clone(), 8, Duration::from_secs(10));
    let err = scorer.score_batch(&["[Arg1] unseen [Arg2]".to_string()]).unwrap_err();
    assert!(
        matches!(err, ScorerError::Protocol(ProtocolError::Remote { id: Some(ref id), .. }) if id == "r1"),
        "{err:?}"
    );

    let slow = http_fixture(Duration::from_secs(3));
    let mut scorer = HttpScorer::new(slow.url.clone(), 8, Duration::from_millis(300));
    assert!(matches!(scorer.score_batch(&golden_texts()), Err(ScorerError::Timeout(_))));

    let mut scorer = HttpScorer::new(fx.url.replace("/score", "/missing"), 8, Duration::from_secs(10));
    assert!(matches!(scorer.score_batch(&golden_texts()), Err(ScorerError::Transport(_))));
}
