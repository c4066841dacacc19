//! Scorer abstraction and the external scorer wire protocol.
//!
//! Requests and responses are single-line JSON objects:
//! `{"id":"..","text":".."}` out, `{"id":"..","score":0.73}` back.
//! A response of the form `{"id":"..","error":".."}` reports a remote
//! failure for that id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub trait Scorer {
    /// One score in `[0, 1]` per input, in input order.
    fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerRequest {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerResponse {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerErrorResponse {
    pub id: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed response line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("no response for ids {}", .0.join(", "))]
    MissingIds(Vec<String>),
    #[error("response for unknown id {0:?}")]
    UnknownId(String),
    #[error("duplicate response for id {0:?}")]
    DuplicateId(String),
    #[error("score {score} for id {id:?} outside [0, 1]")]
    ScoreOutOfRange { id: String, score: f64 },
    #[error("scorer reported an error for id {id:?}: {message}")]
    Remote { id: Option<String>, message: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("scorer transport failure: {0}")]
    Transport(String),
    #[error("scorer timed out after {0:?}")]
    Timeout(Duration),
    #[error("scorer protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("invalid scorer input: {0}")]
    InvalidInput(String),
}

pub fn encode_request(req: &ScorerRequest) -> String {
    serde_json::to_string(req).expect("request serializes")
}

pub fn encode_response(resp: &ScorerResponse) -> String {
    serde_json::to_string(resp).expect("response serializes")
}

fn parse_response_value(value: Value, raw: &str) -> Result<ScorerResponse, ProtocolError> {
    let malformed = |reason: &str| ProtocolError::Malformed { line: raw.to_string(), reason: reason.to_string() };
    let obj = value.as_object().ok_or_else(|| malformed("not a JSON object"))?;
    if let Some(err) = obj.get("error") {
        let message = err.as_str().map_or_else(|| err.to_string(), str::to_string);
        let id = obj.get("id").and_then(Value::as_str).map(str::to_string);
        return Err(ProtocolError::Remote { id, message });
    }
    let id = obj.get("id").and_then(Value::as_str).ok_or_else(|| malformed("missing string id"))?;
    let score = obj.get("score").and_then(Value::as_f64).ok_or_else(|| malformed("missing numeric score"))?;
    Ok(ScorerResponse { id: id.to_string(), score })
}

pub fn parse_response_line(line: &str) -> Result<ScorerResponse, ProtocolError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| ProtocolError::Malformed { line: line.to_string(), reason: e.to_string() })?;
    parse_response_value(value, line)
}

/// Matches responses to the requests of one batch by id.
#[derive(Debug)]
pub struct ResponseMatcher {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    scores: Vec<Option<f64>>,
    remaining: usize,
}

impl ResponseMatcher {
    pub fn new(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let n = ids.len();
        Self { ids, index, scores: vec![None; n], remaining: n }
    }

    pub fn accept(&mut self, resp: ScorerResponse) -> Result<(), ProtocolError> {
        let slot = *self.index.get(&resp.id).ok_or_else(|| ProtocolError::UnknownId(resp.id.clone()))?;
        if !(0.0..=1.0).contains(&resp.score) {
            return Err(ProtocolError::ScoreOutOfRange { id: resp.id, score: resp.score });
        }
        if self.scores[slot].is_some() {
            return Err(ProtocolError::DuplicateId(resp.id));
        }
        self.scores[slot] = Some(resp.score);
        self.remaining -= 1;
        Ok(())
    }

    pub fn accept_line(&mut self, line: &str) -> Result<(), ProtocolError> {
        self.accept(parse_response_line(line)?)
    }

    pub fn is_complete(&self) -> bool {
        self.remaining == 0
    }

    pub fn finish(self) -> Result<Vec<f64>, ProtocolError> {
        if !self.is_complete() {
            let missing =
                self.ids.iter().zip(&self.scores).filter(|(_, s)| s.is_none()).map(|(id, _)| id.clone()).collect();
            return Err(ProtocolError::MissingIds(missing));
        }
        Ok(self.scores.into_iter().map(|s| s.expect("complete")).collect())
    }
}

/// Matches a complete set of response lines against request ids.
pub fn match_responses<I, S>(ids: &[String], lines: I) -> Result<Vec<f64>, ProtocolError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut matcher = ResponseMatcher::new(ids.to_vec());
    for line in lines {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        matcher.accept_line(line)?;
    }
    matcher.finish()
}

#[derive(Debug, Default)]
struct IdSource(u64);

impl IdSource {
    fn requests(&mut self, texts: &[String]) -> Vec<ScorerRequest> {
        texts
            .iter()
            .map(|t| {
                self.0 += 1;
                ScorerRequest { id: format!("r{}", self.0), text: t.clone() }
            })
            .collect()
    }
}

enum ReaderEvent {
    Line(String),
    Failed(String),
}

/// External scorer spoken to over the stdio of a child process.
pub struct SubprocessScorer {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<ReaderEvent>,
    batch_size: usize,
    timeout: Duration,
    ids: IdSource,
    poisoned: bool,
}

impl SubprocessScorer {
    pub fn spawn(program: &str, args: &[String], batch_size: usize, timeout: Duration) -> Result<Self, ScorerError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ScorerError::Transport(format!("spawn {program}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let event = match line {
                    Ok(l) => ReaderEvent::Line(l),
                    Err(e) => ReaderEvent::Failed(e.to_string()),
                };
                let failed = matches!(event, ReaderEvent::Failed(_));
                if tx.send(event).is_err() || failed {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            batch_size: batch_size.max(1),
            timeout,
            ids: IdSource::default(),
            poisoned: false,
        })
    }

    fn run_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let requests = self.ids.requests(texts);
        let stdin = self.stdin.as_mut().ok_or_else(|| ScorerError::Transport("scorer stdin closed".into()))?;
        let mut payload = String::new();
        for req in &requests {
            payload.push_str(&encode_request(req));
            payload.push('\n');
        }
        stdin
            .write_all(payload.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| ScorerError::Transport(format!("write to scorer: {e}")))?;

        let mut matcher = ResponseMatcher::new(requests.into_iter().map(|r| r.id).collect());
        let deadline = Instant::now() + self.timeout;
        while !matcher.is_complete() {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(ReaderEvent::Line(line)) => {
                    if !line.trim().is_empty() {
                        matcher.accept_line(&line)?;
                    }
                }
                Ok(ReaderEvent::Failed(e)) => return Err(ScorerError::Transport(format!("read from scorer: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(ScorerError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        Ok(matcher.finish()?)
    }
}

impl Scorer for SubprocessScorer {
    fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        if self.poisoned {
            return Err(ScorerError::Transport("scorer stream desynchronized by an earlier failure".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            match self.run_batch(chunk) {
                Ok(scores) => out.extend(scores),
                Err(e) => {
                    self.poisoned = true;
                    return Err(e);
                }
            }
        }
        Ok(out)
    }
}

impl Drop for SubprocessScorer {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// External scorer behind an HTTP endpoint accepting a JSON array of
/// requests and answering with a JSON array of responses.
pub struct HttpScorer {
    url: String,
    agent: ureq::Agent,
    batch_size: usize,
    timeout: Duration,
    ids: IdSource,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, batch_size: usize, timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { url: url.into(), agent, batch_size: batch_size.max(1), timeout, ids: IdSource::default() }
    }

    fn transport(&self, e: ureq::Error) -> ScorerError {
        match e {
            ureq::Error::Timeout(_) => ScorerError::Timeout(self.timeout),
            other => ScorerError::Transport(format!("{}: {other}", self.url)),
        }
    }

    fn run_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let requests = self.ids.requests(texts);
        let mut resp = self.agent.post(&self.url).send_json(&requests).map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| self.transport(e))?;
        if !(200..300).contains(&status) {
            return Err(ScorerError::Transport(format!("{}: HTTP status {status}", self.url)));
        }
        let items: Vec<Value> = serde_json::from_str(&body)
            .map_err(|e| ProtocolError::Malformed { line: body.clone(), reason: e.to_string() })?;
        let mut matcher = ResponseMatcher::new(requests.into_iter().map(|r| r.id).collect());
        for item in items {
            let raw = item.to_string();
            matcher.accept(parse_response_value(item, &raw)?)?;
        }
        Ok(matcher.finish()?)
    }
}

impl Scorer for HttpScorer {
    fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.run_batch(chunk)?);
        }
        Ok(out)
    }
}

fn answer(scorer: &mut dyn Scorer, req: Result<ScorerRequest, (Option<String>, String)>) -> String {
    let failure = |id: Option<String>, error: String| {
        serde_json::to_string(&ScorerErrorResponse { id, error }).expect("error serializes")
    };
    match req {
        Ok(req) => match scorer.score_batch(std::slice::from_ref(&req.text)) {
            Ok(scores) => encode_response(&ScorerResponse { id: req.id, score: scores[0] }),
            Err(e) => failure(Some(req.id), e.to_string()),
        },
        Err((id, error)) => failure(id, error),
    }
}

fn parse_request(line: &str) -> Result<ScorerRequest, (Option<String>, String)> {
    let value: Value = serde_json::from_str(line).map_err(|e| (None, e.to_string()))?;
    let id = value.get("id").and_then(Value::as_str).map(str::to_string);
    serde_json::from_value(value).map_err(|e| (id, e.to_string()))
}

/// Serves the wire protocol over a line stream until end of input. A bad
/// request line gets an error response and the stream continues.
pub fn serve_lines<R: BufRead, W: Write>(scorer: &mut dyn Scorer, input: R, mut output: W) -> std::io::Result<usize> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = answer(scorer, parse_request(&line));
        output.write_all(reply.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}

/// Answers one HTTP batch body.
pub fn serve_http_batch(scorer: &mut dyn Scorer, requests: &[Value]) -> Vec<Value> {
    requests
        .iter()
        .map(|v| {
            let id = v.get("id").and_then(Value::as_str).map(str::to_string);
            let req = serde_json::from_value::<ScorerRequest>(v.clone()).map_err(|e| (id, e.to_string()));
            serde_json::from_str(&answer(scorer, req)).expect("reply is JSON")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("r{i}")).collect()
    }

    #[test]
    fn matches_in_order_and_reversed() {
        let lines = [r#"{"id":"r1","score":0.1}"#, r#"{"id":"r2","score":0.2}"#, r#"{"id":"r3","score":0.3}"#];
        assert_eq!(match_responses(&ids(3), lines).unwrap(), vec![0.1, 0.2, 0.3]);
        let mut rev = lines;
        rev.reverse();
        assert_eq!(match_responses(&ids(3), rev).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn truncated_stream_names_missing_id() {
        let lines = [r#"{"id":"r1","score":0.1}"#, r#"{"id":"r3","score":0.3}"#];
        let err = match_responses(&ids(3), lines).unwrap_err();
        assert_eq!(err, ProtocolError::MissingIds(vec!["r2".into()]));
        assert!(err.to_string().contains("r2"));
    }

    #[test]
    fn protocol_faults() {
        type Check = fn(&ProtocolError) -> bool;
        let cases: [(&str, Check); 5] = [
            (r#"{"id":"r1","score":1.3}"#, |e| matches!(e, ProtocolError::ScoreOutOfRange { .. })),
            (r#"{"id":"r9","score":0.3}"#, |e| matches!(e, ProtocolError::UnknownId(_))),
            (r#"{"id":"r1","score":"high"}"#, |e| matches!(e, ProtocolError::Malformed { .. })),
            ("not json", |e| matches!(e, ProtocolError::Malformed { .. })),
            (r#"{"id":"r1","error":"boom"}"#, |e| matches!(e, ProtocolError::Remote { .. })),
        ];
        for (line, check) in cases {
            let err = match_responses(&ids(1), [line]).unwrap_err();
            assert!(check(&err), "{line}: {err:?}");
        }
        let dup = [r#"{"id":"r1","score":0.1}"#, r#"{"id":"r1","score":0.1}"#];
        assert_eq!(match_responses(&ids(2), dup).unwrap_err(), ProtocolError::DuplicateId("r1".into()));
    }

    #[test]
    fn framing_is_compact_single_line() {
        let req = ScorerRequest { id: "r1".into(), text: "[Arg1] and\n[Arg2]".into() };
        assert_eq!(encode_request(&req), r#"{"id":"r1","text":"[Arg1] and\n[Arg2]"}"#);
        let resp = ScorerResponse { id: "r1".into(), score: 0.25 };
        assert_eq!(encode_response(&resp), r#"{"id":"r1","score":0.25}"#);
    }

    struct Fixed(f64);
    impl Scorer for Fixed {
        fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
            Ok(vec![self.0; texts.len()])
        }
    }

    #[test]
    fn server_reports_bad_lines_and_continues() {
        let input = "{\"id\":\"a\",\"text\":\"x\"}\nbroken\n{\"id\":\"b\"}\n{\"id\":\"c\",\"text\":\"y\"}\n";
        let mut out = Vec::new();
        let n = serve_lines(&mut Fixed(0.5), input.as_bytes(), &mut out).unwrap();
        assert_eq!(n, 4);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"id":"a","score":0.5}"#);
        assert!(lines[1].starts_with(r#"{"id":null,"error":"#));
        assert!(lines[2].starts_with(r#"{"id":"b","error":"#));
        assert_eq!(lines[3], r#"{"id":"c","score":0.5}"#);
    }
}
