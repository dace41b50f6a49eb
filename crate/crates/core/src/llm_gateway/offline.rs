//! Backends that never touch the network.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use super::{CompletionRequest, CompletionResponse, Gateway, GatewayError, Purpose, Transcript};

/// Answers strictly from a recorded transcript.
pub struct ReplayGateway {
    transcript: Transcript,
}

impl ReplayGateway {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Transcript::load(path).map(Self::new)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

impl Gateway for ReplayGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let key = req.request_key();
        self.transcript.get(&key).cloned().ok_or(GatewayError::TranscriptMiss(key))
    }
}

type Script = dyn Fn(&CompletionRequest, usize) -> Result<CompletionResponse, GatewayError> + Send + Sync;

/// Scripted responses for tests and dry runs. Every request is logged.
pub struct StubGateway {
    script: Box<Script>,
    log: Mutex<StubLog>,
}

#[derive(Default)]
struct StubLog {
    calls: Vec<CompletionRequest>,
    per_purpose: HashMap<Purpose, usize>,
}

impl StubGateway {
    /// The script receives the request and how many earlier calls had the
    /// same purpose.
    pub fn try_from_fn(
        f: impl Fn(&CompletionRequest, usize) -> Result<CompletionResponse, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self { script: Box::new(f), log: Mutex::default() }
    }

    pub fn from_fn(f: impl Fn(&CompletionRequest, usize) -> String + Send + Sync + 'static) -> Self {
        Self::try_from_fn(move |req, n| Ok(CompletionResponse::text(f(req, n))))
    }

    /// Replies in order regardless of purpose; errors once the list runs out.
    pub fn sequence<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        Self::try_from_fn(move |_, _| {
            let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            replies
                .get(i)
                .map(CompletionResponse::text)
                .ok_or_else(|| GatewayError::Transport(format!("stub script exhausted after {i} call(s)")))
        })
    }

    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.log.lock().expect("stub log poisoned").calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().expect("stub log poisoned").calls.len()
    }

    pub fn count(&self, purpose: Purpose) -> usize {
        self.log.lock().expect("stub log poisoned").per_purpose.get(&purpose).copied().unwrap_or(0)
    }
}

impl Gateway for StubGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let nth = {
            let mut log = self.log.lock().expect("stub log poisoned");
            log.calls.push(req.clone());
            let n = log.per_purpose.entry(req.purpose).or_default();
            *n += 1;
            *n - 1
        };
        (self.script)(req, nth)
    }
}

/// Passes calls through to another backend and records each response.
pub struct Recorder<G> {
    inner: G,
    transcript: Mutex<Transcript>,
}

impl<G: Gateway> Recorder<G> {
    pub fn new(inner: G, transcript: Transcript) -> Self {
        Self { inner, transcript: Mutex::new(transcript) }
    }

    pub fn snapshot(&self) -> Transcript {
        self.transcript.lock().expect("transcript poisoned").clone()
    }

    /// Writes the transcript with entries sorted by key.
    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let mut t = self.snapshot();
        t.sort();
        t.save(path)
    }
}

impl<G: Gateway> Gateway for Recorder<G> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let resp = self.inner.complete(req)?;
        self.transcript.lock().expect("transcript poisoned").record(req, &resp);
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::prompt("m", "s", text, Purpose::Other)
    }

    #[test]
    fn stub_sequence_in_order() {
        let stub = StubGateway::sequence(["bad", "bad", "good"]);
        let got: Vec<_> = (0..3).map(|_| stub.complete(&req("x")).unwrap().content).collect();
        assert_eq!(got, ["bad", "bad", "good"]);
        assert!(stub.complete(&req("x")).is_err());
        assert_eq!(stub.call_count(), 4);
    }

    #[test]
    fn stub_counts_per_purpose() {
        let stub = StubGateway::from_fn(|r, n| format!("{:?}{n}", r.purpose));
        let mut a = req("a");
        a.purpose = Purpose::SeedRepair;
        assert_eq!(stub.complete(&a).unwrap().content, "SeedRepair0");
        assert_eq!(stub.complete(&req("b")).unwrap().content, "Other0");
        assert_eq!(stub.complete(&a).unwrap().content, "SeedRepair1");
        assert_eq!(stub.count(Purpose::SeedRepair), 2);
    }

    #[test]
    fn record_then_replay() {
        let rec = Recorder::new(StubGateway::sequence(["r1", "r2"]), Transcript::new("m", "v"));
        rec.complete(&req("one")).unwrap();
        rec.complete(&req("two")).unwrap();
        let replay = ReplayGateway::new(rec.snapshot());
        for _ in 0..3 {
            assert_eq!(replay.complete(&req("one")).unwrap().content, "r1");
            assert_eq!(replay.complete(&req("two")).unwrap().content, "r2");
        }
        match replay.complete(&req("three")) {
            Err(GatewayError::TranscriptMiss(k)) => assert_eq!(k, req("three").request_key()),
            other => panic!("expected miss, got {other:?}"),
        }
    }
}
