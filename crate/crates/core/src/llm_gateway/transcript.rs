//! Request/response store persisted as newline-delimited JSON: one `meta`
//! line, then one `entry` line per request key.

use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, GatewayError, Message, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub purpose: Purpose,
    /// The request as sent, kept so transcripts can be read and audited.
    pub messages: Vec<Message>,
    pub response: CompletionResponse,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Meta(TranscriptMeta),
    Entry(TranscriptEntry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub meta: TranscriptMeta,
    entries: IndexMap<String, TranscriptEntry>,
}

impl Transcript {
    pub fn new(model_id: impl Into<String>, template_version: impl Into<String>) -> Self {
        Self {
            meta: TranscriptMeta {
                model_id: model_id.into(),
                created_at: Utc::now(),
                template_version: template_version.into(),
            },
            entries: IndexMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&CompletionResponse> {
        self.entries.get(key).map(|e| &e.response)
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.values()
    }

    /// Stores a response under the request's key. Returns true when an
    /// earlier entry for the same key was overwritten.
    pub fn record(&mut self, req: &CompletionRequest, resp: &CompletionResponse) -> bool {
        let key = req.request_key();
        let entry = TranscriptEntry {
            key: key.clone(),
            purpose: req.purpose,
            messages: req.messages.clone(),
            response: resp.clone(),
        };
        let replaced = self.entries.insert(key.clone(), entry).is_some();
        if replaced {
            log::warn!("transcript entry {key} overwritten");
        }
        replaced
    }

    /// Orders entries by key so saved files do not depend on call order.
    pub fn sort(&mut self) {
        self.entries.sort_keys();
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &Line::Meta(self.meta.clone()))?;
        writeln!(w)?;
        for entry in self.entries.values() {
            serde_json::to_writer(&mut w, &Line::Entry(entry.clone()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let persist = |e: std::io::Error| GatewayError::Persistence(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(persist)?;
        }
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(persist)?;
        std::fs::write(path, buf).map_err(persist)
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, GatewayError> {
        let mut meta = None;
        let mut entries = IndexMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Persistence(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| GatewayError::Persistence(format!("line {}: {e}", i + 1)))?;
            match parsed {
                Line::Meta(m) => meta = Some(m),
                Line::Entry(e) => {
                    entries.insert(e.key.clone(), e);
                }
            }
        }
        let meta = meta.ok_or_else(|| GatewayError::Persistence("transcript has no meta line".into()))?;
        Ok(Self { meta, entries })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file =
            std::fs::File::open(path).map_err(|e| GatewayError::Persistence(format!("{}: {e}", path.display())))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_overwrite() {
        let mut t = Transcript::new("m", "v1");
        let a = CompletionRequest::prompt("m", "s", "one", Purpose::Other);
        let b = CompletionRequest::prompt("m", "s", "two", Purpose::Other);
        assert!(!t.record(&a, &CompletionResponse::text("A")));
        assert!(!t.record(&b, &CompletionResponse::text("B")));
        assert_eq!(t.len(), 2);
        assert!(t.record(&a, &CompletionResponse::text("A2")));
        assert_eq!(t.len(), 2);

        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("\"kind\":\"meta\""));
        let back = Transcript::read_from(&buf[..]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get(&a.request_key()).unwrap().content, "A2");
    }

    #[test]
    fn missing_meta_is_rejected() {
        assert!(Transcript::read_from(&b""[..]).is_err());
    }
}
