//! Chat backends: an HTTP chat-completion client and a scripted mock.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::time::Duration;

use itemseg_core::llm::{BackendError, ChatBackend};
use serde::Deserialize;
use serde_json::json;

use crate::jsonl::{parse_jsonl, FormatError};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpSettings {
    pub url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    settings: HttpSettings,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(settings: HttpSettings) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| BackendError {
                message: e.to_string(),
                retriable: false,
            })?;
        let api_key = std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "{} is not set; sending requests without a bearer token",
                settings.api_key_env
            );
        }
        Ok(HttpChatBackend {
            client,
            settings,
            api_key,
        })
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

/// Extracts `choices[0].message.content` from a chat-completion reply.
pub fn completion_text(body: &[u8]) -> Result<String, BackendError> {
    let fail = |message: String| BackendError {
        message,
        retriable: false,
    };
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| fail(format!("response is not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| fail("response has no choices[0].message.content".into()))
}

impl ChatBackend for HttpChatBackend {
    fn send(&mut self, prompt: &str) -> Result<String, BackendError> {
        let body = serde_json::to_vec(&self.request_body(prompt)).expect("request serializes");
        let mut req = self
            .client
            .post(&self.settings.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError {
            message: e.to_string(),
            retriable: e.is_timeout() || e.is_connect() || e.is_request(),
        })?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| BackendError {
            message: e.to_string(),
            retriable: true,
        })?;
        if !status.is_success() {
            return Err(BackendError {
                message: format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)),
                retriable: status.as_u16() == 429 || status.is_server_error(),
            });
        }
        completion_text(&bytes)
    }
}

/// One scripted reply: a response text or a backend error.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub doc_id: Option<String>,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub retriable: bool,
}

/// Replies keyed by document; entries without a `doc_id` serve every
/// document that has none of its own. Each document replays its list from
/// the start, so results do not depend on processing order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    per_doc: BTreeMap<String, Vec<ScriptEntry>>,
    default: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn from_entries(entries: Vec<ScriptEntry>) -> Result<Self, FormatError> {
        let mut script = MockScript::default();
        for e in entries {
            let id = e.doc_id.clone().unwrap_or_default();
            if e.response.is_some() == e.error.is_some() {
                return Err(FormatError::Record {
                    doc_id: id,
                    message: "script entry needs exactly one of \"response\" or \"error\"".into(),
                });
            }
            match &e.doc_id {
                Some(id) => script.per_doc.entry(id.clone()).or_default().push(e),
                None => script.default.push(e),
            }
        }
        Ok(script)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Self::from_entries(parse_jsonl(text, Path::new("<script>"))?)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
        Self::from_entries(parse_jsonl(&text, path)?)
    }

    pub fn session(&self, doc_id: &str) -> MockSession {
        let entries = self.per_doc.get(doc_id).unwrap_or(&self.default);
        MockSession {
            queue: entries.iter().cloned().collect(),
        }
    }
}

pub struct MockSession {
    queue: VecDeque<ScriptEntry>,
}

impl ChatBackend for MockSession {
    fn send(&mut self, _prompt: &str) -> Result<String, BackendError> {
        let entry = self.queue.pop_front().ok_or_else(|| BackendError {
            message: "mock script exhausted".into(),
            retriable: false,
        })?;
        match (entry.response, entry.error) {
            (Some(text), _) => Ok(text),
            (None, Some(message)) => Err(BackendError {
                message,
                retriable: entry.retriable,
            }),
            (None, None) => unreachable!("validated when the script was built"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sessions_replay_per_document() {
        let script = MockScript::parse(
            r#"{"response": "default"}
{"doc_id": "a", "error": "busy", "retriable": true}
{"doc_id": "a", "response": "second"}"#,
        )
        .unwrap();
        let mut a = script.session("a");
        let err = a.send("p").unwrap_err();
        assert!(err.retriable);
        assert_eq!(a.send("p").unwrap(), "second");
        assert!(!a.send("p").unwrap_err().retriable);
        assert_eq!(script.session("a").send("p").unwrap_err().message, "busy");
        assert_eq!(script.session("zzz").send("p").unwrap(), "default");
    }

    #[test]
    fn entries_need_one_payload() {
        assert!(MockScript::parse(r#"{"doc_id": "a"}"#).is_err());
        assert!(MockScript::parse(r#"{"response": "x", "error": "y"}"#).is_err());
    }

    #[test]
    fn completion_extraction() {
        let body = br#"{"choices":[{"message":{"role":"assistant","content":"Item 1,3"}}]}"#;
        assert_eq!(completion_text(body).unwrap(), "Item 1,3");
        assert!(completion_text(b"{}").is_err());
        assert!(completion_text(b"not json").is_err());
    }

    #[test]
    fn request_shape() {
        let backend = HttpChatBackend::new(HttpSettings {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            temperature: 0.0,
            timeout: Duration::from_secs(1),
            api_key_env: "ITEMSEG_TEST_KEY_THAT_IS_UNSET".into(),
        })
        .unwrap();
        let body = backend.request_body("hello");
        assert_eq!(body["model"], "m");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hello");
    }

    #[test]
    fn unreachable_endpoint_is_retriable() {
        let mut backend = HttpChatBackend::new(HttpSettings {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            temperature: 0.0,
            timeout: Duration::from_secs(2),
            api_key_env: "ITEMSEG_TEST_KEY_THAT_IS_UNSET".into(),
        })
        .unwrap();
        assert!(backend.send("hi").unwrap_err().retriable);
    }
}
