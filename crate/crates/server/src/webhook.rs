use wedo_core::transport::{OutboundRecord, WebhookSink};

/// Delivers outbound records as JSON `POST`s. Any non-2xx answer or network
/// error counts as a failed post and is retried by the engine.
pub struct HttpSink {
    url: String,
    agent: ureq::Agent,
}

impl HttpSink {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            agent: ureq::Agent::new_with_defaults(),
        }
    }
}

impl WebhookSink for HttpSink {
    fn deliver(&self, record: &OutboundRecord) -> Result<(), String> {
        let body = serde_json::to_vec(record).map_err(|e| e.to_string())?;
        self.agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&body[..])
            .map(drop)
            .map_err(|e| format!("{}: {e}", self.url))
    }
}
