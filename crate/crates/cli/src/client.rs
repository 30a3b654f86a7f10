use serde_json::Value;
use ureq::Agent;

use crate::CliError;

/// A successful (2xx) API response.
pub struct Reply {
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Result<Value, CliError> {
        serde_json::from_slice(&self.body).map_err(|e| CliError::Protocol(format!("response is not JSON: {e}")))
    }
}

pub struct Client {
    base: String,
    agent: Agent,
}

impl Client {
    pub fn new(server: &str) -> Client {
        let agent = Agent::config_builder().http_status_as_error(false).build().into();
        Client {
            base: format!("{}/api/v1", server.trim_end_matches('/')),
            agent,
        }
    }

    pub fn get(&self, path: &str, query: &[(&str, String)]) -> Result<Reply, CliError> {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        for (k, v) in query {
            req = req.query(*k, v);
        }
        finish(req.call())
    }

    pub fn post(
        &self,
        path: &str,
        query: &[(&str, String)],
        content_type: &str,
        body: &[u8],
    ) -> Result<Reply, CliError> {
        let mut req = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", content_type);
        for (k, v) in query {
            req = req.query(*k, v);
        }
        finish(req.send(body))
    }

    pub fn post_json(&self, path: &str, body: &Value) -> Result<Reply, CliError> {
        self.post(path, &[], "application/json", body.to_string().as_bytes())
    }
}

fn finish(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Reply, CliError> {
    let mut res = result.map_err(|e| CliError::Unreachable(e.to_string()))?;
    let status = res.status().as_u16();
    let body = res
        .body_mut()
        .with_config()
        .limit(u64::MAX)
        .read_to_vec()
        .map_err(|e| CliError::Unreachable(e.to_string()))?;
    if (200..300).contains(&status) {
        return Ok(Reply { body });
    }
    let parsed: Option<Value> = serde_json::from_slice(&body).ok();
    let field = |name: &str| {
        parsed
            .as_ref()
            .and_then(|v| v["error"][name].as_str())
            .map(str::to_string)
    };
    Err(CliError::Api {
        status,
        code: field("code").unwrap_or_else(|| "unknown".into()),
        message: field("message").unwrap_or_else(|| String::from_utf8_lossy(&body).trim().to_string()),
        body,
    })
}
