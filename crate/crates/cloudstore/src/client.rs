//! Blocking HTTP client mirroring the service endpoints.

use crate::records::{NewTraceRecord, TraceRecord, TraceSummary};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("network error: {0}")]
    Network(String),
    #[error("unauthorized")]
    Unauthorized,
    #[error("not found")]
    NotFound,
    #[error("rejected by server: {0}")]
    Validation(String),
    #[error("server error {0}: {1}")]
    Server(u16, String),
    #[error("unexpected response shape: {0}")]
    Schema(String),
}

pub struct Client {
    base: String,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

impl Client {
    pub fn new(base_url: &str) -> Self {
        Client {
            base: base_url.trim_end_matches('/').to_string(),
            token: None,
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_token(base_url: &str, token: &str) -> Self {
        let mut c = Self::new(base_url);
        c.token = Some(token.to_string());
        c
    }

    pub fn set_token(&mut self, token: &str) {
        self.token = Some(token.to_string());
    }

    pub fn health(&self) -> Result<(), ClientError> {
        let resp = self
            .http
            .get(format!("{}/api/health", self.base))
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(ClientError::Server(resp.status().as_u16(), "health".into()))
        }
    }

    /// Exchanges credentials for a bearer token and installs it.
    pub fn login(&mut self, username: &str, password: &str) -> Result<LoginResponse, ClientError> {
        let resp = self
            .http
            .post(format!("{}/api/login", self.base))
            .json(&serde_json::json!({"username": username, "password": password}))
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        let resp = Self::check(resp)?;
        let login: LoginResponse = resp
            .json()
            .map_err(|e| ClientError::Schema(e.to_string()))?;
        self.token = Some(login.token.clone());
        Ok(login)
    }

    pub fn upload(&self, record: &NewTraceRecord) -> Result<String, ClientError> {
        #[derive(Deserialize)]
        struct Created {
            id: String,
        }
        let resp = self
            .authorized(self.http.post(format!("{}/api/traces", self.base)))
            .json(record)
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        let resp = Self::check(resp)?;
        let created: Created = resp
            .json()
            .map_err(|e| ClientError::Schema(e.to_string()))?;
        Ok(created.id)
    }

    pub fn list(&self, patient_ref: Option<&str>) -> Result<Vec<TraceSummary>, ClientError> {
        #[derive(Deserialize)]
        struct Listing {
            summaries: Vec<TraceSummary>,
        }
        let mut req = self.authorized(self.http.get(format!("{}/api/traces", self.base)));
        if let Some(p) = patient_ref {
            req = req.query(&[("patient_ref", p)]);
        }
        let resp = req.send().map_err(|e| ClientError::Network(e.to_string()))?;
        let resp = Self::check(resp)?;
        let listing: Listing = resp
            .json()
            .map_err(|e| ClientError::Schema(e.to_string()))?;
        Ok(listing.summaries)
    }

    /// The stored record bytes, exactly as persisted.
    pub fn fetch_bytes(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let resp = self
            .authorized(self.http.get(format!("{}/api/traces/{id}", self.base)))
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        let resp = Self::check(resp)?;
        Ok(resp
            .bytes()
            .map_err(|e| ClientError::Network(e.to_string()))?
            .to_vec())
    }

    pub fn fetch(&self, id: &str) -> Result<TraceRecord, ClientError> {
        let bytes = self.fetch_bytes(id)?;
        let text = String::from_utf8(bytes).map_err(|e| ClientError::Schema(e.to_string()))?;
        TraceRecord::from_json(&text).map_err(|e| ClientError::Schema(e.to_string()))
    }

    fn authorized(&self, req: reqwest::blocking::RequestBuilder) -> reqwest::blocking::RequestBuilder {
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    fn check(resp: reqwest::blocking::Response) -> Result<reqwest::blocking::Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let message = resp
            .json::<serde_json::Value>()
            .ok()
            .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(String::from))
            .unwrap_or_else(|| status.to_string());
        Err(match status.as_u16() {
            401 => ClientError::Unauthorized,
            404 => ClientError::NotFound,
            422 => ClientError::Validation(message),
            code => ClientError::Server(code, message),
        })
    }
}
