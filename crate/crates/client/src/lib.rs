//! Typed async client for the diagnosis session service.

use reqwest::{Method, RequestBuilder, Response};
use serde::de::DeserializeOwned;

use activediag_core::wire::{
    CreateSession, Created, ErrorBody, ModelInfo, ObserveRequest, Observed, Snapshot, SuggestionView,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{status} {}: {}", .body.code, .body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    /// The service's error code, if the failure came from the service.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            ClientError::Transport(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Client {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    async fn checked(req: RequestBuilder) -> Result<Response, ClientError> {
        let resp = req.send().await?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status().as_u16();
        let text = resp.text().await?;
        let body = serde_json::from_str(&text)
            .unwrap_or_else(|_| ErrorBody { code: "http".into(), message: text });
        Err(ClientError::Api { status, body })
    }

    async fn json<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, ClientError> {
        Ok(Self::checked(req).await?.json().await?)
    }

    pub async fn models(&self) -> Result<Vec<ModelInfo>, ClientError> {
        Self::json(self.request(Method::GET, "/models")).await
    }

    pub async fn create(&self, req: &CreateSession) -> Result<Created, ClientError> {
        Self::json(self.request(Method::POST, "/sessions").json(req)).await
    }

    pub async fn snapshot(&self, id: &str) -> Result<Snapshot, ClientError> {
        Self::json(self.request(Method::GET, &format!("/sessions/{id}"))).await
    }

    pub async fn suggest(&self, id: &str) -> Result<SuggestionView, ClientError> {
        Self::json(self.request(Method::POST, &format!("/sessions/{id}/suggest"))).await
    }

    pub async fn observe(&self, id: &str, req: &ObserveRequest) -> Result<Observed, ClientError> {
        Self::json(self.request(Method::POST, &format!("/sessions/{id}/observe")).json(req)).await
    }

    pub async fn trace_csv(&self, id: &str) -> Result<String, ClientError> {
        Ok(Self::checked(self.request(Method::GET, &format!("/sessions/{id}/trace.csv"))).await?.text().await?)
    }
}
