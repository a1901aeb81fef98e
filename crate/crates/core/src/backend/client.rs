//! HTTP dispatch to model endpoints with per-endpoint health tracking.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::wire::{EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse};
use crate::error::TransportError;

/// Consecutive failures after which an endpoint stops receiving requests.
pub const MAX_CONSECUTIVE_FAILURES: u32 = 3;
const EWMA_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRole {
    Drafter,
    Verifier,
    Embedder,
}

/// Point-in-time view of an endpoint's health.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDescriptor {
    pub url: String,
    pub role: EndpointRole,
    pub healthy: bool,
    pub latency_ewma_ms: f64,
    pub consecutive_failures: u32,
}

#[derive(Debug, Default)]
struct Health {
    consecutive_failures: u32,
    latency_ewma_ms: Option<f64>,
}

#[derive(Debug)]
pub struct Endpoint {
    url: String,
    role: EndpointRole,
    health: Mutex<Health>,
}

impl Endpoint {
    pub fn new(url: impl Into<String>, role: EndpointRole) -> Self {
        Self {
            url: url.into(),
            role,
            health: Mutex::new(Health::default()),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn role(&self) -> EndpointRole {
        self.role
    }

    pub fn is_healthy(&self) -> bool {
        self.health.lock().expect("health lock poisoned").consecutive_failures
            < MAX_CONSECUTIVE_FAILURES
    }

    pub fn descriptor(&self) -> EndpointDescriptor {
        let h = self.health.lock().expect("health lock poisoned");
        EndpointDescriptor {
            url: self.url.clone(),
            role: self.role,
            healthy: h.consecutive_failures < MAX_CONSECUTIVE_FAILURES,
            latency_ewma_ms: h.latency_ewma_ms.unwrap_or(0.0),
            consecutive_failures: h.consecutive_failures,
        }
    }

    /// Puts an endpoint back into rotation.
    pub fn reset_health(&self) {
        self.health.lock().expect("health lock poisoned").consecutive_failures = 0;
    }

    fn record_success(&self, elapsed_ms: f64) {
        let mut h = self.health.lock().expect("health lock poisoned");
        h.consecutive_failures = 0;
        h.latency_ewma_ms = Some(match h.latency_ewma_ms {
            Some(prev) => EWMA_WEIGHT * elapsed_ms + (1.0 - EWMA_WEIGHT) * prev,
            None => elapsed_ms,
        });
    }

    fn record_failure(&self) {
        let mut h = self.health.lock().expect("health lock poisoned");
        h.consecutive_failures = h.consecutive_failures.saturating_add(1);
    }
}

/// Endpoints sharing one role. Request `i` goes to the `(i mod p)`-th of the
/// `p` currently healthy endpoints.
#[derive(Debug, Clone)]
pub struct EndpointPool {
    endpoints: Vec<Arc<Endpoint>>,
}

impl EndpointPool {
    pub fn new<S: AsRef<str>>(urls: &[S], role: EndpointRole) -> Self {
        Self {
            endpoints: urls
                .iter()
                .map(|u| Arc::new(Endpoint::new(u.as_ref(), role)))
                .collect(),
        }
    }

    pub fn endpoints(&self) -> &[Arc<Endpoint>] {
        &self.endpoints
    }

    pub fn route(&self, request_index: usize) -> Result<Arc<Endpoint>, TransportError> {
        let healthy: Vec<_> = self.endpoints.iter().filter(|e| e.is_healthy()).collect();
        if healthy.is_empty() {
            return Err(TransportError::NoHealthyEndpoint);
        }
        Ok(Arc::clone(healthy[request_index % healthy.len()]))
    }

    pub fn descriptors(&self) -> Vec<EndpointDescriptor> {
        self.endpoints.iter().map(|e| e.descriptor()).collect()
    }
}

/// Thin JSON-over-HTTP client; safe to share between concurrent tasks.
#[derive(Debug, Clone)]
pub struct LmClient {
    http: reqwest::Client,
    timeout: Duration,
}

impl LmClient {
    pub fn new(timeout_ms: u64) -> Self {
        Self {
            http: reqwest::Client::new(),
            timeout: Duration::from_millis(timeout_ms),
        }
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout.as_millis() as u64
    }

    /// POSTs `request` to the endpoint, enforcing the request timeout and
    /// updating the endpoint's health.
    pub async fn dispatch<Req, Resp>(
        &self,
        endpoint: &Endpoint,
        request: &Req,
    ) -> Result<Resp, TransportError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        if !endpoint.is_healthy() {
            return Err(TransportError::Unhealthy {
                url: endpoint.url.clone(),
            });
        }
        let started = Instant::now();
        let outcome = tokio::time::timeout(self.timeout, self.post(&endpoint.url, request)).await;
        let result = match outcome {
            Ok(r) => r,
            Err(_) => Err(TransportError::Timeout {
                url: endpoint.url.clone(),
                timeout_ms: self.timeout_ms(),
            }),
        };
        match &result {
            Ok(_) => endpoint.record_success(started.elapsed().as_secs_f64() * 1e3),
            Err(_) => endpoint.record_failure(),
        }
        result
    }

    async fn post<Req, Resp>(&self, url: &str, request: &Req) -> Result<Resp, TransportError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let response = self
            .http
            .post(url)
            .json(request)
            .send()
            .await
            .map_err(|e| classify(url, e))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::Status {
                url: url.to_string(),
                status: status.as_u16(),
            });
        }
        let bytes = response.bytes().await.map_err(|e| classify(url, e))?;
        serde_json::from_slice(&bytes).map_err(|e| TransportError::Malformed {
            url: url.to_string(),
            detail: e.to_string(),
        })
    }

    /// Generation or echo scoring; token offsets are checked against the text.
    pub async fn generate(
        &self,
        endpoint: &Endpoint,
        request: &GenerateRequest,
    ) -> Result<GenerateResponse, TransportError> {
        let response: GenerateResponse = self.dispatch(endpoint, request).await?;
        response.check().map_err(|detail| TransportError::Malformed {
            url: endpoint.url.clone(),
            detail,
        })?;
        if request.echo && response.text != request.prompt {
            return Err(TransportError::Malformed {
                url: endpoint.url.clone(),
                detail: "echo response text differs from the prompt".into(),
            });
        }
        Ok(response)
    }

    pub async fn embed(
        &self,
        endpoint: &Endpoint,
        request: &EmbedRequest,
    ) -> Result<EmbedResponse, TransportError> {
        self.dispatch(endpoint, request).await
    }
}

fn classify(url: &str, e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout {
            url: url.to_string(),
            timeout_ms: 0,
        }
    } else if e.is_connect() || e.is_request() {
        TransportError::Connect {
            url: url.to_string(),
            detail: e.to_string(),
        }
    } else {
        TransportError::Malformed {
            url: url.to_string(),
            detail: e.to_string(),
        }
    }
}
