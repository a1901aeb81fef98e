//! Model endpoints: wire format, HTTP client, and the deterministic mock.

mod client;
pub mod mock;
mod server;
pub mod wire;

use std::sync::Arc;

pub use client::{
    Endpoint, EndpointDescriptor, EndpointPool, EndpointRole, LmClient, MAX_CONSECUTIVE_FAILURES,
};
pub use mock::{MockLm, MockScript, RequestKind, RequestLogEntry, TokenScript};
pub use server::{router, MockServer};

use crate::config::PipelineConfig;

/// Everything the pipeline needs to reach its models. Endpoint health is kept
/// across calls, so reuse one `Backends` for a whole experiment.
#[derive(Debug, Clone)]
pub struct Backends {
    pub client: LmClient,
    pub drafters: EndpointPool,
    pub verifier: Arc<Endpoint>,
    pub embedder: Arc<Endpoint>,
}

impl Backends {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            client: LmClient::new(cfg.request_timeout_ms),
            drafters: EndpointPool::new(&cfg.drafter_endpoints, EndpointRole::Drafter),
            verifier: Arc::new(Endpoint::new(&cfg.verifier_endpoint, EndpointRole::Verifier)),
            embedder: Arc::new(Endpoint::new(&cfg.embedding_endpoint, EndpointRole::Embedder)),
        }
    }
}
