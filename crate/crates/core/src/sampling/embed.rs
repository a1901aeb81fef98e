use serde::{Deserialize, Serialize};

use crate::backend::wire::EmbedRequest;
use crate::backend::{Endpoint, LmClient};
use crate::error::{Error, Result};
use crate::model::{Document, Question};

/// A dense vector with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("embedding has no components".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("embedding component {v} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; a zero vector has no direction and is rejected.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Data("cannot normalize a zero-norm embedding".into()));
        }
        Ok(Self(self.0.iter().map(|v| v / n).collect()))
    }

    pub fn squared_distance(&self, other: &Self) -> f64 {
        squared_distance(&self.0, &other.0)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Embeds `"title\ntext"` for every document in one batch request, with the
/// question text as the embedding instruction. Returned vectors are unit norm
/// and in document order.
pub async fn embed_documents(
    client: &LmClient,
    endpoint: &Endpoint,
    docs: &[Document],
    question: &Question,
) -> Result<Vec<EmbeddingVector>> {
    if docs.is_empty() {
        return Err(Error::Argument("no documents to embed".into()));
    }
    let request = EmbedRequest {
        instruction: question.text.clone(),
        inputs: docs.iter().map(Document::embedding_input).collect(),
    };
    let response = client.embed(endpoint, &request).await?;
    vectors_from_response(docs.len(), response.embeddings)
}

fn vectors_from_response(expected: usize, raw: Vec<Vec<f64>>) -> Result<Vec<EmbeddingVector>> {
    if raw.len() != expected {
        return Err(Error::Data(format!(
            "embedding endpoint returned {} vectors for {expected} documents",
            raw.len()
        )));
    }
    let dims = raw[0].len();
    raw.into_iter()
        .enumerate()
        .map(|(i, values)| {
            if values.len() != dims {
                return Err(Error::Data(format!(
                    "embedding {i} has {} dims, expected {dims}",
                    values.len()
                )));
            }
            EmbeddingVector::new(values)?.normalized()
        })
        .collect()
}
