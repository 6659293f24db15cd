//! Embedding providers and the information-difference feature.

use serde::{Deserialize, Serialize};

/// Unit-norm embedding with a fixed dimension per provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for value in &mut values {
            *value /= norm;
        }
        Some(EmbeddingVector(values))
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Request(String),
    #[error("embedding provider returned a zero vector")]
    ZeroVector,
}

/// Anything that maps texts to unit-norm vectors.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Deterministic test embedder: hash each whitespace token to a sparse
/// index, accumulate, and L2-normalize. Reproducible across platforms.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    pub dimension: usize,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        StubEmbedder { dimension: 32 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for StubEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|text| {
                let mut accumulator = vec![0.0f64; self.dimension];
                for token in text.split_whitespace() {
                    let token = token.to_lowercase();
                    let slot = (fnv1a(token.as_bytes()) % self.dimension as u64) as usize;
                    accumulator[slot] += 1.0;
                }
                if accumulator.iter().all(|v| *v == 0.0) {
                    accumulator[0] = 1.0;
                }
                EmbeddingVector::normalized(accumulator).ok_or(EmbedError::ZeroVector)
            })
            .collect()
    }
}

/// Wire-protocol embedder: `POST /v1/embeddings {model, input[]}`.
pub struct HttpEmbedder {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(base_url: String, model: String, api_key: Option<String>) -> Self {
        HttpEmbedder {
            base_url,
            model,
            api_key,
            http: reqwest::blocking::Client::new(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let url = format!("{}/v1/embeddings", self.base_url.trim_end_matches('/'));
        let mut request = self.http.post(url).json(&EmbeddingRequest {
            model: &self.model,
            input: texts,
        });
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| EmbedError::Request(e.to_string()))?;
        if !response.status().is_success() {
            return Err(EmbedError::Request(format!(
                "status {}",
                response.status().as_u16()
            )));
        }
        let parsed: EmbeddingResponse = response
            .json()
            .map_err(|e| EmbedError::Request(e.to_string()))?;
        parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::normalized(d.embedding).ok_or(EmbedError::ZeroVector))
            .collect()
    }
}

/// Mean cosine distance from current-round messages to the previous
/// round's embedding centroid. Undefined for round 1 (`None`).
pub fn info_difference(
    current_round: &[String],
    previous_round: Option<&[String]>,
    embedder: &dyn Embedder,
) -> Result<Option<f64>, EmbedError> {
    let previous = match previous_round {
        Some(previous) if !previous.is_empty() => previous,
        _ => return Ok(None),
    };
    if current_round.is_empty() {
        return Ok(None);
    }
    let previous_vectors = embedder.embed(previous)?;
    let dimension = previous_vectors[0].0.len();
    let mut centroid = vec![0.0f64; dimension];
    for vector in &previous_vectors {
        for (slot, value) in vector.0.iter().enumerate() {
            centroid[slot] += value;
        }
    }
    for value in &mut centroid {
        *value /= previous_vectors.len() as f64;
    }
    let centroid = EmbeddingVector::normalized(centroid).ok_or(EmbedError::ZeroVector)?;
    let current_vectors = embedder.embed(current_round)?;
    let total: f64 = current_vectors
        .iter()
        .map(|v| 1.0 - v.dot(&centroid))
        .sum();
    Ok(Some(total / current_vectors.len() as f64))
}
