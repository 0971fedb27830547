//! Remote unified-model backend over HTTP.
//!
//! Wire protocol (JSON bodies, UTF-8):
//!
//! ```text
//! POST {base}/v1/generate   {"prompt", "seed", "width"?, "height"?}   -> {"image": {"format", "data_b64"}}
//! POST {base}/v1/understand {"image": {...}, "prompt"}                -> {"text"}
//! POST {base}/v1/edit       {"image": {...}, "instruction", "seed"}   -> {"image": {...}}
//! ```
//!
//! Errors come back as non-200 with `{"error": {"code", "message"}}`.
//! Transport errors and 5xx responses are retried with full-jitter
//! exponential backoff (delay for the k-th retry is uniform in
//! `[0, backoff_base_ms * 2^(k-1)]`); 4xx is terminal. Each logical call
//! carries one `request_id` header value across all its retries so servers
//! can deduplicate.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::backend::UnifiedModelBackend;
use crate::error::{Error, Result};
use crate::image::{ImageRef, MediaKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auth_token: Option<String>,
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        BackendEndpoint {
            base_url: base_url.into(),
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_base_ms: 100,
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms < 1 {
            return Err(Error::InvalidConfig("timeout_ms must be >= 1".into()));
        }
        if self.max_retries > 10 {
            return Err(Error::InvalidConfig(format!(
                "max_retries must be in [0, 10], got {}",
                self.max_retries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WireImage {
    format: String,
    data_b64: String,
}

impl WireImage {
    fn from_ref(image: &ImageRef) -> Self {
        WireImage {
            format: match image.media() {
                MediaKind::RasterPng => "png".to_string(),
                MediaKind::SceneGraph => "scene-graph".to_string(),
            },
            data_b64: BASE64.encode(image.payload()),
        }
    }

    fn into_ref(self) -> Result<ImageRef> {
        let media = match self.format.as_str() {
            "png" => MediaKind::RasterPng,
            "scene-graph" => MediaKind::SceneGraph,
            other => {
                return Err(Error::backend(format!(
                    "server returned unknown image format {other:?}"
                )))
            }
        };
        let payload = BASE64
            .decode(self.data_b64.as_bytes())
            .map_err(|e| Error::backend(format!("invalid base64 image payload: {e}")))?;
        Ok(ImageRef::new(media, payload))
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
}

#[derive(Deserialize)]
struct ImageResponse {
    image: WireImage,
}

#[derive(Serialize)]
struct UnderstandRequest<'a> {
    image: WireImage,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct TextResponse {
    text: String,
}

#[derive(Serialize)]
struct EditRequest<'a> {
    image: WireImage,
    instruction: &'a str,
    seed: u64,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Deserialize)]
struct ErrorDetail {
    code: String,
    message: String,
}

pub struct HttpBackend {
    endpoint: BackendEndpoint,
    client: reqwest::blocking::Client,
    /// Whether the remote accepts scene-graph payloads. Real image servers
    /// are raster-only; the simulator-wrapping stub is not.
    accept_scene_graph: bool,
}

impl HttpBackend {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| Error::backend(format!("failed to build HTTP client: {e}")))?;
        Ok(HttpBackend {
            endpoint,
            client,
            accept_scene_graph: false,
        })
    }

    pub fn with_scene_graph_support(mut self) -> Self {
        self.accept_scene_graph = true;
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.endpoint.base_url.trim_end_matches('/'))
    }

    fn check_media(&self, image: &ImageRef) -> Result<()> {
        if image.media() == MediaKind::SceneGraph && !self.accept_scene_graph {
            return Err(Error::MediaMismatch {
                expected: MediaKind::RasterPng,
                found: image.media(),
            });
        }
        Ok(())
    }

    /// POST with retries. One `request_id` spans all attempts of a call.
    fn post_json<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = self.url(path);
        let request_id = format!("{:032x}", rand::thread_rng().gen::<u128>());
        let max_attempts = 1 + self.endpoint.max_retries;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let mut req = self
                .client
                .post(&url)
                .header("request_id", &request_id)
                .json(body);
            if let Some(token) = &self.endpoint.auth_token {
                req = req.bearer_auth(token);
            }
            let outcome = req.send();
            match outcome {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<R>().map_err(|e| Error::BackendFailure {
                            message: format!("malformed response body: {e}"),
                            status: Some(status.as_u16()),
                            attempts: attempt,
                        });
                    }
                    let retryable = status.is_server_error();
                    let message = match resp.json::<ErrorBody>() {
                        Ok(body) => format!("{}: {}", body.error.code, body.error.message),
                        Err(_) => format!("HTTP {status}"),
                    };
                    if !retryable || attempt >= max_attempts {
                        return Err(Error::BackendFailure {
                            message,
                            status: Some(status.as_u16()),
                            attempts: attempt,
                        });
                    }
                }
                Err(e) => {
                    if attempt >= max_attempts {
                        return Err(Error::BackendFailure {
                            message: format!("transport error: {e}"),
                            status: None,
                            attempts: attempt,
                        });
                    }
                }
            }
            self.backoff(attempt);
        }
    }

    /// Full jitter: uniform delay in [0, base * 2^(retry-1)].
    fn backoff(&self, retry: u32) {
        let cap = self
            .endpoint
            .backoff_base_ms
            .saturating_mul(1u64 << (retry - 1).min(16));
        if cap == 0 {
            return;
        }
        let delay = rand::thread_rng().gen_range(0..=cap);
        std::thread::sleep(Duration::from_millis(delay));
    }
}

impl UnifiedModelBackend for HttpBackend {
    /// Reachability probe: any HTTP response (even an error status) proves
    /// the server is up; only transport failures count as unhealthy.
    fn probe(&self) -> Result<()> {
        let url = self.url("/v1/health");
        match self.client.get(&url).send() {
            Ok(_) => Ok(()),
            Err(e) => Err(Error::backend(format!("probe failed: {e}"))),
        }
    }

    fn generate(&self, prompt: &str, seed: u64) -> Result<ImageRef> {
        let req = GenerateRequest {
            prompt,
            seed,
            width: None,
            height: None,
        };
        let resp: ImageResponse = self.post_json("/v1/generate", &req)?;
        resp.image.into_ref()
    }

    fn understand(&self, image: &ImageRef, prompt: &str) -> Result<String> {
        self.check_media(image)?;
        let req = UnderstandRequest {
            image: WireImage::from_ref(image),
            prompt,
        };
        let resp: TextResponse = self.post_json("/v1/understand", &req)?;
        Ok(resp.text)
    }

    fn edit(&self, image: &ImageRef, instruction: &str, seed: u64) -> Result<ImageRef> {
        self.check_media(image)?;
        let req = EditRequest {
            image: WireImage::from_ref(image),
            instruction,
            seed,
        };
        let resp: ImageResponse = self.post_json("/v1/edit", &req)?;
        resp.image.into_ref()
    }
}
