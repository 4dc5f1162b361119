//! Minimal blocking HTTP client shared by the deps.dev, OSV and LLM adapters.

use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
}

impl Default for HttpClient {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT)
    }
}

impl HttpClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let response = self.agent.get(url).call();
        Self::finish(response)
    }

    pub fn post_json(
        &self,
        url: &str,
        body: &serde_json::Value,
        headers: &[(&str, &str)],
    ) -> Result<HttpResponse, TransportError> {
        let mut request = self
            .agent
            .post(url)
            .header("content-type", "application/json");
        for (name, value) in headers {
            request = request.header(*name, *value);
        }
        Self::finish(request.send(body.to_string()))
    }

    fn finish(
        response: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<HttpResponse, TransportError> {
        let mut response = response.map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Joins `segments` onto `base`, percent-encoding each one.
pub fn endpoint(base: &str, segments: &[&str]) -> Result<String, TransportError> {
    let mut url = url::Url::parse(base).map_err(|e| TransportError(format!("invalid base URL `{base}`: {e}")))?;
    {
        let mut path = url
            .path_segments_mut()
            .map_err(|_| TransportError(format!("base URL `{base}` cannot carry a path")))?;
        path.pop_if_empty();
        path.extend(segments);
    }
    Ok(url.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_encoding() {
        assert_eq!(
            endpoint("http://h:1/", &["v3", "packages", "@types/node", "versions", "1.0:dependencies"]).unwrap(),
            "http://h:1/v3/packages/@types%2Fnode/versions/1.0:dependencies"
        );
        assert_eq!(endpoint("http://h/api", &["x"]).unwrap(), "http://h/api/x");
        assert!(endpoint("not a url", &["x"]).is_err());
    }

    #[test]
    fn unroutable_is_transport_error() {
        let client = HttpClient::new(Duration::from_millis(500));
        assert!(client.get("http://127.0.0.1:9/").is_err());
    }
}
