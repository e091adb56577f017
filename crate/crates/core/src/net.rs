//! Shared plumbing for HTTP providers: JSON POST with bounded retries
//! and exponential backoff.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HypoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests.
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
        }
    }
}

/// POST `body` as JSON and deserialize the response.
///
/// Network errors and 5xx responses are retried with doubling delays;
/// 4xx responses fail immediately (retrying a rejected request cannot
/// help). The returned error carries the provider name and how many
/// attempts were spent.
pub fn post_json<B: Serialize, R: DeserializeOwned>(
    client: &reqwest::blocking::Client,
    provider: &str,
    url: &str,
    api_key: Option<&str>,
    body: &B,
    policy: RetryPolicy,
) -> Result<R> {
    let attempts = policy.attempts.max(1);
    let mut last_error = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(policy.base_delay * 2u32.pow(attempt - 1));
        }
        let mut request = client.post(url).json(body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    return response.json::<R>().map_err(|e| HypoError::Provider {
                        provider: provider.to_string(),
                        attempts: attempt + 1,
                        message: format!("malformed response body: {e}"),
                    });
                }
                let body_text = response.text().unwrap_or_default();
                let message = format!("status {status}: {}", body_text.trim());
                if status.is_client_error() {
                    return Err(HypoError::Provider {
                        provider: provider.to_string(),
                        attempts: attempt + 1,
                        message,
                    });
                }
                last_error = message;
            }
            Err(e) => last_error = format!("request failed: {e}"),
        }
    }
    Err(HypoError::Provider {
        provider: provider.to_string(),
        attempts,
        message: last_error,
    })
}

#[cfg(test)]
pub(crate) mod testserver {
    //! Minimal canned-response HTTP server for provider tests.

    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serve each status/body pair to one incoming request, in order,
    /// then stop. Returns the base URL.
    pub fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                // Read the request until the end of headers plus
                // however much of the body arrives with them; the
                // canned reply does not depend on it.
                let mut buf = [0u8; 65536];
                let mut seen = Vec::new();
                loop {
                    match stream.read(&mut buf) {
                        Ok(0) => break,
                        Ok(n) => {
                            seen.extend_from_slice(&buf[..n]);
                            if let Some(pos) = find_header_end(&seen) {
                                let headers = String::from_utf8_lossy(&seen[..pos]);
                                let content_length = headers
                                    .lines()
                                    .find_map(|l| {
                                        l.to_ascii_lowercase()
                                            .strip_prefix("content-length:")
                                            .map(|v| v.trim().parse::<usize>().unwrap_or(0))
                                    })
                                    .unwrap_or(0);
                                if seen.len() >= pos + 4 + content_length {
                                    break;
                                }
                            }
                        }
                        Err(_) => break,
                    }
                }
                let reason = match status {
                    200 => "OK",
                    400 => "Bad Request",
                    500 => "Internal Server Error",
                    503 => "Service Unavailable",
                    _ => "Unknown",
                };
                let reply = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    fn find_header_end(bytes: &[u8]) -> Option<usize> {
        bytes.windows(4).position(|w| w == b"\r\n\r\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Deserialize)]
    struct Pong {
        value: i32,
    }

    fn client() -> reqwest::blocking::Client {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(5))
            .build()
            .unwrap()
    }

    #[test]
    fn success_on_first_attempt() {
        let url = testserver::serve(vec![(200, r#"{"value":7}"#.into())]);
        let pong: Pong = post_json(
            &client(),
            "test",
            &url,
            None,
            &json!({"ping": true}),
            RetryPolicy::immediate(3),
        )
        .unwrap();
        assert_eq!(pong.value, 7);
    }

    #[test]
    fn server_errors_are_retried() {
        let url = testserver::serve(vec![
            (503, "busy".into()),
            (500, "broken".into()),
            (200, r#"{"value":1}"#.into()),
        ]);
        let pong: Pong = post_json(
            &client(),
            "test",
            &url,
            None,
            &json!({}),
            RetryPolicy::immediate(3),
        )
        .unwrap();
        assert_eq!(pong.value, 1);
    }

    #[test]
    fn exhausted_retries_report_attempts() {
        let url = testserver::serve(vec![(500, "a".into()), (500, "b".into())]);
        let out: Result<Pong> = post_json(
            &client(),
            "flaky",
            &url,
            None,
            &json!({}),
            RetryPolicy::immediate(2),
        );
        match out {
            Err(HypoError::Provider {
                provider, attempts, ..
            }) => {
                assert_eq!(provider, "flaky");
                assert_eq!(attempts, 2);
            }
            other => panic!("expected provider error, got {:?}", other.map(|p| p.value)),
        }
    }

    #[test]
    fn client_errors_fail_fast() {
        let url = testserver::serve(vec![(400, "no".into())]);
        let out: Result<Pong> = post_json(
            &client(),
            "strict",
            &url,
            None,
            &json!({}),
            RetryPolicy::immediate(3),
        );
        match out {
            Err(HypoError::Provider { attempts, message, .. }) => {
                assert_eq!(attempts, 1);
                assert!(message.contains("400"), "message: {message}");
            }
            other => panic!("expected provider error, got {:?}", other.map(|p| p.value)),
        }
    }
}
