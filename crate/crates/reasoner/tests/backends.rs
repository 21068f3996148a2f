//! Backend integration: rule files end-to-end, and the HTTP client against
//! a local stub server (canned replies, retry behavior, fatal 4xx).

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tabflow_core::fixtures::{retail_like, retail_like_spec};
use tabflow_reasoner::{
    build_prompt, call_llm, infer_relationships_detailed, HttpLlmClient, InferenceThresholds,
    ReasonerBackend, ReasonerError, ReasoningTask,
};

#[test]
fn rule_file_backend_reproduces_the_retail_groups() {
    let (table, spec) = retail_like(300, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.json");
    std::fs::write(&path, spec.to_json()).unwrap();

    let backend = ReasonerBackend::RuleFile(path);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let outcome =
        infer_relationships_detailed(&backend, &bundle, &table, InferenceThresholds::default())
            .unwrap();

    assert_eq!(outcome.spec.hierarchies.len(), 3);
    assert_eq!(outcome.spec.math_groups.len(), 1);
    assert_eq!(outcome.spec.temporal_chains.len(), 1);
    assert!(outcome.dropped.is_empty(), "{:?}", outcome.dropped);
    assert!(outcome.report.all_pass());
    assert_eq!(outcome.spec, retail_like_spec());
}

#[test]
fn hallucinated_groups_are_dropped_not_fatal() {
    let (table, _) = retail_like(300, 2);
    let rules = r#"{
        "hierarchies": [
            {"granular": "order city", "ancestors": ["order state"]},
            {"granular": "no such column", "ancestors": ["order country"]}
        ],
        "math_groups": [
            {"independents": ["price"], "derived": [{"column": "item profit ratio", "formula": "price"}]}
        ],
        "temporal_chains": [["order date", "delivery date"]]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.json");
    std::fs::write(&path, rules).unwrap();

    let backend = ReasonerBackend::RuleFile(path);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let outcome =
        infer_relationships_detailed(&backend, &bundle, &table, InferenceThresholds::default())
            .unwrap();

    // the unknown-column hierarchy and the wrong formula are dropped;
    // the plausible groups survive
    assert_eq!(outcome.spec.hierarchies.len(), 1);
    assert_eq!(outcome.spec.temporal_chains.len(), 1);
    assert!(outcome.spec.math_groups.is_empty());
    assert_eq!(outcome.dropped.len(), 2, "{:?}", outcome.dropped);
    // "item profit ratio = price" fails on essentially every row: the
    // brute-force violation fraction is far above the 1% threshold
    assert!(outcome
        .dropped
        .iter()
        .any(|d| d.description.contains("item profit ratio")));
}

#[test]
fn empty_surviving_spec_degrades_gracefully() {
    let (table, _) = retail_like(100, 3);
    let rules = r#"{"hierarchies": [], "math_groups": [], "temporal_chains": []}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.json");
    std::fs::write(&path, rules).unwrap();
    let backend = ReasonerBackend::RuleFile(path);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let outcome =
        infer_relationships_detailed(&backend, &bundle, &table, InferenceThresholds::default())
            .unwrap();
    assert!(outcome.spec.is_empty());
}

/// Minimal HTTP/1.1 stub: answers each connection with the next scripted
/// (status, body) pair.
fn spawn_stub(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let address = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = hits.clone();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            hits_clone.fetch_add(1, Ordering::SeqCst);
            let mut buffer = [0u8; 65536];
            let mut request = Vec::new();
            // read headers, then the content-length body
            loop {
                let n = stream.read(&mut buffer).unwrap_or(0);
                if n == 0 {
                    break;
                }
                request.extend_from_slice(&buffer[..n]);
                if let Some(split) = find_header_end(&request) {
                    let headers = String::from_utf8_lossy(&request[..split]).to_lowercase();
                    let content_length = headers
                        .lines()
                        .find_map(|l| l.strip_prefix("content-length:"))
                        .and_then(|v| v.trim().parse::<usize>().ok())
                        .unwrap_or(0);
                    if request.len() >= split + 4 + content_length {
                        break;
                    }
                }
            }
            let reason = if status == 200 { "OK" } else { "Error" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (address, hits)
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    bytes.windows(4).position(|w| w == b"\r\n\r\n")
}

fn chat_reply(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn test_client(endpoint: String, token_env: &str) -> HttpLlmClient {
    std::env::set_var(token_env, "test-token");
    let mut client = HttpLlmClient::new(endpoint, "test-model".into(), token_env.into(), 0.0);
    client.base_delay = Duration::from_millis(5);
    client.timeout = Duration::from_secs(5);
    client
}

#[test]
fn stub_server_reply_is_returned_verbatim() {
    let canned = r#"{"hierarchies": [], "math_groups": [], "temporal_chains": []}"#;
    let (endpoint, _) = spawn_stub(vec![(200, chat_reply(canned))]);
    let client = test_client(endpoint, "TEST_TOKEN_VERBATIM");
    let (table, _) = retail_like(5, 0);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let reply = call_llm(&client, &bundle).unwrap();
    assert_eq!(reply, canned);
}

#[test]
fn markdown_fences_are_stripped_before_parsing() {
    let fenced = "```json\n{\"hierarchies\": [{\"granular\": \"order city\", \"ancestors\": [\"order state\"]}], \"math_groups\": [], \"temporal_chains\": []}\n```";
    let (endpoint, _) = spawn_stub(vec![(200, chat_reply(fenced))]);
    let client = test_client(endpoint, "TEST_TOKEN_FENCED");
    let (table, _) = retail_like(100, 4);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let outcome = infer_relationships_detailed(
        &ReasonerBackend::HttpLlm(client),
        &bundle,
        &table,
        InferenceThresholds::default(),
    )
    .unwrap();
    assert_eq!(outcome.spec.hierarchies.len(), 1);
}

#[test]
fn two_500s_then_success_exhausts_two_retries() {
    let canned = r#"{"hierarchies": [], "math_groups": [], "temporal_chains": []}"#;
    let (endpoint, hits) = spawn_stub(vec![
        (500, "server exploded".into()),
        (500, "still broken".into()),
        (200, chat_reply(canned)),
    ]);
    let client = test_client(endpoint, "TEST_TOKEN_RETRY");
    let (table, _) = retail_like(5, 0);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let reply = call_llm(&client, &bundle).unwrap();
    assert_eq!(reply, canned);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn unauthorized_is_fatal_with_body() {
    let (endpoint, hits) = spawn_stub(vec![(401, r#"{"error": "bad key"}"#.into())]);
    let client = test_client(endpoint, "TEST_TOKEN_401");
    let (table, _) = retail_like(5, 0);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let err = call_llm(&client, &bundle).unwrap_err();
    match err {
        ReasonerError::BadStatus { status, body } => {
            assert_eq!(status, 401);
            assert!(body.contains("bad key"));
        }
        other => panic!("unexpected error {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn missing_token_is_reported_by_env_name() {
    let client = HttpLlmClient::new(
        "http://127.0.0.1:1/unused".into(),
        "m".into(),
        "TEST_TOKEN_THAT_IS_UNSET".into(),
        0.0,
    );
    let (table, _) = retail_like(5, 0);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    match call_llm(&client, &bundle).unwrap_err() {
        ReasonerError::MissingToken(name) => assert_eq!(name, "TEST_TOKEN_THAT_IS_UNSET"),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn rule_file_inference_is_deterministic() {
    let (table, spec) = retail_like(200, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.json");
    std::fs::write(&path, spec.to_json()).unwrap();
    let backend = ReasonerBackend::RuleFile(path);
    let bundle = build_prompt(table.schema(), ReasoningTask::All);
    let a = tabflow_reasoner::infer_relationships(
        &backend,
        &bundle,
        &table,
        InferenceThresholds::default(),
    )
    .unwrap();
    let b = tabflow_reasoner::infer_relationships(
        &backend,
        &bundle,
        &table,
        InferenceThresholds::default(),
    )
    .unwrap();
    assert_eq!(a, b);
}
