use serde_json::Value;

use forage_core::policy::DecisionResponse;

use crate::config::ApiStyle;

/// The model's text from an endpoint response body. Bodies that are not an
/// API envelope are returned as-is.
pub fn extract_content(body: &str, style: ApiStyle) -> Result<String, String> {
    let Ok(v) = serde_json::from_str::<Value>(body) else {
        return Ok(body.to_string());
    };
    if !v.is_object() {
        return Ok(body.to_string());
    }
    let text = match style {
        ApiStyle::Chat => v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string),
        ApiStyle::Responses => v
            .get("output_text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .or_else(|| {
                let parts: Vec<&str> = v
                    .get("output")?
                    .as_array()?
                    .iter()
                    .filter_map(|o| o.get("content")?.as_array())
                    .flatten()
                    .filter(|c| c.get("type").and_then(Value::as_str) == Some("output_text"))
                    .filter_map(|c| c.get("text")?.as_str())
                    .collect();
                (!parts.is_empty()).then(|| parts.concat())
            }),
    };
    match text {
        Some(t) => Ok(t),
        // a bare decision object is accepted too
        None if v.get("action").is_some() => Ok(body.to_string()),
        None => Err("response envelope has no message content".into()),
    }
}

/// Extracts the first JSON object that carries string `action` and
/// `rationale` fields, ignoring surrounding prose and code fences.
pub fn parse_response(text: &str) -> Result<DecisionResponse, String> {
    for (i, _) in text.match_indices('{') {
        let mut values = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(m))) = values.next() {
            if let (Some(Value::String(action)), Some(Value::String(rationale))) =
                (m.get("action"), m.get("rationale"))
            {
                return Ok(DecisionResponse {
                    action: action.clone(),
                    rationale: rationale.clone(),
                });
            }
        }
    }
    Err("no JSON object with string action and rationale fields".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_BODY: &str = r#"{
  "action": "USE_SITE_FIDELITY",
  "rationale": "Using site fidelity: resource_density=2.0 and robot is set to use site fidelity; no active pheromones to follow."
}"#;

    #[test]
    fn worked_response() {
        let r = parse_response(FIG_BODY).unwrap();
        assert_eq!(r.action, "USE_SITE_FIDELITY");
        assert!(r.rationale.starts_with("Using site fidelity: resource_density=2.0"));
    }

    #[test]
    fn prose_is_a_parse_error() {
        assert!(parse_response("I think you should explore").is_err());
    }

    #[test]
    fn envelope_extraction() {
        let chat = r#"{"choices":[{"message":{"role":"assistant","content":"{\"action\":\"A\",\"rationale\":\"b\"}"}}]}"#;
        assert_eq!(extract_content(chat, ApiStyle::Chat).unwrap(), r#"{"action":"A","rationale":"b"}"#);
        let resp = r#"{"output":[{"type":"reasoning"},{"type":"message","content":[{"type":"output_text","text":"x"}]}]}"#;
        assert_eq!(extract_content(resp, ApiStyle::Responses).unwrap(), "x");
        assert!(extract_content(r#"{"choices":[]}"#, ApiStyle::Chat).is_err());
        assert_eq!(extract_content("plain words", ApiStyle::Chat).unwrap(), "plain words");
    }

    /// (body, expected action or None for a parse error)
    const CORPUS: [(&str, Option<&str>); 20] = [
        (r#"{"action":"FOLLOW_PHEROMONE","rationale":"trail"}"#, Some("FOLLOW_PHEROMONE")),
        ("```json\n{\"action\": \"UNINFORMED_SEARCH\", \"rationale\": \"none\"}\n```", Some("UNINFORMED_SEARCH")),
        ("Sure! Here is my answer:\n```\n{\"action\":\"CONTINUE_SEARCH\",\"rationale\":\"keep going\"}\n```\nGood luck.", Some("CONTINUE_SEARCH")),
        ("Decision: {\"action\":\"RETURN_FOR_INFO\",\"rationale\":\"trails exist\"} done", Some("RETURN_FOR_INFO")),
        ("{\"rationale\":\"order swapped\",\"action\":\"USE_SITE_FIDELITY\"}", Some("USE_SITE_FIDELITY")),
        ("{\"action\":\"USE_SITE_FIDELITY\"}", None),
        ("{\"rationale\":\"no action\"}", None),
        ("{\"action\": 3, \"rationale\": \"numeric\"}", None),
        ("{\"action\":\"FOLLOW_PHEROMONE\",\"rationale\":null}", None),
        ("", None),
        ("{", None),
        ("{\"action\":\"FOLLOW_PHEROMONE\",\"rationale\":\"unterminated\"", None),
        ("{\"note\":\"first\"} {\"action\":\"UNINFORMED_SEARCH\",\"rationale\":\"second\"}", Some("UNINFORMED_SEARCH")),
        ("{\"decision\":{\"action\":\"CONTINUE_SEARCH\",\"rationale\":\"nested\"}}", Some("CONTINUE_SEARCH")),
        ("{\"action\":\"explore\",\"rationale\":\"off-list but parseable\"}", Some("explore")),
        ("  \n\t{\"action\":\"USE_SITE_FIDELITY\",\"rationale\":\"whitespace\"}\n\n", Some("USE_SITE_FIDELITY")),
        ("{'action': 'USE_SITE_FIDELITY', 'rationale': 'single quotes'}", None),
        ("{\"action\":\"FOLLOW_PHEROMONE\",\"rationale\":\"braces { inside } text\"}", Some("FOLLOW_PHEROMONE")),
        ("[{\"action\":\"UNINFORMED_SEARCH\",\"rationale\":\"in a list\"}]", Some("UNINFORMED_SEARCH")),
        ("action: USE_SITE_FIDELITY\nrationale: yaml style", None),
    ];

    #[test]
    fn extraction_corpus() {
        for (body, expected) in CORPUS {
            let got = parse_response(body).ok().map(|r| r.action);
            assert_eq!(got.as_deref(), expected, "body: {body:?}");
        }
    }
}
