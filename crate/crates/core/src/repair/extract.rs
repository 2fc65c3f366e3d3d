const FENCE: &str = "```";

/// Language tags dropped when they sit alone on the opening fence line.
pub const KNOWN_LANGUAGE_TAGS: &[&str] = &["c", "cpp", "markdown", "python"];

/// Pull source code out of a model response.
///
/// Takes everything between the end of the first triple-backtick fence and the
/// start of the last one. With fewer than two non-overlapping fences the
/// response is returned unchanged. A bare language tag from
/// [`KNOWN_LANGUAGE_TAGS`] on the first line of the slice is dropped along
/// with its newline.
pub fn extract_code(response: &str) -> &str {
    let (Some(first), Some(last)) = (response.find(FENCE), response.rfind(FENCE)) else {
        return response;
    };
    let start = first + FENCE.len();
    if last < start {
        return response;
    }
    strip_language_tag(&response[start..last])
}

fn strip_language_tag(body: &str) -> &str {
    if let Some(newline) = body.find('\n') {
        let tag = body[..newline].trim_end_matches('\r').trim();
        if KNOWN_LANGUAGE_TAGS.contains(&tag) {
            return &body[newline + 1..];
        }
    }
    body
}
