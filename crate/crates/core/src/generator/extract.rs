use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no fenced code block containing a `merge(` header")]
pub struct NoFunctionExtracted;

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Returns the first fenced code block whose body contains a `merge(` header,
/// without its fences and trimmed of surrounding blank space. An unclosed
/// final fence runs to the end of the text.
pub fn extract_program(raw: &str) -> Result<String, NoFunctionExtracted> {
    let mut lines = raw.lines();
    while lines.by_ref().any(is_fence) {
        let body: Vec<&str> = lines.by_ref().take_while(|l| !is_fence(l)).collect();
        let body = body.join("\n");
        if body.contains("merge(") {
            return Ok(body.trim().to_string());
        }
    }
    Err(NoFunctionExtracted)
}

/// Extracts the program from a completion of the generation prompt. The
/// prompt ends inside an open code block, so a completion that has no
/// complete block of its own is read as starting inside one.
pub fn extract_completion(raw: &str) -> Result<String, NoFunctionExtracted> {
    extract_program(raw).or_else(|_| extract_program(&format!("```\n{raw}")))
}
