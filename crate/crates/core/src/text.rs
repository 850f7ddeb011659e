//! Shared tokenization: lowercase text split into alphanumeric runs.
//!
//! Both the candidate retriever and the encoder vocabulary use this split so
//! that a token means the same thing everywhere in the pipeline.

/// Splits `text` into lowercased alphanumeric tokens.
///
/// Any non-alphanumeric character is a separator and is dropped, so
/// punctuation-only text yields no tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
