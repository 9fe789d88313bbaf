//! The one tokenizer shared by the embedder, the lexical scorer and the
//! metrics: lowercase, then split on every run of non-alphanumeric chars.

/// Splits `text` into lowercase alphanumeric tokens.
///
/// ```
/// use lectern_core::tokenize::tokenize;
/// assert_eq!(tokenize("What's a CNN?"), vec!["what", "s", "a", "cnn"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True when `c` can be part of a token.
pub fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}
