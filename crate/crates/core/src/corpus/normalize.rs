use serde::{Deserialize, Serialize};
use unicode_categories::UnicodeCategories;
use unicode_normalization::{char::is_combining_mark, UnicodeNormalization};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Drops mentions, URLs, punctuation and accents; collapses whitespace.
    Tweet,
    /// One turn per line; URLs become the `URL` placeholder.
    Conversation,
}

const URL_PLACEHOLDER: &str = "URL";

fn is_url(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || c.is_punctuation()
}

fn fold_token(token: &str) -> String {
    token
        .nfd()
        .filter(|&c| !is_combining_mark(c) && !is_punct(c))
        .collect()
}

fn normalize_tweet(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for token in raw.split_whitespace() {
        if token.starts_with('@') || is_url(token) {
            continue;
        }
        let folded = fold_token(token);
        if folded.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&folded);
    }
    out
}

fn normalize_turn(turn: &str) -> String {
    turn.split_whitespace()
        .map(|t| if is_url(t) { URL_PLACEHOLDER } else { t })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Joins conversation turns into one document, one turn per line.
pub fn normalize_conversation<S: AsRef<str>>(turns: &[S]) -> String {
    turns
        .iter()
        .flat_map(|t| t.as_ref().lines())
        .map(normalize_turn)
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Normalizes raw text. For [`Profile::Conversation`] each line of `raw` is
/// one turn.
pub fn normalize_text(raw: &str, profile: Profile) -> String {
    match profile {
        Profile::Tweet => normalize_tweet(raw),
        Profile::Conversation => normalize_conversation(&[raw]),
    }
}
