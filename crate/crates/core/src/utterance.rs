//! Natural-language side of a pair: raw text plus its deterministic tokenization.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Self { raw, tokens }
    }
}

impl From<&str> for Utterance {
    fn from(raw: &str) -> Self {
        Utterance::new(raw)
    }
}

/// Lowercases and splits on whitespace and punctuation.
///
/// Digits stay glued (`100`, `4.5`, `-3`), a possessive `'s` is dropped and a
/// trailing `n't` becomes a separate `not` token.
pub fn tokenize(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.to_lowercase().chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let is_word = |c: char| c.is_alphanumeric();
    let at_boundary = |i: usize| chars.get(i).is_none_or(|&c| !is_word(c));

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word(c) {
            current.push(c);
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let next_is_digit = next.is_some_and(|n| n.is_ascii_digit());
        match c {
            '.' if next_is_digit && is_numeric(&current) && !current.contains('.') => {
                current.push('.');
                i += 1;
            }
            '-' if next_is_digit && current.is_empty() && (i == 0 || !is_word(chars[i - 1])) => {
                current.push('-');
                i += 1;
            }
            '\'' | '\u{2019}' => {
                if next == Some('s') && at_boundary(i + 2) {
                    flush(&mut current, &mut tokens);
                    i += 2;
                } else if next == Some('t') && current.ends_with('n') && at_boundary(i + 2) {
                    current.pop();
                    flush(&mut current, &mut tokens);
                    tokens.push("not".to_string());
                    i += 2;
                } else {
                    flush(&mut current, &mut tokens);
                    i += 1;
                }
            }
            _ => {
                flush(&mut current, &mut tokens);
                i += 1;
            }
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn is_numeric(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    !body.is_empty() && body.chars().all(|c| c.is_ascii_digit() || c == '.')
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if current == "-" {
        current.clear();
    }
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

const UNITS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];
const TENS: [(&str, u32); 8] = [
    ("thirty", 30),
    ("forty", 40),
    ("fifty", 50),
    ("sixty", 60),
    ("seventy", 70),
    ("eighty", 80),
    ("ninety", 90),
    ("hundred", 100),
];

/// Numeric value of a text token: digit strings and English number words
/// zero to twenty plus the tens up to one hundred.
pub fn numeral_value(token: &str) -> Option<f64> {
    if let Some(i) = UNITS.iter().position(|w| *w == token) {
        return Some(i as f64);
    }
    if let Some((_, v)) = TENS.iter().find(|(w, _)| *w == token) {
        return Some(f64::from(*v));
    }
    if crate::ast::is_decimal(token) {
        return token.parse().ok();
    }
    None
}
