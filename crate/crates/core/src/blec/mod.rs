//! Bidirectional key-token matching between a parse and a sentence.
//!
//! The forward pass looks for every formal key token of the parse in the
//! text; the backward pass checks that every lexicon phrase found in the
//! text is accounted for by the parse. A pair is consistent only if both
//! passes leave nothing unmatched.

mod stats;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{NodeKind, SemanticParse};
use crate::lexicon::{Lexicon, NlSpan};
use crate::parse::{extract_key_tokens, KeyToken};
use crate::utterance::{numeral_value, tokenize, Utterance};

pub use stats::{cohen_kappa, pearson, Pearson, StatsError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlecError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
}

/// Half-open token range of the utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    /// Formal key tokens with no counterpart in the text.
    pub forward_misses: Vec<KeyToken>,
    /// Lexicon spans of the text with no counterpart in the parse.
    pub backward_misses: Vec<NlSpan>,
    pub matched: Vec<(KeyToken, TextSpan)>,
    pub consistent: bool,
}

impl MatchReport {
    pub fn forward_labels(&self) -> Vec<&str> {
        self.forward_misses.iter().map(|k| k.token.as_str()).collect()
    }

    pub fn backward_phrases(&self) -> Vec<&str> {
        self.backward_misses.iter().map(|s| s.phrase.as_str()).collect()
    }

    /// One-line miss summary for diagnostics files.
    pub fn summary(&self) -> String {
        if self.consistent {
            return "consistent".to_string();
        }
        format!(
            "forward_misses=[{}] backward_misses=[{}]",
            self.forward_labels().join(", "),
            self.backward_phrases().join(", ")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusScore {
    pub n_pairs: usize,
    pub n_consistent: usize,
    pub blec: f64,
}

impl CorpusScore {
    pub fn from_counts(n_consistent: usize, n_pairs: usize) -> Result<Self, BlecError> {
        if n_pairs == 0 {
            return Err(BlecError::EmptyCorpus);
        }
        Ok(Self {
            n_pairs,
            n_consistent,
            blec: n_consistent as f64 / n_pairs as f64,
        })
    }
}

impl std::fmt::Display for CorpusScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BLEC {}/{} = {:.4}", self.n_consistent, self.n_pairs, self.blec)
    }
}

pub fn match_pair(parse: &SemanticParse, text: &Utterance, lexicon: &Lexicon) -> MatchReport {
    let tokens = &text.tokens;
    let keys = extract_key_tokens(parse, lexicon);
    let spans = lexicon.match_nl_in(parse.dialect, tokens);
    let mut token_used = vec![false; tokens.len()];
    let mut span_used = vec![false; spans.len()];
    let mut matched = Vec::new();
    let mut forward_misses = Vec::new();

    let span_text = |start: usize, end: usize| TextSpan {
        start,
        end,
        text: tokens[start..end].join(" "),
    };

    // Literals first, so their words are not taken for keywords.
    for key in keys.iter().filter(|k| k.is_literal()) {
        let hit = match key.kind {
            NodeKind::NumberLiteral => find_number(&key.token, tokens, &token_used),
            _ => find_phrase(&tokenize(&key.token), tokens, &token_used),
        };
        match hit {
            Some((start, end)) => {
                token_used[start..end].iter_mut().for_each(|u| *u = true);
                matched.push((key.clone(), span_text(start, end)));
            }
            None => forward_misses.push(key.clone()),
        }
    }
    for (i, span) in spans.iter().enumerate() {
        if token_used[span.start..span.end].iter().any(|&u| u) {
            span_used[i] = true;
        }
    }

    // Required keywords, then those the text may leave implicit.
    for required in [true, false] {
        for key in keys.iter().filter(|k| !k.is_literal()) {
            let entry = lexicon.entry(key.entry.expect("keyword tokens carry an entry"));
            if entry.check.forward() != required {
                continue;
            }
            let hit = spans
                .iter()
                .enumerate()
                .find(|(i, s)| !span_used[*i] && entry.has_variant(&s.phrase));
            match hit {
                Some((i, s)) => {
                    span_used[i] = true;
                    matched.push((key.clone(), span_text(s.start, s.end)));
                }
                None if required => forward_misses.push(key.clone()),
                None => {}
            }
        }
    }

    let backward_misses: Vec<NlSpan> = spans
        .iter()
        .zip(&span_used)
        .filter(|(s, used)| {
            !**used
                && lexicon.entries_with_phrase(&s.phrase).iter().any(|&i| {
                    let e = lexicon.entry(i);
                    e.formal(parse.dialect).is_some() && e.check.backward()
                })
        })
        .map(|(s, _)| s.clone())
        .collect();

    forward_misses.sort_by(|a, b| a.path.cmp(&b.path));
    matched.sort_by(|a, b| a.0.path.cmp(&b.0.path));
    let consistent = forward_misses.is_empty() && backward_misses.is_empty();
    MatchReport {
        forward_misses,
        backward_misses,
        matched,
        consistent,
    }
}

fn find_number(label: &str, tokens: &[String], used: &[bool]) -> Option<(usize, usize)> {
    let want: f64 = label.parse().ok()?;
    tokens
        .iter()
        .enumerate()
        .find(|(i, t)| !used[*i] && numeral_value(t) == Some(want))
        .map(|(i, _)| (i, i + 1))
}

fn find_phrase(needle: &[String], tokens: &[String], used: &[bool]) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return Some((0, 0));
    }
    (0..=tokens.len().checked_sub(needle.len())?)
        .find(|&s| {
            tokens[s..s + needle.len()] == *needle && used[s..s + needle.len()].iter().all(|u| !u)
        })
        .map(|s| (s, s + needle.len()))
}

pub fn score_corpus<'a, I>(pairs: I, lexicon: &Lexicon) -> Result<CorpusScore, BlecError>
where
    I: IntoIterator<Item = (&'a SemanticParse, &'a Utterance)>,
{
    let (mut n, mut ok) = (0, 0);
    for (parse, text) in pairs {
        n += 1;
        if match_pair(parse, text, lexicon).consistent {
            ok += 1;
        }
    }
    CorpusScore::from_counts(ok, n)
}
