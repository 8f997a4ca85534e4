//! Keyword lexicon aligning formal tokens with natural-language variants.
//!
//! The same table drives key-token extraction, BLEC matching, the
//! perturbation swap rules and the linearizer's phrase dictionary.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::ast::Dialect;
use crate::utterance::tokenize;

/// Environment variable naming a lexicon file to use instead of the built-in one.
pub const LEXICON_ENV: &str = "LOGICHECK_LEXICON";

const BUILTIN: &str = include_str!("../data/default.lexicon");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {dialect} token `{token}` is already defined")]
    DuplicateToken {
        line: usize,
        dialect: Dialect,
        token: String,
    },
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleType {
    Negation,
    Operator,
    Special,
}

impl RuleType {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleType::Negation => "Negation",
            RuleType::Operator => "Operator",
            RuleType::Special => "Special",
        }
    }
}

impl FromStr for RuleType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "negation" => Ok(RuleType::Negation),
            "operator" => Ok(RuleType::Operator),
            "special" => Ok(RuleType::Special),
            _ => Err(format!("unknown rule type `{s}`")),
        }
    }
}

/// Which matching directions an entry takes part in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum MatchCheck {
    #[default]
    Both,
    /// The formal token must be verbalized; text mentions need no formal counterpart.
    Forward,
    /// Text mentions must be backed by the formal token; the token itself may stay implicit.
    Backward,
    None,
}

impl MatchCheck {
    pub fn forward(self) -> bool {
        matches!(self, MatchCheck::Both | MatchCheck::Forward)
    }

    pub fn backward(self) -> bool {
        matches!(self, MatchCheck::Both | MatchCheck::Backward)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatchCheck::Both => "both",
            MatchCheck::Forward => "forward",
            MatchCheck::Backward => "backward",
            MatchCheck::None => "none",
        }
    }
}

impl FromStr for MatchCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(MatchCheck::Both),
            "forward" => Ok(MatchCheck::Forward),
            "backward" => Ok(MatchCheck::Backward),
            "none" => Ok(MatchCheck::None),
            _ => Err(format!("unknown check `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NlVariant {
    /// Normalized phrase: tokens joined by single spaces.
    pub phrase: String,
    pub tokens: Vec<String>,
    /// Added beyond the published sample rules.
    pub extended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub rule_type: RuleType,
    pub sql_token: Option<String>,
    pub logic_token: Option<String>,
    pub nl_variants: Vec<NlVariant>,
    pub linear_phrase: String,
    pub check: MatchCheck,
}

impl LexiconEntry {
    pub fn formal(&self, dialect: Dialect) -> Option<&str> {
        match dialect {
            Dialect::Sql => self.sql_token.as_deref(),
            Dialect::Logic => self.logic_token.as_deref(),
        }
    }

    pub fn variants(&self) -> impl Iterator<Item = &str> {
        self.nl_variants.iter().map(|v| v.phrase.as_str())
    }

    pub fn has_variant(&self, phrase: &str) -> bool {
        self.nl_variants.iter().any(|v| v.phrase == phrase)
    }

    /// Variants that appear verbatim in the published sample rules.
    pub fn verbatim_variants(&self) -> impl Iterator<Item = &str> {
        self.nl_variants
            .iter()
            .filter(|v| !v.extended)
            .map(|v| v.phrase.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SwapKind {
    Aggregator,
    Operator,
    Conjunction,
}

impl SwapKind {
    fn as_str(self) -> &'static str {
        match self {
            SwapKind::Aggregator => "aggregator",
            SwapKind::Operator => "operator",
            SwapKind::Conjunction => "conjunction",
        }
    }
}

/// Formal tokens interchangeable under logic-shift perturbation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapGroup {
    pub kind: SwapKind,
    pub dialect: Dialect,
    /// Case-folded formal tokens.
    pub members: Vec<String>,
}

/// A (positive, negated) token pair toggled by negation perturbations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationPair {
    pub dialect: Dialect,
    pub positive: String,
    pub negative: String,
}

/// A maximal run of utterance tokens equal to some variant phrase.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NlSpan {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub phrase: String,
    /// Index of the first lexicon entry listing this phrase.
    pub entry: usize,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    swap_groups: Vec<SwapGroup>,
    negations: Vec<NegationPair>,
    by_formal: HashMap<(Dialect, String), usize>,
    by_phrase: HashMap<String, Vec<usize>>,
    longest_phrase: usize,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.swap_groups == other.swap_groups
            && self.negations == other.negations
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Loads the lexicon at `path`, or the one named by `LOGICHECK_LEXICON`, or
/// the built-in default, in that order of preference.
pub fn load_lexicon(path: Option<&Path>) -> Result<Lexicon, LexiconError> {
    match path {
        Some(p) => Lexicon::load(p),
        None => match std::env::var_os(LEXICON_ENV) {
            Some(p) if !p.is_empty() => Lexicon::load(Path::new(&p)),
            _ => Ok(Lexicon::builtin()),
        },
    }
}

impl Lexicon {
    pub fn builtin() -> Self {
        BUILTIN.parse().expect("built-in lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn save(&self, path: &Path) -> Result<(), LexiconError> {
        std::fs::write(path, self.to_tsv()).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_parts(
        entries: Vec<LexiconEntry>,
        swap_groups: Vec<SwapGroup>,
        negations: Vec<NegationPair>,
    ) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon {
            entries: Vec::new(),
            swap_groups: Vec::new(),
            negations: Vec::new(),
            by_formal: HashMap::new(),
            by_phrase: HashMap::new(),
            longest_phrase: 0,
        };
        for entry in entries {
            lexicon.push_entry(entry, 0)?;
        }
        for group in swap_groups {
            lexicon.push_swap(group, 0)?;
        }
        for pair in negations {
            lexicon.push_negation(pair, 0)?;
        }
        Ok(lexicon)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &LexiconEntry {
        &self.entries[index]
    }

    pub fn swap_groups(&self) -> &[SwapGroup] {
        &self.swap_groups
    }

    pub fn negations(&self) -> &[NegationPair] {
        &self.negations
    }

    /// The entry whose formal token in `dialect` equals `token`, case-folded.
    pub fn lookup_formal(&self, dialect: Dialect, token: &str) -> Option<&LexiconEntry> {
        self.lookup_index(dialect, token).map(|i| &self.entries[i])
    }

    pub fn lookup_index(&self, dialect: Dialect, token: &str) -> Option<usize> {
        self.by_formal
            .get(&(dialect, token.to_lowercase()))
            .copied()
    }

    /// Entries (by index) listing `phrase` among their variants.
    pub fn entries_with_phrase(&self, phrase: &str) -> &[usize] {
        self.by_phrase.get(phrase).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Leftmost-longest variant spans over all entries.
    pub fn match_nl(&self, tokens: &[String]) -> Vec<NlSpan> {
        self.spans(tokens, |_| true)
    }

    /// Leftmost-longest variant spans restricted to entries with a formal
    /// token in `dialect`.
    pub fn match_nl_in(&self, dialect: Dialect, tokens: &[String]) -> Vec<NlSpan> {
        self.spans(tokens, |e| e.formal(dialect).is_some())
    }

    fn spans(&self, tokens: &[String], admit: impl Fn(&LexiconEntry) -> bool) -> Vec<NlSpan> {
        let mut out = Vec::new();
        let mut start = 0;
        'scan: while start < tokens.len() {
            let longest = self.longest_phrase.min(tokens.len() - start);
            for len in (1..=longest).rev() {
                let phrase = tokens[start..start + len].join(" ");
                let hit = self
                    .entries_with_phrase(&phrase)
                    .iter()
                    .copied()
                    .find(|&i| admit(&self.entries[i]));
                if let Some(entry) = hit {
                    out.push(NlSpan {
                        start,
                        end: start + len,
                        phrase,
                        entry,
                    });
                    start += len;
                    continue 'scan;
                }
            }
            start += 1;
        }
        out
    }

    /// Every (kind, replacement) for `token` within the dialect's swap groups.
    pub fn swap_partners(&self, dialect: Dialect, token: &str) -> Vec<(SwapKind, String)> {
        let token = token.to_lowercase();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for group in self.swap_groups.iter().filter(|g| g.dialect == dialect) {
            if !group.members.contains(&token) {
                continue;
            }
            for member in group.members.iter().filter(|m| **m != token) {
                if seen.insert(member.clone()) {
                    out.push((group.kind, member.clone()));
                }
            }
        }
        out
    }

    /// The other half of a negation pair containing `token`.
    pub fn negation_partner(&self, dialect: Dialect, token: &str) -> Option<&str> {
        let token = token.to_lowercase();
        self.negations
            .iter()
            .filter(|p| p.dialect == dialect)
            .find_map(|p| {
                if p.positive == token {
                    Some(p.negative.as_str())
                } else if p.negative == token {
                    Some(p.positive.as_str())
                } else {
                    None
                }
            })
    }

    /// Renders the lexicon in its line-oriented file format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let dash = |t: &Option<String>| t.clone().unwrap_or_else(|| "-".into());
        for e in &self.entries {
            let variants: Vec<String> = e
                .nl_variants
                .iter()
                .map(|v| {
                    if v.extended {
                        format!("+{}", v.phrase)
                    } else {
                        v.phrase.clone()
                    }
                })
                .collect();
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.rule_type.as_str(),
                dash(&e.sql_token),
                dash(&e.logic_token),
                e.linear_phrase,
                variants.join(",")
            );
            if e.check != MatchCheck::Both {
                let _ = write!(out, "\t{}", e.check.as_str());
            }
            out.push('\n');
        }
        for g in &self.swap_groups {
            let _ = writeln!(
                out,
                "swap\t{}\t{}\t{}",
                g.kind.as_str(),
                g.dialect,
                g.members.join(",")
            );
        }
        for n in &self.negations {
            let _ = writeln!(out, "negate\t{}\t{},{}", n.dialect, n.positive, n.negative);
        }
        out
    }

    fn push_entry(&mut self, entry: LexiconEntry, line: usize) -> Result<(), LexiconError> {
        let format = |message: String| LexiconError::Format { line, message };
        if entry.sql_token.is_none() && entry.logic_token.is_none() {
            return Err(format("entry needs a sql or logic token".into()));
        }
        if entry.nl_variants.is_empty() {
            return Err(format("entry needs at least one variant".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &entry.nl_variants {
            if v.phrase.is_empty() || v.phrase != v.phrase.to_lowercase() {
                return Err(format(format!("variant `{}` must be non-empty lowercase", v.phrase)));
            }
            if !seen.insert(v.phrase.as_str()) {
                return Err(format(format!("duplicate variant `{}`", v.phrase)));
            }
        }
        let index = self.entries.len();
        for dialect in [Dialect::Sql, Dialect::Logic] {
            if let Some(token) = entry.formal(dialect) {
                let key = (dialect, token.to_lowercase());
                if self.by_formal.contains_key(&key) {
                    return Err(LexiconError::DuplicateToken {
                        line,
                        dialect,
                        token: token.to_string(),
                    });
                }
                self.by_formal.insert(key, index);
            }
        }
        for v in &entry.nl_variants {
            self.longest_phrase = self.longest_phrase.max(v.tokens.len());
            self.by_phrase.entry(v.phrase.clone()).or_default().push(index);
        }
        self.entries.push(entry);
        Ok(())
    }

    fn push_swap(&mut self, group: SwapGroup, line: usize) -> Result<(), LexiconError> {
        let format = |message: String| LexiconError::Format { line, message };
        if group.members.len() < 2 {
            return Err(format("swap group needs at least two members".into()));
        }
        let mut rule = None;
        for m in &group.members {
            let entry = self
                .lookup_formal(group.dialect, m)
                .ok_or_else(|| format(format!("swap member `{m}` has no {} entry", group.dialect)))?;
            match rule {
                None => rule = Some(entry.rule_type),
                Some(r) if r != entry.rule_type => {
                    return Err(format(format!("swap group mixes rule types at `{m}`")))
                }
                _ => {}
            }
        }
        self.swap_groups.push(group);
        Ok(())
    }

    fn push_negation(&mut self, pair: NegationPair, line: usize) -> Result<(), LexiconError> {
        for t in [&pair.positive, &pair.negative] {
            if self.lookup_formal(pair.dialect, t).is_none() {
                return Err(LexiconError::Format {
                    line,
                    message: format!("negation member `{t}` has no {} entry", pair.dialect),
                });
            }
        }
        self.negations.push(pair);
        Ok(())
    }
}

impl FromStr for Lexicon {
    type Err = LexiconError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lexicon = Lexicon::from_parts(Vec::new(), Vec::new(), Vec::new())?;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let format = |message: String| LexiconError::Format { line, message };
            match cols[0] {
                "swap" => {
                    let [_, kind, dialect, members] = cols[..] else {
                        return Err(format("swap rows have 4 columns".into()));
                    };
                    let kind = match kind {
                        "aggregator" => SwapKind::Aggregator,
                        "operator" => SwapKind::Operator,
                        "conjunction" => SwapKind::Conjunction,
                        other => return Err(format(format!("unknown swap kind `{other}`"))),
                    };
                    let dialect: Dialect = dialect.parse().map_err(format)?;
                    let members = split_list(members).map(|m| m.to_lowercase()).collect();
                    lexicon.push_swap(
                        SwapGroup {
                            kind,
                            dialect,
                            members,
                        },
                        line,
                    )?;
                }
                "negate" => {
                    let [_, dialect, members] = cols[..] else {
                        return Err(format("negate rows have 3 columns".into()));
                    };
                    let dialect: Dialect = dialect.parse().map_err(format)?;
                    let members: Vec<String> = split_list(members).map(|m| m.to_lowercase()).collect();
                    let [positive, negative] = <[String; 2]>::try_from(members)
                        .map_err(|_| format("negate rows pair exactly two tokens".into()))?;
                    lexicon.push_negation(
                        NegationPair {
                            dialect,
                            positive,
                            negative,
                        },
                        line,
                    )?;
                }
                _ => {
                    if !(5..=6).contains(&cols.len()) {
                        return Err(format(format!(
                            "expected 5 or 6 tab-separated columns, found {}",
                            cols.len()
                        )));
                    }
                    let rule_type: RuleType = cols[0].parse().map_err(format)?;
                    let formal = |s: &str| (s != "-" && !s.is_empty()).then(|| s.to_string());
                    let check = match cols.get(5) {
                        Some(c) => c.parse().map_err(format)?,
                        None => MatchCheck::Both,
                    };
                    let mut nl_variants: Vec<NlVariant> = Vec::new();
                    for v in split_list(cols[4]) {
                        let (extended, body) = match v.strip_prefix('+') {
                            Some(rest) => (true, rest),
                            None => (false, v),
                        };
                        let tokens = tokenize(body);
                        let phrase = tokens.join(" ");
                        if phrase != body {
                            return Err(format(format!(
                                "variant `{body}` is not in normalized form `{phrase}`"
                            )));
                        }
                        if nl_variants.iter().any(|n| n.phrase == phrase) {
                            return Err(format(format!("duplicate variant `{phrase}`")));
                        }
                        nl_variants.push(NlVariant {
                            phrase,
                            tokens,
                            extended,
                        });
                    }
                    lexicon.push_entry(
                        LexiconEntry {
                            rule_type,
                            sql_token: formal(cols[1]),
                            logic_token: formal(cols[2]),
                            linear_phrase: cols[3].to_string(),
                            nl_variants,
                            check,
                        },
                        line,
                    )?;
                }
            }
        }
        Ok(lexicon)
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn default_max_entry() {
        let lex = Lexicon::builtin();
        let max = lex.lookup_formal(Dialect::Sql, "max").unwrap();
        assert_eq!(max.rule_type, RuleType::Operator);
        assert_eq!(max.sql_token.as_deref(), Some("MAX"));
        assert_eq!(max.logic_token.as_deref(), Some("max"));
        let variants: Vec<&str> = max.variants().collect();
        assert_eq!(
            variants,
            ["largest", "greatest", "maximum", "most", "oldest", "highest"]
        );
        assert_eq!(max.verbatim_variants().collect::<Vec<_>>(), ["largest", "greatest"]);
    }

    #[test]
    fn default_negation_entry() {
        let lex = Lexicon::builtin();
        let not = lex.lookup_formal(Dialect::Sql, "NOT").unwrap();
        assert_eq!(not.rule_type, RuleType::Negation);
        assert_eq!(not.logic_token.as_deref(), Some("not_eq"));
        let variants: Vec<&str> = not.variants().collect();
        assert_eq!(&variants[..3], ["not", "none", "no"]);
        assert_eq!(not.verbatim_variants().collect::<Vec<_>>(), ["not", "none"]);
    }

    #[test]
    fn published_rows_are_verbatim() {
        let lex = Lexicon::builtin();
        let cases: [(Dialect, &str, &[&str]); 8] = [
            (Dialect::Sql, "NOT", &["not", "none"]),
            (Dialect::Sql, ">", &["larger", "more", "greater"]),
            (Dialect::Sql, "<", &["smaller", "less", "fewer"]),
            (Dialect::Sql, "MAX", &["largest", "greatest"]),
            (Dialect::Sql, "COUNT", &["total", "how many"]),
            (Dialect::Sql, "ASC", &["ascending", "fewest"]),
            (Dialect::Sql, "DESC", &["descending", "highest"]),
            (Dialect::Logic, "most_str_eq", &["majority", "most"]),
        ];
        for (dialect, token, verbatim) in cases {
            let e = lex.lookup_formal(dialect, token).unwrap();
            assert_eq!(e.verbatim_variants().collect::<Vec<_>>(), verbatim, "{token}");
        }
        assert_eq!(
            lex.lookup_formal(Dialect::Sql, ">").unwrap().logic_token.as_deref(),
            Some("filter_greater")
        );
        assert_eq!(
            lex.lookup_formal(Dialect::Sql, "<").unwrap().logic_token.as_deref(),
            Some("filter_smaller")
        );
        assert!(lex.lookup_formal(Dialect::Sql, "ASC").unwrap().logic_token.is_none());
        assert!(lex.lookup_formal(Dialect::Logic, "most_str_eq").unwrap().sql_token.is_none());
    }

    #[test]
    fn lookup_formal_cases() {
        let lex = Lexicon::builtin();
        assert_eq!(
            lex.lookup_formal(Dialect::Sql, "max").unwrap().sql_token.as_deref(),
            Some("MAX")
        );
        let fg = lex.lookup_formal(Dialect::Logic, "filter_greater").unwrap();
        for v in ["larger", "more", "greater"] {
            assert!(fg.has_variant(v));
        }
        assert!(lex.lookup_formal(Dialect::Sql, "zebra").is_none());
        // logic tokens are not visible from the sql side
        assert!(lex.lookup_formal(Dialect::Sql, "filter_greater").is_none());
    }

    #[test]
    fn match_nl_examples() {
        let lex = Lexicon::builtin();
        let spans = lex.match_nl(&toks(&["how", "many", "dogs"]));
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (0, 2));
        assert_eq!(spans[0].phrase, "how many");
        assert_eq!(lex.entry(spans[0].entry).sql_token.as_deref(), Some("COUNT"));

        assert!(lex.match_nl(&toks(&["the", "red", "house"])).is_empty());

        let spans = lex.match_nl(&toks(&["not", "more", "than"]));
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].phrase, "not");
        assert_eq!(lex.entry(spans[0].entry).rule_type, RuleType::Negation);
        assert_eq!(spans[1].phrase, "more");
        let more = lex.entry(spans[1].entry);
        assert_eq!(more.sql_token.as_deref(), Some(">"));
        assert_eq!(more.logic_token.as_deref(), Some("filter_greater"));
    }

    #[test]
    fn longest_match_wins() {
        let lex = Lexicon::builtin();
        let spans = lex.match_nl(&toks(&["the", "total", "number", "of", "dogs"]));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].phrase, "total number of");
        let spans = lex.match_nl(&toks(&["at", "least", "3"]));
        assert_eq!(spans[0].phrase, "at least");
    }

    #[test]
    fn dialect_filter_hides_other_side() {
        let lex = Lexicon::builtin();
        let tokens = toks(&["the", "majority", "of", "each", "team"]);
        let sql: Vec<_> = lex.match_nl_in(Dialect::Sql, &tokens).into_iter().map(|s| s.phrase).collect();
        let logic: Vec<_> = lex.match_nl_in(Dialect::Logic, &tokens).into_iter().map(|s| s.phrase).collect();
        assert_eq!(sql, ["each"]);
        assert_eq!(logic, ["majority"]);
    }

    #[test]
    fn duplicate_token_rejected() {
        let text = "Operator\tCOUNT\tcount\tthe number of\ttotal\nOperator\tCOUNT\t-\tthe count of\tcount\n";
        match text.parse::<Lexicon>() {
            Err(LexiconError::DuplicateToken { line, token, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(token, "COUNT");
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn format_errors_carry_line_numbers() {
        let cases = [
            ("# c\nOperator\tMAX\n", 2),
            ("Bogus\tMAX\tmax\tthe max\tlargest\n", 1),
            ("Operator\t-\t-\tnothing\tword\n", 1),
            ("Operator\tMAX\tmax\tthe max\tLargest\n", 1),
            ("Operator\tMAX\tmax\tthe max\tbig,big\n", 1),
            ("Operator\tMAX\tmax\tthe max\tbig\nswap\taggregator\tsql\tMAX,MIN\n", 2),
        ];
        for (text, want) in cases {
            match text.parse::<Lexicon>() {
                Err(LexiconError::Format { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn swap_groups_cover_members() {
        let lex = Lexicon::builtin();
        for g in lex.swap_groups() {
            for m in &g.members {
                assert!(lex.lookup_formal(g.dialect, m).is_some(), "{m}");
            }
        }
        let partners: Vec<String> = lex
            .swap_partners(Dialect::Sql, "AVG")
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        assert_eq!(partners, ["max", "min", "sum"]);
        assert_eq!(lex.negation_partner(Dialect::Sql, "="), Some("!="));
        assert_eq!(lex.negation_partner(Dialect::Logic, "not_eq"), Some("eq"));
        assert!(lex.swap_partners(Dialect::Sql, "count").is_empty());
    }

    #[test]
    fn resave_is_identical() {
        let lex = Lexicon::builtin();
        let again: Lexicon = lex.to_tsv().parse().unwrap();
        assert_eq!(lex, again);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        lex.save(&path).unwrap();
        assert_eq!(Lexicon::load(&path).unwrap(), lex);
    }

    #[test]
    fn lookup_and_match_agree() {
        let lex = Lexicon::builtin();
        for (i, e) in lex.entries().iter().enumerate() {
            for v in &e.nl_variants {
                for span in lex.match_nl(&v.tokens) {
                    let entry = lex.entry(span.entry);
                    for d in [Dialect::Sql, Dialect::Logic] {
                        if let Some(t) = entry.formal(d) {
                            assert_eq!(lex.lookup_formal(d, t), Some(entry));
                        }
                    }
                }
                assert!(lex.entries_with_phrase(&v.phrase).contains(&i));
            }
        }
    }
}
