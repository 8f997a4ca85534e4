//! Generator and evaluator training sets built from seeds and perturbations.
//!
//! Each accepted perturbation `p` of seed `s` with text `t'` contributes one
//! positive `(p, t')` and two crossover negatives `(s, t')` and `(p, t)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Dialect, SemanticParse};
use crate::parse::{Parser, SyntaxError};
use crate::perturb::Perturbation;
use crate::utterance::Utterance;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("perturbation references unknown seed `{0}`")]
    UnknownSeed(String),
    #[error("augmented pair `{0}` has no evaluator score")]
    MissingScore(String),
    #[error("evaluator score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("empty beam")]
    EmptyBeam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    AugPositive,
    CrossNegSeedLogic,
    CrossNegPerturbedLogic,
}

impl Provenance {
    pub fn label(self) -> Label {
        match self {
            Provenance::Seed | Provenance::AugPositive => Label::Consistent,
            _ => Label::Inconsistent,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::AugPositive => "aug_positive",
            Provenance::CrossNegSeedLogic => "cross_neg_seed_logic",
            Provenance::CrossNegPerturbedLogic => "cross_neg_perturbed_logic",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Provenance::Seed,
            Provenance::AugPositive,
            Provenance::CrossNegSeedLogic,
            Provenance::CrossNegPerturbedLogic,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| format!("unknown provenance `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub seed_id: String,
    pub parse: SemanticParse,
    pub text: Utterance,
    pub label: Label,
    pub provenance: Provenance,
    pub evaluator_score: Option<f64>,
    /// Short description of the perturbation behind an augmented pair.
    pub edit: Option<String>,
}

impl LabeledPair {
    pub fn seed(seed_id: impl Into<String>, parse: SemanticParse, text: Utterance) -> Self {
        Self {
            seed_id: seed_id.into(),
            parse,
            text,
            label: Label::Consistent,
            provenance: Provenance::Seed,
            evaluator_score: None,
            edit: None,
        }
    }

    fn key(&self) -> (String, String) {
        (self.parse.serialize(), self.text.raw.clone())
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        (&self.seed_id, self.provenance, &self.edit, &self.text.raw)
            .cmp(&(&other.seed_id, other.provenance, &other.edit, &other.text.raw))
    }
}

/// A perturbed parse with the text chosen for it.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub perturbation: Perturbation,
    pub text: Utterance,
    pub evaluator_score: Option<f64>,
}

impl AugmentedSample {
    pub fn seed_id(&self) -> &str {
        &self.perturbation.seed_id
    }

    /// `kind@path:before>after`
    pub fn edit(&self) -> String {
        let p = &self.perturbation;
        format!("{}@{}:{}>{}", p.kind, p.node_path, p.before, p.after)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamCandidate {
    pub text: Utterance,
    pub generator_score: f64,
    pub evaluator_score: Option<f64>,
}

fn seed_index(seeds: &[LabeledPair]) -> HashMap<&str, &LabeledPair> {
    seeds.iter().map(|s| (s.seed_id.as_str(), s)).collect()
}

fn check_score(score: Option<f64>) -> Result<(), ComposeError> {
    match score {
        Some(g) if !(0.0..=1.0).contains(&g) => Err(ComposeError::ScoreOutOfRange(g)),
        _ => Ok(()),
    }
}

/// Seeds, augmented positives and both crossover negatives per sample, in
/// canonical order with duplicates merged.
pub fn compose_evaluator_set(
    seeds: &[LabeledPair],
    perturbed: &[AugmentedSample],
) -> Result<Vec<LabeledPair>, ComposeError> {
    let index = seed_index(seeds);
    let mut out: Vec<LabeledPair> = seeds.to_vec();
    for sample in perturbed {
        let seed = *index
            .get(sample.seed_id())
            .ok_or_else(|| ComposeError::UnknownSeed(sample.seed_id().to_string()))?;
        check_score(sample.evaluator_score)?;
        let edit = Some(sample.edit());
        let make = |parse: &SemanticParse, text: &Utterance, provenance: Provenance, score| LabeledPair {
            seed_id: seed.seed_id.clone(),
            parse: parse.clone(),
            text: text.clone(),
            label: provenance.label(),
            provenance,
            evaluator_score: score,
            edit: edit.clone(),
        };
        let perturbed_parse = &sample.perturbation.result;
        out.push(make(perturbed_parse, &sample.text, Provenance::AugPositive, sample.evaluator_score));
        out.push(make(&seed.parse, &sample.text, Provenance::CrossNegSeedLogic, None));
        out.push(make(perturbed_parse, &seed.text, Provenance::CrossNegPerturbedLogic, None));
    }
    Ok(canonicalize(out))
}

/// Seeds plus augmented positives scoring at least `threshold`.
pub fn compose_generator_set(
    seeds: &[LabeledPair],
    perturbed: &[AugmentedSample],
    threshold: f64,
) -> Result<Vec<LabeledPair>, ComposeError> {
    let index = seed_index(seeds);
    let mut out: Vec<LabeledPair> = seeds.to_vec();
    for sample in perturbed {
        let seed = *index
            .get(sample.seed_id())
            .ok_or_else(|| ComposeError::UnknownSeed(sample.seed_id().to_string()))?;
        let score = sample
            .evaluator_score
            .ok_or_else(|| ComposeError::MissingScore(sample.edit()))?;
        check_score(Some(score))?;
        if score >= threshold {
            out.push(LabeledPair {
                seed_id: seed.seed_id.clone(),
                parse: sample.perturbation.result.clone(),
                text: sample.text.clone(),
                label: Label::Consistent,
                provenance: Provenance::AugPositive,
                evaluator_score: Some(score),
                edit: Some(sample.edit()),
            });
        }
    }
    Ok(canonicalize(out))
}

/// Sorts canonically and merges pairs with identical parse and text. The
/// merged pair keeps the highest score. On a label conflict a seed pair
/// wins, otherwise the negative does.
pub fn canonicalize(mut pairs: Vec<LabeledPair>) -> Vec<LabeledPair> {
    pairs.sort_by(LabeledPair::canonical_cmp);
    let mut kept: Vec<LabeledPair> = Vec::with_capacity(pairs.len());
    let mut at: HashMap<(String, String), usize> = HashMap::new();
    for pair in pairs {
        match at.get(&pair.key()) {
            Some(&i) => {
                let existing = &mut kept[i];
                let score = match (existing.evaluator_score, pair.evaluator_score) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                let replace = match (existing.provenance, pair.provenance) {
                    (Provenance::Seed, _) => false,
                    (_, Provenance::Seed) => true,
                    _ => pair.label == Label::Inconsistent && existing.label == Label::Consistent,
                };
                if replace {
                    *existing = pair;
                }
                existing.evaluator_score = score;
            }
            None => {
                at.insert(pair.key(), kept.len());
                kept.push(pair);
            }
        }
    }
    kept
}

/// Index and candidate maximizing (evaluator score, generator score); the
/// earlier candidate wins full ties.
pub fn rerank_beam(candidates: &[BeamCandidate]) -> Result<(usize, &BeamCandidate), ComposeError> {
    let mut best: Option<(usize, &BeamCandidate, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let gamma = c
            .evaluator_score
            .ok_or_else(|| ComposeError::MissingScore(c.text.raw.clone()))?;
        let better = match best {
            None => true,
            Some((_, b, bg)) => (gamma, c.generator_score).partial_cmp(&(bg, b.generator_score)) == Some(Ordering::Greater),
        };
        if better {
            best = Some((i, c, gamma));
        }
    }
    best.map(|(i, c, _)| (i, c)).ok_or(ComposeError::EmptyBeam)
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: {source}")]
    Syntax {
        line: usize,
        #[source]
        source: SyntaxError,
    },
}

/// One line of a dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    dialect: Option<Dialect>,
    #[serde(alias = "logic_str", alias = "query")]
    logic: String,
    #[serde(alias = "sent", alias = "question")]
    text: String,
    #[serde(default)]
    label: Option<Label>,
    #[serde(default)]
    provenance: Option<Provenance>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    edit: Option<String>,
}

pub fn write_pairs(out: &mut impl Write, pairs: &[LabeledPair]) -> std::io::Result<()> {
    for p in pairs {
        let record = Record {
            id: Some(p.seed_id.clone()),
            dialect: Some(p.parse.dialect),
            logic: p.parse.serialize(),
            text: p.text.raw.clone(),
            label: Some(p.label),
            provenance: Some(p.provenance),
            score: p.evaluator_score,
            edit: p.edit.clone(),
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_pairs(path: &Path, pairs: &[LabeledPair]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_pairs(&mut buf, pairs).map_err(io)?;
    std::fs::write(path, buf).map_err(io)
}

/// Reads line-delimited records or a JSON array of records. Records
/// without a dialect field are parsed as `default_dialect`; records
/// without an id are numbered by position.
pub fn read_pairs(
    input: impl BufRead,
    default_dialect: Dialect,
    parser: &Parser,
) -> Result<Vec<LabeledPair>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: "<input>".into(),
        source,
    };
    let text = std::io::read_to_string(input).map_err(io)?;
    let records: Vec<(usize, Record)> = if text.trim_start().starts_with('[') {
        let values: Vec<Record> = serde_json::from_str(&text).map_err(|e| DatasetError::Record {
            line: e.line(),
            message: e.to_string(),
        })?;
        values.into_iter().enumerate().collect()
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map(|r| (i, r))
                    .map_err(|e| DatasetError::Record {
                        line: i + 1,
                        message: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?
    };
    records
        .into_iter()
        .map(|(i, r)| {
            let line = i + 1;
            let dialect = r.dialect.unwrap_or(default_dialect);
            let parse = parser
                .parse(dialect, &r.logic)
                .map_err(|source| DatasetError::Syntax { line, source })?;
            let provenance = r.provenance.unwrap_or(Provenance::Seed);
            let label = r.label.unwrap_or(provenance.label());
            if r.score.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
                return Err(DatasetError::Record {
                    line,
                    message: "score outside [0, 1]".into(),
                });
            }
            Ok(LabeledPair {
                seed_id: r.id.unwrap_or_else(|| format!("{i:05}")),
                parse,
                text: Utterance::new(r.text),
                label,
                provenance,
                evaluator_score: r.score,
                edit: r.edit,
            })
        })
        .collect()
}

pub fn load_pairs(path: &Path, default_dialect: Dialect, parser: &Parser) -> Result<Vec<LabeledPair>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_pairs(std::io::BufReader::new(file), default_dialect, parser)
}

/// Record counts per (provenance, label).
pub fn distribution(pairs: &[LabeledPair]) -> BTreeMap<(Provenance, Label), usize> {
    let mut out = BTreeMap::new();
    for p in pairs {
        *out.entry((p.provenance, p.label)).or_insert(0) += 1;
    }
    out
}
