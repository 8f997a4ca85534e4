//! Deterministic in-process workers: a template realizer standing in for a
//! neural generator, and a BLEC-backed evaluator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::Dialect;
use crate::blec::match_pair;
use crate::compose::BeamCandidate;
use crate::lexicon::Lexicon;
use crate::linearize::LinearForm;
use crate::parse::Parser;
use crate::utterance::Utterance;

use super::protocol::{Candidate, Request, Response};
use super::worker::Handler;

/// Linear phrase -> surface realizations; the first is canonical.
const SURFACES: &[(&str, &[&str])] = &[
    ("the number of", &["the number of", "the count of"]),
    ("the maximum of", &["the largest", "the greatest", "the maximum", "the highest"]),
    ("the minimum of", &["the smallest", "the minimum", "the lowest", "the least"]),
    ("the average of", &["the average", "the mean"]),
    ("the sum of", &["the total", "the sum of", "the combined"]),
    ("the row with the maximum", &["the row with the highest", "the row with the largest"]),
    ("the row with the minimum", &["the row with the lowest", "the row with the smallest"]),
    ("not textually equal to", &["not", "other than"]),
    ("not equal to", &["not", "other than", "different from"]),
    ("textually equal to", &["equal to", "the same as"]),
    ("equal to", &["equal to", "the same as", "equals"]),
    ("greater than", &["greater than", "more than", "larger than"]),
    ("smaller than", &["smaller than", "lower than"]),
    ("less than", &["less than", "fewer than"]),
    ("at least", &["at least", "no less than"]),
    ("at most", &["at most", "no more than"]),
    ("in descending order", &["in descending order", "descending"]),
    ("in ascending order", &["in ascending order", "ascending"]),
    ("all rows", &["rows", "the rows", "the records"]),
    ("most of", &["most of"]),
    ("all of", &["all of"]),
];

const QUESTION_FRAMES: &[&str] = &["what is", "show", "find", "list", "give me", "tell me"];
const COUNT_FRAMES: &[(&str, &str)] = &[
    ("how many", "are there"),
    ("how many", "exist"),
    ("how many", "are listed"),
];
const STATEMENT_FRAMES: &[&str] = &["", "it is true that", "we know that", "the table shows that"];

#[derive(Debug, Clone, PartialEq)]
enum Item {
    Word(String),
    Group(Vec<Item>),
}

fn parse_linear(text: &str) -> Vec<Item> {
    let mut stack: Vec<Vec<Item>> = vec![Vec::new()];
    for tok in text.split_whitespace() {
        match tok {
            "(" => stack.push(Vec::new()),
            ")" if stack.len() > 1 => {
                let g = stack.pop().expect("checked depth");
                stack.last_mut().expect("root").push(Item::Group(g));
            }
            ")" => {}
            w => stack.last_mut().expect("root").push(Item::Word(w.to_string())),
        }
    }
    while stack.len() > 1 {
        let g = stack.pop().expect("checked depth");
        stack.last_mut().expect("root").push(Item::Group(g));
    }
    stack.pop().expect("root")
}

/// Realizes one candidate; `choose(n)` picks among `n` alternatives.
struct Realizer<'a> {
    choose: &'a mut dyn FnMut(usize) -> usize,
}

impl Realizer<'_> {
    fn words(&mut self, words: &[String]) -> String {
        let mut out: Vec<String> = Vec::new();
        let mut i = 0;
        'scan: while i < words.len() {
            for (phrase, surfaces) in SURFACES {
                let n = phrase.split(' ').count();
                if i + n <= words.len() && words[i..i + n].join(" ") == *phrase {
                    let pick = (self.choose)(surfaces.len());
                    out.push(surfaces[pick].to_string());
                    i += n;
                    continue 'scan;
                }
            }
            out.push(words[i].clone());
            i += 1;
        }
        out.join(" ")
    }

    fn group(&mut self, items: &[Item]) -> String {
        let words: Vec<&str> = items
            .iter()
            .filter_map(|i| match i {
                Item::Word(w) => Some(w.as_str()),
                Item::Group(_) => None,
            })
            .collect();
        let groups: Vec<&Vec<Item>> = items
            .iter()
            .filter_map(|i| match i {
                Item::Group(g) => Some(g),
                Item::Word(_) => None,
            })
            .collect();
        // aliases and join conditions carry no content for a reader
        match words.as_slice() {
            ["called"] if groups.len() == 2 => return self.group(groups[0]),
            ["joined", "with"] if !groups.is_empty() => return self.group(groups[0]),
            ["matched", "with"] => return String::new(),
            _ => {}
        }
        let mut out = Vec::new();
        let mut run: Vec<String> = Vec::new();
        for item in items {
            match item {
                Item::Word(w) => run.push(w.clone()),
                Item::Group(g) => {
                    if !run.is_empty() {
                        out.push(self.words(&run));
                        run.clear();
                    }
                    out.push(self.group(g));
                }
            }
        }
        if !run.is_empty() {
            out.push(self.words(&run));
        }
        out.retain(|s| !s.is_empty());
        out.join(" ")
    }
}

#[derive(Default)]
struct SqlParts<'a> {
    projections: Vec<&'a [Item]>,
    from: Vec<&'a [Item]>,
    conditions: Vec<&'a [Item]>,
    group: Vec<&'a [Item]>,
    order: Vec<&'a [Item]>,
    limit: Vec<&'a [Item]>,
}

fn split_top(items: &[Item]) -> Vec<&[Item]> {
    items
        .split(|i| matches!(i, Item::Word(w) if w == ","))
        .filter(|p| !p.is_empty())
        .collect()
}

fn starts_with_words(part: &[Item], words: &[&str]) -> bool {
    part.len() > words.len()
        && part
            .iter()
            .zip(words)
            .all(|(i, w)| matches!(i, Item::Word(x) if x == w))
}

fn sql_parts(items: &[Item]) -> SqlParts<'_> {
    let mut parts = SqlParts::default();
    let mut in_from = false;
    for part in split_top(items) {
        let keyed: [(&[&str], usize); 5] = [
            (&["that", "belongs", "to"], 0),
            (&["that", "have"], 1),
            (&["grouped", "by"], 2),
            (&["ordered", "by"], 3),
            (&["limited", "to"], 4),
        ];
        let mut handled = false;
        // the from clause attaches to the last projection with a space
        if let Some(pos) = (0..part.len()).find(|&i| starts_with_words(&part[i..], &["that", "belongs", "to"])) {
            if pos > 0 {
                parts.projections.push(&part[..pos]);
            }
            parts.from.push(&part[pos + 3..]);
            in_from = true;
            continue;
        }
        for (words, slot) in keyed.iter().skip(1) {
            if starts_with_words(part, words) {
                let rest = &part[words.len()..];
                in_from = false;
                match slot {
                    1 => parts.conditions.push(rest),
                    2 => parts.group.push(rest),
                    3 => parts.order.push(rest),
                    _ => parts.limit.push(rest),
                }
                handled = true;
                break;
            }
        }
        if handled {
            continue;
        }
        if in_from {
            parts.from.push(part);
        } else {
            parts.projections.push(part);
        }
    }
    parts
}

fn realize_sql(items: &[Item], choose: &mut dyn FnMut(usize) -> usize) -> String {
    let parts = sql_parts(items);
    let mut r = Realizer { choose };
    let join = |r: &mut Realizer, list: &[&[Item]], sep: &str| {
        list.iter().map(|p| r.group(p)).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(sep)
    };
    let is_count_star = |p: &&[Item]| {
        matches!(p, [Item::Group(g)] if matches!(g.as_slice(),
            [Item::Word(a), Item::Word(b), Item::Word(c), Item::Group(star)]
                if a == "the" && b == "number" && c == "of"
                    && matches!(star.as_slice(), [Item::Word(x), Item::Word(y)] if x == "all" && y == "items")))
    };
    let counting = !parts.projections.is_empty() && parts.projections.iter().all(is_count_star);
    let frame = if counting {
        COUNT_FRAMES[(r.choose)(COUNT_FRAMES.len())]
    } else {
        (QUESTION_FRAMES[(r.choose)(QUESTION_FRAMES.len())], "")
    };
    let from = join(&mut r, &parts.from, " and ");
    let mut text = if counting {
        format!("{} {from} {}", frame.0, frame.1)
    } else {
        let projections = join(&mut r, &parts.projections, " and ");
        format!("{} {projections} of {from}", frame.0)
    };
    if !parts.conditions.is_empty() {
        text.push_str(" whose ");
        text.push_str(&join(&mut r, &parts.conditions, " and "));
    }
    if !parts.group.is_empty() {
        text.push_str(" for each ");
        text.push_str(&join(&mut r, &parts.group, " and "));
    }
    if !parts.order.is_empty() {
        text.push_str(" ordered by ");
        text.push_str(&join(&mut r, &parts.order, " and "));
    }
    if !parts.limit.is_empty() {
        text.push_str(" limited to ");
        text.push_str(&join(&mut r, &parts.limit, " "));
    }
    text
}

fn realize_logic(items: &[Item], choose: &mut dyn FnMut(usize) -> usize) -> String {
    let frame = STATEMENT_FRAMES[choose(STATEMENT_FRAMES.len())];
    let mut r = Realizer { choose };
    format!("{frame} {}", r.group(items))
}

fn tidy(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Realizes a linearized parse as `beam` distinct candidate sentences.
/// Candidate 0 uses the canonical surface for every phrase; the others are
/// drawn by synonym rotation from a generator seeded by `rng_seed` and the
/// input text. Candidate `k` has generator score `-k`.
pub fn template_generate(linear: &LinearForm, beam: usize, rng_seed: u64) -> Vec<BeamCandidate> {
    realize_beam(&linear.text, linear.dialect, beam, rng_seed)
        .into_iter()
        .enumerate()
        .map(|(k, text)| BeamCandidate {
            text: Utterance::new(text),
            generator_score: -(k as f64),
            evaluator_score: None,
        })
        .collect()
}

fn realize_beam(input: &str, dialect: Dialect, beam: usize, rng_seed: u64) -> Vec<String> {
    let items = parse_linear(input);
    let realize = |choose: &mut dyn FnMut(usize) -> usize| {
        tidy(&match dialect {
            Dialect::Sql => realize_sql(&items, choose),
            Dialect::Logic => realize_logic(&items, choose),
        })
    };
    let mut out = vec![realize(&mut |_| 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ fnv1a(input));
    for k in 1..beam {
        let mut found = None;
        for _ in 0..32 {
            let text = realize(&mut |n| rng.random_range(0..n));
            if !out.contains(&text) {
                found = Some(text);
                break;
            }
        }
        out.push(found.unwrap_or_else(|| format!("{} ( variant {k} )", out[0])));
    }
    out.truncate(beam.max(1));
    out
}

fn detect_dialect(logic: &str) -> Dialect {
    if logic.trim_start().get(..6).is_some_and(|s| s.eq_ignore_ascii_case("select")) {
        Dialect::Sql
    } else {
        Dialect::Logic
    }
}

/// The template generator behind the worker protocol.
#[derive(Debug, Clone)]
pub struct BuiltinGenerator {
    base_seed: u64,
    seed: u64,
}

impl BuiltinGenerator {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            base_seed: rng_seed,
            seed: rng_seed,
        }
    }
}

impl Handler for BuiltinGenerator {
    fn handle(&mut self, request: &Request) -> Result<Response, String> {
        let Request::Generate { id, input, control, beam } = request else {
            return Err("the builtin generator only answers generate requests".into());
        };
        let dialect = match control.as_str() {
            "[SQL]" => Dialect::Sql,
            "[logic]" => Dialect::Logic,
            other => return Err(format!("unknown control token `{other}`")),
        };
        let candidates = realize_beam(input, dialect, (*beam).max(1), self.seed)
            .into_iter()
            .enumerate()
            .map(|(k, text)| Candidate { text, score: -(k as f64) })
            .collect();
        Ok(Response::Candidates { id: *id, candidates })
    }

    fn begin_iteration(&mut self, index: usize) {
        self.seed = self.base_seed.wrapping_add(index as u64);
    }
}

/// γ = 1 for BLEC-consistent pairs, 0 otherwise.
#[derive(Debug, Clone)]
pub struct BuiltinEvaluator {
    pub lexicon: Lexicon,
    pub parser: Parser,
}

impl BuiltinEvaluator {
    pub fn new(lexicon: Lexicon, parser: Parser) -> Self {
        Self { lexicon, parser }
    }

    pub fn score(&self, logic: &str, text: &str) -> Result<f64, String> {
        let parse = self
            .parser
            .parse(detect_dialect(logic), logic)
            .map_err(|e| e.to_string())?;
        Ok(if match_pair(&parse, &Utterance::new(text), &self.lexicon).consistent {
            1.0
        } else {
            0.0
        })
    }
}

impl Handler for BuiltinEvaluator {
    fn handle(&mut self, request: &Request) -> Result<Response, String> {
        let Request::Evaluate { id, logic, text } = request else {
            return Err("the builtin evaluator only answers evaluate requests".into());
        };
        Ok(Response::Gamma {
            id: *id,
            gamma: self.score(logic, text)?,
        })
    }
}

/// Both builtin roles behind one endpoint.
pub struct BuiltinWorker {
    pub generator: BuiltinGenerator,
    pub evaluator: BuiltinEvaluator,
}

impl Handler for BuiltinWorker {
    fn handle(&mut self, request: &Request) -> Result<Response, String> {
        match request {
            Request::Generate { .. } => self.generator.handle(request),
            Request::Evaluate { .. } => self.evaluator.handle(request),
        }
    }

    fn begin_iteration(&mut self, index: usize) {
        self.generator.begin_iteration(index);
    }
}
