//! Rule-based logic perturbation: typed, localized edits that change what a
//! parse asserts while keeping it inside the grammar.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::ast::{is_decimal, AstNode, Dialect, NodeKind, NodePath, SemanticParse};
use crate::lexicon::{Lexicon, SwapKind};
use crate::parse::Parser;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PerturbationKind {
    AggregatorSwap,
    OperatorSwap,
    NegationToggle,
    ConjunctionSwap,
    NumberChange,
    PhraseChange,
    EntityInsert,
    EntityDelete,
    EntitySwap,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 9] = [
        Self::AggregatorSwap,
        Self::OperatorSwap,
        Self::NegationToggle,
        Self::ConjunctionSwap,
        Self::NumberChange,
        Self::PhraseChange,
        Self::EntityInsert,
        Self::EntityDelete,
        Self::EntitySwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AggregatorSwap => "AggregatorSwap",
            Self::OperatorSwap => "OperatorSwap",
            Self::NegationToggle => "NegationToggle",
            Self::ConjunctionSwap => "ConjunctionSwap",
            Self::NumberChange => "NumberChange",
            Self::PhraseChange => "PhraseChange",
            Self::EntityInsert => "EntityInsert",
            Self::EntityDelete => "EntityDelete",
            Self::EntitySwap => "EntitySwap",
        }
    }

    /// Aggregator, operator, negation and conjunction changes.
    pub fn is_logic_shift(self) -> bool {
        matches!(
            self,
            Self::AggregatorSwap | Self::OperatorSwap | Self::NegationToggle | Self::ConjunctionSwap
        )
    }

    /// Kinds whose edit undoes itself when applied twice.
    pub fn is_involutive(self) -> bool {
        self.is_logic_shift() || self == Self::EntitySwap
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown perturbation kind `{s}`"))
    }
}

impl From<SwapKind> for PerturbationKind {
    fn from(k: SwapKind) -> Self {
        match k {
            SwapKind::Aggregator => Self::AggregatorSwap,
            SwapKind::Operator => Self::OperatorSwap,
            SwapKind::Conjunction => Self::ConjunctionSwap,
        }
    }
}

/// `NOT` wrapping is recorded with this marker on the absent side.
const ABSENT: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub seed_id: String,
    pub kind: PerturbationKind,
    pub node_path: NodePath,
    /// Second site of an `EntitySwap`.
    pub other_path: Option<NodePath>,
    pub before: String,
    pub after: String,
    pub result: SemanticParse,
}

impl Perturbation {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "seed_id": self.seed_id,
            "kind": self.kind.as_str(),
            "path": self.node_path.to_string(),
            "before": self.before,
            "after": self.after,
            "dialect": self.result.dialect.as_str(),
            "result": self.result.serialize(),
        });
        if let Some(other) = &self.other_path {
            v["other_path"] = other.to_string().into();
        }
        v
    }

    /// Reads a record written by [`Perturbation::to_json`]; extra fields
    /// are ignored.
    pub fn from_json(v: &serde_json::Value, parser: &Parser) -> Result<Self, String> {
        let field = |k: &str| {
            v.get(k)
                .and_then(serde_json::Value::as_str)
                .ok_or_else(|| format!("missing string field `{k}`"))
        };
        let dialect: Dialect = match v.get("dialect") {
            Some(_) => field("dialect")?.parse()?,
            None => Dialect::Sql,
        };
        let other_path = match v.get("other_path") {
            Some(_) => Some(field("other_path")?.parse()?),
            None => None,
        };
        Ok(Self {
            seed_id: field("seed_id")?.to_string(),
            kind: field("kind")?.parse()?,
            node_path: field("path")?.parse()?,
            other_path,
            before: field("before")?.to_string(),
            after: field("after")?.to_string(),
            result: parser.parse(dialect, field("result")?).map_err(|e| e.to_string())?,
        })
    }
}

/// A column/value pair available for insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntity {
    pub column: String,
    pub value: String,
}

impl FromStr for PoolEntity {
    type Err = String;

    /// `column=value`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (c, v) = s
            .split_once('=')
            .ok_or_else(|| format!("entity `{s}` is not of the form column=value"))?;
        let (column, value) = (c.trim().to_lowercase(), v.trim().to_lowercase());
        if column.is_empty() || value.is_empty() {
            return Err(format!("entity `{s}` has an empty side"));
        }
        Ok(Self { column, value })
    }
}

#[derive(Debug, Clone)]
pub struct PerturbConfig {
    pub max_per_seed: usize,
    pub entity_pool: Vec<PoolEntity>,
    pub phrase_pool: Vec<String>,
    /// Used to re-parse every candidate.
    pub parser: Parser,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            max_per_seed: 8,
            entity_pool: Vec::new(),
            phrase_pool: Vec::new(),
            parser: Parser::default(),
        }
    }
}

/// All perturbations of `parse`, deduplicated, sorted by (kind, path) and
/// truncated to `config.max_per_seed`.
pub fn enumerate_perturbations(
    seed_id: &str,
    parse: &SemanticParse,
    lexicon: &Lexicon,
    config: &PerturbConfig,
) -> Vec<Perturbation> {
    let mut e = Enumerator {
        seed_id,
        seed: parse,
        out: Vec::new(),
    };
    let nodes = parse.root.walk();
    for (path, node) in &nodes {
        e.swaps(path, node, lexicon);
        e.negation(path, node, lexicon);
        e.number(path, node);
        e.phrase(path, node, &config.phrase_pool);
    }
    e.inserts(&config.entity_pool);
    e.deletes();
    e.entity_swaps(&nodes);

    let mut seen = HashSet::new();
    let mut out: Vec<Perturbation> = e
        .out
        .into_iter()
        .filter(|p| validate_perturbation(p, parse, &config.parser))
        .filter(|p| seen.insert(p.result.serialize()))
        .collect();
    out.sort_by(|a, b| (a.kind, &a.node_path).cmp(&(b.kind, &b.node_path)));
    out.truncate(config.max_per_seed);
    out
}

/// True iff the result re-parses to itself and differs from `seed`.
pub fn validate_perturbation(p: &Perturbation, seed: &SemanticParse, parser: &Parser) -> bool {
    if p.result.root.validate().is_err() || p.result == *seed {
        return false;
    }
    match parser.parse(p.result.dialect, &p.result.serialize()) {
        Ok(back) => back == p.result,
        Err(_) => false,
    }
}

/// Applies the edit of an involutive perturbation to `parse`. Applied to the
/// seed this gives `p.result`; applied to `p.result` it gives the seed back.
/// `None` for non-involutive kinds or when the edit site does not fit.
pub fn transpose(p: &Perturbation, parse: &SemanticParse) -> Option<SemanticParse> {
    if !p.kind.is_involutive() {
        return None;
    }
    let mut root = parse.root.clone();
    if p.kind == PerturbationKind::EntitySwap {
        let other = p.other_path.as_ref()?;
        let a = root.get(&p.node_path)?.clone();
        let b = root.get(other)?.clone();
        *root.get_mut(&p.node_path)? = b;
        *root.get_mut(other)? = a;
    } else if p.before == ABSENT || p.after == ABSENT {
        let node = root.get_mut(&p.node_path)?;
        let replacement = if node.kind == NodeKind::Apply && node.label == "not" {
            node.children[0].clone()
        } else {
            AstNode::apply("not", vec![node.clone()])
        };
        *node = replacement;
    } else {
        let node = root.get_mut(&p.node_path)?;
        node.label = if node.label == p.before {
            p.after.clone()
        } else if node.label == p.after {
            p.before.clone()
        } else {
            return None;
        };
    }
    Some(SemanticParse {
        dialect: parse.dialect,
        source_text: String::new(),
        root,
    })
}

struct Enumerator<'a> {
    seed_id: &'a str,
    seed: &'a SemanticParse,
    out: Vec<Perturbation>,
}

impl Enumerator<'_> {
    fn dialect(&self) -> Dialect {
        self.seed.dialect
    }

    fn push(&mut self, kind: PerturbationKind, path: &NodePath, before: String, after: String, root: AstNode) {
        self.push_full(kind, path, None, before, after, root);
    }

    fn push_full(
        &mut self,
        kind: PerturbationKind,
        path: &NodePath,
        other_path: Option<NodePath>,
        before: String,
        after: String,
        root: AstNode,
    ) {
        let result = SemanticParse {
            dialect: self.dialect(),
            source_text: String::new(),
            root,
        };
        self.out.push(Perturbation {
            seed_id: self.seed_id.to_string(),
            kind,
            node_path: path.clone(),
            other_path,
            before,
            after,
            result,
        });
    }

    fn with_node(&self, path: &NodePath, node: AstNode) -> AstNode {
        let mut root = self.seed.root.clone();
        *root.get_mut(path).expect("path from walk") = node;
        root
    }

    fn relabel(&self, path: &NodePath, label: &str) -> AstNode {
        let mut node = self.seed.root.get(path).expect("path from walk").clone();
        node.label = label.to_string();
        self.with_node(path, node)
    }

    fn swaps(&mut self, path: &NodePath, node: &AstNode, lexicon: &Lexicon) {
        if !matches!(node.kind, NodeKind::Apply | NodeKind::Keyword) {
            return;
        }
        for (kind, partner) in lexicon.swap_partners(self.dialect(), &node.label) {
            let root = self.relabel(path, &partner);
            self.push(kind.into(), path, node.label.clone(), partner, root);
        }
    }

    fn negation(&mut self, path: &NodePath, node: &AstNode, lexicon: &Lexicon) {
        if node.kind != NodeKind::Apply {
            return;
        }
        if let Some(partner) = lexicon.negation_partner(self.dialect(), &node.label) {
            let partner = partner.to_string();
            let root = self.relabel(path, &partner);
            self.push(PerturbationKind::NegationToggle, path, node.label.clone(), partner, root);
        }
        if self.dialect() != Dialect::Sql || !in_where(path, &self.seed.root) {
            return;
        }
        if node.label == "not" {
            let root = self.with_node(path, node.children[0].clone());
            self.push(PerturbationKind::NegationToggle, path, "not".into(), ABSENT.into(), root);
        } else if is_comparison(node) && !parent_is_not(path, &self.seed.root) {
            let root = self.with_node(path, AstNode::apply("not", vec![node.clone()]));
            self.push(PerturbationKind::NegationToggle, path, ABSENT.into(), "not".into(), root);
        }
    }

    fn number(&mut self, path: &NodePath, node: &AstNode) {
        if node.kind != NodeKind::NumberLiteral {
            return;
        }
        let Some(value) = Decimal::parse(&node.label) else {
            return;
        };
        for changed in [value.add_one(1), value.add_one(-1), value.times_ten()] {
            let after = changed.to_string();
            if after == node.label {
                continue;
            }
            let root = self.relabel(path, &after);
            self.push(PerturbationKind::NumberChange, path, node.label.clone(), after, root);
        }
    }

    fn phrase(&mut self, path: &NodePath, node: &AstNode, pool: &[String]) {
        if node.kind != NodeKind::StringLiteral {
            return;
        }
        for phrase in pool {
            let phrase = phrase.trim().to_lowercase();
            if phrase.is_empty() || phrase == node.label {
                continue;
            }
            let root = self.relabel(path, &phrase);
            self.push(PerturbationKind::PhraseChange, path, node.label.clone(), phrase, root);
        }
    }

    fn inserts(&mut self, pool: &[PoolEntity]) {
        let value_node = |v: &str| {
            if is_decimal(v) {
                AstNode::number(v)
            } else {
                AstNode::string(v)
            }
        };
        for entity in pool {
            let described = format!("{} = {}", entity.column, entity.value);
            match self.dialect() {
                Dialect::Sql => {
                    let root = &self.seed.root;
                    let predicate = AstNode::apply("=", vec![AstNode::ident(&entity.column), value_node(&entity.value)]);
                    if let Some(w) = clause_index(root, "where") {
                        let path = NodePath(vec![w, 0]);
                        let old = root.get(&path).expect("where has a condition").clone();
                        let new_root = self.with_node(&path, AstNode::apply("and", vec![old, predicate]));
                        self.push(PerturbationKind::EntityInsert, &path, ABSENT.into(), described, new_root);
                    } else {
                        let Some(from) = clause_index(root, "from") else {
                            continue;
                        };
                        let mut new_root = root.clone();
                        new_root
                            .children
                            .insert(from + 1, AstNode::apply("where", vec![predicate]));
                        let path = NodePath(vec![from + 1]);
                        self.push(PerturbationKind::EntityInsert, &path, ABSENT.into(), described, new_root);
                    }
                }
                Dialect::Logic => {
                    let sites: Vec<NodePath> = self
                        .seed
                        .root
                        .walk()
                        .into_iter()
                        .filter(|(_, n)| n.kind == NodeKind::Keyword && n.label == "all_rows")
                        .map(|(p, _)| p)
                        .collect();
                    for path in sites {
                        let filter = AstNode::apply(
                            "filter_eq",
                            vec![AstNode::keyword("all_rows"), AstNode::ident(&entity.column), value_node(&entity.value)],
                        );
                        let root = self.with_node(&path, filter);
                        self.push(PerturbationKind::EntityInsert, &path, ABSENT.into(), described.clone(), root);
                    }
                }
            }
        }
    }

    fn deletes(&mut self) {
        let root = &self.seed.root;
        let mut edits = Vec::new();
        match self.dialect() {
            Dialect::Sql => {
                let Some(w) = clause_index(root, "where") else {
                    return;
                };
                for (path, node) in root.walk() {
                    if !path.starts_with(&NodePath(vec![w])) || !is_comparison(node) || !has_literal(node) {
                        continue;
                    }
                    let mut unit = path.clone();
                    while let Some(parent) = unit.parent().filter(|p| root.get(p).is_some_and(|n| n.label == "not" && n.kind == NodeKind::Apply)) {
                        unit = parent;
                    }
                    let parent = unit.parent().expect("predicates sit below the where clause");
                    let parent_node = root.get(&parent).expect("parent exists");
                    let before = describe(root.get(&unit).expect("unit exists"));
                    if parent_node.label == "where" && parent.0.len() == 1 {
                        let mut new_root = root.clone();
                        new_root.children.remove(w);
                        edits.push((parent, before, new_root));
                    } else {
                        let sibling = parent_node.children[1 - unit.last().expect("non-root")].clone();
                        edits.push((parent.clone(), before, self.with_node(&parent, sibling)));
                    }
                }
            }
            Dialect::Logic => {
                for (path, node) in root.walk() {
                    if node.kind != NodeKind::Apply {
                        continue;
                    }
                    if node.label.starts_with("filter_") && node.children.len() == 3 && node.children[2].kind.is_literal() {
                        let view = node.children[0].clone();
                        edits.push((path.clone(), describe(node), self.with_node(&path, view)));
                    } else if node.label == "and" && node.children.len() == 2 {
                        for i in 0..2 {
                            let kept = node.children[1 - i].clone();
                            edits.push((path.clone(), describe(&node.children[i]), self.with_node(&path, kept)));
                        }
                    }
                }
            }
        }
        for (path, before, root) in edits {
            self.push(PerturbationKind::EntityDelete, &path, before, ABSENT.into(), root);
        }
    }

    fn entity_swaps(&mut self, nodes: &[(NodePath, &AstNode)]) {
        let strings: Vec<&(NodePath, &AstNode)> = nodes
            .iter()
            .filter(|(_, n)| n.kind == NodeKind::StringLiteral)
            .collect();
        for (i, (pa, a)) in strings.iter().enumerate() {
            for (pb, b) in &strings[i + 1..] {
                if a.label == b.label {
                    continue;
                }
                let mut root = self.seed.root.clone();
                *root.get_mut(pa).expect("path from walk") = (*b).clone();
                *root.get_mut(pb).expect("path from walk") = (*a).clone();
                self.push_full(
                    PerturbationKind::EntitySwap,
                    pa,
                    Some(pb.clone()),
                    a.label.clone(),
                    b.label.clone(),
                    root,
                );
            }
        }
    }
}

fn clause_index(root: &AstNode, label: &str) -> Option<usize> {
    root.children.iter().position(|c| c.label == label)
}

fn in_where(path: &NodePath, root: &AstNode) -> bool {
    path.0
        .first()
        .and_then(|&i| root.children.get(i))
        .is_some_and(|c| c.label == "where")
        && path.0.len() > 1
}

fn is_comparison(node: &AstNode) -> bool {
    node.kind == NodeKind::Apply && crate::parse::COMPARISONS.contains(&node.label.as_str())
}

fn has_literal(node: &AstNode) -> bool {
    node.children.iter().any(|c| c.kind.is_literal())
}

fn parent_is_not(path: &NodePath, root: &AstNode) -> bool {
    path.parent()
        .and_then(|p| root.get(&p))
        .is_some_and(|n| n.kind == NodeKind::Apply && n.label == "not")
}

fn describe(node: &AstNode) -> String {
    if node.is_leaf() {
        return node.label.clone();
    }
    let args: Vec<String> = node.children.iter().map(describe).collect();
    format!("{}({})", node.label, args.join(", "))
}

/// Exact decimal arithmetic so that `0.7 * 10` prints as `7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Decimal {
    mantissa: i128,
    scale: u32,
}

impl Decimal {
    fn parse(s: &str) -> Option<Self> {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        let scale = u32::try_from(frac.len()).ok()?;
        let mantissa: i128 = format!("{int}{frac}").parse().ok()?;
        Some(Self { mantissa, scale })
    }

    fn unit(&self) -> i128 {
        10i128.pow(self.scale)
    }

    fn add_one(self, sign: i128) -> Self {
        Self {
            mantissa: self.mantissa + sign * self.unit(),
            ..self
        }
        .normalized()
    }

    fn times_ten(self) -> Self {
        if self.scale > 0 {
            Self {
                scale: self.scale - 1,
                ..self
            }
        } else {
            Self {
                mantissa: self.mantissa * 10,
                ..self
            }
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        while self.scale > 0 && self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.scale -= 1;
        }
        self
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let unit = self.unit();
        let sign = if self.mantissa < 0 { "-" } else { "" };
        let abs = self.mantissa.abs();
        write!(f, "{sign}{}.{:0width$}", abs / unit, abs % unit, width = self.scale as usize)
    }
}
