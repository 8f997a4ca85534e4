//! Function-application logic forms: `fn { arg ; arg ... }`.
//!
//! Bare arguments are classified by the role their slot plays in the
//! enclosing function: table views, column names, or values.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::ast::{is_decimal, AstNode, Dialect, NodeKind, SemanticParse};

use super::SyntaxError;

/// Role of one argument slot in a logic function's signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgRole {
    /// A row set: `all_rows` or the result of a filter.
    View,
    Column,
    /// A number or an entity string.
    Value,
    /// Must be a nested function application.
    Bool,
}

impl FromStr for ArgRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "view" => Ok(ArgRole::View),
            "column" => Ok(ArgRole::Column),
            "value" => Ok(ArgRole::Value),
            "bool" => Ok(ArgRole::Bool),
            other => Err(format!("unknown argument role `{other}`")),
        }
    }
}

/// The closed list of logic functions the parser accepts, with signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionInventory {
    signatures: BTreeMap<String, Vec<ArgRole>>,
}

impl Default for FunctionInventory {
    fn default() -> Self {
        use ArgRole::{Bool as B, Column as C, Value as V, View as R};
        let mut signatures = BTreeMap::new();
        let mut add = |names: &[&str], sig: &[ArgRole]| {
            for n in names {
                signatures.insert((*n).to_string(), sig.to_vec());
            }
        };
        add(&["count", "only"], &[R]);
        add(&["hop", "num_hop", "str_hop", "filter_all"], &[R, C]);
        add(
            &["max", "min", "avg", "sum", "argmax", "argmin", "str_argmax", "str_argmin"],
            &[R, C],
        );
        add(&["nth_max", "nth_min", "nth_argmax", "nth_argmin"], &[R, C, V]);
        add(
            &[
                "eq", "not_eq", "round_eq", "str_eq", "not_str_eq", "greater", "less", "diff",
            ],
            &[V, V],
        );
        add(
            &[
                "filter_eq",
                "filter_not_eq",
                "filter_str_eq",
                "filter_str_not_eq",
                "filter_greater",
                "filter_less",
                "filter_smaller",
                "filter_greater_eq",
                "filter_less_eq",
                "all_eq",
                "all_not_eq",
                "all_str_eq",
                "all_str_not_eq",
                "all_greater",
                "all_less",
                "all_greater_eq",
                "all_less_eq",
                "most_eq",
                "most_not_eq",
                "most_str_eq",
                "most_str_not_eq",
                "most_greater",
                "most_less",
                "most_greater_eq",
                "most_less_eq",
            ],
            &[R, C, V],
        );
        add(&["and"], &[B, B]);
        Self { signatures }
    }
}

impl FunctionInventory {
    pub fn signature(&self, name: &str) -> Option<&[ArgRole]> {
        self.signatures.get(name).map(Vec::as_slice)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.signatures.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.signatures.keys().map(String::as_str)
    }

    pub fn insert(&mut self, name: impl Into<String>, signature: Vec<ArgRole>) {
        self.signatures.insert(name.into(), signature);
    }

    /// Adds functions from a spec such as `top_n:view,column,value; pick:view`.
    pub fn extend_from_spec(&mut self, spec: &str) -> Result<(), String> {
        for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, roles) = item
                .split_once(':')
                .ok_or_else(|| format!("function spec `{item}` lacks `name:roles`"))?;
            let name = name.trim();
            if name.is_empty() || name.contains(['{', '}', ';', ' ']) {
                return Err(format!("invalid function name `{name}`"));
            }
            let roles = roles
                .split(',')
                .map(str::parse)
                .collect::<Result<Vec<ArgRole>, _>>()?;
            if roles.is_empty() {
                return Err(format!("function `{name}` needs at least one argument"));
            }
            self.insert(name, roles);
        }
        Ok(())
    }
}

pub fn parse_logic(source: &str) -> Result<SemanticParse, SyntaxError> {
    parse_logic_with(source, &FunctionInventory::default())
}

pub fn parse_logic_with(
    source: &str,
    inventory: &FunctionInventory,
) -> Result<SemanticParse, SyntaxError> {
    let tokens = lex(source);
    let mut p = LogicParser {
        tokens,
        pos: 0,
        inventory,
        source_len: source.len(),
    };
    let root = p.call_or_leaf(None)?;
    if root.kind != NodeKind::Apply {
        return Err(SyntaxError::new(0, "a logic form must be a function application"));
    }
    // Logic2Text strings end in `= true`.
    if let Some(Tok {
        kind: TokKind::Text(t),
        offset,
    }) = p.tokens.get(p.pos)
    {
        if t.replace(' ', "") == "=true" {
            p.pos += 1;
        } else {
            return Err(SyntaxError::expected(*offset, "end of input", &format!("`{t}`")));
        }
    }
    if let Some(t) = p.tokens.get(p.pos) {
        let msg = match t.kind {
            TokKind::Close => "unbalanced braces: unexpected `}`".to_string(),
            _ => "trailing input after logic form".to_string(),
        };
        return Err(SyntaxError::new(t.offset, msg));
    }
    Ok(SemanticParse {
        dialect: Dialect::Logic,
        root,
        source_text: source.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Open,
    Close,
    Semi,
    Text(String),
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    offset: usize,
}

fn lex(src: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut text_start = None;
    let flush = |out: &mut Vec<Tok>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            let raw = &src[s..end];
            let words: Vec<&str> = raw.split_whitespace().collect();
            if !words.is_empty() {
                let lead = raw.len() - raw.trim_start().len();
                out.push(Tok {
                    kind: TokKind::Text(words.join(" ")),
                    offset: s + lead,
                });
            }
        }
    };
    for (i, c) in src.char_indices() {
        let kind = match c {
            '{' => TokKind::Open,
            '}' => TokKind::Close,
            ';' => TokKind::Semi,
            _ => {
                text_start.get_or_insert(i);
                continue;
            }
        };
        flush(&mut out, &mut text_start, i);
        out.push(Tok { kind, offset: i });
    }
    flush(&mut out, &mut text_start, src.len());
    out
}

struct LogicParser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    inventory: &'a FunctionInventory,
    source_len: usize,
}

impl LogicParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.source_len, |t| t.offset)
    }

    fn call_or_leaf(&mut self, role: Option<ArgRole>) -> Result<AstNode, SyntaxError> {
        let (word, offset) = match self.peek() {
            Some(Tok {
                kind: TokKind::Text(w),
                offset,
            }) => (w.clone(), *offset),
            Some(t) => {
                let found = match t.kind {
                    TokKind::Open => "`{`",
                    TokKind::Close => "`}`",
                    TokKind::Semi => "`;`",
                    TokKind::Text(_) => unreachable!(),
                };
                return Err(SyntaxError::expected(t.offset, "function or argument", found));
            }
            None => {
                return Err(SyntaxError::new(
                    self.source_len,
                    "unbalanced braces: input ended inside a logic form",
                ))
            }
        };
        self.pos += 1;
        let opens = matches!(self.peek(), Some(t) if t.kind == TokKind::Open);
        if !opens {
            return self.leaf(word, offset, role);
        }
        let name = word.to_lowercase();
        let signature = self
            .inventory
            .signature(&name)
            .ok_or_else(|| SyntaxError::new(offset, format!("unknown function `{word}`")))?
            .to_vec();
        self.pos += 1;
        let mut args = Vec::new();
        loop {
            let slot = signature.get(args.len()).copied();
            args.push(self.call_or_leaf(slot.or(Some(ArgRole::Value)))?);
            match self.peek().map(|t| &t.kind) {
                Some(TokKind::Semi) => self.pos += 1,
                Some(TokKind::Close) => {
                    self.pos += 1;
                    break;
                }
                Some(_) => {
                    return Err(SyntaxError::expected(self.offset(), "`;` or `}`", "argument text"))
                }
                None => {
                    return Err(SyntaxError::new(
                        self.source_len,
                        "unbalanced braces: missing `}`",
                    ))
                }
            }
        }
        if args.len() != signature.len() {
            return Err(SyntaxError::new(
                offset,
                format!(
                    "`{name}` takes {} argument(s), found {}",
                    signature.len(),
                    args.len()
                ),
            ));
        }
        Ok(AstNode::apply(name, args))
    }

    fn leaf(
        &self,
        word: String,
        offset: usize,
        role: Option<ArgRole>,
    ) -> Result<AstNode, SyntaxError> {
        let label = word.to_lowercase();
        if label == "all_rows" {
            return Ok(AstNode::keyword(label));
        }
        Ok(match role {
            Some(ArgRole::View) | Some(ArgRole::Column) => AstNode::ident(label),
            Some(ArgRole::Value) if is_decimal(&label) => AstNode::number(label),
            Some(ArgRole::Value) => AstNode::string(label),
            Some(ArgRole::Bool) | None => {
                return Err(SyntaxError::expected(offset, "function application", &format!("`{word}`")))
            }
        })
    }
}

pub(crate) fn serialize(node: &AstNode) -> String {
    if node.is_leaf() {
        return node.label.clone();
    }
    let args: Vec<String> = node.children.iter().map(serialize).collect();
    format!("{} {{ {} }}", node.label, args.join(" ; "))
}
