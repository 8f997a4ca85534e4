//! Structure-aware linearization: renders a parse as a parenthesized,
//! semi-textual string for generator input.
//!
//! Every subtree below the clause level is wrapped in `( ... )`, so the
//! parenthesis nesting of a rendered subtree equals its depth. Keyword
//! phrases come from the lexicon's linear phrases; clause layout and the
//! fixity of each function come from a template table.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{AstNode, Dialect, NodeKind, SemanticParse};
use crate::lexicon::Lexicon;

const BUILTIN: &str = include_str!("../data/default.templates");

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("no linear phrase for `{0}`")]
    MissingPhrase(String),
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("cannot read templates {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearForm {
    pub text: String,
    pub dialect: Dialect,
    /// `[SQL]` or `[logic]`.
    pub control_token: String,
}

impl LinearForm {
    /// The text with its control token prepended.
    pub fn with_control(&self) -> String {
        format!("{} {}", self.control_token, self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Joiner {
    None,
    Space,
    Comma,
}

impl Joiner {
    fn as_str(self) -> &'static str {
        match self {
            Joiner::None => "",
            Joiner::Space => " ",
            Joiner::Comma => " , ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ClauseTemplate {
    joiner: Joiner,
    template: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Fixity {
    Prefix,
    Infix,
    Postfix,
    Template(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeRule {
    fixity: Fixity,
    /// Overrides the lexicon phrase when set.
    phrase: Option<String>,
}

/// Clause-layout and function-rendering table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    clauses: HashMap<String, ClauseTemplate>,
    nodes: HashMap<(Dialect, String), NodeRule>,
    leaves: HashMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        BUILTIN.parse().expect("built-in templates are valid")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        std::fs::read_to_string(path)
            .map_err(|source| TemplateError::Io {
                path: path.display().to_string(),
                source,
            })?
            .parse()
    }

    /// True when a function label has its own rendering rule.
    pub fn has_rule(&self, dialect: Dialect, label: &str) -> bool {
        self.nodes.contains_key(&(dialect, label.to_string()))
    }
}

impl FromStr for Templates {
    type Err = TemplateError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut t = Templates {
            clauses: HashMap::new(),
            nodes: HashMap::new(),
            leaves: HashMap::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let format = |message: String| TemplateError::Format { line, message };
            match cols[..] {
                ["clause", label, joiner, template] => {
                    let joiner = match joiner {
                        "none" => Joiner::None,
                        "space" => Joiner::Space,
                        "comma" => Joiner::Comma,
                        other => return Err(format(format!("unknown joiner `{other}`"))),
                    };
                    t.clauses.insert(
                        label.to_string(),
                        ClauseTemplate {
                            joiner,
                            template: template.to_string(),
                        },
                    );
                }
                ["node", dialect, label, fixity, phrase] => {
                    let dialect: Dialect = dialect.parse().map_err(format)?;
                    let (fixity, phrase) = match fixity {
                        "template" => (Fixity::Template(phrase.to_string()), None),
                        f => {
                            let fixity = match f {
                                "prefix" => Fixity::Prefix,
                                "infix" => Fixity::Infix,
                                "postfix" => Fixity::Postfix,
                                other => return Err(format(format!("unknown fixity `{other}`"))),
                            };
                            (fixity, (phrase != "-").then(|| phrase.to_string()))
                        }
                    };
                    t.nodes
                        .insert((dialect, label.to_string()), NodeRule { fixity, phrase });
                }
                ["leaf", label, text] => {
                    t.leaves.insert(label.to_string(), text.to_string());
                }
                _ => return Err(format(format!("unrecognized template row `{trimmed}`"))),
            }
        }
        Ok(t)
    }
}

/// Linearizes with the built-in template table.
pub fn linearize(parse: &SemanticParse, lexicon: &Lexicon) -> Result<LinearForm, LinearizeError> {
    static BUILTIN_TEMPLATES: std::sync::OnceLock<Templates> = std::sync::OnceLock::new();
    linearize_with(parse, lexicon, BUILTIN_TEMPLATES.get_or_init(Templates::builtin))
}

pub fn linearize_with(
    parse: &SemanticParse,
    lexicon: &Lexicon,
    templates: &Templates,
) -> Result<LinearForm, LinearizeError> {
    let r = Renderer {
        dialect: parse.dialect,
        lexicon,
        templates,
    };
    let root = &parse.root;
    let text = if parse.dialect == Dialect::Sql && root.label == "query" && root.kind == NodeKind::Apply {
        r.clauses(root)?
    } else {
        r.node(root)?
    };
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    Ok(LinearForm {
        text,
        dialect: parse.dialect,
        control_token: parse.dialect.control_token().to_string(),
    })
}

struct Renderer<'a> {
    dialect: Dialect,
    lexicon: &'a Lexicon,
    templates: &'a Templates,
}

impl Renderer<'_> {
    fn lexicon_phrase(&self, label: &str) -> Result<&str, LinearizeError> {
        self.lexicon
            .lookup_formal(self.dialect, label)
            .map(|e| e.linear_phrase.as_str())
            .ok_or_else(|| LinearizeError::MissingPhrase(label.to_string()))
    }

    fn clauses(&self, root: &AstNode) -> Result<String, LinearizeError> {
        let mut out = String::new();
        for (i, clause) in root.children.iter().enumerate() {
            let ct = self
                .templates
                .clauses
                .get(&clause.label)
                .ok_or_else(|| LinearizeError::MissingPhrase(clause.label.clone()))?;
            let items = clause
                .children
                .iter()
                .map(|c| self.node(c))
                .collect::<Result<Vec<_>, _>>()?
                .join(" , ");
            let mut text = ct.template.replace("{items}", &items);
            if text.contains("{phrase}") {
                text = text.replace("{phrase}", self.lexicon_phrase(&clause.label)?);
            }
            if i > 0 {
                out.push_str(ct.joiner.as_str());
            }
            out.push_str(&text);
        }
        Ok(out)
    }

    fn node(&self, node: &AstNode) -> Result<String, LinearizeError> {
        let inner = match node.kind {
            NodeKind::Keyword => match self.templates.leaves.get(&node.label) {
                Some(text) => text.clone(),
                None => self.lexicon_phrase(&node.label)?.to_string(),
            },
            NodeKind::Identifier => scrub(&node.label.replace('_', "")),
            NodeKind::NumberLiteral | NodeKind::StringLiteral => scrub(&node.label.to_lowercase()),
            NodeKind::Apply => self.apply(node)?,
        };
        Ok(format!("( {inner} )"))
    }

    fn apply(&self, node: &AstNode) -> Result<String, LinearizeError> {
        let children = node
            .children
            .iter()
            .map(|c| self.node(c))
            .collect::<Result<Vec<_>, _>>()?;
        let rule = self.templates.nodes.get(&(self.dialect, node.label.clone()));
        let phrase = || -> Result<String, LinearizeError> {
            match rule.and_then(|r| r.phrase.as_deref()) {
                Some(p) => Ok(p.to_string()),
                None => self.lexicon_phrase(&node.label).map(str::to_string),
            }
        };
        let fixity = rule.map_or(&Fixity::Prefix, |r| &r.fixity);
        Ok(match fixity {
            Fixity::Prefix => format!("{} {}", phrase()?, children.join(" ")),
            Fixity::Infix => children.join(&format!(" {} ", phrase()?)),
            Fixity::Postfix => format!("{} {}", children.join(" "), phrase()?),
            Fixity::Template(t) => {
                let mut text = t.clone();
                if text.contains("{phrase}") {
                    text = text.replace("{phrase}", &phrase()?);
                }
                for (i, c) in children.iter().enumerate() {
                    text = text.replace(&format!("{{{i}}}"), c);
                }
                text
            }
        })
    }
}

/// Leaf text may not disturb the grouping parentheses.
fn scrub(s: &str) -> String {
    s.replace('(', "[").replace(')', "]")
}
