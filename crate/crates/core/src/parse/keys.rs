use crate::ast::{NodeKind, NodePath, SemanticParse};
use crate::lexicon::{Lexicon, RuleType};

/// A logic-bearing token of a parse: a lexicon keyword or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyToken {
    pub path: NodePath,
    pub kind: NodeKind,
    /// `None` for literals.
    pub rule_type: Option<RuleType>,
    /// Index of the lexicon entry for keyword tokens.
    pub entry: Option<usize>,
    pub token: String,
}

impl KeyToken {
    pub fn is_literal(&self) -> bool {
        self.kind.is_literal()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyTokenSet {
    /// In pre-order (path) order.
    pub tokens: Vec<KeyToken>,
}

impl KeyTokenSet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &KeyToken> {
        self.tokens.iter()
    }

    /// The token strings in order.
    pub fn labels(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.token.as_str()).collect()
    }
}

/// Lists every lexicon hit and every literal of `parse`. Bare table and
/// column identifiers are never key tokens.
pub fn extract_key_tokens(parse: &SemanticParse, lexicon: &Lexicon) -> KeyTokenSet {
    let tokens = parse
        .root
        .walk()
        .into_iter()
        .filter_map(|(path, node)| match node.kind {
            NodeKind::NumberLiteral | NodeKind::StringLiteral => Some(KeyToken {
                path,
                kind: node.kind,
                rule_type: None,
                entry: None,
                token: node.label.clone(),
            }),
            NodeKind::Apply | NodeKind::Keyword => {
                let entry = lexicon.lookup_index(parse.dialect, &node.label)?;
                Some(KeyToken {
                    path,
                    kind: node.kind,
                    rule_type: Some(lexicon.entry(entry).rule_type),
                    entry: Some(entry),
                    token: node.label.clone(),
                })
            }
            NodeKind::Identifier => None,
        })
        .collect();
    KeyTokenSet { tokens }
}
