//! Shared tree representation for both parse dialects.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which formal language a parse was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Sql,
    Logic,
}

impl Dialect {
    /// Control code prepended to generator inputs for multitask models.
    pub fn control_token(self) -> &'static str {
        match self {
            Dialect::Sql => "[SQL]",
            Dialect::Logic => "[logic]",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Sql => "sql",
            Dialect::Logic => "logic",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sql" => Ok(Dialect::Sql),
            "logic" => Ok(Dialect::Logic),
            other => Err(format!("unknown dialect `{other}` (expected sql or logic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Keyword,
    Identifier,
    NumberLiteral,
    StringLiteral,
    Apply,
}

impl NodeKind {
    pub fn is_literal(self) -> bool {
        matches!(self, NodeKind::NumberLiteral | NodeKind::StringLiteral)
    }
}

/// One node of a semantic parse. Leaves carry no children; `Apply` nodes
/// carry at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn apply(label: impl Into<String>, children: Vec<AstNode>) -> Self {
        debug_assert!(!children.is_empty(), "apply nodes need at least one child");
        Self {
            kind: NodeKind::Apply,
            label: label.into(),
            children,
        }
    }

    pub fn keyword(label: impl Into<String>) -> Self {
        Self::leaf(NodeKind::Keyword, label)
    }

    pub fn ident(label: impl Into<String>) -> Self {
        Self::leaf(NodeKind::Identifier, label)
    }

    pub fn number(label: impl Into<String>) -> Self {
        Self::leaf(NodeKind::NumberLiteral, label)
    }

    pub fn string(label: impl Into<String>) -> Self {
        Self::leaf(NodeKind::StringLiteral, label)
    }

    pub fn leaf(kind: NodeKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Height of the subtree; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(AstNode::depth).max().unwrap_or(0)
    }

    pub fn get(&self, path: &NodePath) -> Option<&AstNode> {
        path.0
            .iter()
            .try_fold(self, |node, &i| node.children.get(i))
    }

    pub fn get_mut(&mut self, path: &NodePath) -> Option<&mut AstNode> {
        path.0
            .iter()
            .try_fold(self, |node, &i| node.children.get_mut(i))
    }

    /// Pre-order traversal paired with each node's path. Pre-order visits
    /// paths in lexicographic order.
    pub fn walk(&self) -> Vec<(NodePath, &AstNode)> {
        let mut out = Vec::new();
        let mut stack = vec![(NodePath::root(), self)];
        while let Some((path, node)) = stack.pop() {
            for (i, child) in node.children.iter().enumerate().rev() {
                stack.push((path.child(i), child));
            }
            out.push((path, node));
        }
        out
    }

    /// Checks the leaf/apply shape rules, recursively.
    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            NodeKind::Apply if self.children.is_empty() => {
                return Err(format!("apply node `{}` has no children", self.label))
            }
            NodeKind::Apply => {}
            _ if !self.children.is_empty() => {
                return Err(format!("leaf `{}` has children", self.label))
            }
            NodeKind::NumberLiteral if !is_decimal(&self.label) => {
                return Err(format!("`{}` is not a finite decimal number", self.label));
            }
            _ => {}
        }
        self.children.iter().try_for_each(AstNode::validate)
    }
}

/// True when `s` is an optionally signed decimal numeral such as `3`, `-2` or `4.5`.
pub fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut parts = body.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits) && s.parse::<f64>().is_ok_and(f64::is_finite)
}

/// Position of a node: the child indices walked from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        let (_, rest) = self.0.split_last()?;
        Some(Self(rest.to_vec()))
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn starts_with(&self, prefix: &NodePath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for NodePath {
    type Err = String;

    /// Inverse of `Display`: `root` or dot-separated child indices.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "root" {
            return Ok(Self::root());
        }
        s.split('.')
            .map(|p| p.parse::<usize>().map_err(|_| format!("invalid node path `{s}`")))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

/// A parsed SQL query or logic form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticParse {
    pub dialect: Dialect,
    pub root: AstNode,
    /// The formal string this parse was read from.
    pub source_text: String,
}

impl SemanticParse {
    /// Canonical formal string for this parse.
    pub fn serialize(&self) -> String {
        crate::parse::serialize(self)
    }
}

/// Structural equality ignores `source_text`.
impl PartialEq for SemanticParse {
    fn eq(&self, other: &Self) -> bool {
        self.dialect == other.dialect && self.root == other.root
    }
}

impl Eq for SemanticParse {}
