//! SQL subset covering single-block Spider-style queries.
//!
//! Tree shape: `query` over clause nodes `select`, `from`, `where`,
//! `group by`, `order by`, `limit`. Identifiers and string literals are
//! case-folded at parse time; underscores are kept.

use crate::ast::{AstNode, Dialect, NodeKind, SemanticParse};

use super::SyntaxError;

pub const AGGREGATES: [&str; 5] = ["count", "max", "min", "avg", "sum"];
pub(crate) const COMPARISONS: [&str; 6] = ["=", "!=", ">", "<", ">=", "<="];

const RESERVED: [&str; 15] = [
    "select", "from", "where", "group", "by", "order", "limit", "and", "or", "not", "asc", "desc",
    "join", "on", "as",
];

pub fn parse_sql(source: &str) -> Result<SemanticParse, SyntaxError> {
    let tokens = lex(source)?;
    let mut p = SqlParser { tokens, pos: 0 };
    let root = p.query()?;
    Ok(SemanticParse {
        dialect: Dialect::Sql,
        root,
        source_text: source.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

const SYMBOLS: [&str; 14] = [
    "!=", "<>", ">=", "<=", "(", ")", ",", "*", ".", ";", "=", ">", "<", "-",
];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(src[start..i].to_string()),
                offset: start,
            });
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token {
                tok: Tok::Number(src[start..i].to_string()),
                offset: start,
            });
        } else if c == b'"' || c == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(SyntaxError::new(start, "unterminated string literal"));
                };
                i += ch.len_utf8();
                if ch as u32 == u32::from(c) {
                    if bytes.get(i) == Some(&c) {
                        value.push(ch);
                        i += 1;
                        continue;
                    }
                    break;
                }
                value.push(ch);
            }
            out.push(Token {
                tok: Tok::Str(value),
                offset: start,
            });
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += sym.len();
            let sym = if *sym == "<>" { "!=" } else { *sym };
            out.push(Token {
                tok: Tok::Sym(sym),
                offset: start,
            });
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(SyntaxError::new(start, format!("unexpected character `{ch}`")));
        }
    }
    out.push(Token {
        tok: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

struct SqlParser {
    tokens: Vec<Token>,
    pos: usize,
}

impl SqlParser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn found(&self) -> String {
        match self.peek() {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
        }
    }

    fn fail<T>(&self, expected: &str) -> Result<T, SyntaxError> {
        Err(SyntaxError::expected(self.offset(), expected, &self.found()))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(&format!("`{}`", kw.to_uppercase()))
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.fail(&format!("`{sym}`"))
        }
    }

    fn query(&mut self) -> Result<AstNode, SyntaxError> {
        self.expect_kw("select")?;
        let mut clauses = vec![AstNode::apply("select", self.list(Self::select_item)?)];
        self.expect_kw("from")?;
        clauses.push(self.parse_from()?);
        if self.eat_kw("where") {
            clauses.push(AstNode::apply("where", vec![self.condition()?]));
        }
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            clauses.push(AstNode::apply("group by", self.list(Self::column)?));
        }
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            clauses.push(AstNode::apply("order by", self.list(Self::order_item)?));
        }
        if self.eat_kw("limit") {
            match self.peek().clone() {
                Tok::Number(n) if !n.contains('.') => {
                    self.bump();
                    clauses.push(AstNode::apply("limit", vec![AstNode::number(n)]));
                }
                _ => return self.fail("row count"),
            }
        }
        self.eat_sym(";");
        if *self.peek() != Tok::End {
            return self.fail("end of query");
        }
        Ok(AstNode::apply("query", clauses))
    }

    fn list(
        &mut self,
        item: fn(&mut Self) -> Result<AstNode, SyntaxError>,
    ) -> Result<Vec<AstNode>, SyntaxError> {
        let mut items = vec![item(self)?];
        while self.eat_sym(",") {
            items.push(item(self)?);
        }
        Ok(items)
    }

    fn select_item(&mut self) -> Result<AstNode, SyntaxError> {
        if self.eat_sym("*") {
            return Ok(AstNode::keyword("*"));
        }
        if self.at_aggregate() {
            return self.aggregate();
        }
        if !self.at_column() {
            return self.fail("projection");
        }
        self.column()
    }

    fn at_aggregate(&self) -> bool {
        matches!(self.peek(), Tok::Word(w) if AGGREGATES.contains(&w.to_lowercase().as_str()))
            && matches!(self.peek_at(1), Tok::Sym("("))
    }

    fn aggregate(&mut self) -> Result<AstNode, SyntaxError> {
        let Tok::Word(name) = self.bump() else {
            unreachable!("checked by at_aggregate")
        };
        self.expect_sym("(")?;
        let arg = if self.eat_sym("*") {
            AstNode::keyword("*")
        } else {
            self.column()?
        };
        self.expect_sym(")")?;
        Ok(AstNode::apply(name.to_lowercase(), vec![arg]))
    }

    fn at_column(&self) -> bool {
        matches!(self.peek(), Tok::Word(w) if !is_reserved(w))
    }

    fn name(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_reserved(&w) => {
                self.bump();
                Ok(w.to_lowercase())
            }
            _ => self.fail(what),
        }
    }

    fn column(&mut self) -> Result<AstNode, SyntaxError> {
        let mut name = self.name("column name")?;
        if self.eat_sym(".") {
            name.push('.');
            name.push_str(&self.name("column name")?);
        }
        Ok(AstNode::ident(name))
    }

    fn table_ref(&mut self) -> Result<AstNode, SyntaxError> {
        let table = AstNode::ident(self.name("table name")?);
        let alias = if self.eat_kw("as") || self.at_column() {
            Some(self.name("alias")?)
        } else {
            None
        };
        Ok(match alias {
            Some(a) => AstNode::apply("as", vec![table, AstNode::ident(a)]),
            None => table,
        })
    }

    fn parse_from(&mut self) -> Result<AstNode, SyntaxError> {
        let mut items = vec![self.table_ref()?];
        loop {
            if self.eat_sym(",") {
                items.push(self.table_ref()?);
            } else if self.eat_kw("join") {
                let mut join = vec![self.table_ref()?];
                if self.eat_kw("on") {
                    let left = self.column()?;
                    self.expect_sym("=")?;
                    let right = self.column()?;
                    join.push(AstNode::apply("on", vec![left, right]));
                }
                items.push(AstNode::apply("join", join));
            } else {
                break;
            }
        }
        Ok(AstNode::apply("from", items))
    }

    fn condition(&mut self) -> Result<AstNode, SyntaxError> {
        let mut left = self.conjunction()?;
        while self.eat_kw("or") {
            let right = self.conjunction()?;
            left = AstNode::apply("or", vec![left, right]);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<AstNode, SyntaxError> {
        let mut left = self.negation()?;
        while self.eat_kw("and") {
            let right = self.negation()?;
            left = AstNode::apply("and", vec![left, right]);
        }
        Ok(left)
    }

    fn negation(&mut self) -> Result<AstNode, SyntaxError> {
        if self.eat_kw("not") {
            return Ok(AstNode::apply("not", vec![self.negation()?]));
        }
        if self.eat_sym("(") {
            let inner = self.condition()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<AstNode, SyntaxError> {
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Sym(s) if COMPARISONS.contains(s) => *s,
            _ => return self.fail("comparison operator"),
        };
        self.bump();
        let right = self.operand()?;
        Ok(AstNode::apply(op, vec![left, right]))
    }

    fn operand(&mut self) -> Result<AstNode, SyntaxError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(AstNode::number(n))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Number(_)) => {
                self.bump();
                let Tok::Number(n) = self.bump() else {
                    unreachable!()
                };
                Ok(AstNode::number(format!("-{n}")))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(AstNode::string(s.to_lowercase()))
            }
            Tok::Word(w) if !is_reserved(&w) => self.column(),
            _ => self.fail("column or literal"),
        }
    }

    fn order_item(&mut self) -> Result<AstNode, SyntaxError> {
        let expr = if self.at_aggregate() {
            self.aggregate()?
        } else {
            self.column()?
        };
        Ok(if self.eat_kw("asc") {
            AstNode::apply("asc", vec![expr])
        } else if self.eat_kw("desc") {
            AstNode::apply("desc", vec![expr])
        } else {
            expr
        })
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word.to_lowercase().as_str())
}

pub(crate) fn serialize(root: &AstNode) -> String {
    let mut out = String::new();
    for clause in &root.children {
        if !out.is_empty() {
            out.push(' ');
        }
        match clause.label.as_str() {
            "select" => {
                out.push_str("SELECT ");
                out.push_str(&join(&clause.children, expr));
            }
            "from" => {
                out.push_str("FROM ");
                for (i, item) in clause.children.iter().enumerate() {
                    if item.kind == NodeKind::Apply && item.label == "join" {
                        out.push_str(" JOIN ");
                        out.push_str(&table_ref(&item.children[0]));
                        if let Some(on) = item.children.get(1) {
                            out.push_str(&format!(" ON {} = {}", expr(&on.children[0]), expr(&on.children[1])));
                        }
                    } else {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        out.push_str(&table_ref(item));
                    }
                }
            }
            "where" => {
                out.push_str("WHERE ");
                out.push_str(&condition(&clause.children[0]).0);
            }
            "group by" => {
                out.push_str("GROUP BY ");
                out.push_str(&join(&clause.children, expr));
            }
            "order by" => {
                out.push_str("ORDER BY ");
                out.push_str(&join(&clause.children, |item| match item.label.as_str() {
                    "asc" | "desc" if item.kind == NodeKind::Apply => {
                        format!("{} {}", expr(&item.children[0]), item.label.to_uppercase())
                    }
                    _ => expr(item),
                }));
            }
            "limit" => {
                out.push_str("LIMIT ");
                out.push_str(&clause.children[0].label);
            }
            other => out.push_str(other),
        }
    }
    out
}

fn join(items: &[AstNode], f: impl Fn(&AstNode) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

fn table_ref(node: &AstNode) -> String {
    match node.kind {
        NodeKind::Apply if node.label == "as" => {
            format!("{} AS {}", node.children[0].label, node.children[1].label)
        }
        _ => node.label.clone(),
    }
}

fn expr(node: &AstNode) -> String {
    match node.kind {
        NodeKind::Apply => format!("{}({})", node.label, expr(&node.children[0])),
        NodeKind::StringLiteral => format!("\"{}\"", node.label.replace('"', "\"\"")),
        _ => node.label.clone(),
    }
}

/// Serialized condition plus its binding strength.
fn condition(node: &AstNode) -> (String, u8) {
    match node.label.as_str() {
        "or" | "and" if node.kind == NodeKind::Apply => {
            let prec = if node.label == "or" { 1 } else { 2 };
            let (l, lp) = condition(&node.children[0]);
            let (r, rp) = condition(&node.children[1]);
            let l = if lp < prec { format!("({l})") } else { l };
            let r = if rp <= prec { format!("({r})") } else { r };
            (format!("{l} {} {r}", node.label.to_uppercase()), prec)
        }
        "not" if node.kind == NodeKind::Apply => {
            let (c, cp) = condition(&node.children[0]);
            let c = if cp < 3 { format!("({c})") } else { c };
            (format!("NOT {c}"), 3)
        }
        _ => (
            format!(
                "{} {} {}",
                expr(&node.children[0]),
                node.label,
                expr(&node.children[1])
            ),
            4,
        ),
    }
}
