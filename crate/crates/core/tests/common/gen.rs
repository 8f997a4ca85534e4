//! Random well-formed SQL and logic-form strings.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

const TABLES: &[&str] = &["dogs", "singer", "country_language", "Matches", "t_orders"];
const COLUMNS: &[&str] = &["age", "name", "Percentage", "city_code", "year", "score", "weight"];
const AGGREGATES: &[&str] = &["count", "max", "min", "avg", "sum"];
const COMPARISONS: &[&str] = &["=", "!=", ">", "<", ">=", "<="];
const TEXTS: &[&str] = &["Spanish", "new york", "x", "O'Brien", "say \"\"hi\"\"", "(note)", "a, b"];

const LOGIC_COLUMNS: &[&str] = &["venue", "attendance", "home_team", "score", "date", "points"];
const LOGIC_WORDS: &[&str] = &["london", "june 5", "boston", "win", "new york city"];
const VALUE_BINARY: &[&str] = &["eq", "not_eq", "round_eq", "str_eq", "not_str_eq", "greater", "less"];
const VIEW_FILTERS: &[&str] = &[
    "filter_eq",
    "filter_not_eq",
    "filter_str_eq",
    "filter_str_not_eq",
    "filter_greater",
    "filter_less",
    "filter_smaller",
    "filter_greater_eq",
    "filter_less_eq",
];
const QUANTIFIED: &[&str] = &[
    "all_eq",
    "all_not_eq",
    "all_str_eq",
    "all_greater",
    "all_less_eq",
    "most_eq",
    "most_str_eq",
    "most_greater",
    "most_less",
];
const COLUMN_VALUES: &[&str] = &["hop", "num_hop", "str_hop", "max", "min", "avg", "sum"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty")
}

fn number<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.7) {
        rng.random_range(0..3000).to_string()
    } else {
        format!("{}.{}", rng.random_range(0..100), rng.random_range(1..100))
    }
}

fn column<R: Rng>(rng: &mut R, aliases: &[&str]) -> String {
    let c = pick(rng, COLUMNS);
    match aliases.choose(rng) {
        Some(a) if rng.random_bool(0.5) => format!("{a}.{c}"),
        _ => c.to_string(),
    }
}

fn sql_value<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.5) {
        number(rng)
    } else {
        format!("\"{}\"", pick(rng, TEXTS))
    }
}

fn condition<R: Rng>(rng: &mut R, aliases: &[&str], depth: u32) -> String {
    let roll = if depth == 0 { 0 } else { rng.random_range(0..5) };
    match roll {
        0..=2 => format!("{} {} {}", column(rng, aliases), pick(rng, COMPARISONS), sql_value(rng)),
        3 => format!(
            "({}) {} ({})",
            condition(rng, aliases, depth - 1),
            pick(rng, &["AND", "OR"]),
            condition(rng, aliases, depth - 1)
        ),
        _ => format!("NOT ({})", condition(rng, aliases, depth - 1)),
    }
}

fn projection<R: Rng>(rng: &mut R, aliases: &[&str]) -> String {
    match rng.random_range(0..3) {
        0 => "count(*)".to_string(),
        1 => format!("{}({})", pick(rng, AGGREGATES), column(rng, aliases)),
        _ => column(rng, aliases),
    }
}

/// A random query inside the supported grammar.
pub fn sql<R: Rng>(rng: &mut R) -> String {
    let joins = rng.random_range(0..3usize);
    let aliases: Vec<&str> = ["T1", "T2", "T3"][..if joins > 0 { joins + 1 } else { 0 }].to_vec();
    let mut from = String::from(pick(rng, TABLES));
    if joins > 0 {
        from.push_str(" AS T1");
        for a in &aliases[1..] {
            from.push_str(&format!(
                " JOIN {} AS {a} ON T1.{} = {a}.{}",
                pick(rng, TABLES),
                pick(rng, COLUMNS),
                pick(rng, COLUMNS)
            ));
        }
    }
    let n = rng.random_range(1..4);
    let items: Vec<String> = (0..n).map(|_| projection(rng, &aliases)).collect();
    let mut q = format!("SELECT {} FROM {from}", items.join(", "));
    if rng.random_bool(0.6) {
        q.push_str(&format!(" WHERE {}", condition(rng, &aliases, 3)));
    }
    if rng.random_bool(0.3) {
        q.push_str(&format!(" GROUP BY {}", column(rng, &aliases)));
    }
    if rng.random_bool(0.3) {
        let item = if rng.random_bool(0.3) { "count(*)".to_string() } else { column(rng, &aliases) };
        q.push_str(&format!(" ORDER BY {item} {}", pick(rng, &["ASC", "DESC"])));
    }
    if rng.random_bool(0.2) {
        q.push_str(&format!(" LIMIT {}", rng.random_range(0..20)));
    }
    q
}

fn logic_value<R: Rng>(rng: &mut R, depth: u32) -> String {
    let roll = if depth == 0 { rng.random_range(0..2) } else { rng.random_range(0..6) };
    match roll {
        0 => number(rng),
        1 => pick(rng, LOGIC_WORDS).to_string(),
        2 => format!("count {{ {} }}", view(rng, depth - 1)),
        3 | 4 => format!(
            "{} {{ {} ; {} }}",
            pick(rng, COLUMN_VALUES),
            view(rng, depth - 1),
            pick(rng, LOGIC_COLUMNS)
        ),
        _ => format!(
            "nth_max {{ {} ; {} ; {} }}",
            view(rng, depth - 1),
            pick(rng, LOGIC_COLUMNS),
            rng.random_range(1..5)
        ),
    }
}

fn view<R: Rng>(rng: &mut R, depth: u32) -> String {
    let roll = if depth == 0 { 0 } else { rng.random_range(0..4) };
    match roll {
        0 => "all_rows".to_string(),
        1 | 2 => format!(
            "{} {{ {} ; {} ; {} }}",
            pick(rng, VIEW_FILTERS),
            view(rng, depth - 1),
            pick(rng, LOGIC_COLUMNS),
            logic_value(rng, 0)
        ),
        _ => format!(
            "{} {{ {} ; {} }}",
            pick(rng, &["argmax", "argmin"]),
            view(rng, depth - 1),
            pick(rng, LOGIC_COLUMNS)
        ),
    }
}

fn statement<R: Rng>(rng: &mut R, depth: u32) -> String {
    match rng.random_range(0..if depth == 0 { 3 } else { 4 }) {
        0 => format!(
            "{} {{ {} ; {} }}",
            pick(rng, VALUE_BINARY),
            logic_value(rng, depth),
            logic_value(rng, 0)
        ),
        1 => format!(
            "{} {{ {} ; {} ; {} }}",
            pick(rng, QUANTIFIED),
            view(rng, depth),
            pick(rng, LOGIC_COLUMNS),
            logic_value(rng, 0)
        ),
        2 => format!("only {{ {} }}", view(rng, depth)),
        _ => format!("and {{ {} ; {} }}", statement(rng, depth - 1), statement(rng, depth - 1)),
    }
}

/// A random statement over the default function inventory.
pub fn logic<R: Rng>(rng: &mut R) -> String {
    statement(rng, 3)
}

/// Every `(` closes, in order, on whitespace-separated tokens.
pub fn balanced(text: &str) -> bool {
    let mut depth: i64 = 0;
    for tok in text.split_whitespace() {
        match tok {
            "(" => depth += 1,
            ")" => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}
