//! Shared inputs for the benchmarks.

use logicheck_core::{parse_logic, parse_sql, SemanticParse, Utterance};

pub const TABLE_QUERY: &str =
    "SELECT count(*), max(Percentage) FROM country_language WHERE LANGUAGE = \"Spanish\" GROUP BY CountryCode";

const SQL: &[(&str, &str)] = &[
    ("SELECT avg(age) FROM dogs", "What is the average age of dogs?"),
    (TABLE_QUERY, "How many languages and the largest percentage for each country code where the language is spanish?"),
    ("SELECT name FROM students WHERE age < 20", "Which students are younger than 20?"),
    (
        "SELECT name FROM cities WHERE population > 1000000 OR area > 500",
        "Name the cities with a population larger than 1000000 or an area larger than 500.",
    ),
    (
        "SELECT name FROM mountains ORDER BY height DESC LIMIT 3",
        "List the names of mountains ordered by height in descending order, limited to 3.",
    ),
];

const LOGIC: &[(&str, &str)] = &[
    (
        "eq { count { filter_str_eq { all_rows ; venue ; london } } ; 3 }",
        "the total number of games played in london is three.",
    ),
    (
        "and { eq { hop { filter_eq { all_rows ; name ; alice } ; age } ; 30 } ; eq { hop { filter_eq { all_rows ; name ; bob } ; age } ; 25 } }",
        "alice is 30 and bob is 25.",
    ),
];

/// Parsed (formal, text) pairs of both dialects.
pub fn pairs() -> Vec<(SemanticParse, Utterance)> {
    let sql = SQL.iter().map(|(q, t)| (parse_sql(q).expect("valid fixture"), Utterance::new(*t)));
    let logic = LOGIC.iter().map(|(q, t)| (parse_logic(q).expect("valid fixture"), Utterance::new(*t)));
    sql.chain(logic).collect()
}
