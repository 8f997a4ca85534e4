//! End-to-end acceptance checks, one `[PASS]`/`[FAIL]` line per criterion.

#[path = "../../core/tests/common/gen.rs"]
mod gen;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use logicheck_core::compose::{distribution, load_pairs, Label, LabeledPair, Provenance};
use logicheck_core::snowball::{iteration_dir, save_samples, Snowball, SnowballConfig, WorkerSpec};
use logicheck_core::utterance::numeral_value;
use logicheck_core::{
    cohen_kappa, enumerate_perturbations, linearize, match_pair, parse_logic, parse_sql, pearson, AugmentedSample,
    Dialect, Lexicon, Parser, PerturbConfig, PerturbationKind, Utterance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

type KappaFixture = (&'static str, Vec<((u8, u8), usize)>, f64);
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn seeds(name: &str, dialect: Dialect) -> Vec<LabeledPair> {
    load_pairs(&fixture(name), dialect, &Parser::default()).expect("fixture loads")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const TABLE_QUERY: &str =
    "SELECT count(*), max(Percentage) FROM country_language WHERE LANGUAGE = \"Spanish\" GROUP BY CountryCode";
const TABLE_LINEAR: &str = "( the number of ( all items ) ) , ( the maximum of ( percentage ) ) that belongs to ( countrylanguage ) , that have ( ( language ) equal to ( spanish ) ) , grouped by ( countrycode )";

fn linearization_fidelity() -> Outcome {
    let lexicon = Lexicon::builtin();
    let parse = parse_sql(TABLE_QUERY).map_err(|e| e.to_string())?;
    let text = linearize(&parse, &lexicon).map_err(|e| e.to_string())?.text;
    ensure(text == TABLE_LINEAR, || format!("got {text:?}"))?;
    let runs = 200;
    let mut times: Vec<Duration> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(linearize(&parse, &lexicon).unwrap());
            t.elapsed()
        })
        .collect();
    times.sort();
    let median = times[runs / 2];
    ensure(median < Duration::from_millis(1), || format!("median {median:?}"))?;
    Ok(format!("exact match, median {median:?} over {runs} runs"))
}

fn blec_worked_example() -> Outcome {
    let lexicon = Lexicon::builtin();
    let parse = parse_sql("SELECT avg(age) FROM dogs").map_err(|e| e.to_string())?;
    let good = match_pair(&parse, &Utterance::new("What is the average age of dogs?"), &lexicon);
    ensure(good.consistent, || format!("positive pair: {}", good.summary()))?;
    let bad = match_pair(&parse, &Utterance::new("What is the oldest age of dogs?"), &lexicon);
    ensure(!bad.consistent, || "corruption scored consistent".into())?;
    ensure(bad.forward_labels() == ["avg"], || format!("forward misses {:?}", bad.forward_labels()))?;
    ensure(bad.backward_phrases() == ["oldest"], || format!("backward misses {:?}", bad.backward_phrases()))?;
    Ok("positive consistent; corruption misses avg / oldest".into())
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Whether the seed text verbalizes what the perturbation changed: a
/// lexicon variant of the replaced token, or the replaced number.
fn text_mentions_site(
    lexicon: &Lexicon,
    dialect: Dialect,
    kind: PerturbationKind,
    before: &str,
    tokens: &[String],
) -> bool {
    if kind == PerturbationKind::NumberChange {
        let target: f64 = before.parse().expect("numeric literal");
        return tokens.iter().any(|t| numeral_value(t) == Some(target));
    }
    match lexicon.lookup_formal(dialect, before) {
        Some(entry) => entry.nl_variants.iter().any(|v| contains_phrase(tokens, &v.tokens)),
        None => false,
    }
}

fn perturbation_detection() -> Outcome {
    let lexicon = Lexicon::builtin();
    let config = PerturbConfig {
        max_per_seed: 1000,
        ..Default::default()
    };
    let mut report = Vec::new();
    for (file, dialect) in [("sql_seeds.jsonl", Dialect::Sql), ("logic_seeds.jsonl", Dialect::Logic)] {
        let seeds = seeds(file, dialect);
        ensure(seeds.len() >= 20, || format!("{file}: only {} seeds", seeds.len()))?;
        let mut seeds_ok = 0;
        let (mut eligible, mut flagged) = (0, 0);
        let mut misses = Vec::new();
        for seed in &seeds {
            if match_pair(&seed.parse, &seed.text, &lexicon).consistent {
                seeds_ok += 1;
            } else {
                misses.push(format!("seed {} not consistent", seed.seed_id));
            }
            for p in enumerate_perturbations(&seed.seed_id, &seed.parse, &lexicon, &config) {
                let relevant = p.kind.is_logic_shift() || p.kind == PerturbationKind::NumberChange;
                if !relevant || !text_mentions_site(&lexicon, dialect, p.kind, &p.before, &seed.text.tokens) {
                    continue;
                }
                eligible += 1;
                if match_pair(&p.result, &seed.text, &lexicon).consistent {
                    misses.push(format!("{} {}:{}>{}", seed.seed_id, p.kind, p.before, p.after));
                } else {
                    flagged += 1;
                }
            }
        }
        ensure(misses.is_empty(), || format!("{file}: {}", misses.join("; ")))?;
        ensure(eligible > 0, || format!("{file}: no eligible perturbations"))?;
        report.push(format!("{dialect}: seeds {seeds_ok}/{}, flagged {flagged}/{eligible}", seeds.len()));
    }
    Ok(report.join("; "))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_logicheck"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn composition_count_law() -> Outcome {
    let lexicon = Lexicon::builtin();
    let mut pool = seeds("sql_seeds.jsonl", Dialect::Sql);
    pool.extend(seeds("logic_seeds.jsonl", Dialect::Logic));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for n in [1usize, 5, 20] {
        // alternate dialects so larger N mixes both
        let chosen: Vec<&LabeledPair> = (0..n).map(|i| &pool[(i % 2) * 22 + i / 2]).collect();
        let mut samples = Vec::new();
        let mut accepted = 0;
        for (si, seed) in chosen.iter().enumerate() {
            let config = PerturbConfig {
                max_per_seed: 1 + si % 4,
                ..Default::default()
            };
            for (k, p) in enumerate_perturbations(&seed.seed_id, &seed.parse, &lexicon, &config)
                .into_iter()
                .enumerate()
            {
                // every third sample falls below the threshold
                let score = if k % 3 == 2 { 0.25 } else { 0.9 };
                accepted += usize::from(score >= 0.5);
                samples.push(AugmentedSample {
                    text: Utterance::new(format!("augmented text {} {k}", seed.seed_id)),
                    perturbation: p,
                    evaluator_score: Some(score),
                });
            }
        }
        let case = dir.path().join(format!("n{n}"));
        fs::create_dir_all(&case).map_err(|e| e.to_string())?;
        let seeds_path = case.join("seeds.jsonl");
        let samples_path = case.join("augmented.jsonl");
        let body: String = chosen
            .iter()
            .map(|s| {
                serde_json::json!({"id": s.seed_id, "dialect": s.parse.dialect, "logic": s.parse.serialize(), "text": s.text.raw})
                    .to_string()
                    + "\n"
            })
            .collect();
        fs::write(&seeds_path, body).map_err(|e| e.to_string())?;
        save_samples(&samples_path, &samples).map_err(|e| e.to_string())?;
        let out_dir = case.join("out");
        run_cli(&[
            "compose",
            "--seeds",
            seeds_path.to_str().unwrap(),
            "--augmented",
            samples_path.to_str().unwrap(),
            "--threshold",
            "0.5",
            "--out",
            out_dir.to_str().unwrap(),
        ])?;
        let persisted = load_pairs(&out_dir.join("evaluator.jsonl"), Dialect::Sql, &Parser::default())
            .map_err(|e| e.to_string())?;
        let expected = n + 3 * accepted;
        ensure(persisted.len() == expected, || format!("N={n}: {} records, expected {expected}", persisted.len()))?;
        let want: BTreeMap<(Provenance, Label), usize> = [
            ((Provenance::Seed, Label::Consistent), n),
            ((Provenance::AugPositive, Label::Consistent), accepted),
            ((Provenance::CrossNegSeedLogic, Label::Inconsistent), accepted),
            ((Provenance::CrossNegPerturbedLogic, Label::Inconsistent), accepted),
        ]
        .into_iter()
        .filter(|(_, c)| *c > 0)
        .collect();
        let got = distribution(&persisted);
        ensure(got == want, || format!("N={n}: distribution {got:?}"))?;
        report.push(format!("N={n}: {n} + 3*{accepted} = {expected}"));
    }
    Ok(report.join(", "))
}

fn snowball_seed_file(dir: &Path) -> Result<PathBuf, String> {
    let sql = seeds("sql_seeds.jsonl", Dialect::Sql);
    let logic = seeds("logic_seeds.jsonl", Dialect::Logic);
    let body: String = sql
        .iter()
        .take(10)
        .chain(logic.iter().take(10))
        .map(|s| {
            serde_json::json!({"id": s.seed_id, "dialect": s.parse.dialect, "logic": s.parse.serialize(), "text": s.text.raw})
                .to_string()
                + "\n"
        })
        .collect();
    let path = dir.join("seeds.jsonl");
    fs::write(&path, body).map_err(|e| e.to_string())?;
    Ok(path)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn snowball_config(seeds: &Path, generator: WorkerSpec) -> SnowballConfig {
    SnowballConfig {
        iterations: 2,
        beam_size: 4,
        rng_seed: 11,
        seeds: Some(seeds.to_path_buf()),
        generator,
        worker_timeout_ms: 10_000,
        ..SnowballConfig::default()
    }
}

fn end_to_end_snowball() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seeds = snowball_seed_file(dir.path())?;

    let start = Instant::now();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let mut sb = Snowball::from_config(snowball_config(&seeds, WorkerSpec::Builtin)).map_err(|e| e.to_string())?;
        ensure(sb.seeds.len() == 20, || format!("{} seeds", sb.seeds.len()))?;
        sb.run(&out).map_err(|e| e.to_string())?;
        runs.push(snapshot(&out));
    }
    let per_run = start.elapsed() / 2;
    ensure(per_run < Duration::from_secs(10), || format!("run took {per_run:?}"))?;
    ensure(runs[0].len() == 8, || format!("files {:?}", runs[0].keys().collect::<Vec<_>>()))?;
    ensure(runs[0] == runs[1], || "runs differ".into())?;

    // a generator that exits partway through the second iteration
    let probe = Snowball::from_config(snowball_config(&seeds, WorkerSpec::Builtin)).map_err(|e| e.to_string())?;
    let jobs: usize = probe
        .seeds
        .iter()
        .map(|s| enumerate_perturbations(&s.seed_id, &s.parse, &probe.lexicon, &probe.config.perturb).len())
        .sum();
    let limit = jobs + jobs / 2;
    let command = format!(
        "'{}' serve-builtin --role generator --rng-seed 11 --max-requests {limit}",
        env!("CARGO_BIN_EXE_logicheck")
    );
    let spec = WorkerSpec::Subprocess(command);

    let clean = dir.path().join("clean");
    let mut one = snowball_config(&seeds, spec.clone());
    one.iterations = 1;
    Snowball::from_config(one)
        .and_then(|mut sb| sb.run(&clean))
        .map_err(|e| e.to_string())?;
    let expected = snapshot(&clean);

    let aborted = dir.path().join("aborted");
    let err = Snowball::from_config(snowball_config(&seeds, spec))
        .and_then(|mut sb| sb.run(&aborted))
        .err()
        .ok_or("run with a failing generator succeeded")?;
    ensure(err.exit_code() == 2, || format!("exit code {} for {err}", err.exit_code()))?;
    let left = snapshot(&aborted);
    ensure(left == expected, || format!("files after abort: {:?}", left.keys().collect::<Vec<_>>()))?;
    ensure(!iteration_dir(&aborted, 2).exists(), || "iteration-2 exists".into())?;
    let hidden = fs::read_dir(&aborted).map_err(|e| e.to_string())?.count();
    ensure(hidden == 1, || format!("{hidden} entries in output directory"))?;
    Ok(format!(
        "{per_run:.2?} per run, identical across runs; generator stopped after {limit} of {} requests: {err}",
        2 * jobs
    ))
}

fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn expand(cells: &[((u8, u8), usize)]) -> (Vec<u8>, Vec<u8>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &((x, y), n) in cells {
        a.extend(std::iter::repeat_n(x, n));
        b.extend(std::iter::repeat_n(y, n));
    }
    (a, b)
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let xs: Vec<f64> = (0..15).map(|_| rng.random_range(-10.0..10.0)).collect();
        let slope = rng.random_range(-2.0..2.0);
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + rng.random_range(-5.0..5.0)).collect();
        let r = pearson(&xs, &ys).map_err(|e| e.to_string())?.r;
        worst = worst.max((r - oracle_pearson(&xs, &ys)).abs());
    }
    ensure(worst <= 1e-9, || format!("pearson deviates by {worst:e}"))?;

    // contingency tables as ((rater a, rater b), count), kappa worked by hand
    let fixtures: [KappaFixture; 5] = [
        ("chance agreement", vec![((1, 1), 1), ((1, 0), 1), ((0, 1), 1), ((0, 0), 1)], 0.0),
        ("20/5/10/15", vec![((1, 1), 20), ((1, 0), 5), ((0, 1), 10), ((0, 0), 15)], 0.4),
        ("total disagreement", vec![((0, 1), 2), ((1, 0), 2)], -1.0),
        (
            "three categories",
            vec![
                ((0, 0), 10), ((0, 1), 2), ((0, 2), 3),
                ((1, 0), 1), ((1, 1), 12), ((1, 2), 2),
                ((2, 0), 2), ((2, 1), 1), ((2, 2), 12),
            ],
            19.0 / 30.0,
        ),
        ("45/15/25/15", vec![((1, 1), 45), ((1, 0), 15), ((0, 1), 25), ((0, 0), 15)], 0.06 / 0.46),
    ];
    for (name, cells, want) in &fixtures {
        let (a, b) = expand(cells);
        let k = cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
        ensure((k - want).abs() < 1e-12, || format!("{name}: kappa {k}, expected {want}"))?;
    }
    for labels in [vec![0u8, 1, 1, 2, 0], vec![3u8; 6]] {
        let k = cohen_kappa(&labels, &labels).map_err(|e| e.to_string())?;
        ensure(k == 1.0, || format!("identical vectors gave {k}"))?;
    }
    Ok(format!("pearson max deviation {worst:.1e} over 100 series; 5 kappa tables exact; identical -> 1.0"))
}

fn round_trip_property() -> Outcome {
    let lexicon = Lexicon::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut distinct = Vec::new();
    for dialect in [Dialect::Sql, Dialect::Logic] {
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let source = match dialect {
                Dialect::Sql => gen::sql(&mut rng),
                Dialect::Logic => gen::logic(&mut rng),
            };
            let reparse = |s: &str| match dialect {
                Dialect::Sql => parse_sql(s),
                Dialect::Logic => parse_logic(s),
            };
            let parse = reparse(&source).map_err(|e| format!("{source}: {e}"))?;
            let text = parse.serialize();
            let again = reparse(&text).map_err(|e| format!("{text}: {e}"))?;
            ensure(again == parse && again.serialize() == text, || format!("round trip changed {text}"))?;
            let linear = linearize(&parse, &lexicon).map_err(|e| format!("{text}: {e}"))?.text;
            ensure(gen::balanced(&linear), || format!("unbalanced: {linear}"))?;
            seen.insert(text);
        }
        distinct.push(format!("{dialect}: 1000 ok ({} distinct)", seen.len()));
    }
    Ok(distinct.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("linearization fidelity", linearization_fidelity),
        ("BLEC worked example", blec_worked_example),
        ("perturbation detection", perturbation_detection),
        ("composition count law", composition_count_law),
        ("end-to-end snowball run", end_to_end_snowball),
        ("statistics oracles", statistics_oracles),
        ("parse round trip", round_trip_property),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {name}: {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
