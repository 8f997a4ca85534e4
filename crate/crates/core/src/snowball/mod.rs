//! The iterative augmentation loop.
//!
//! Each iteration perturbs every seed, asks the generator worker for a beam
//! of texts per perturbed parse, scores every candidate with the evaluator
//! worker, keeps the best candidate and rebuilds both training sets from
//! the accumulated samples. Results land in `<out>/iteration-N/` through a
//! rename, so an aborted iteration never leaves partial files behind.
//!
//! With the builtin workers nothing is trained between iterations; the loop
//! then exercises data flow and filtering only.

pub mod builtin;
pub mod config;
pub mod protocol;
pub mod worker;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::blec::{CorpusScore, score_corpus};
use crate::compose::{
    compose_evaluator_set, compose_generator_set, load_pairs, rerank_beam, save_pairs, AugmentedSample, BeamCandidate,
    ComposeError, DatasetError, LabeledPair,
};
use crate::lexicon::{load_lexicon, Lexicon, LexiconError};
use crate::linearize::{linearize_with, LinearizeError, TemplateError, Templates};
use crate::parse::Parser;
use crate::perturb::{enumerate_perturbations, Perturbation};
use crate::utterance::Utterance;

pub use builtin::{template_generate, BuiltinEvaluator, BuiltinGenerator, BuiltinWorker};
pub use config::{ConfigError, SnowballConfig, WorkerSpec};
pub use protocol::{Candidate, Request, Response, WorkerError};
pub use worker::{serve, Handler, HttpWorker, LocalWorker, SubprocessWorker, Worker};

#[derive(Debug, Error)]
pub enum SnowballError {
    #[error(transparent)]
    Worker(#[from] WorkerError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Templates(#[from] TemplateError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("seed `{seed}`: {source}")]
    Linearize {
        seed: String,
        #[source]
        source: LinearizeError,
    },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SnowballError {
    /// 2 for worker failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SnowballError::Worker(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnowballError + '_ {
    move |source| SnowballError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    /// 0 before the first iteration, then 1, 2, ...
    pub index: usize,
    /// Every sample produced so far, each with its evaluator score.
    pub augmented: Vec<AugmentedSample>,
    /// The samples produced by this iteration.
    pub batch: Vec<AugmentedSample>,
    pub evaluator_set: Vec<LabeledPair>,
    pub generator_set: Vec<LabeledPair>,
    /// BLEC over this iteration's (perturbed parse, chosen text) pairs;
    /// `None` when no seed had a perturbation.
    pub metrics: Option<CorpusScore>,
}

impl IterationState {
    pub fn initial() -> Self {
        Self {
            index: 0,
            augmented: Vec::new(),
            batch: Vec::new(),
            evaluator_set: Vec::new(),
            generator_set: Vec::new(),
            metrics: None,
        }
    }

    /// Samples whose score clears `threshold`; these feed both sets.
    pub fn accepted(&self, threshold: f64) -> Vec<AugmentedSample> {
        accepted(&self.augmented, threshold)
    }
}

fn accepted(samples: &[AugmentedSample], threshold: f64) -> Vec<AugmentedSample> {
    samples
        .iter()
        .filter(|s| s.evaluator_score.is_some_and(|g| g >= threshold))
        .cloned()
        .collect()
}

/// Builds a worker for one role.
pub fn connect(
    spec: &WorkerSpec,
    generator_role: bool,
    config: &SnowballConfig,
    lexicon: &Lexicon,
) -> Result<Box<dyn Worker>, WorkerError> {
    let timeout = Duration::from_millis(config.worker_timeout_ms);
    Ok(match spec {
        WorkerSpec::Builtin if generator_role => Box::new(LocalWorker(BuiltinGenerator::new(config.rng_seed))),
        WorkerSpec::Builtin => Box::new(LocalWorker(BuiltinEvaluator::new(
            lexicon.clone(),
            config.parser().clone(),
        ))),
        WorkerSpec::Subprocess(cmd) => Box::new(SubprocessWorker::spawn(cmd, timeout, config.max_in_flight)?),
        WorkerSpec::Http(url) => Box::new(HttpWorker::new(url.clone(), timeout, config.max_in_flight)),
    })
}

pub struct Snowball {
    pub config: SnowballConfig,
    pub lexicon: Lexicon,
    pub templates: Templates,
    pub seeds: Vec<LabeledPair>,
    generator: Box<dyn Worker>,
    evaluator: Box<dyn Worker>,
    next_id: u64,
}

struct Job {
    perturbation: Perturbation,
    input: String,
    control: &'static str,
}

impl Snowball {
    pub fn new(
        config: SnowballConfig,
        lexicon: Lexicon,
        templates: Templates,
        seeds: Vec<LabeledPair>,
        generator: Box<dyn Worker>,
        evaluator: Box<dyn Worker>,
    ) -> Result<Self, SnowballError> {
        config.validate()?;
        let mut ids = HashSet::new();
        for s in &seeds {
            if !ids.insert(s.seed_id.as_str()) {
                return Err(SnowballError::Input(format!("duplicate seed id `{}`", s.seed_id)));
            }
        }
        Ok(Self {
            config,
            lexicon,
            templates,
            seeds,
            generator,
            evaluator,
            next_id: 0,
        })
    }

    /// Loads lexicon, templates and seeds named by `config` and connects
    /// its workers.
    pub fn from_config(config: SnowballConfig) -> Result<Self, SnowballError> {
        let lexicon = load_lexicon(config.lexicon.as_deref())?;
        let templates = match &config.templates {
            Some(p) => Templates::load(p)?,
            None => Templates::builtin(),
        };
        let seeds_path = config
            .seeds
            .clone()
            .ok_or_else(|| SnowballError::Input("no seed file configured (`seeds = <path>`)".into()))?;
        let seeds = load_pairs(&seeds_path, config.dialect, config.parser())?;
        let generator = connect(&config.generator, true, &config, &lexicon)?;
        let evaluator = connect(&config.evaluator, false, &config, &lexicon)?;
        Self::new(config, lexicon, templates, seeds, generator, evaluator)
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn jobs(&self) -> Result<Vec<Job>, SnowballError> {
        let mut jobs = Vec::new();
        for seed in &self.seeds {
            for p in enumerate_perturbations(&seed.seed_id, &seed.parse, &self.lexicon, &self.config.perturb) {
                let linear = linearize_with(&p.result, &self.lexicon, &self.templates).map_err(|source| {
                    SnowballError::Linearize {
                        seed: seed.seed_id.clone(),
                        source,
                    }
                })?;
                jobs.push(Job {
                    control: linear.dialect.control_token(),
                    input: linear.text,
                    perturbation: p,
                });
            }
        }
        Ok(jobs)
    }

    /// Runs one iteration in memory. Nothing is written; see [`Snowball::run`].
    pub fn run_iteration(&mut self, prev: &IterationState) -> Result<IterationState, SnowballError> {
        let index = prev.index + 1;
        self.generator.begin_iteration(index);
        self.evaluator.begin_iteration(index);
        let jobs = self.jobs()?;

        let mut gen_requests = Vec::with_capacity(jobs.len());
        for j in &jobs {
            gen_requests.push(Request::Generate {
                id: self.fresh_id(),
                input: j.input.clone(),
                control: j.control.to_string(),
                beam: self.config.beam_size,
            });
        }
        let beams: Vec<Vec<Candidate>> = self
            .generator
            .exchange(&gen_requests)?
            .into_iter()
            .map(|r| match r {
                Response::Candidates { mut candidates, .. } => {
                    candidates.truncate(self.config.beam_size);
                    candidates
                }
                Response::Gamma { .. } => unreachable!("checked by match_responses"),
            })
            .collect();

        // one evaluate request per candidate, then optionally one per
        // earlier sample
        let mut eval_requests = Vec::new();
        for (job, beam) in jobs.iter().zip(&beams) {
            let logic = job.perturbation.result.serialize();
            for c in beam {
                let id = self.fresh_id();
                eval_requests.push(Request::Evaluate {
                    id,
                    logic: logic.clone(),
                    text: c.text.clone(),
                });
            }
        }
        let n_batch = eval_requests.len();
        let mut augmented = prev.augmented.clone();
        if self.config.refilter_cumulative {
            for s in &augmented {
                let id = self.fresh_id();
                eval_requests.push(Request::Evaluate {
                    id,
                    logic: s.perturbation.result.serialize(),
                    text: s.text.raw.clone(),
                });
            }
        }
        let gammas: Vec<f64> = self
            .evaluator
            .exchange(&eval_requests)?
            .into_iter()
            .map(|r| match r {
                Response::Gamma { gamma, .. } => gamma,
                Response::Candidates { .. } => unreachable!("checked by match_responses"),
            })
            .collect();
        for (s, g) in augmented.iter_mut().zip(&gammas[n_batch..]) {
            s.evaluator_score = Some(*g);
        }

        let mut batch = Vec::with_capacity(jobs.len());
        let mut g = gammas[..n_batch].iter();
        for (job, beam) in jobs.into_iter().zip(beams) {
            let scored: Vec<BeamCandidate> = beam
                .into_iter()
                .map(|c| BeamCandidate {
                    text: Utterance::new(c.text),
                    generator_score: c.score,
                    evaluator_score: g.next().copied(),
                })
                .collect();
            let (_, best) = rerank_beam(&scored)?;
            batch.push(AugmentedSample {
                perturbation: job.perturbation,
                text: best.text.clone(),
                evaluator_score: best.evaluator_score,
            });
        }

        let metrics = if batch.is_empty() {
            None
        } else {
            Some(
                score_corpus(batch.iter().map(|s| (&s.perturbation.result, &s.text)), &self.lexicon)
                    .expect("batch is non-empty"),
            )
        };

        let mut seen: HashSet<(String, String)> = augmented.iter().map(sample_key).collect();
        for s in &batch {
            if seen.insert(sample_key(s)) {
                augmented.push(s.clone());
            }
        }
        let kept = accepted(&augmented, self.config.threshold);
        let evaluator_set = compose_evaluator_set(&self.seeds, &kept)?;
        let generator_set = compose_generator_set(&self.seeds, &kept, self.config.threshold)?;
        Ok(IterationState {
            index,
            augmented,
            batch,
            evaluator_set,
            generator_set,
            metrics,
        })
    }

    /// Runs every configured iteration, persisting each one under `out`.
    pub fn run(&mut self, out: &Path) -> Result<Vec<IterationState>, SnowballError> {
        let mut states = Vec::with_capacity(self.config.iterations);
        self.run_with(out, |s| states.push(s.clone()))?;
        Ok(states)
    }

    /// Like [`Snowball::run`], calling `done` after each iteration is on disk.
    pub fn run_with(&mut self, out: &Path, mut done: impl FnMut(&IterationState)) -> Result<IterationState, SnowballError> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        remove_stale_partials(out)?;
        let mut state = IterationState::initial();
        for _ in 0..self.config.iterations {
            state = self.run_iteration(&state)?;
            persist(out, &state, self.config.threshold)?;
            done(&state);
        }
        Ok(state)
    }
}

fn sample_key(s: &AugmentedSample) -> (String, String) {
    (format!("{}\t{}", s.seed_id(), s.edit()), s.text.raw.clone())
}

fn remove_stale_partials(out: &Path) -> Result<(), SnowballError> {
    for entry in fs::read_dir(out).map_err(io_err(out))? {
        let entry = entry.map_err(io_err(out))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(".iteration-") && name.ends_with(".partial") {
            let p = entry.path();
            fs::remove_dir_all(&p).map_err(io_err(&p))?;
        }
    }
    Ok(())
}

/// Directory holding the output of iteration `index`.
pub fn iteration_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("iteration-{index}"))
}

pub fn metrics_report(state: &IterationState, threshold: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "iteration {}", state.index);
    let _ = writeln!(s, "new samples {}", state.batch.len());
    let _ = writeln!(s, "accepted {}", state.accepted(threshold).len());
    let _ = writeln!(s, "evaluator set {}", state.evaluator_set.len());
    let _ = writeln!(s, "generator set {}", state.generator_set.len());
    match &state.metrics {
        Some(m) => {
            let _ = writeln!(s, "{m}");
        }
        None => s.push_str("BLEC n/a\n"),
    }
    s
}

/// Writes one perturbation record per sample, extended with `text` and
/// `score`.
pub fn save_samples(path: &Path, samples: &[AugmentedSample]) -> Result<(), SnowballError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for s in samples {
        let mut v = s.perturbation.to_json();
        v["text"] = s.text.raw.clone().into();
        v["score"] = s.evaluator_score.into();
        writeln!(f, "{v}").map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

/// Reads a file written by [`save_samples`].
pub fn load_samples(path: &Path, parser: &Parser) -> Result<Vec<AugmentedSample>, SnowballError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| SnowballError::Input(format!("{}:{line}: {message}", path.display()));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        let perturbation = Perturbation::from_json(&v, parser).map_err(|e| bad(i + 1, e))?;
        let text = v
            .get("text")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| bad(i + 1, "missing string field `text`".into()))?;
        let evaluator_score = match v.get("score") {
            None | Some(serde_json::Value::Null) => None,
            Some(s) => Some(s.as_f64().ok_or_else(|| bad(i + 1, "`score` is not a number".into()))?),
        };
        out.push(AugmentedSample {
            perturbation,
            text: Utterance::new(text),
            evaluator_score,
        });
    }
    Ok(out)
}

/// Writes `state` to `<out>/iteration-N/` via a hidden staging directory
/// and a rename.
pub fn persist(out: &Path, state: &IterationState, threshold: f64) -> Result<PathBuf, SnowballError> {
    let staging = out.join(format!(".iteration-{}.partial", state.index));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    save_pairs(&staging.join("evaluator.jsonl"), &state.evaluator_set)?;
    save_pairs(&staging.join("generator.jsonl"), &state.generator_set)?;
    save_samples(&staging.join("augmented.jsonl"), &state.augmented)?;
    let metrics = staging.join("metrics.txt");
    fs::write(&metrics, metrics_report(state, threshold)).map_err(io_err(&metrics))?;
    let dest = iteration_dir(out, state.index);
    if dest.exists() {
        fs::remove_dir_all(&dest).map_err(io_err(&dest))?;
    }
    fs::rename(&staging, &dest).map_err(io_err(&dest))?;
    Ok(dest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::Provenance;
    use crate::parse::parse_sql;

    fn seeds() -> Vec<LabeledPair> {
        vec![
            LabeledPair::seed("dogs", parse_sql("SELECT avg(age) FROM dogs").unwrap(), "What is the average age of dogs?".into()),
            LabeledPair::seed("cats", parse_sql("SELECT max(weight) FROM cats").unwrap(), "What is the largest weight of cats?".into()),
        ]
    }

    fn snowball(cfg: SnowballConfig, evaluator: Box<dyn Worker>) -> Snowball {
        let lexicon = Lexicon::builtin();
        let generator = connect(&WorkerSpec::Builtin, true, &cfg, &lexicon).unwrap();
        Snowball::new(cfg, lexicon, Templates::builtin(), seeds(), generator, evaluator).unwrap()
    }

    fn builtin(cfg: SnowballConfig) -> Snowball {
        let ev = connect(&WorkerSpec::Builtin, false, &cfg, &Lexicon::builtin()).unwrap();
        snowball(cfg, ev)
    }

    fn two_each() -> SnowballConfig {
        let mut cfg = SnowballConfig::default();
        cfg.perturb.max_per_seed = 2;
        cfg.iterations = 1;
        cfg.beam_size = 3;
        cfg
    }

    #[test]
    fn count_example() {
        let mut sb = builtin(two_each());
        let state = sb.run_iteration(&IterationState::initial()).unwrap();
        assert_eq!(state.batch.len(), 4);
        assert!(state.batch.iter().all(|s| s.evaluator_score == Some(1.0)), "{:?}", state.batch);
        assert_eq!(state.evaluator_set.len(), 2 + 3 * 4);
        assert_eq!(state.generator_set.len(), 2 + 4);
        let negatives = state.evaluator_set.iter().filter(|p| p.provenance.label() == crate::compose::Label::Inconsistent).count();
        assert_eq!(negatives, 8);
        assert_eq!(state.metrics.unwrap().n_pairs, 4);
    }

    struct Fixed(f64);

    impl Handler for Fixed {
        fn handle(&mut self, r: &Request) -> Result<Response, String> {
            Ok(Response::Gamma { id: r.id(), gamma: self.0 })
        }
    }

    #[test]
    fn out_of_range_gamma_is_a_worker_error() {
        let mut sb = snowball(two_each(), Box::new(LocalWorker(Fixed(2.0))));
        let err = sb.run_iteration(&IterationState::initial()).unwrap_err();
        assert!(matches!(err, SnowballError::Worker(WorkerError::Protocol(_))), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejected_samples_only_leave_seeds() {
        let mut sb = snowball(two_each(), Box::new(LocalWorker(Fixed(0.2))));
        let state = sb.run_iteration(&IterationState::initial()).unwrap();
        assert_eq!(state.batch.len(), 4);
        assert_eq!(state.evaluator_set.len(), 2);
        assert!(state.generator_set.iter().all(|p| p.provenance == Provenance::Seed));
    }

    #[test]
    fn persisted_runs_are_reproducible_and_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let run = |sub: &str| {
            let mut cfg = two_each();
            cfg.iterations = 3;
            cfg.perturb.max_per_seed = 6;
            let out = dir.path().join(sub);
            let states = builtin(cfg).run(&out).unwrap();
            (out, states)
        };
        let (a, states) = run("a");
        let (b, _) = run("b");
        for i in 1..=3 {
            for f in ["evaluator.jsonl", "generator.jsonl", "augmented.jsonl", "metrics.txt"] {
                let x = fs::read(iteration_dir(&a, i).join(f)).unwrap();
                let y = fs::read(iteration_dir(&b, i).join(f)).unwrap();
                assert_eq!(x, y, "iteration {i} {f}");
            }
        }
        assert!(states.windows(2).all(|w| w[0].evaluator_set.len() <= w[1].evaluator_set.len()));
        assert!(states.windows(2).all(|w| w[0].index + 1 == w[1].index));
        let names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        assert!(names.iter().all(|n| !n.ends_with(".partial")), "{names:?}");
        let back = load_samples(&iteration_dir(&a, 3).join("augmented.jsonl"), &Parser::default()).unwrap();
        assert_eq!(back, states[2].augmented);
    }

    struct FailAfter(usize, BuiltinEvaluator);

    impl Handler for FailAfter {
        fn handle(&mut self, r: &Request) -> Result<Response, String> {
            if self.0 == 0 {
                return Err("evaluator stopped".into());
            }
            self.0 -= 1;
            self.1.handle(r)
        }
    }

    #[test]
    fn aborted_iteration_leaves_previous_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = two_each();
        cfg.iterations = 2;
        let ev = BuiltinEvaluator::new(Lexicon::builtin(), cfg.parser().clone());
        // 4 jobs with a beam of 3 per iteration
        let mut sb = snowball(cfg, Box::new(LocalWorker(FailAfter(12 + 5, ev))));
        let err = sb.run(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(iteration_dir(dir.path(), 1).join("evaluator.jsonl").exists());
        assert!(!iteration_dir(dir.path(), 2).exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn duplicate_seed_ids_are_rejected() {
        let cfg = SnowballConfig::default();
        let lexicon = Lexicon::builtin();
        let mut s = seeds();
        s[1].seed_id = "dogs".into();
        let g = connect(&WorkerSpec::Builtin, true, &cfg, &lexicon).unwrap();
        let e = connect(&WorkerSpec::Builtin, false, &cfg, &lexicon).unwrap();
        assert!(Snowball::new(cfg, lexicon, Templates::builtin(), s, g, e).is_err());
    }
}
