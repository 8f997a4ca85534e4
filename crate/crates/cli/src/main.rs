use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser as ClapParser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logicheck_core::compose::{distribution, load_pairs, save_pairs};
use logicheck_core::linearize::{linearize_with, Templates};
use logicheck_core::snowball::{
    iteration_dir, load_samples, metrics_report, serve, BuiltinEvaluator, BuiltinGenerator, BuiltinWorker, Handler,
    Snowball, SnowballConfig, SnowballError,
};
use logicheck_core::{
    compose_evaluator_set, compose_generator_set, enumerate_perturbations, load_lexicon, match_pair, score_corpus,
    Dialect, Lexicon, Parser, SemanticParse,
};

#[derive(ClapParser)]
#[command(name = "logicheck", version, about = "Logical-consistency toolkit for semantic parses and text")]
struct Cli {
    /// key=value run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Keyword lexicon (default: $LOGICHECK_LEXICON, then the built-in one)
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    dialect: Option<DialectArg>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Sql,
    Logic,
}

impl From<DialectArg> for Dialect {
    fn from(d: DialectArg) -> Self {
        match d {
            DialectArg::Sql => Dialect::Sql,
            DialectArg::Logic => Dialect::Logic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse formal strings and print their canonical form
    Parse {
        /// Formal string; read one per line from stdin when absent
        formal: Option<String>,
        /// Print the syntax tree as JSON
        #[arg(long)]
        json: bool,
    },
    /// Render parses as structure-aware text
    Linearize {
        formal: Option<String>,
        /// Prefix the dialect control token
        #[arg(long)]
        control: bool,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// List the perturbations of a parse as JSON lines
    Perturb {
        formal: Option<String>,
        #[arg(long, default_value = "seed")]
        id: String,
        /// Overrides perturb.max_per_seed
        #[arg(long)]
        max: Option<usize>,
    },
    /// BLEC consistency scoring
    Blec {
        #[command(subcommand)]
        command: BlecCommand,
    },
    /// Build evaluator and generator sets from seeds and scored samples
    Compose {
        #[arg(long)]
        seeds: PathBuf,
        /// Samples as written to augmented.jsonl by a snowball run
        #[arg(long)]
        augmented: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Iterative augmentation loop
    Snowball {
        #[command(subcommand)]
        command: SnowballCommand,
    },
    /// Shuffle a dataset and split it into train and dev files
    SplitSpider {
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the builtin workers over stdin/stdout
    ServeBuiltin {
        #[arg(long, value_enum, default_value = "both")]
        role: Role,
        #[arg(long)]
        rng_seed: Option<u64>,
        /// Exit after answering this many requests
        #[arg(long)]
        max_requests: Option<usize>,
    },
}

#[derive(Subcommand)]
enum BlecCommand {
    /// Score a pair file and print `BLEC n/m = fraction`
    Score {
        pairs: PathBuf,
        /// Write one line per pair listing its misses
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SnowballCommand {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Generator,
    Evaluator,
    Both,
}

enum Failure {
    Input(String),
    Worker(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Worker(_) => 2,
        }
    }
}

impl From<SnowballError> for Failure {
    fn from(e: SnowballError) -> Self {
        if e.exit_code() == 2 {
            Failure::Worker(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

type Result<T> = std::result::Result<T, Failure>;

struct Env {
    config: SnowballConfig,
    dialect: Dialect,
    out: Option<PathBuf>,
}

impl Env {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => SnowballConfig::load(p).map_err(input)?,
            None => SnowballConfig::default(),
        };
        if let Some(l) = &cli.lexicon {
            config.lexicon = Some(l.clone());
        }
        if let Some(d) = cli.dialect {
            config.dialect = d.into();
        }
        if let Some(o) = &cli.out {
            config.out = Some(o.clone());
        }
        Ok(Self {
            dialect: config.dialect,
            out: config.out.clone(),
            config,
        })
    }

    fn lexicon(&self) -> Result<Lexicon> {
        load_lexicon(self.config.lexicon.as_deref()).map_err(input)
    }

    fn parser(&self) -> &Parser {
        self.config.parser()
    }

    fn parse(&self, formal: &str) -> Result<SemanticParse> {
        self.parser().parse(self.dialect, formal).map_err(input)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::Input("an output directory is required (--out or `out =` in the config)".into()))
    }
}

/// The positional argument, or every non-empty stdin line.
fn formals(arg: &Option<String>) -> Result<Vec<String>> {
    match arg {
        Some(f) => Ok(vec![f.clone()]),
        None => io::stdin()
            .lock()
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .collect::<io::Result<_>>()
            .map_err(input),
    }
}

fn write_out(out: &mut impl Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(input)
}

fn run(cli: Cli) -> Result<()> {
    let env = Env::new(&cli)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Parse { formal, json } => {
            for f in formals(&formal)? {
                let p = env.parse(&f)?;
                if json {
                    write_out(&mut out, serde_json::to_string(&p.root).map_err(input)?)?;
                } else {
                    write_out(&mut out, p.serialize())?;
                }
            }
        }
        Command::Linearize { formal, control, templates } => {
            let lexicon = env.lexicon()?;
            let templates = match templates.or(env.config.templates.clone()) {
                Some(p) => Templates::load(&p).map_err(input)?,
                None => Templates::builtin(),
            };
            for f in formals(&formal)? {
                let lf = linearize_with(&env.parse(&f)?, &lexicon, &templates).map_err(input)?;
                write_out(&mut out, if control { lf.with_control() } else { lf.text })?;
            }
        }
        Command::Perturb { formal, id, max } => {
            let lexicon = env.lexicon()?;
            let mut config = env.config.perturb.clone();
            if let Some(m) = max {
                config.max_per_seed = m;
            }
            let mut lines = Vec::new();
            for (i, f) in formals(&formal)?.iter().enumerate() {
                let seed_id = if formal.is_some() { id.clone() } else { format!("{id}-{i}") };
                for p in enumerate_perturbations(&seed_id, &env.parse(f)?, &lexicon, &config) {
                    lines.push(p.to_json().to_string());
                }
            }
            match &env.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(input)?;
                    let path = dir.join("perturbations.jsonl");
                    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
                    fs::write(&path, body).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                    write_out(&mut out, format!("{} perturbations written to {}", lines.len(), path.display()))?;
                }
                None => {
                    for l in lines {
                        write_out(&mut out, l)?;
                    }
                }
            }
        }
        Command::Blec {
            command: BlecCommand::Score { pairs, diagnostics },
        } => {
            let lexicon = env.lexicon()?;
            let pairs = load_pairs(&pairs, env.dialect, env.parser()).map_err(input)?;
            let score = score_corpus(pairs.iter().map(|p| (&p.parse, &p.text)), &lexicon).map_err(input)?;
            if let Some(path) = diagnostics {
                let mut d = String::new();
                for p in &pairs {
                    let r = match_pair(&p.parse, &p.text, &lexicon);
                    let verdict = if r.consistent { "consistent" } else { "inconsistent" };
                    d.push_str(&format!("{}\t{verdict}\t{}\n", p.seed_id, r.summary()));
                }
                fs::write(&path, d).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            }
            write_out(&mut out, score)?;
        }
        Command::Compose { seeds, augmented, threshold } => {
            let threshold = threshold.unwrap_or(env.config.threshold);
            let seeds = load_pairs(&seeds, env.dialect, env.parser()).map_err(input)?;
            let samples = load_samples(&augmented, env.parser())?;
            let accepted: Vec<_> = samples
                .into_iter()
                .filter(|s| s.evaluator_score.is_none_or(|g| g >= threshold))
                .collect();
            let scored: Vec<_> = accepted.iter().filter(|s| s.evaluator_score.is_some()).cloned().collect();
            let evaluator = compose_evaluator_set(&seeds, &accepted).map_err(input)?;
            let generator = compose_generator_set(&seeds, &scored, threshold).map_err(input)?;
            let dir = env.out_dir()?;
            fs::create_dir_all(dir).map_err(input)?;
            save_pairs(&dir.join("evaluator.jsonl"), &evaluator).map_err(input)?;
            save_pairs(&dir.join("generator.jsonl"), &generator).map_err(input)?;
            write_out(&mut out, format!("evaluator set {} pairs", evaluator.len()))?;
            for ((provenance, label), n) in distribution(&evaluator) {
                write_out(&mut out, format!("  {provenance}\t{}\t{n}", format!("{label:?}").to_lowercase()))?;
            }
            write_out(&mut out, format!("generator set {} pairs", generator.len()))?;
        }
        Command::Snowball {
            command: SnowballCommand::Run(args),
        } => {
            let mut config = env.config.clone();
            if let Some(n) = args.iterations {
                config.iterations = n;
            }
            if let Some(s) = args.rng_seed {
                config.rng_seed = s;
            }
            let dir = env.out_dir()?.to_path_buf();
            let threshold = config.threshold;
            let mut sb = Snowball::from_config(config)?;
            sb.run_with(&dir, |state| {
                let mut report = format!("{}\n", iteration_dir(&dir, state.index).display());
                for line in metrics_report(state, threshold).lines() {
                    report.push_str(&format!("  {line}\n"));
                }
                let _ = out.write_all(report.as_bytes()).and_then(|_| out.flush());
            })?;
        }
        Command::SplitSpider {
            input: path,
            train_fraction,
            seed,
        } => {
            if !(0.0..=1.0).contains(&train_fraction) {
                return Err(Failure::Input(format!("train fraction {train_fraction} is outside [0, 1]")));
            }
            let mut records = read_records(&path)?;
            records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_train = (records.len() as f64 * train_fraction).round() as usize;
            let (train, dev) = records.split_at(n_train);
            let dir = env.out_dir()?;
            fs::create_dir_all(dir).map_err(input)?;
            for (name, part) in [("train.jsonl", train), ("dev.jsonl", dev)] {
                let body: String = part.iter().map(|v| format!("{v}\n")).collect();
                fs::write(dir.join(name), body).map_err(input)?;
            }
            write_out(&mut out, format!("train {} dev {}", train.len(), dev.len()))?;
        }
        Command::ServeBuiltin {
            role,
            rng_seed,
            max_requests,
        } => {
            drop(out);
            let seed = rng_seed.unwrap_or(env.config.rng_seed);
            let evaluator = || -> Result<BuiltinEvaluator> { Ok(BuiltinEvaluator::new(env.lexicon()?, env.parser().clone())) };
            let mut handler: Box<dyn Handler> = match role {
                Role::Generator => Box::new(BuiltinGenerator::new(seed)),
                Role::Evaluator => Box::new(evaluator()?),
                Role::Both => Box::new(BuiltinWorker {
                    generator: BuiltinGenerator::new(seed),
                    evaluator: evaluator()?,
                }),
            };
            serve(handler.as_mut(), io::stdin().lock(), io::stdout().lock(), max_requests).map_err(input)?;
            return Ok(());
        }
    }
    out.flush().map_err(input)
}

/// A JSON array of objects, or one object per line.
fn read_records(path: &Path) -> Result<Vec<serde_json::Value>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::Input(format!("{}: {e}", path.display()));
    if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(bad)
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(bad))
            .collect()
    }
}

fn main() -> ExitCode {
    // usage errors are input errors; 2 is reserved for worker failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(m) | Failure::Worker(m)) = &f;
            eprintln!("logicheck: {m}");
            ExitCode::from(f.code())
        }
    }
}
