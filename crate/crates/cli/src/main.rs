use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use def_core::belief::{self, BeliefVector, FrictionConfig, Vec5};
use def_core::common_ground::{self, Thresholds, TrackingConfig};
use def_core::dialogue::{self, GeneratorConfig, Transcript};
use def_core::dsl::{self, EncodingContext};
use def_core::equilibrium::{self, EquilibriumConfig, RefineStrategy, Scenario};
use def_core::eval::{self, ExperimentConfig, DEFAULT_GRID};

#[derive(Debug, Parser)]
#[command(name = "def", version, about = "Dynamic epistemic friction toolkit")]
struct Cli {
    /// Decimal places for numeric output.
    #[arg(long, global = true, default_value_t = 3)]
    precision: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a proposition and print its normalized form.
    Parse(ParseArgs),
    /// Encode a proposition as a weight vector.
    Encode(EncodeArgs),
    /// Apply one friction update to a belief vector.
    Update(UpdateArgs),
    /// Simulate the focus participant's belief over a transcript.
    RunDialogue(RunDialogueArgs),
    /// Track a transcript's propositions through the question, evidence and
    /// fact banks.
    Banks(BanksArgs),
    /// Run the friction equilibrium solver on a scenario.
    Equilibrium(EquilibriumArgs),
    /// Generate a synthetic corpus of dialogues.
    Generate(GenerateArgs),
    /// Leave-one-group-out evaluation over history windows.
    Evaluate(EvaluateArgs),
    /// Evaluate every (alpha, beta, k) cell of a grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SeedArg {
    /// RNG seed.
    #[arg(long, env = "DEF_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FrictionArgs {
    /// Frictive update coefficient.
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
    /// Reinforcement coefficient.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Disable the reinforcement cap.
    #[arg(long)]
    uncapped: bool,
}

impl FrictionArgs {
    fn config(&self) -> Result<FrictionConfig, def_core::Error> {
        let cfg = FrictionConfig::new(self.alpha, self.beta)?;
        Ok(if self.uncapped { cfg.uncapped() } else { cfg })
    }
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// Proposition text, e.g. "blue = 10 & green > blue".
    text: String,
    /// Print the atoms as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Proposition text.
    #[arg(long = "assert")]
    assertion: String,
    /// Belief supplying magnitudes for block-to-block comparisons.
    #[arg(long)]
    belief: Option<String>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct UpdateArgs {
    /// Current belief, e.g. "[10,10,0,0,0]".
    #[arg(long)]
    belief: String,
    /// Proposition heard.
    #[arg(long = "assert")]
    assertion: String,
    #[command(flatten)]
    friction: FrictionArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct RunDialogueArgs {
    /// Transcript JSON file.
    #[arg(long)]
    transcript: PathBuf,
    /// Participant to follow; defaults to the one who speaks least.
    #[arg(long)]
    focus: Option<String>,
    /// Initial belief; drawn at random (red fixed at 10) when omitted.
    #[arg(long)]
    belief: Option<String>,
    #[command(flatten)]
    friction: FrictionArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Write the trajectory as CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BanksArgs {
    /// Transcript JSON file.
    #[arg(long)]
    transcript: PathBuf,
    /// Participant to follow; defaults to the one who speaks least.
    #[arg(long)]
    focus: Option<String>,
    /// Initial belief; drawn at random (red fixed at 10) when omitted.
    #[arg(long)]
    belief: Option<String>,
    #[command(flatten)]
    friction: FrictionArgs,
    /// Evidence strength needed to leave the question bank.
    #[arg(long, default_value_t = 1.0)]
    evidence_min: f64,
    /// Friction at or below which evidence is sufficient.
    #[arg(long, default_value_t = 0.3)]
    friction_low: f64,
    /// Friction at or below which a proposition becomes a fact.
    #[arg(long, default_value_t = 0.05)]
    friction_zero: f64,
    /// Print the JSON snapshot instead of a table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Evidence,
    Soften,
}

#[derive(Debug, Args)]
struct EquilibriumArgs {
    /// Scenario JSON file; a random scenario is used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Participants in the random scenario.
    #[arg(long, default_value_t = 3)]
    agents: usize,
    /// Propositions in the random scenario.
    #[arg(long, default_value_t = 2)]
    props: usize,
    /// High-friction threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Separate threshold for the stopping check.
    #[arg(long)]
    equilibrium_threshold: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gradient step size.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
    /// Write the trace CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of dialogues.
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 60)]
    utterances: usize,
    /// Share of interlocutor assertions that contradict the ground truth.
    #[arg(long, default_value_t = 0.3)]
    frictive_rate: f64,
    #[arg(long, default_value_t = 3)]
    participants: usize,
    /// Share of turns taken by the quietest participant.
    #[arg(long, default_value_t = 0.1)]
    focus_share: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory for groupN.json files; a single dialogue goes to
    /// standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each dialogue's per-utterance encodings as CSV.
    #[arg(long)]
    encodings: bool,
}

#[derive(Debug, Args)]
struct CommonEvalArgs {
    /// Transcript file or directory of transcripts.
    #[arg(long)]
    data: PathBuf,
    /// Repetitions, each with a fresh initial belief.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1.0)]
    ridge_lambda: f64,
    /// Fit an intercept (ablation).
    #[arg(long)]
    intercept: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonEvalArgs,
    #[command(flatten)]
    friction: FrictionArgs,
    /// History windows, e.g. "1,2,3,4".
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    k: Vec<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonEvalArgs,
    /// Comma-separated alpha values (default 0.01..100 log grid).
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Vec<f64>,
    /// Comma-separated beta values (default 0.01..100 log grid).
    #[arg(long, value_delimiter = ',')]
    beta_grid: Vec<f64>,
    /// Comma-separated history windows.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    k: Vec<usize>,
    /// Add a row per group to each cell.
    #[arg(long)]
    per_group: bool,
}

fn parse_vector(text: &str) -> Result<Vec5, String> {
    serde_json::from_str::<Vec5>(text)
        .map_err(|e| format!("expected five numbers like [10,10,0,0,0]: {e}"))
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn focus_of(t: &Transcript, focus: Option<&String>) -> Result<String, def_core::Error> {
    match focus {
        Some(f) => Ok(f.clone()),
        None => Ok(dialogue::select_focus(t)?),
    }
}

fn initial_belief(text: Option<&String>, rng: &mut ChaCha8Rng) -> Result<BeliefVector, String> {
    match text {
        Some(t) => Ok(BeliefVector::new(parse_vector(t)?)),
        None => Ok(eval::init_belief_with(rng, 0.0, 10.0)),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: Into<def_core::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into().to_string())
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let prec = cli.precision;
    match cli.command {
        Command::Parse(a) => {
            let set = dsl::parse(&a.text)?;
            if a.json {
                let atoms: Vec<String> = set.atoms().iter().map(|p| p.to_string()).collect();
                println!(
                    "{}",
                    serde_json::to_string(&atoms).expect("strings serialize")
                );
            } else {
                println!("{set}");
            }
        }
        Command::Encode(a) => {
            let set = dsl::parse(&a.assertion)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
            let belief = a
                .belief
                .as_deref()
                .map(parse_vector)
                .transpose()
                .map_err(Failure::Usage)?
                .map(BeliefVector::new);
            let mut ctx = match &belief {
                Some(b) => EncodingContext::with_belief(&mut rng, b),
                None => EncodingContext::new(&mut rng),
            };
            let v = dsl::encode(&set, &mut ctx)?;
            println!("{}", belief::format_vector(&v, prec));
        }
        Command::Update(a) => {
            let b = BeliefVector::new(parse_vector(&a.belief).map_err(Failure::Usage)?);
            let set = dsl::parse(&a.assertion)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
            let v = dsl::encode(&set, &mut EncodingContext::with_belief(&mut rng, &b))?;
            let out = belief::def_update(&b, &v, &a.friction.config()?);
            println!("{}", out.display(prec));
        }
        Command::RunDialogue(a) => {
            let t = dialogue::load(&a.transcript)?;
            let focus = focus_of(&t, a.focus.as_ref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
            let init = initial_belief(a.belief.as_ref(), &mut rng).map_err(Failure::Usage)?;
            let traj = eval::run_dialogue_from(&t, &focus, init, &a.friction.config()?, &mut rng)?;
            let mut w = csv_writer(a.out.as_deref())?;
            w.write_record(["step", "red", "blue", "green", "purple", "yellow"])
                .map_err(def_core::Error::from)?;
            for (i, s) in traj.states.iter().enumerate() {
                let mut row = vec![i.to_string()];
                row.extend(s.components().iter().map(|c| format!("{c:.prec$}")));
                w.write_record(&row).map_err(def_core::Error::from)?;
            }
            w.flush().map_err(def_core::Error::from)?;
            eprintln!("focus {focus}: final {}", traj.last().display(prec));
        }
        Command::Banks(a) => {
            let t = dialogue::load(&a.transcript)?;
            let focus = focus_of(&t, a.focus.as_ref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
            let init = initial_belief(a.belief.as_ref(), &mut rng).map_err(Failure::Usage)?;
            let cfg = TrackingConfig {
                friction: a.friction.config()?,
                thresholds: Thresholds {
                    evidence_min: a.evidence_min,
                    friction_low: a.friction_low,
                    friction_zero: a.friction_zero,
                },
                ..TrackingConfig::default()
            };
            let (cg, _) = common_ground::track(&t, &focus, init, &cfg, &mut rng)?;
            let mut w = output(a.out.as_deref()).map_err(def_core::Error::from)?;
            let text = if a.json {
                serde_json::to_string_pretty(&cg.snapshot()).expect("snapshot serializes")
            } else {
                cg.table(prec)
            };
            writeln!(w, "{}", text.trim_end()).map_err(def_core::Error::from)?;
            w.flush().map_err(def_core::Error::from)?;
        }
        Command::Equilibrium(a) => {
            let mut scenario = match &a.scenario {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(def_core::Error::from)?;
                    serde_json::from_str::<Scenario>(&text)
                        .map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?
                }
                None => {
                    Scenario::seeded(a.seed.seed, a.agents, a.props, EquilibriumConfig::default())
                }
            };
            let cfg = &mut scenario.config;
            if let Some(v) = a.threshold {
                cfg.threshold = v;
            }
            if a.equilibrium_threshold.is_some() {
                cfg.equilibrium_threshold = a.equilibrium_threshold;
            }
            if let Some(v) = a.max_iters {
                cfg.max_iters = v;
            }
            if let Some(v) = a.eta {
                cfg.eta = v;
            }
            if let Some(s) = a.strategy {
                cfg.strategy = match s {
                    StrategyArg::Evidence => RefineStrategy::EvidenceInjection,
                    StrategyArg::Soften => RefineStrategy::PropositionSoftening,
                };
            }
            if let Some(v) = a.delta {
                cfg.delta = v;
            }
            if let Some(v) = a.sigma {
                cfg.sigma = v;
            }
            let sol = equilibrium::solve(&scenario.state(), &scenario.config)?;
            let out = output(a.out.as_deref()).map_err(def_core::Error::from)?;
            equilibrium::write_trace_csv(&sol.trace, prec, out)?;
            let outcome = match sol.outcome {
                equilibrium::Outcome::Equilibrium => "equilibrium",
                equilibrium::Outcome::NoEquilibrium => "no equilibrium",
            };
            eprintln!(
                "{outcome} after {} iterations, net friction {:.prec$}",
                sol.state.iteration, sol.final_net_friction
            );
        }
        Command::Generate(a) => {
            let base = GeneratorConfig {
                seed: a.seed.seed,
                n_utterances: a.utterances,
                frictive_rate: a.frictive_rate,
                participants: a.participants,
                focus_share: a.focus_share,
                ..GeneratorConfig::default()
            };
            if a.groups == 0 {
                return usage("--groups must be at least 1");
            }
            let corpus = dialogue::generate_corpus(&base, a.groups)?;
            match &a.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(def_core::Error::from)?;
                    for t in &corpus {
                        dialogue::save(t, &dir.join(format!("{}.json", t.group_id)))?;
                        if a.encodings {
                            let f = File::create(dir.join(format!("{}.encodings.csv", t.group_id)))
                                .map_err(def_core::Error::from)?;
                            dialogue::write_encodings_csv(t, a.seed.seed, BufWriter::new(f))?;
                        }
                    }
                }
                None if corpus.len() == 1 => println!("{}", corpus[0].to_json()),
                None => return usage("--out is required when generating more than one group"),
            }
        }
        Command::Evaluate(a) => {
            let corpus = dialogue::load_corpus(&a.common.data)?;
            let cfg = ExperimentConfig {
                friction: a.friction.config()?,
                k_values: a.k.clone(),
                k: a.k.first().copied().unwrap_or(1),
                ..experiment(&a.common)
            };
            let reports = eval::evaluate_windows(&corpus, &cfg)?;
            let out = output(a.common.out.as_deref()).map_err(def_core::Error::from)?;
            eval::write_report_csv(&reports, prec, out)?;
            let groups: Vec<String> = reports
                .first()
                .map(|r| r.groups.iter().map(|g| g.group.clone()).collect())
                .unwrap_or_default();
            let names: Vec<&str> = groups.iter().map(String::as_str).collect();
            if let Some(check) = eval::short_history_wins(&reports, &names) {
                for (g, wins) in check {
                    let verdict = if wins { "beats" } else { "does not beat" };
                    eprintln!("{g}: best of k=1,2 {verdict} k=4");
                }
            }
        }
        Command::Sweep(a) => {
            let corpus = dialogue::load_corpus(&a.common.data)?;
            let grid = |g: &Vec<f64>| {
                if g.is_empty() {
                    DEFAULT_GRID.to_vec()
                } else {
                    g.clone()
                }
            };
            let cfg = ExperimentConfig {
                alpha_grid: grid(&a.alpha_grid),
                beta_grid: grid(&a.beta_grid),
                k_values: a.k.clone(),
                ..experiment(&a.common)
            };
            let cells = eval::sweep(&corpus, &cfg)?;
            let out = output(a.common.out.as_deref()).map_err(def_core::Error::from)?;
            eval::write_sweep_csv(&cells, a.per_group, prec, out)?;
        }
    }
    Ok(())
}

fn experiment(a: &CommonEvalArgs) -> ExperimentConfig {
    ExperimentConfig {
        n_runs: a.runs,
        seed: a.seed.seed,
        ridge_lambda: a.ridge_lambda,
        fit_intercept: a.intercept,
        jobs: a.jobs,
        ..ExperimentConfig::default()
    }
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
    Ok(csv::Writer::from_writer(
        output(path).map_err(def_core::Error::from)?,
    ))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    /// Every flag a subcommand declares shows up in its help text.
    #[test]
    fn help_lists_every_flag() {
        let mut root = Cli::command();
        root.build();
        for sub in root.get_subcommands() {
            let help = sub.clone().render_long_help().to_string();
            for arg in sub.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(
                        help.contains(&format!("--{long}")),
                        "`{}` help lacks --{long}",
                        sub.get_name()
                    );
                }
            }
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn vector_argument() {
        assert_eq!(
            parse_vector("[10,10,0,0,0]").unwrap(),
            [10.0, 10.0, 0.0, 0.0, 0.0]
        );
        assert!(parse_vector("[1,2]").is_err());
        assert!(parse_vector("ten").is_err());
    }
}
