use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use streamcolor::gen;
use streamcolor::graph::check_proper;
use streamcolor::harness::{
    self, Action, Adversary, ConflictSeeker, GameConfig, NaiveBaseline, ObliviousRandom, Scripted,
    StopAdversary, StreamColorer,
};
use streamcolor::lowrand::{LowRandColorer, LowRandConfig};
use streamcolor::metrics::RunMetrics;
use streamcolor::robust::{RobustColorer, RobustConfig};
use streamcolor::stream::render_tokens;
use streamcolor::{determ, listcolor, Color, Edge, Error, MultiPassSource, PartialColoring, StreamToken};

#[derive(Parser)]
#[command(name = "streamcolor", version, about = "Streaming graph coloring toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a degree-capped edge stream.
    Gen(GenArgs),
    /// Run one algorithm on a stream or transcript and verify the result.
    Run(RunArgs),
    /// Play seeded adversary games against an algorithm.
    Game(GameArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    GnpCapped,
    RegularIsh,
    Clique,
    Path,
    AdversaryReplay,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit one list of deg+1 colors per vertex.
    #[arg(long)]
    lists: bool,
    /// Color universe for --lists; defaults to n².
    #[arg(long)]
    universe: Option<u32>,
    /// Inserts between queries for adversary-replay.
    #[arg(long, default_value_t = 1)]
    query_every: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Determ,
    Listcolor,
    Robust,
    Lowrand,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(value_enum)]
    algorithm: Algorithm,
    /// Token file (`E u v`, `L x k c..`) or transcript (`E u v`, `Q`).
    input: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra file of `L` lines appended to the stream.
    #[arg(long)]
    lists: Option<PathBuf>,
    /// Coloring output, one `x c` line per vertex.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key=value` metrics.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Replay transcript with per-query verdicts (robust, lowrand).
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Record wall time in the metrics.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameAlgorithm {
    Robust,
    Lowrand,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKind {
    Stop,
    Oblivious,
    ConflictSeeker,
}

#[derive(clap::Args)]
struct GameArgs {
    #[arg(value_enum)]
    algorithm: GameAlgorithm,
    #[arg(value_enum)]
    adversary: AdversaryKind,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    delta: usize,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    query_every: usize,
    /// Campaign summary as flat `key=value` lines.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Failure {
    Error(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Usage(_) | Error::Config(_) => 2,
        Error::Input(_) | Error::Parse { .. } | Error::Adversary(_) => 3,
        Error::TheoryViolation(_) => 5,
        Error::PaletteOverflow(_) => 6,
        Error::QueryFail(_) => 7,
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_opt(path: Option<&Path>, text: &str) -> Result<(), Error> {
    path.map_or(Ok(()), |p| fs::write(p, text).map_err(Error::from))
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let need_delta = || {
        a.delta
            .filter(|&d| d > 0 && d < a.n)
            .ok_or_else(|| Error::Usage(format!("--delta must be in 1..{} for this kind", a.n)))
    };
    if a.n == 0 {
        return Err(Error::Usage("--n must be positive".into()).into());
    }
    let text = match a.kind {
        GenKind::AdversaryReplay => {
            let delta = need_delta()?;
            let (alg_seed, adv_seed) = harness::trial_seeds(a.seed, 0);
            let outcome = harness::run_game(
                &mut NaiveBaseline::new(a.n, delta, alg_seed),
                &mut ObliviousRandom::new(adv_seed, a.query_every),
                GameConfig::new(a.n, delta),
            )?;
            let mut s = String::new();
            for action in outcome.transcript.actions() {
                match action {
                    Action::Insert(e) => s.push_str(&format!("E {} {}\n", e.u(), e.v())),
                    Action::Query => s.push_str("Q\n"),
                    Action::Stop => {}
                }
            }
            s
        }
        kind => {
            let edges = match kind {
                GenKind::GnpCapped => gen::gnp_capped(a.n, need_delta()?, a.seed),
                GenKind::RegularIsh => gen::regular_ish(a.n, need_delta()?, a.seed),
                GenKind::Clique => gen::clique(a.n),
                _ => gen::path(a.n),
            };
            let max_degree = gen::max_degree(a.n, &edges);
            if a.delta.is_some_and(|d| max_degree > d) {
                return Err(Error::Usage(format!("this kind needs --delta at least {max_degree}")).into());
            }
            let tokens = if a.lists {
                let universe = a.universe.unwrap_or((a.n * a.n).min(u32::MAX as usize) as u32);
                let lists = gen::random_lists(a.n, &edges, universe, 0, a.seed)?;
                gen::interleave(&edges, &lists, a.seed)
            } else {
                edges.into_iter().map(StreamToken::Edge).collect()
            };
            render_tokens(&tokens)
        }
    };
    write_or_print(a.out.as_deref(), &text)?;
    Ok(())
}

fn coloring_text(colors: impl Iterator<Item = Option<Color>>) -> String {
    let mut s = String::new();
    for (x, c) in colors.enumerate() {
        match c {
            Some(c) => s.push_str(&format!("{x} {c}\n")),
            None => s.push_str(&format!("{x} -\n")),
        }
    }
    s
}

fn vertex_bound(edges: &[Edge], lists: &[(u32, Vec<Color>)]) -> usize {
    let e = edges.iter().map(|e| e.v() as usize + 1).max().unwrap_or(0);
    let l = lists.iter().map(|(x, _)| *x as usize + 1).max().unwrap_or(0);
    e.max(l)
}

fn run_multipass(a: &RunArgs, text: String) -> Result<RunMetrics, Failure> {
    let source = MultiPassSource::parse(&text)?;
    let mut edges = Vec::new();
    let mut lists = Vec::new();
    for t in source.open_pass()? {
        match t {
            StreamToken::Edge(e) => edges.push(*e),
            StreamToken::List { vertex, colors } => lists.push((*vertex, colors.clone())),
        }
    }
    source.reset_pass_count();
    let n = a.n.unwrap_or_else(|| vertex_bound(&edges, &lists));
    let start = Instant::now();
    let (coloring, mut m): (PartialColoring, RunMetrics) = match a.algorithm {
        Algorithm::Determ => {
            let (c, r) = determ::run(&source, n, a.delta)?;
            let mut m = RunMetrics::new("determ", n, r.delta);
            m.passes = r.passes;
            m.epochs = r.epochs.len();
            m.colors_reserved = r.delta as u64 + 1;
            m.peak_space_words = r.peak_words;
            m.set("expected_passes", r.expected_passes());
            m.set("discovery_pass", r.discovery_pass);
            m.set("prime", r.prime);
            m.set("peak_counter_words", r.peak_counter_words);
            let sizes: Vec<String> = r.epochs.iter().map(|e| e.uncolored.to_string()).collect();
            m.set("epoch_uncolored", sizes.join(","));
            let phis: Vec<String> = r.epochs.iter().map(|e| format!("{:.6}", e.final_potential)).collect();
            m.set("epoch_potential", phis.join(","));
            (c, m)
        }
        _ => {
            let (c, r) = listcolor::run(&source, n, a.delta)?;
            let mut m = RunMetrics::new("listcolor", n, r.delta);
            m.passes = r.passes;
            m.epochs = r.epochs.len();
            m.colors_reserved = r.universe;
            m.peak_space_words = r.peak_words;
            m.set("expected_passes", r.expected_passes());
            m.set("universe", r.universe);
            m.set("prime", r.prime);
            m.set("peak_counter_words", r.peak_counter_words);
            let sizes: Vec<String> = r.epochs.iter().map(|e| e.uncolored.to_string()).collect();
            m.set("epoch_uncolored", sizes.join(","));
            (c, m)
        }
    };
    if a.timing {
        m.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    m.colors_used = coloring.distinct_colors();
    let mut problems = Vec::new();
    let bad = check_proper(&edges, &coloring)?;
    m.violations = bad.len();
    if !bad.is_empty() {
        problems.push(format!("{} monochromatic edges", bad.len()));
    }
    if !coloring.is_complete() {
        problems.push(format!("{} vertices left uncolored", coloring.uncolored_count()));
    }
    if a.algorithm == Algorithm::Determ {
        if coloring.max_color().is_some_and(|c| c as usize > m.delta) {
            problems.push(format!("a color above {}", m.delta));
        }
    } else {
        let off = lists
            .iter()
            .filter(|(x, l)| coloring.get(*x).is_some_and(|c| l.binary_search(&c).is_err()))
            .count();
        if off > 0 {
            problems.push(format!("{off} vertices colored outside their lists"));
        }
    }
    m.set("verified", problems.is_empty());
    write_opt(a.out.as_deref(), &coloring_text((0..n as u32).map(|x| coloring.get(x))))?;
    finish_run(a, &m)?;
    if !problems.is_empty() {
        return Err(Failure::Verification(problems.join("; ")));
    }
    Ok(m)
}

fn finish_run(a: &RunArgs, m: &RunMetrics) -> Result<(), Error> {
    write_or_print(a.metrics.as_deref(), &m.to_flat())?;
    write_opt(a.json.as_deref(), &m.to_json()?)
}

fn run_single_pass(a: &RunArgs, text: String) -> Result<RunMetrics, Failure> {
    let mut actions = harness::parse_actions(&text)?;
    if !actions.contains(&Action::Query) {
        actions.push(Action::Query);
    }
    let edges: Vec<Edge> = actions
        .iter()
        .filter_map(|x| match x {
            Action::Insert(e) => Some(*e),
            _ => None,
        })
        .collect();
    let n = a.n.unwrap_or_else(|| vertex_bound(&edges, &[]));
    let delta = a.delta.unwrap_or_else(|| gen::max_degree(n, &edges)).max(1);
    let cfg = GameConfig::new(n, delta);
    let start = Instant::now();
    let mut m;
    let outcome;
    let mut last: Option<Vec<Color>> = None;
    let mut record = |alg: &mut dyn StreamColorer| -> Result<harness::GameOutcome, Error> {
        let out = harness::run_game(alg, &mut Scripted::new(actions.clone()), cfg)?;
        last = alg.query().ok();
        Ok(out)
    };
    if a.algorithm == Algorithm::Robust {
        let mut alg = RobustColorer::new(RobustConfig::new(n, delta, a.beta, a.seed)?);
        outcome = record(&mut alg)?;
        m = RunMetrics::new("robust", n, delta);
        m.beta = a.beta;
        m.peak_space_words = alg.meter().peak_words();
        m.epochs = alg.robust_stats().epoch;
        m.set("palette_bound", alg.config().palette_bound());
        m.set("fallback", alg.config().fallback());
    } else {
        let mut alg = LowRandColorer::new(LowRandConfig::new(n, delta, a.seed)?);
        outcome = record(&mut alg)?;
        let audit = alg.randomness_audit();
        m = RunMetrics::new("lowrand", n, delta);
        m.peak_space_words = alg.meter().peak_words();
        m.epochs = alg.epoch();
        m.set("color_space", alg.config().color_space());
        m.set("seed_bits", audit.seed_bits);
        m.set("state_bits", audit.state_bits);
        m.set("hashes", audit.hashes);
    }
    if a.timing {
        m.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    let r = &outcome.result;
    m.passes = 1;
    m.seeds = vec![a.seed];
    m.colors_reserved = r.palette_size;
    m.colors_used = r.palette_used;
    m.violations = r.violations;
    m.query_fails = r.query_fails;
    m.set("queries", r.queries);
    m.set("inserts", r.inserts);
    m.set("audit_failures", r.audit_failures);
    m.set("palette_overflows", r.palette_overflows);
    m.set("out_of_palette", r.out_of_palette);
    m.set("peak_stored_edges", r.peak_stored_edges);
    write_opt(a.transcript.as_deref(), &outcome.transcript.to_string())?;
    if let Some(colors) = &last {
        write_opt(a.out.as_deref(), &coloring_text(colors.iter().map(|&c| Some(c))))?;
    }
    finish_run(a, &m)?;
    if r.violations > 0 || r.audit_failures > 0 || r.out_of_palette > 0 {
        return Err(Failure::Verification(format!(
            "{} improper queries, {} audit failures, {} colors outside the palette",
            r.violations, r.audit_failures, r.out_of_palette
        )));
    }
    if r.palette_overflows > 0 {
        return Err(Error::PaletteOverflow(format!("{} queries overflowed a block", r.palette_overflows)).into());
    }
    if r.query_fails > 0 {
        return Err(Error::QueryFail(format!("{} queries found no live set", r.query_fails)).into());
    }
    Ok(m)
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let mut text = fs::read_to_string(&a.input).map_err(Error::from)?;
    if let Some(p) = &a.lists {
        text.push('\n');
        text.push_str(&fs::read_to_string(p).map_err(Error::from)?);
    }
    match a.algorithm {
        Algorithm::Determ | Algorithm::Listcolor => run_multipass(a, text)?,
        Algorithm::Robust | Algorithm::Lowrand => run_single_pass(a, text)?,
    };
    Ok(())
}

fn cmd_game(a: &GameArgs) -> Result<(), Failure> {
    if a.n == 0 || a.delta == 0 {
        return Err(Error::Usage("--n and --delta must be positive".into()).into());
    }
    let (n, delta, beta, q, kind) = (a.n, a.delta, a.beta, a.query_every, a.adversary);
    let alg = a.algorithm;
    let summary = harness::run_campaign(
        GameConfig::new(n, delta),
        a.trials,
        a.seed,
        q,
        |s| -> Result<Box<dyn StreamColorer>, Error> {
            Ok(match alg {
                GameAlgorithm::Robust => Box::new(RobustColorer::new(RobustConfig::new(n, delta, beta, s)?)),
                GameAlgorithm::Lowrand => Box::new(LowRandColorer::new(LowRandConfig::new(n, delta, s)?)),
                GameAlgorithm::Naive => Box::new(NaiveBaseline::new(n, delta, s)),
            })
        },
        |s| -> Box<dyn Adversary> {
            match kind {
                AdversaryKind::Stop => Box::new(StopAdversary),
                AdversaryKind::Oblivious => Box::new(ObliviousRandom::new(s, q)),
                AdversaryKind::ConflictSeeker => Box::new(ConflictSeeker::new(s, q)),
            }
        },
    )?;
    let algorithm = match alg {
        GameAlgorithm::Robust => "robust",
        GameAlgorithm::Lowrand => "lowrand",
        GameAlgorithm::Naive => "naive",
    };
    let text = format!("algorithm={algorithm}\nn={n}\ndelta={delta}\nbeta={beta}\n{}", summary.render());
    write_or_print(a.out.as_deref(), &text)?;
    write_opt(a.json.as_deref(), &summary.to_json()?)?;
    if summary.palette_overflows() > 0 {
        return Err(Error::PaletteOverflow("a query overflowed a block".into()).into());
    }
    if summary.query_fails() > 0 {
        return Err(Error::QueryFail("a query found no live set".into()).into());
    }
    if !summary.passed() {
        return Err(Failure::Verification(format!(
            "{} improper queries, {} audit failures",
            summary.violations(),
            summary.audit_failures()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Game(a) => cmd_game(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("streamcolor: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("streamcolor: verification failed: {msg}");
            ExitCode::from(4)
        }
    }
}
