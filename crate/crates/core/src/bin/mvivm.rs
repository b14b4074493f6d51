use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use mvivm::harness::{self, AnyEngine, EngineKind, StreamKind};
use mvivm::insert_only::Mode;
use mvivm::query::{parse_query, parse_stream, Query, Sign};
use mvivm::value::tuple_strings;
use mvivm::Error;

#[derive(Parser)]
#[command(name = "mvivm", version, about = "Maintain conjunctive queries under inserts and deletes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print widths and decompositions of a query as JSON.
    Analyze {
        /// Query file, or a built-in name such as `triangle`.
        query: String,
    },
    /// Replay a JSON-lines update stream.
    Run {
        query: String,
        stream: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = EngineKind::Mvivm)]
        engine: EngineKind,
        /// Print the result (or delta) after every K updates; 0 prints only the final result.
        #[arg(long, default_value_t = 0)]
        enumerate_every: usize,
        /// Skip illegal updates with a warning instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Time an engine on generated streams and fit the growth exponent.
    Bench {
        query: String,
        /// insert_only_random, insert_delete_random, fifo, oumv, oumv(n), oumv_delta(n)
        #[arg(long = "gen")]
        generator: String,
        #[arg(long, default_value = "1k,2k,4k,8k")]
        sizes: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EngineKind::Mvivm)]
        engine: EngineKind,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the generated stream of the largest size instead of timing.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run all engines over a stream and compare them with recomputation.
    Verify { query: String, stream: PathBuf },
}

enum Failure {
    Diff(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_query(arg: &str) -> Result<Query, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(q) = mvivm::fixtures::named(arg) {
            return Ok(q);
        }
    }
    Ok(parse_query(&read(path)?)?)
}

fn rows(set: impl IntoIterator<Item = mvivm::value::Tuple>) -> Vec<Vec<String>> {
    set.into_iter().map(|t| tuple_strings(&t)).collect()
}

fn emit(out: &mut impl Write, tau: usize, e: &AnyEngine, mode: Mode) -> Result<(), Failure> {
    let line = match mode {
        Mode::Full => serde_json::json!({ "tau": tau, "full": rows(e.full()) }),
        Mode::Delta => {
            let d: Vec<_> = e
                .delta()?
                .into_iter()
                .map(|(s, t)| serde_json::json!([s.symbol(), tuple_strings(&t)]))
                .collect();
            serde_json::json!({ "tau": tau, "delta": d })
        }
    };
    writeln!(out, "{line}").map_err(|e| Failure::Input(e.to_string()))
}

fn run(
    query: &str,
    stream: &Path,
    mode: Mode,
    engine: EngineKind,
    every: usize,
    lenient: bool,
) -> Result<(), Failure> {
    let q = load_query(query)?;
    let s = parse_stream(&q, &read(stream)?)?;
    let mut e = AnyEngine::new(engine, &q, mode)?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let start = Instant::now();
    let mut skipped = 0;
    for (i, u) in s.updates.iter().enumerate() {
        let tau = i + 1;
        if engine == EngineKind::InsertOnly && u.sign == Sign::Delete && !lenient {
            return Err(Failure::Input(format!("line {tau}: the insert-only engine does not accept deletes")));
        }
        if !e.is_legal(u) || (engine == EngineKind::InsertOnly && u.sign == Sign::Delete) {
            let what = format!("line {tau}: {} on {} leaves the database unchanged", u.sign.symbol(), q.atoms[u.rel].relation);
            if !lenient {
                return Err(Failure::Input(what));
            }
            eprintln!("warning: {what}; skipped");
            skipped += 1;
            continue;
        }
        e.apply(u)?;
        if every > 0 && tau % every == 0 {
            emit(&mut out, tau, &e, mode)?;
        }
    }
    let elapsed = start.elapsed();
    if every == 0 || s.len() % every != 0 || mode == Mode::Delta {
        emit(&mut out, s.len(), &e, Mode::Full)?;
    }
    out.flush().map_err(|e| Failure::Input(e.to_string()))?;
    eprintln!(
        "{} updates ({skipped} skipped) in {:.3} ms with {engine}",
        s.len(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    query: &str,
    generator: &str,
    sizes: &str,
    seed: u64,
    engine: EngineKind,
    mode: Mode,
    repeats: usize,
    csv: Option<&Path>,
    dump: Option<&Path>,
) -> Result<(), Failure> {
    let q = load_query(query)?;
    let kind: StreamKind = generator.parse()?;
    let sizes = harness::parse_sizes(sizes)?;
    if let Some(path) = dump {
        let n = sizes.iter().copied().max().unwrap_or(0);
        let w = harness::gen_stream(kind, &q, n, seed)?;
        return std::fs::write(path, w.stream.to_jsonl(&q)).map_err(|e| Failure::Input(e.to_string()));
    }
    if sizes.len() < 2 {
        return Err(Failure::Input("need at least two sizes to fit a slope".into()));
    }
    let report = harness::measure(engine, mode, &q, kind, &sizes, repeats, seed)?;
    let text = report.to_csv();
    match csv {
        Some(path) => std::fs::write(path, &text).map_err(|e| Failure::Input(e.to_string()))?,
        None => print!("{text}"),
    }
    eprintln!("slope {:.3} (r2 {:.3})", report.slope, report.r2);
    Ok(())
}

fn verify(query: &str, stream: &Path) -> Result<(), Failure> {
    let q = load_query(query)?;
    let s = parse_stream(&q, &read(stream)?)?;
    let report = harness::verify(&q, &s)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    match report.first() {
        None => Ok(()),
        Some(d) => Err(Failure::Diff(format!(
            "{} diverges from recomputation at timestamp {} ({:?})",
            d.engine, d.tau, d.column
        ))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Analyze { query } => load_query(query).and_then(|q| {
            let r = harness::analyze(&q)?;
            println!("{}", serde_json::to_string_pretty(&r).unwrap());
            Ok(())
        }),
        Cmd::Run {
            query,
            stream,
            mode,
            engine,
            enumerate_every,
            lenient,
        } => run(query, stream, *mode, *engine, *enumerate_every, *lenient),
        Cmd::Bench {
            query,
            generator,
            sizes,
            seed,
            engine,
            mode,
            repeats,
            csv,
            dump,
        } => bench(query, generator, sizes, *seed, *engine, *mode, *repeats, csv.as_deref(), dump.as_deref()),
        Cmd::Verify { query, stream } => verify(query, stream),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diff(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
