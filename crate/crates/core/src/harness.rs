//! Workload generators, a uniform engine wrapper, timing with slope fits,
//! and transcript-level differential verification.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::{DeltaEngine, NaiveEngine};
use crate::error::{Error, Result};
use crate::insert_delete::InsertDeleteEngine;
use crate::insert_only::{InsertOnlyEngine, Mode};
use crate::query::{apply_update, Database, Query, Sign, Update, UpdateStream};
use crate::value::{Tuple, Value};

/// Stream generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    InsertOnlyRandom,
    /// Random inserts and deletes; inserts win two thirds of the time.
    InsertDeleteRandom,
    /// Sliding window: once a quarter of the stream is live, each insert is
    /// preceded by deleting the oldest tuple.
    Fifo,
    /// Vector-matrix-vector rounds on a query with two unary atoms and one
    /// binary atom. `None` derives the dimension from the stream length.
    Oumv { n: Option<usize>, probe: Probe },
}

/// What is asked of the engine at a probe point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Probe {
    /// Is the result nonempty.
    Full,
    /// Is the delta of the last update nonempty.
    Delta,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamKind::InsertOnlyRandom => write!(f, "insert_only_random"),
            StreamKind::InsertDeleteRandom => write!(f, "insert_delete_random"),
            StreamKind::Fifo => write!(f, "fifo"),
            StreamKind::Oumv { n, probe } => {
                let name = match probe {
                    Probe::Full => "oumv",
                    Probe::Delta => "oumv_delta",
                };
                match n {
                    Some(n) => write!(f, "{name}({n})"),
                    None => write!(f, "{name}"),
                }
            }
        }
    }
}

impl FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<StreamKind> {
        let s = s.trim().replace('-', "_");
        let (name, arg) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Invalid(format!("malformed generator `{s}`")))?;
                let n: usize = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad dimension in `{s}`")))?;
                (name.to_string(), Some(n))
            }
            None => (s.clone(), None),
        };
        let kind = match name.as_str() {
            "insert_only_random" | "insert_only" => StreamKind::InsertOnlyRandom,
            "insert_delete_random" | "insert_delete" | "mixed" => StreamKind::InsertDeleteRandom,
            "fifo" => StreamKind::Fifo,
            "oumv" => StreamKind::Oumv { n: arg, probe: Probe::Full },
            "oumv_delta" => StreamKind::Oumv { n: arg, probe: Probe::Delta },
            _ => return Err(Error::Invalid(format!("unknown generator `{s}`"))),
        };
        if arg.is_some() && !matches!(kind, StreamKind::Oumv { .. }) {
            return Err(Error::Invalid(format!("generator `{name}` takes no argument")));
        }
        Ok(kind)
    }
}

/// A stream plus the positions (0-based update index) after which the
/// harness asks a question of the engine.
#[derive(Clone, Debug, Default)]
pub struct Workload {
    pub stream: UpdateStream,
    pub probes: Vec<(usize, Probe)>,
}

/// Values per variable so that a relation of the widest arity is about
/// `1/density` full after `live` tuples spread over all atoms.
fn domain_size(q: &Query, live: usize, density: f64) -> usize {
    let arity = q.atoms.iter().map(|a| a.schema.len()).max().unwrap_or(1).max(1);
    let per_atom = live as f64 / q.atoms.len().max(1) as f64;
    ((per_atom / density).powf(1.0 / arity as f64).ceil() as usize).max(2)
}

fn value(i: usize) -> Value {
    Value::constant(&format!("v{i}"))
}

struct Sampler {
    q_arity: Vec<usize>,
    domain: usize,
    live: Vec<IndexSet<Tuple>>,
}

impl Sampler {
    fn new(q: &Query, domain: usize) -> Sampler {
        Sampler {
            q_arity: q.atoms.iter().map(|a| a.schema.len()).collect(),
            domain,
            live: vec![IndexSet::new(); q.atoms.len()],
        }
    }

    fn total(&self) -> usize {
        self.live.iter().map(|r| r.len()).sum()
    }

    /// A fresh tuple for a random relation; gives up after a bounded number
    /// of collisions.
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> Option<Update> {
        for _ in 0..64 {
            let rel = rng.gen_range(0..self.q_arity.len());
            let t: Tuple = (0..self.q_arity[rel]).map(|_| value(rng.gen_range(0..self.domain))).collect();
            if self.live[rel].insert(t.clone()) {
                return Some(Update::insert(rel, t));
            }
        }
        None
    }

    fn random_delete(&mut self, rng: &mut ChaCha8Rng) -> Option<Update> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let mut pick = rng.gen_range(0..total);
        for (rel, set) in self.live.iter_mut().enumerate() {
            if pick < set.len() {
                let t = set.swap_remove_index(pick).unwrap();
                return Some(Update::delete(rel, t));
            }
            pick -= set.len();
        }
        unreachable!()
    }
}

/// Deterministic stream of `n` updates for `q`.
pub fn gen_stream(kind: StreamKind, q: &Query, n: usize, seed: u64) -> Result<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut updates = Vec::with_capacity(n);
    match kind {
        StreamKind::InsertOnlyRandom => {
            let mut s = Sampler::new(q, domain_size(q, n, 0.3));
            while updates.len() < n {
                match s.fresh(&mut rng) {
                    Some(u) => updates.push(u),
                    None => break,
                }
            }
        }
        StreamKind::InsertDeleteRandom => {
            let mut s = Sampler::new(q, domain_size(q, n / 3, 0.3));
            while updates.len() < n {
                let u = if rng.gen_bool(2.0 / 3.0) {
                    s.fresh(&mut rng).or_else(|| s.random_delete(&mut rng))
                } else {
                    s.random_delete(&mut rng).or_else(|| s.fresh(&mut rng))
                };
                match u {
                    Some(u) => updates.push(u),
                    None => break,
                }
            }
        }
        StreamKind::Fifo => {
            let window = (n / 4).max(1);
            let mut s = Sampler::new(q, domain_size(q, window, 0.3));
            let mut order: std::collections::VecDeque<(usize, Tuple)> = Default::default();
            while updates.len() < n {
                if order.len() >= window {
                    let (rel, t) = order.pop_front().unwrap();
                    s.live[rel].shift_remove(&t);
                    updates.push(Update::delete(rel, t));
                    continue;
                }
                match s.fresh(&mut rng) {
                    Some(u) => {
                        order.push_back((u.rel, u.tuple.clone()));
                        updates.push(u);
                    }
                    None => break,
                }
            }
        }
        StreamKind::Oumv { n: dim, probe } => {
            let dim = dim.unwrap_or_else(|| ((n as f64 / 4.5).sqrt().round() as usize).max(1));
            return oumv(q, dim, probe, &mut rng);
        }
    }
    Ok(Workload {
        stream: UpdateStream { updates },
        probes: Vec::new(),
    })
}

/// Atoms (u, m, v) of a vector-matrix-vector query: two unary atoms over
/// the two variables of one binary atom.
fn oumv_atoms(q: &Query) -> Result<(usize, usize, usize)> {
    let bad = || Error::Invalid("oumv needs a query shaped like Q(A,B) :- R(A), S(A,B), T(B)".into());
    if q.atoms.len() != 3 {
        return Err(bad());
    }
    let m = q.atoms.iter().position(|a| a.schema.len() == 2).ok_or_else(bad)?;
    let (a, b) = (q.atoms[m].schema[0], q.atoms[m].schema[1]);
    let find = |v| q.atoms.iter().position(|x| x.schema == [v]).ok_or_else(bad);
    Ok((find(a)?, m, find(b)?))
}

fn oumv(q: &Query, dim: usize, probe: Probe, rng: &mut ChaCha8Rng) -> Result<Workload> {
    let (ru, rm, rv) = oumv_atoms(q)?;
    let mut updates = Vec::new();
    let mut probes = Vec::new();
    let mut cells: Vec<(usize, usize)> = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).collect();
    cells.shuffle(rng);
    for (i, j) in cells {
        if rng.gen_bool(0.5) {
            updates.push(Update::insert(rm, vec![value(i), value(j)].into()));
        }
    }
    let mut u_prev: Vec<usize> = Vec::new();
    let mut v_prev: Vec<usize> = Vec::new();
    for _ in 0..dim {
        let u: Vec<usize> = (0..dim).filter(|_| rng.gen_bool(0.5)).collect();
        let v: Vec<usize> = (0..dim).filter(|_| rng.gen_bool(0.5)).collect();
        for &i in &u_prev {
            updates.push(Update::delete(ru, vec![value(i)].into()));
        }
        for &j in &v_prev {
            updates.push(Update::delete(rv, vec![value(j)].into()));
        }
        for &i in &u {
            updates.push(Update::insert(ru, vec![value(i)].into()));
        }
        // the last insert of the round carries the answer in its delta
        for &j in &v {
            updates.push(Update::insert(rv, vec![value(j)].into()));
        }
        if !updates.is_empty() {
            probes.push((updates.len() - 1, probe));
        }
        u_prev = u;
        v_prev = v;
    }
    Ok(Workload {
        stream: UpdateStream { updates },
        probes,
    })
}

/// Replay against a plain database; fails on the first illegal update.
pub fn validate_stream(q: &Query, s: &UpdateStream) -> Result<()> {
    let mut db = Database::empty(q);
    for (i, u) in s.updates.iter().enumerate() {
        if !apply_update(q, &mut db, u)? {
            return Err(Error::Stream {
                line: i + 1,
                msg: format!("{} on {} leaves the database unchanged", u.sign.symbol(), q.atoms[u.rel].relation),
            });
        }
    }
    Ok(())
}

/// Engines selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    /// Lifespan-based engine for inserts and deletes.
    Mvivm,
    InsertOnly,
    /// Recompute after every update.
    Naive,
    /// Materialized result maintained by delta queries.
    DeltaBase,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Mvivm => "mvivm",
            EngineKind::InsertOnly => "insert-only",
            EngineKind::Naive => "naive",
            EngineKind::DeltaBase => "delta-base",
        })
    }
}

/// Uniform front over all engines.
pub enum AnyEngine {
    Mvivm(Box<InsertDeleteEngine>, Option<crate::insert_only::DeltaHandle>),
    InsertOnly(Box<InsertOnlyEngine>, Option<crate::insert_only::DeltaHandle>),
    /// Keeps the last recomputed result and its predecessor.
    Naive(Box<NaiveEngine>, BTreeSet<Tuple>, BTreeSet<Tuple>),
    DeltaBase(Box<DeltaEngine>, Vec<(Sign, Tuple)>),
}

impl AnyEngine {
    pub fn new(kind: EngineKind, q: &Query, mode: Mode) -> Result<AnyEngine> {
        Ok(match kind {
            EngineKind::Mvivm => AnyEngine::Mvivm(Box::new(InsertDeleteEngine::new(q, mode)?), None),
            EngineKind::InsertOnly => AnyEngine::InsertOnly(Box::new(InsertOnlyEngine::new(q, mode)?), None),
            EngineKind::Naive => AnyEngine::Naive(Box::new(NaiveEngine::new(q)), BTreeSet::new(), BTreeSet::new()),
            EngineKind::DeltaBase => AnyEngine::DeltaBase(Box::new(DeltaEngine::new(q)), Vec::new()),
        })
    }

    pub fn contains(&self, atom: usize, t: &[Value]) -> bool {
        match self {
            AnyEngine::Mvivm(e, _) => e.contains(atom, t),
            AnyEngine::InsertOnly(e, _) => e.network().contains(atom, t),
            AnyEngine::Naive(e, ..) => e.contains(atom, t),
            AnyEngine::DeltaBase(e, _) => e.contains(atom, t),
        }
    }

    /// Would `u` change the database.
    pub fn is_legal(&self, u: &Update) -> bool {
        let present = self.contains(u.rel, &u.tuple);
        match u.sign {
            Sign::Insert => !present,
            Sign::Delete => present,
        }
    }

    pub fn apply(&mut self, u: &Update) -> Result<()> {
        match self {
            AnyEngine::Mvivm(e, h) => *h = Some(e.apply(u)?),
            AnyEngine::InsertOnly(e, h) => {
                if !insert_is_fresh(e, u) {
                    return Err(Error::DuplicateInsert(e.query().atoms[u.rel].relation.clone()));
                }
                *h = Some(e.apply(u)?)
            }
            AnyEngine::Naive(e, prev, cur) => {
                e.apply(u)?;
                *prev = std::mem::take(cur);
                *cur = e.result().into_iter().collect();
            }
            AnyEngine::DeltaBase(e, d) => *d = e.apply(u)?,
        }
        Ok(())
    }

    pub fn full(&self) -> BTreeSet<Tuple> {
        match self {
            AnyEngine::Mvivm(e, _) => e.enumerate_full().collect(),
            AnyEngine::InsertOnly(e, _) => e.enumerate_full().collect(),
            AnyEngine::Naive(_, _, cur) => cur.clone(),
            AnyEngine::DeltaBase(e, _) => e.result().iter().cloned().collect(),
        }
    }

    /// First result tuple, if any.
    pub fn first(&self) -> Option<Tuple> {
        match self {
            AnyEngine::Mvivm(e, _) => e.enumerate_full().next(),
            AnyEngine::InsertOnly(e, _) => e.enumerate_full().next(),
            AnyEngine::Naive(_, _, cur) => cur.iter().next().cloned(),
            AnyEngine::DeltaBase(e, _) => e.result().iter().next().cloned(),
        }
    }

    /// Signed change caused by the last update.
    pub fn delta(&self) -> Result<BTreeSet<(Sign, Tuple)>> {
        Ok(match self {
            AnyEngine::Mvivm(e, h) => match h {
                Some(h) => e.enumerate_delta(h)?.collect(),
                None => BTreeSet::new(),
            },
            AnyEngine::InsertOnly(e, h) => match h {
                Some(h) => e.enumerate_delta(h)?.map(|t| (Sign::Insert, t)).collect(),
                None => BTreeSet::new(),
            },
            AnyEngine::Naive(_, prev, cur) => cur
                .difference(prev)
                .map(|t| (Sign::Insert, t.clone()))
                .chain(prev.difference(cur).map(|t| (Sign::Delete, t.clone())))
                .collect(),
            AnyEngine::DeltaBase(_, d) => d.iter().cloned().collect(),
        })
    }

    /// First tuple of the last delta, if any.
    pub fn first_delta(&self) -> Result<Option<(Sign, Tuple)>> {
        Ok(match self {
            AnyEngine::Mvivm(e, Some(h)) => e.enumerate_delta(h)?.next(),
            AnyEngine::InsertOnly(e, Some(h)) => e.enumerate_delta(h)?.next().map(|t| (Sign::Insert, t)),
            _ => self.delta()?.into_iter().next(),
        })
    }
}

fn insert_is_fresh(e: &InsertOnlyEngine, u: &Update) -> bool {
    u.sign == Sign::Delete || !e.network().contains(u.rel, &u.tuple)
}

/// Per-timestamp results of one engine.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub full: Vec<BTreeSet<Tuple>>,
    pub delta: Vec<BTreeSet<(Sign, Tuple)>>,
}

/// Run `kind` over `s`, recording the full result and the delta after
/// every update.
pub fn record(kind: EngineKind, mode: Mode, q: &Query, s: &UpdateStream) -> Result<Transcript> {
    let mut e = AnyEngine::new(kind, q, mode)?;
    let mut t = Transcript::default();
    for u in &s.updates {
        e.apply(u)?;
        t.full.push(e.full());
        if mode == Mode::Delta || matches!(kind, EngineKind::Naive | EngineKind::DeltaBase) {
            t.delta.push(e.delta()?);
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Full,
    Delta,
}

/// First timestamp (1-based) at which two transcripts disagree.
pub fn first_divergence(reference: &Transcript, other: &Transcript) -> Option<(u64, Column)> {
    let n = reference.full.len().max(other.full.len());
    for i in 0..n {
        if reference.full.get(i) != other.full.get(i) {
            return Some((i as u64 + 1, Column::Full));
        }
        if !other.delta.is_empty() && reference.delta.get(i) != other.delta.get(i) {
            return Some((i as u64 + 1, Column::Delta));
        }
    }
    None
}

/// Step `kind` alongside the naive reference and report the first
/// disagreement, without keeping either transcript.
pub fn lockstep_divergence(kind: EngineKind, mode: Mode, q: &Query, s: &UpdateStream) -> Result<Option<(u64, Column)>> {
    let mut reference = AnyEngine::new(EngineKind::Naive, q, Mode::Full)?;
    let mut e = AnyEngine::new(kind, q, mode)?;
    let deltas = mode == Mode::Delta || matches!(kind, EngineKind::Naive | EngineKind::DeltaBase);
    for (i, u) in s.updates.iter().enumerate() {
        reference.apply(u)?;
        e.apply(u)?;
        let tau = i as u64 + 1;
        if reference.full() != e.full() {
            return Ok(Some((tau, Column::Full)));
        }
        if deltas && reference.delta()? != e.delta()? {
            return Ok(Some((tau, Column::Delta)));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize)]
pub struct Divergence {
    pub engine: String,
    pub tau: u64,
    pub column: Column,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub updates: usize,
    pub engines: Vec<String>,
    pub divergences: Vec<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }

    pub fn first(&self) -> Option<&Divergence> {
        self.divergences.iter().min_by_key(|d| d.tau)
    }
}

/// Compare `candidates` against the reference transcript.
pub fn compare(reference: &Transcript, candidates: &[(String, Transcript)]) -> VerifyReport {
    let mut r = VerifyReport {
        updates: reference.full.len(),
        ..Default::default()
    };
    for (name, t) in candidates {
        r.engines.push(name.clone());
        if let Some((tau, column)) = first_divergence(reference, t) {
            r.divergences.push(Divergence {
                engine: name.clone(),
                tau,
                column,
            });
        }
    }
    r
}

/// Transcripts of every engine that accepts `s`, with the recomputing
/// baseline first.
pub fn transcripts(q: &Query, s: &UpdateStream) -> Result<(Transcript, Vec<(String, Transcript)>)> {
    let reference = record(EngineKind::Naive, Mode::Full, q, s)?;
    let mut out = vec![("delta-base".to_string(), record(EngineKind::DeltaBase, Mode::Full, q, s)?)];
    let mut kinds = vec![EngineKind::Mvivm];
    if s.is_insert_only() {
        kinds.push(EngineKind::InsertOnly);
    }
    for kind in kinds {
        for mode in [Mode::Full, Mode::Delta] {
            let name = format!("{kind}/{}", if mode == Mode::Full { "full" } else { "delta" });
            out.push((name, record(kind, mode, q, s)?));
        }
    }
    Ok((reference, out))
}

/// Run every applicable engine over `s` and compare against recomputation.
pub fn verify(q: &Query, s: &UpdateStream) -> Result<VerifyReport> {
    validate_stream(q, s)?;
    let (reference, candidates) = transcripts(q, s)?;
    Ok(compare(&reference, &candidates))
}

/// One timed run.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub query: String,
    pub engine: EngineKind,
    pub kind: String,
    pub n: usize,
    pub seed: u64,
    pub total_ms: f64,
    pub final_size: usize,
    pub max_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slope: f64,
    pub r2: f64,
}

impl BenchReport {
    /// CSV with one line per size; slope and fit quality repeat on every line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,engine,kind,N,seed,total_ms,slope,r2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{:.4},{:.4}\n",
                r.query, r.engine, r.kind, r.n, r.seed, r.total_ms, self.slope, self.r2
            ));
        }
        out
    }
}

/// Least-squares fit of `ln y = a + b ln x`; returns (b, R²).
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.max(1e-9).ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (b, r2)
}

/// Wall time of one workload through one engine, plus database sizes.
pub fn time_workload(kind: EngineKind, mode: Mode, q: &Query, w: &Workload) -> Result<(f64, usize, usize)> {
    let mut e = AnyEngine::new(kind, q, mode)?;
    let mut probes = w.probes.iter().peekable();
    let mut size = 0usize;
    let mut max_size = 0usize;
    let start = Instant::now();
    for (i, u) in w.stream.updates.iter().enumerate() {
        e.apply(u)?;
        size = match u.sign {
            Sign::Insert => size + 1,
            Sign::Delete => size - 1,
        };
        max_size = max_size.max(size);
        while let Some(&&(at, p)) = probes.peek() {
            if at != i {
                break;
            }
            probes.next();
            match p {
                Probe::Full => {
                    std::hint::black_box(e.first());
                }
                Probe::Delta => {
                    std::hint::black_box(e.first_delta()?);
                }
            }
        }
    }
    Ok((start.elapsed().as_secs_f64() * 1e3, size, max_size))
}

/// Time `engine` on generated streams of each size; the fastest of
/// `repeats` runs counts. A discarded warm-up run at the smallest size
/// precedes the measurements.
pub fn measure(
    engine: EngineKind,
    mode: Mode,
    q: &Query,
    kind: StreamKind,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    if let Some(&n0) = sizes.first() {
        time_workload(engine, mode, q, &gen_stream(kind, q, n0, seed)?)?;
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let w = gen_stream(kind, q, n, seed)?;
        let mut best = f64::INFINITY;
        let mut sizes_seen = (0, 0);
        for _ in 0..repeats.max(1) {
            let (ms, fin, max) = time_workload(engine, mode, q, &w)?;
            best = best.min(ms);
            sizes_seen = (fin, max);
        }
        rows.push(BenchRow {
            query: q.name.clone(),
            engine,
            kind: kind.to_string(),
            n: w.stream.len(),
            seed,
            total_ms: best,
            final_size: sizes_seen.0,
            max_size: sizes_seen.1,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.total_ms)).collect();
    let (slope, r2) = loglog_fit(&pts);
    Ok(BenchReport { rows, slope, r2 })
}

/// Sizes like `1k,2k,4000,1m`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            let p = p.trim().to_ascii_lowercase();
            let (num, mul) = if let Some(x) = p.strip_suffix('k') {
                (x, 1_000)
            } else if let Some(x) = p.strip_suffix('m') {
                (x, 1_000_000)
            } else {
                (p.as_str(), 1)
            };
            num.parse::<usize>()
                .map(|v| v * mul)
                .map_err(|_| Error::Invalid(format!("bad size `{p}`")))
        })
        .collect()
}

/// Width summary of `q` as JSON.
pub fn analyze(q: &Query) -> Result<serde_json::Value> {
    use crate::width::{fhtw, is_acyclic, is_hierarchical, multivariate_extension, rho_star, ShowBag};
    let names = |s: crate::query::VarSet| q.varset_names(s);
    let (rho, _) = rho_star(q)?;
    let (w, td) = fhtw(q)?;
    let mut report = serde_json::json!({
        "query": q.name,
        "rho_star": rho.to_string(),
        "fhtw": w.to_string(),
        "acyclic": is_acyclic(q),
        "hierarchical": is_hierarchical(q),
        "bags": td.bags.iter().map(|&b| names(b)).collect::<Vec<_>>(),
        "insert_only_plan": InsertOnlyEngine::with_td(q, &td, Mode::Full).plan_summary(),
    });
    match multivariate_extension(q) {
        Ok(mv) => {
            let w_hat = mv.components.iter().map(|c| c.width).max().unwrap_or(w);
            report["w_hat"] = w_hat.to_string().into();
            report["components"] = mv
                .components
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "perm": c.label(),
                        "schemas": c.query.atoms.iter().map(|a| format!("{}({})", a.relation, a.schema.iter().map(|&v| c.query.vars[v].as_str()).collect::<Vec<_>>().join(","))).collect::<Vec<_>>(),
                        "fhtw": c.width.to_string(),
                        "bags": c.td.bags.iter().map(|&b| ShowBag(&c.query, b).to_string()).collect::<Vec<_>>(),
                    })
                })
                .collect::<Vec<_>>()
                .into();
        }
        Err(e) => {
            report["w_hat"] = serde_json::Value::Null;
            report["components_error"] = e.to_string().into();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{named, triangle_stream, TRIANGLE};
    use crate::query::parse_query;

    #[test]
    fn generators_are_legal_and_deterministic() {
        for name in ["triangle", "3path", "lw4", "hier"] {
            let q = named(name).unwrap();
            for kind in [StreamKind::InsertOnlyRandom, StreamKind::InsertDeleteRandom, StreamKind::Fifo] {
                let a = gen_stream(kind, &q, 300, 5).unwrap();
                let b = gen_stream(kind, &q, 300, 5).unwrap();
                assert_eq!(a.stream, b.stream);
                assert_eq!(a.stream.len(), 300, "{name} {kind}");
                validate_stream(&q, &a.stream).unwrap();
            }
        }
        let q = parse_query(TRIANGLE).unwrap();
        assert!(gen_stream(StreamKind::InsertOnlyRandom, &q, 0, 1).unwrap().stream.is_empty());
    }

    #[test]
    fn fifo_deletes_in_insertion_order() {
        let q = named("3path").unwrap();
        let w = gen_stream(StreamKind::Fifo, &q, 400, 9).unwrap();
        let ins: Vec<&Update> = w.stream.updates.iter().filter(|u| u.sign == Sign::Insert).collect();
        let del: Vec<&Update> = w.stream.updates.iter().filter(|u| u.sign == Sign::Delete).collect();
        assert!(!del.is_empty());
        for (d, i) in del.iter().zip(&ins) {
            assert_eq!((d.rel, &d.tuple), (i.rel, &i.tuple));
        }
    }

    #[test]
    fn oumv_shape() {
        let q = named("oumv").unwrap();
        for n in [1, 4, 9] {
            let w = gen_stream(StreamKind::Oumv { n: Some(n), probe: Probe::Delta }, &q, 0, 3).unwrap();
            validate_stream(&q, &w.stream).unwrap();
            let matrix = w.stream.updates.iter().take_while(|u| u.rel == 1).count();
            assert!(matrix <= n * n);
            assert_eq!(w.probes.len(), n);
            let mut last = matrix;
            for &(at, p) in &w.probes {
                assert_eq!(p, Probe::Delta);
                assert!(at + 1 - last <= 4 * n);
                last = at + 1;
            }
        }
        assert!(gen_stream(StreamKind::Oumv { n: Some(3), probe: Probe::Full }, &named("triangle").unwrap(), 0, 1).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for s in ["insert_only_random", "insert_delete_random", "fifo", "oumv", "oumv(7)", "oumv_delta(3)"] {
            assert_eq!(s.parse::<StreamKind>().unwrap().to_string(), s);
        }
        assert!("fifo(3)".parse::<StreamKind>().is_err());
        assert!("nope".parse::<StreamKind>().is_err());
        assert_eq!(parse_sizes("1k, 2K,300").unwrap(), vec![1000, 2000, 300]);
        assert!(parse_sizes("x").is_err());
    }

    #[test]
    fn fit_recovers_exponent() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x * 1000.0, 3.0 * (x * 1000.0).powf(1.5))).collect();
        let (b, r2) = loglog_fit(&pts);
        assert!((b - 1.5).abs() < 1e-9 && (r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn verify_table_stream_and_faults() {
        let q = parse_query(TRIANGLE).unwrap();
        let r = verify(&q, &triangle_stream()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(verify(&q, &UpdateStream::default()).unwrap().passed());
        let (reference, mut cands) = transcripts(&q, &triangle_stream()).unwrap();
        let t = &mut cands.last_mut().unwrap().1;
        let abc = crate::value::tuple_of(&["a1", "b1", "c1"]);
        t.full[3].remove(&abc);
        let r = compare(&reference, &cands);
        let d = r.first().unwrap();
        assert_eq!((d.tau, d.column), (4, Column::Full));
        let t = &mut cands[0].1;
        t.delta[2].clear();
        assert_eq!(compare(&reference, &cands).first().unwrap().tau, 3);
    }

    #[test]
    fn timing_runs_every_engine() {
        let q = named("triangle").unwrap();
        let w = gen_stream(StreamKind::InsertOnlyRandom, &q, 200, 1).unwrap();
        for kind in [EngineKind::Mvivm, EngineKind::InsertOnly, EngineKind::Naive, EngineKind::DeltaBase] {
            let (_, fin, max) = time_workload(kind, Mode::Full, &q, &w).unwrap();
            assert_eq!((fin, max), (200, 200));
        }
        let r = measure(EngineKind::DeltaBase, Mode::Full, &q, StreamKind::Fifo, &[100, 200, 400, 800], 1, 2).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.to_csv().starts_with("query,engine,kind,N,seed,total_ms,slope,r2\ntriangle,delta-base,fifo,100,2,"));
    }

    #[test]
    fn analyze_triangle() {
        let r = analyze(&named("triangle").unwrap()).unwrap();
        assert_eq!(r["fhtw"], "3/2");
        assert_eq!(r["w_hat"], "3/2");
        assert_eq!(r["acyclic"], false);
        assert_eq!(r["components"].as_array().unwrap().len(), 6);
    }
}
