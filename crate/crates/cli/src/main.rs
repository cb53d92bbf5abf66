use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dgoim::baselines::{cbn_run_with, jump_run_with, BaselineOptions, BaselineOutcome, BaselineReport};
use dgoim::bench::{bench_row, ratio_checks, BenchMachine, Family, CSV_HEADER};
use dgoim::check::{check_run, CheckOptions};
use dgoim::corpus::gen_corpus;
use dgoim::cosim::{check_final, cosimulate, CoSimOptions, CoSimOutcome};
use dgoim::machine::{run_observed, Fault, GraphDelta, Kind, Outcome, RunOptions, TraceRecord};
use dgoim::submachine::{check_program, evaluate_with, EvalError};
use dgoim::term::{parse, render, Strategy, Term};
use dgoim::translate::{read_subterm, readback, translate_term};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_FUEL: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_LOCKSTEP: u8 = 4;
const EXIT_FINAL_MISMATCH: u8 = 5;

#[derive(Parser)]
#[command(name = "dgoim", version, about = "Token-guided graph-rewriting machine for lambda-calculus evaluation strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one machine on a term file.
    Run(RunArgs),
    /// Co-simulate the rewrites-first machine against the oracle.
    Compare(CompareArgs),
    /// Emit cost and space rows for scaling term families.
    Bench(BenchArgs),
    /// Generate random closed terms.
    Gen(GenArgs),
    /// Re-tally a JSONL trace and check it against its summary line.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Need,
    CbvLr,
    CbvRl,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Need => Strategy::Need,
            StrategyArg::CbvLr => Strategy::LeftToRightValue,
            StrategyArg::CbvRl => Strategy::RightToLeftValue,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MachineArg {
    RewritesFirst,
    PassesOnly,
    Jumping,
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    DerelictionSkipsMark,
    BetaKeepsPosition,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::DerelictionSkipsMark => Fault::DerelictionSkipsMark,
            FaultArg::BetaKeepsPosition => Fault::BetaKeepsPosition,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    ChurchExp,
    IteratedApp,
    EtaDepth,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::ChurchExp => Family::ChurchExp,
            FamilyArg::IteratedApp => Family::IteratedApp,
            FamilyArg::EtaDepth => Family::EtaDepth,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "need")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 100_000)]
    fuel: u64,
    /// Corrupt one machine transition, for testing the checkers.
    #[arg(long, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "rewrites-first")]
    machine: MachineArg,
    /// Write one JSON record per transition.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final graph in DOT format.
    #[arg(long)]
    dot_final: Option<PathBuf>,
    /// Also write a DOT snapshot every N transitions, next to the --dot-final file.
    #[arg(long, requires = "dot_final")]
    dot_every: Option<u64>,
    /// Write sampled graph and token sizes.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    sample_every: u64,
    /// Check structural invariants after every transition.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct CompareArgs {
    file: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Compare the graph with the translated oracle state after every reduction.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "family", value_enum, default_values = ["church-exp", "iterated-app"])]
    families: Vec<FamilyArg>,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, value_enum, default_value = "need")]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "rewrites-first")]
    machine: MachineArg,
    #[arg(long, default_value_t = 10_000_000)]
    fuel: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 50)]
    max_size: usize,
    #[arg(long, value_enum, default_value = "need")]
    strategy: StrategyArg,
    /// Write one file per term into this directory instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    trace: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Gen(a) => cmd_gen(&a),
        Command::Replay(a) => cmd_replay(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load(file: &Path, s: Strategy) -> Result<Term> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let t = parse(&text, s)?;
    check_program(&t)?;
    Ok(t)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn snapshot_path(base: &Path, step: u64) -> PathBuf {
    let stem = base.file_stem().map_or("graph".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}.{step:06}.dot"))
}

fn cmd_run(a: &RunArgs) -> Result<u8> {
    let s: Strategy = a.common.strategy.into();
    if matches!(a.machine, MachineArg::PassesOnly | MachineArg::Jumping) && s != Strategy::Need {
        eprintln!("error: passes-only and jumping machines support only --strategy need");
        return Ok(EXIT_INPUT);
    }
    let t = load(&a.file, s)?;
    match a.machine {
        MachineArg::RewritesFirst => run_rewrites_first(a, &t),
        MachineArg::Oracle => run_oracle(a, &t),
        MachineArg::PassesOnly | MachineArg::Jumping => run_baseline(a, &t),
    }
}

fn run_rewrites_first(a: &RunArgs, t: &Term) -> Result<u8> {
    let fault = a.common.inject_fault.map(Fault::from);
    let g = translate_term(t).graph;
    if a.check {
        let rep = check_run(g.clone(), &CheckOptions { fuel: a.common.fuel, fault, ..CheckOptions::default() })?;
        if !rep.ok() {
            for v in &rep.violations {
                eprintln!("invariant violation at step {}: {:?} {:?}", v.step, v.rule, v.kind);
            }
            return Ok(EXIT_INVARIANT);
        }
    }
    let mut trace = a.trace.as_deref().map(create).transpose()?;
    let mut io_err: Option<std::io::Error> = None;
    let mut prev = g.metrics();
    let mut step = 0u64;
    let opts = RunOptions {
        fuel: a.common.fuel,
        sample_every: a.csv.as_ref().map(|_| a.sample_every),
        fault,
    };
    let rep = run_observed(g, &opts, |m, tr| {
        step += 1;
        let delta = (tr.kind == Kind::Rewrite).then(|| {
            let now = m.graph.metrics();
            let d = GraphDelta {
                nodes: now.node_count as i64 - prev.node_count as i64,
                links: now.link_count as i64 - prev.link_count as i64,
            };
            prev = now;
            d
        });
        if let Some(w) = trace.as_mut() {
            let rec = TraceRecord::new(step, m, tr, delta);
            if let Err(e) = serde_json::to_writer(&mut *w, &rec).map_err(std::io::Error::from).and_then(|_| writeln!(w)) {
                io_err.get_or_insert(e);
            }
        }
        if let (Some(k), Some(base)) = (a.dot_every, a.dot_final.as_ref()) {
            if k > 0 && step.is_multiple_of(k) {
                if let Err(e) = fs::write(snapshot_path(base, step), m.graph.to_dot(Some(m.pos))) {
                    io_err.get_or_insert(e);
                }
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing trace or snapshots");
    }
    let c = rep.counters;
    if let Some(mut w) = trace {
        let summary = json!({ "summary": {
            "machine": "rewrites-first",
            "beta": c.beta(), "sigma": c.sigma(), "eps": c.eps(), "epsRewrite": c.eps_rewrite(), "total": c.total(),
        }});
        writeln!(w, "{summary}")?;
        w.flush()?;
    }
    if let Some(p) = &a.dot_final {
        fs::write(p, rep.state.graph.to_dot(Some(rep.state.pos)))?;
    }
    if let Some(p) = &a.csv {
        let mut w = create(p)?;
        writeln!(w, "step,nodeCount,linkCount,boxCount,maxBoxSize,tokenCells")?;
        for s in &rep.size_series {
            writeln!(w, "{},{},{},{},{},{}", s.step, s.graph.node_count, s.graph.link_count, s.graph.box_count, s.graph.max_box_size, s.token_cells)?;
        }
        w.flush()?;
    }
    println!(
        "beta={} sigma={} eps={} epsR={} total={} weightedCost={} maxGraphSize={} maxTokenCells={}",
        c.beta(),
        c.sigma(),
        c.eps(),
        c.eps_rewrite(),
        c.total(),
        rep.weighted_cost,
        rep.max_graph_size,
        rep.max_token_cells
    );
    match rep.outcome {
        Outcome::Final => {
            println!("outcome: final");
            match readback(&rep.state.graph) {
                Ok(r) => println!("result: {}", render(&r)),
                Err(e) => println!("result: unreadable ({e})"),
            }
            Ok(EXIT_OK)
        }
        Outcome::FuelExhausted => {
            println!("outcome: fuel exhausted");
            Ok(EXIT_FUEL)
        }
        Outcome::NoRedexMatch(msg) => {
            println!("outcome: no redex match: {msg}");
            Ok(EXIT_INVARIANT)
        }
    }
}

fn run_oracle(a: &RunArgs, t: &Term) -> Result<u8> {
    let (counts, code) = match evaluate_with(t, a.common.fuel, a.trace.is_some()) {
        Ok(rep) => {
            if let Some(p) = &a.trace {
                let mut w = create(p)?;
                for e in rep.trace.iter().flatten() {
                    serde_json::to_writer(&mut w, &json!({
                        "machine": "oracle", "step": e.step, "rule": e.rule, "label": e.label.as_str(),
                        "state": e.state, "focusPath": e.focus_path,
                    }))?;
                    writeln!(w)?;
                }
                let c = &rep.counts;
                let summary = json!({ "summary": {
                    "machine": "oracle", "beta": c.beta, "sigma": c.sigma, "eps": c.eps, "total": c.total(),
                }});
                writeln!(w, "{summary}")?;
                w.flush()?;
            }
            println!("beta={} sigma={} eps={} total={}", rep.counts.beta, rep.counts.sigma, rep.counts.eps, rep.steps);
            println!("outcome: answer");
            println!("result: {}", render(&rep.answer.to_term()));
            return Ok(EXIT_OK);
        }
        Err(EvalError::FuelExhausted { counts, .. }) => (counts, EXIT_FUEL),
        Err(EvalError::Stuck { step, state }) => {
            println!("outcome: stuck at step {step}: {state}");
            return Ok(EXIT_INVARIANT);
        }
        Err(e) => bail!(e),
    };
    println!("beta={} sigma={} eps={} total={}", counts.beta, counts.sigma, counts.eps, counts.total());
    println!("outcome: fuel exhausted");
    Ok(code)
}

fn run_baseline(a: &RunArgs, t: &Term) -> Result<u8> {
    if a.trace.is_some() || a.dot_every.is_some() || a.inject_fault_set() {
        eprintln!("error: --trace, --dot-every and --inject-fault apply to the rewrites-first machine and the oracle");
        return Ok(EXIT_INPUT);
    }
    let g = translate_term(t).graph;
    let opts = BaselineOptions { fuel: a.common.fuel, sample_every: a.csv.as_ref().map(|_| a.sample_every) };
    let jumping = a.machine == MachineArg::Jumping;
    let rep: BaselineReport = if jumping { jump_run_with(&g, &opts) } else { cbn_run_with(&g, &opts) }.map_err(anyhow::Error::msg)?;
    if let Some(p) = &a.dot_final {
        fs::write(p, g.to_dot(rep.value()))?;
    }
    if let Some(p) = &a.csv {
        let mut w = create(p)?;
        writeln!(w, "step,tokenCells")?;
        for (step, cells) in &rep.cells_series {
            writeln!(w, "{step},{cells}")?;
        }
        w.flush()?;
    }
    println!(
        "transitions={} jumps={} graphSize={} graphUnchanged={} maxTokenCells={} maxTokenBits={}",
        rep.transitions, rep.jumps, rep.graph_size, rep.graph_unchanged, rep.max_token_cells, rep.max_token_bits
    );
    if !rep.graph_unchanged {
        println!("outcome: graph changed");
        return Ok(EXIT_INVARIANT);
    }
    match &rep.outcome {
        BaselineOutcome::Value(l) => {
            println!("outcome: value at {l}");
            match read_subterm(&g, *l) {
                Ok(v) => println!("result: {}", render(&v)),
                Err(e) => println!("result: unreadable ({e})"),
            }
            Ok(EXIT_OK)
        }
        BaselineOutcome::FuelExhausted => {
            println!("outcome: fuel exhausted");
            Ok(EXIT_FUEL)
        }
        BaselineOutcome::StuckToken(msg) => {
            println!("outcome: stuck: {msg}");
            Ok(EXIT_INVARIANT)
        }
    }
}

impl RunArgs {
    fn inject_fault_set(&self) -> bool {
        self.common.inject_fault.is_some()
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<u8> {
    let t = load(&a.file, a.common.strategy.into())?;
    let opts = CoSimOptions {
        fuel: a.common.fuel,
        strict_graphs: a.strict,
        fault: a.common.inject_fault.map(Fault::from),
    };
    let rep = cosimulate(&t, &opts)?;
    let hist = rep.n_histogram;
    println!(
        "oracle: beta={} sigma={} eps={} | machine: beta={} sigma={} eps={} epsR={} | max n={} n histogram {hist:?}",
        rep.oracle.beta,
        rep.oracle.sigma,
        rep.oracle.eps,
        rep.machine.beta(),
        rep.machine.sigma(),
        rep.machine.eps(),
        rep.machine.eps_rewrite(),
        rep.max_n
    );
    match &rep.outcome {
        CoSimOutcome::FuelExhausted => {
            println!("outcome: fuel exhausted, aligned so far");
            Ok(EXIT_FUEL)
        }
        CoSimOutcome::Misalignment { step, reason } => {
            println!("outcome: lockstep violation at oracle step {step}: {reason}");
            Ok(EXIT_LOCKSTEP)
        }
        CoSimOutcome::Aligned => {
            let (answer, state) = (rep.answer.as_ref().expect("aligned"), rep.final_state.as_ref().expect("aligned"));
            let fc = check_final(answer, &state.graph);
            println!("answer: {}", render(&answer.to_term()));
            println!("final graph isomorphic: {} readback equivalent: {}", fc.isomorphic, fc.readback_equivalent);
            if fc.isomorphic && fc.readback_equivalent {
                println!("outcome: aligned");
                Ok(EXIT_OK)
            } else {
                println!("outcome: final mismatch");
                Ok(EXIT_FINAL_MISMATCH)
            }
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<u8> {
    let s: Strategy = a.strategy.into();
    let machine = match a.machine {
        MachineArg::RewritesFirst => BenchMachine::RewritesFirst,
        MachineArg::PassesOnly => BenchMachine::PassesOnly,
        MachineArg::Jumping => BenchMachine::Jumping,
        MachineArg::Oracle => {
            eprintln!("error: bench measures a machine against the oracle; choose a machine");
            return Ok(EXIT_INPUT);
        }
    };
    if machine != BenchMachine::RewritesFirst && s != Strategy::Need {
        eprintln!("error: passes-only and jumping machines support only --strategy need");
        return Ok(EXIT_INPUT);
    }
    let mut out: Box<dyn Write> = match &a.csv {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "{CSV_HEADER}")?;
    let mut ok = true;
    for &f in &a.families {
        let family: Family = f.into();
        let mut rows = Vec::new();
        for k in a.k_min..=a.k_max {
            match bench_row(family, k, s, machine, a.fuel) {
                Ok(r) => {
                    writeln!(out, "{}", r.csv())?;
                    rows.push(r);
                }
                Err(e) => {
                    let size = dgoim::term::size(&family.term(k, s));
                    writeln!(out, "{family},{k},{size},,,,,,,,,,")?;
                    eprintln!("{e}");
                }
            }
        }
        if rows.len() < 2 {
            continue;
        }
        if family == Family::EtaDepth {
            if machine == BenchMachine::Jumping {
                for r in &rows {
                    let bound = (1u128 << r.k.min(127)) - 1;
                    let pass = r.max_token_cells >= bound;
                    ok &= pass;
                    eprintln!("{} {family} k={} maxTokenCells {} >= {bound}", verdict(pass), r.k, r.max_token_cells);
                }
            }
            continue;
        }
        for c in ratio_checks(&rows) {
            ok &= c.ok;
            eprintln!("{} {family} {} slope={:.4} mean={:.4} max={:.4}", verdict(c.ok), c.name, c.slope, c.mean, c.max);
        }
    }
    out.flush()?;
    Ok(if ok { EXIT_OK } else { EXIT_INVARIANT })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_gen(a: &GenArgs) -> Result<u8> {
    if a.max_size < 3 {
        bail!("--max-size must be at least 3");
    }
    let s: Strategy = a.strategy.into();
    let terms = gen_corpus(a.seed, a.count, a.max_size, s);
    match &a.out {
        None => {
            for t in &terms {
                println!("{}", render(t));
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (i, t) in terms.iter().enumerate() {
                let body = format!("# strategy: {s}\n# seed: {} index: {i}\n{}\n", a.seed, render(t));
                let path = dir.join(format!("term-{i:04}.lam"));
                let tmp = dir.join(format!(".term-{i:04}.lam.tmp"));
                fs::write(&tmp, body)?;
                fs::rename(&tmp, &path)?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Default, Debug, PartialEq, Eq)]
struct Tally {
    beta: u64,
    sigma: u64,
    eps: u64,
    eps_rewrite: u64,
    total: u64,
}

fn cmd_replay(a: &ReplayArgs) -> Result<u8> {
    let f = fs::File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?;
    let mut tally = Tally::default();
    let mut summary = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        if let Some(s) = v.get("summary") {
            summary = Some(s.clone());
            continue;
        }
        let label = v.get("label").and_then(|l| l.as_str()).unwrap_or_default().to_ascii_lowercase();
        let rewrite = v.get("kind").and_then(|k| k.as_str()) == Some("rewrite");
        match label.as_str() {
            "beta" => tally.beta += 1,
            "sigma" => tally.sigma += 1,
            "eps" => {
                tally.eps += 1;
                tally.eps_rewrite += u64::from(rewrite);
            }
            other => bail!("line {}: unknown label {other:?}", i + 1),
        }
        tally.total += 1;
    }
    println!(
        "replayed: beta={} sigma={} eps={} epsR={} total={}",
        tally.beta, tally.sigma, tally.eps, tally.eps_rewrite, tally.total
    );
    let Some(s) = summary else {
        println!("no summary record");
        return Ok(EXIT_INVARIANT);
    };
    let get = |k: &str| s.get(k).and_then(|v| v.as_u64());
    let expected = Tally {
        beta: get("beta").unwrap_or(0),
        sigma: get("sigma").unwrap_or(0),
        eps: get("eps").unwrap_or(0),
        eps_rewrite: get("epsRewrite").unwrap_or(tally.eps_rewrite),
        total: get("total").unwrap_or(0),
    };
    if expected == tally {
        println!("counters match");
        Ok(EXIT_OK)
    } else {
        println!("counters differ from summary: {expected:?}");
        Ok(EXIT_INVARIANT)
    }
}
