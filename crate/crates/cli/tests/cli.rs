use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use dgoim::bench::iterated_app;
use dgoim::term::{alpha_eq, parse, Strategy, Term};
use dgoim::translate::translate_term;

fn dgoim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgoim")).args(args).output().expect("spawn dgoim")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn example(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "terms", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dgoim-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_term(name: &str, text: &str) -> String {
    let p = scratch(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn result_line(out: &str) -> Term {
    let line = out.lines().find_map(|l| l.strip_prefix("result: ")).expect("result line");
    parse(line, Strategy::Need).unwrap()
}

#[test]
fn run_identity_application() {
    let o = dgoim(&["run", "--strategy", "need", "--machine", "rewrites-first", &example("idid.lam")]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("beta=1 sigma=1 "), "{out}");
    assert!(alpha_eq(&result_line(&out), &parse(r"(\y. y)[x <- \y. y]", Strategy::Need).unwrap()));
}

#[test]
fn oracle_agrees_on_beta() {
    let o = dgoim(&["run", "--machine", "oracle", &example("idid.lam")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("beta=1 "));
}

#[test]
fn baselines_reach_the_value() {
    for m in ["passes-only", "jumping"] {
        let o = dgoim(&["run", "--machine", m, &example("idid.lam")]);
        assert_eq!(code(&o), 0);
        let out = stdout(&o);
        assert!(out.contains("graphUnchanged=true"));
        assert!(alpha_eq(&result_line(&out), &parse(r"\y. y", Strategy::Need).unwrap()));
    }
}

#[test]
fn unsupported_combination_and_bad_input() {
    assert_eq!(code(&dgoim(&["run", "--machine", "jumping", "--strategy", "cbv-lr", &example("idid.lam")])), 1);
    assert_eq!(code(&dgoim(&["run", &write_term("open.lam", "x")])), 1);
    assert_eq!(code(&dgoim(&["run", &write_term("bad.lam", r"(\x. ")])), 1);
    assert_eq!(code(&dgoim(&["run", "/nonexistent/term.lam"])), 1);
}

#[test]
fn compare_exit_codes() {
    for s in ["need", "cbv-lr", "cbv-rl"] {
        let o = dgoim(&["compare", "--strict", "--strategy", s, &example("idid.lam")]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
    }
    let o = dgoim(&["compare", "--inject-fault", "beta-keeps-position", &example("idid.lam")]);
    assert_eq!(code(&o), 4);
    let omega = write_term("omega.lam", r"(\x. x x) (\x. x x)");
    assert_eq!(code(&dgoim(&["compare", "--fuel", "500", &omega])), 2);
    assert_eq!(code(&dgoim(&["run", "--fuel", "500", &omega])), 2);
    assert_eq!(code(&dgoim(&["run", "--machine", "oracle", "--fuel", "500", &omega])), 2);
}

#[test]
fn invariant_checks_catch_faults() {
    let o = dgoim(&["run", "--check", "--inject-fault", "dereliction-skips-mark", &example("idid.lam")]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&dgoim(&["run", "--check", &example("idid.lam")])), 0);
}

#[test]
fn trace_replays() {
    let trace = scratch("t.jsonl");
    let t = trace.to_string_lossy().into_owned();
    let dot = scratch("final.dot");
    let o = dgoim(&["run", "--trace", &t, "--dot-final", &dot.to_string_lossy(), "--dot-every", "5", &example("idid.lam")]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    assert!(scratch("final.000005.dot").exists());
    let r = dgoim(&["replay", &t]);
    assert_eq!(code(&r), 0, "{}", stdout(&r));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(0);
    let tampered = scratch("tampered.jsonl");
    fs::write(&tampered, lines.join("\n")).unwrap();
    assert_eq!(code(&dgoim(&["replay", &tampered.to_string_lossy()])), 3);
}

#[test]
fn gen_is_deterministic() {
    let a = scratch("gen-a");
    let b = scratch("gen-b");
    for d in [&a, &b] {
        let o = dgoim(&["gen", "--seed", "42", "--count", "3", "--max-size", "20", "--out", &d.to_string_lossy()]);
        assert_eq!(code(&o), 0);
    }
    for i in 0..3 {
        let name = format!("term-{i:04}.lam");
        let x = fs::read(a.join(&name)).unwrap();
        assert_eq!(x, fs::read(b.join(&name)).unwrap());
        let t = parse(std::str::from_utf8(&x).unwrap(), Strategy::Need).unwrap();
        assert!(t.is_closed() && dgoim::term::size(&t) <= 20);
    }
}

#[test]
fn bench_csv() {
    let csv = scratch("bench.csv");
    let o = dgoim(&["bench", "--family", "iterated-app", "--machine", "passes-only", "--csv", &csv.to_string_lossy()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "termFamily,k,|t|,|Eval|_β,|Eval|_σ,|Eval|_ε,|Exec|_β,|Exec|_σ,|Exec|_ε,|Exec|_εR,weightedCost,maxGraphSize,maxTokenCells"
    );
    assert_eq!(lines.len(), 11);
    for (k, l) in (1..=10).zip(&lines[1..]) {
        let g0 = translate_term(&iterated_app(k, Strategy::Need)).graph.size();
        assert_eq!(l.split(',').nth(11).unwrap(), g0.to_string());
    }
    assert!(!text.contains('\r'));
    let o = dgoim(&["bench", "--family", "eta-depth", "--machine", "jumping", "--k-max", "6"]);
    assert_eq!(code(&o), 0);
}
