//! Scaling term families and the cost rows measured on them.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::{cbn_run, jump_run};
use crate::machine::{run, Outcome};
use crate::submachine::evaluate;
use crate::term::{size, Strategy, Term};
use crate::translate::translate_term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    ChurchExp,
    IteratedApp,
    EtaDepth,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::ChurchExp, Family::IteratedApp, Family::EtaDepth];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::ChurchExp => "church-exp",
            Family::IteratedApp => "iterated-app",
            Family::EtaDepth => "eta-depth",
        }
    }

    pub fn term(self, k: usize, s: Strategy) -> Term {
        match self {
            Family::ChurchExp => church_exp(k, s),
            Family::IteratedApp => iterated_app(k, s),
            Family::EtaDepth => eta_depth(k, s),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| format!("unknown family {s}"))
    }
}

fn id(x: &str) -> Term {
    Term::abs(x, Term::var(x))
}

/// `λf.λa. f (f (... a))` with `n` applications.
pub fn church(n: usize, s: Strategy) -> Term {
    let mut body = Term::var("a");
    for _ in 0..n {
        body = Term::app(s, Term::var("f"), body);
    }
    Term::abs("f", Term::abs("a", body))
}

/// `c_k c_2 I I`, which computes `c_(2^k)` and applies it to identities.
pub fn church_exp(k: usize, s: Strategy) -> Term {
    let e = Term::app(s, church(k, s), church(2, s));
    Term::app(s, Term::app(s, e, id("u")), id("v"))
}

/// `(λx. x x ... x) (λy.y)` with `k + 1` occurrences of `x`.
pub fn iterated_app(k: usize, s: Strategy) -> Term {
    let mut body = Term::var("x");
    for _ in 0..k {
        body = Term::app(s, body, Term::var("x"));
    }
    Term::app(s, Term::abs("x", body), id("y"))
}

/// `((λf. E_k) (λw.w)) (λv.v)` where `E_1 = λz. f z` and
/// `E_(j+1) = λx_j. E_j x_j`.
pub fn eta_depth(k: usize, s: Strategy) -> Term {
    let mut e = Term::abs("z", Term::app(s, Term::var("f"), Term::var("z")));
    for j in 1..k.max(1) {
        let x = format!("x{j}");
        e = Term::abs(x.clone(), Term::app(s, e, Term::var(x)));
    }
    Term::app(s, Term::app(s, Term::abs("f", e), id("w")), id("v"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BenchMachine {
    RewritesFirst,
    PassesOnly,
    Jumping,
}

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "termFamily,k,|t|,|Eval|_β,|Eval|_σ,|Eval|_ε,|Exec|_β,|Exec|_σ,|Exec|_ε,|Exec|_εR,weightedCost,maxGraphSize,maxTokenCells";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub term_family: Family,
    pub k: usize,
    pub term_size: usize,
    pub eval_beta: u64,
    pub eval_sigma: u64,
    pub eval_eps: u64,
    pub exec_beta: u64,
    pub exec_sigma: u64,
    pub exec_eps: u64,
    pub exec_eps_rewrite: u64,
    pub weighted_cost: u64,
    pub max_graph_size: usize,
    pub max_token_cells: u128,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.term_family,
            self.k,
            self.term_size,
            self.eval_beta,
            self.eval_sigma,
            self.eval_eps,
            self.exec_beta,
            self.exec_sigma,
            self.exec_eps,
            self.exec_eps_rewrite,
            self.weighted_cost,
            self.max_graph_size,
            self.max_token_cells
        )
    }

    fn denom(&self) -> f64 {
        self.eval_beta.max(1) as f64
    }

    pub fn sigma_ratio(&self) -> f64 {
        self.exec_sigma as f64 / self.denom()
    }

    pub fn eps_rewrite_ratio(&self) -> f64 {
        self.exec_eps_rewrite as f64 / self.denom()
    }

    pub fn eps_ratio(&self) -> f64 {
        self.exec_eps as f64 / (self.term_size as f64 * self.denom())
    }

    pub fn cost_ratio(&self) -> f64 {
        self.weighted_cost as f64 / (self.term_size as f64 * self.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("{family} k={k}: oracle did not reach an answer: {msg}")]
    Oracle { family: Family, k: usize, msg: String },
    #[error("{family} k={k}: machine did not finish: {msg}")]
    Machine { family: Family, k: usize, msg: String },
}

/// Measures one family member. The `|Exec|` columns and `weightedCost` come
/// from the rewrites-first machine; `maxGraphSize` and `maxTokenCells` come
/// from `machine`.
pub fn bench_row(
    family: Family,
    k: usize,
    s: Strategy,
    machine: BenchMachine,
    fuel: u64,
) -> Result<BenchRow, BenchError> {
    let t = family.term(k, s);
    let eval = evaluate(&t, fuel).map_err(|e| BenchError::Oracle { family, k, msg: e.to_string() })?;
    let g = translate_term(&t).graph;
    let machine_err = |msg: String| BenchError::Machine { family, k, msg };
    let exec = run(g.clone(), fuel).map_err(|e| machine_err(e.to_string()))?;
    if exec.outcome != Outcome::Final {
        return Err(machine_err(format!("{:?}", exec.outcome)));
    }
    let (max_graph_size, max_token_cells) = match machine {
        BenchMachine::RewritesFirst => (exec.max_graph_size, exec.max_token_cells as u128),
        BenchMachine::PassesOnly | BenchMachine::Jumping => {
            let rep = if machine == BenchMachine::Jumping { jump_run(&g, fuel) } else { cbn_run(&g, fuel) }
                .map_err(machine_err)?;
            if rep.value().is_none() {
                return Err(machine_err(format!("{:?}", rep.outcome)));
            }
            if !rep.graph_unchanged {
                return Err(machine_err("graph changed".into()));
            }
            (rep.graph_size, rep.max_token_cells)
        }
    };
    let c = exec.counters;
    Ok(BenchRow {
        term_family: family,
        k,
        term_size: size(&t),
        eval_beta: eval.counts.beta,
        eval_sigma: eval.counts.sigma,
        eval_eps: eval.counts.eps,
        exec_beta: c.beta(),
        exec_sigma: c.sigma(),
        exec_eps: c.eps(),
        exec_eps_rewrite: c.eps_rewrite(),
        weighted_cost: exec.weighted_cost,
        max_graph_size,
        max_token_cells,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Relative slope tolerance for the ratio checks.
pub const SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct RatioCheck {
    pub name: &'static str,
    pub slope: f64,
    pub mean: f64,
    pub max: f64,
    pub ok: bool,
}

type Ratio = fn(&BenchRow) -> f64;

/// Fits each ratio against `k`; a ratio passes when its slope is at most
/// `SLOPE_TOLERANCE` times its mean.
pub fn ratio_checks(rows: &[BenchRow]) -> Vec<RatioCheck> {
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ratios: [(&'static str, Ratio); 4] = [
        ("sigma/beta", BenchRow::sigma_ratio),
        ("epsR/beta", BenchRow::eps_rewrite_ratio),
        ("eps/(size*beta)", BenchRow::eps_ratio),
        ("cost/(size*beta)", BenchRow::cost_ratio),
    ];
    ratios
        .into_iter()
        .map(|(name, f)| {
            let ys: Vec<f64> = rows.iter().map(f).collect();
            let mean = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
            let max = ys.iter().copied().fold(0.0, f64::max);
            let slope = slope(&xs, &ys);
            RatioCheck { name, slope, mean, max, ok: slope <= SLOPE_TOLERANCE * mean.abs() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_eq, parse, render};

    #[test]
    fn families_have_the_expected_shape() {
        let s = Strategy::Need;
        assert!(alpha_eq(&church_exp(1, s), &parse(r"(\f.\a. f a) (\g.\b. g (g b)) (\u.u) (\v.v)", s).unwrap()));
        assert!(alpha_eq(&iterated_app(2, s), &parse(r"(\x. x x x) (\y. y)", s).unwrap()), "{}", render(&iterated_app(2, s)));
        assert!(alpha_eq(
            &eta_depth(3, s),
            &parse(r"(\f. \x2. (\x1. (\z. f z) x1) x2) (\w. w) (\v. v)", s).unwrap()
        ));
    }

    #[test]
    fn church_exp_counts_grow() {
        let rows: Vec<_> = (1..=4)
            .map(|k| bench_row(Family::ChurchExp, k, Strategy::Need, BenchMachine::RewritesFirst, 1_000_000).unwrap())
            .collect();
        for r in &rows {
            assert_eq!(r.exec_beta, r.eval_beta);
        }
        assert!(rows.windows(2).all(|w| w[1].eval_beta > w[0].eval_beta));
    }

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-12);
        assert_eq!(slope(&[1.0, 2.0], &[5.0, 5.0]), 0.0);
    }

    #[test]
    fn csv_row_matches_header() {
        let r = bench_row(Family::IteratedApp, 2, Strategy::Need, BenchMachine::PassesOnly, 100_000).unwrap();
        assert_eq!(r.csv().split(',').count(), CSV_HEADER.split(',').count());
        assert!(r.csv().starts_with("iterated-app,2,"));
    }
}
