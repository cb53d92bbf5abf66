//! Terms of the three-strategy calculus with explicit substitutions, their
//! concrete syntax, and the static measures used by the cost analysis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Evaluation strategy carried by every application node of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Need,
    LeftToRightValue,
    RightToLeftValue,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Need,
        Strategy::LeftToRightValue,
        Strategy::RightToLeftValue,
    ];

    /// Short command-line name.
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Need => "need",
            Strategy::LeftToRightValue => "cbv-lr",
            Strategy::RightToLeftValue => "cbv-rl",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "need" => Ok(Strategy::Need),
            "cbv-lr" | "lr" => Ok(Strategy::LeftToRightValue),
            "cbv-rl" | "rl" => Ok(Strategy::RightToLeftValue),
            other => Err(format!("unknown strategy `{other}` (expected need, cbv-lr, cbv-rl)")),
        }
    }
}

/// Variable name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Name(pub String);

impl Name {
    pub fn new(s: impl Into<String>) -> Self {
        Name(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The name with any trailing digits removed.
    pub fn stem(&self) -> &str {
        self.0.trim_end_matches(|c: char| c.is_ascii_digit())
    }

    fn numeric_suffix(&self) -> Option<u64> {
        let digits = &self.0[self.stem().len()..];
        digits.parse().ok()
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Name),
    Abs(Name, Box<Term>),
    App(Strategy, Box<Term>, Box<Term>),
    /// `body [binder <- bound]`
    ESub(Box<Term>, Name, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(Name::new(name))
    }

    pub fn abs(binder: impl Into<String>, body: Term) -> Term {
        Term::Abs(Name::new(binder), Box::new(body))
    }

    pub fn app(strategy: Strategy, fun: Term, arg: Term) -> Term {
        Term::App(strategy, Box::new(fun), Box::new(arg))
    }

    pub fn esub(body: Term, binder: impl Into<String>, bound: Term) -> Term {
        Term::ESub(Box::new(body), Name::new(binder), Box::new(bound))
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Term::Abs(..))
    }

    /// True iff the term contains no explicit substitution.
    pub fn is_pure(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::Abs(_, b) => b.is_pure(),
            Term::App(_, f, a) => f.is_pure() && a.is_pure(),
            Term::ESub(..) => false,
        }
    }

    pub fn is_closed(&self) -> bool {
        free_vars(self).is_empty()
    }

    /// Strategies used by the application nodes, in no particular order.
    pub fn strategies(&self) -> HashSet<Strategy> {
        fn go(t: &Term, acc: &mut HashSet<Strategy>) {
            match t {
                Term::Var(_) => {}
                Term::Abs(_, b) => go(b, acc),
                Term::App(s, f, a) => {
                    acc.insert(*s);
                    go(f, acc);
                    go(a, acc);
                }
                Term::ESub(b, _, u) => {
                    go(b, acc);
                    go(u, acc);
                }
            }
        }
        let mut acc = HashSet::new();
        go(self, &mut acc);
        acc
    }

    /// All binder names (abstractions and explicit substitutions) in pre-order.
    pub fn binders(&self) -> Vec<Name> {
        fn go(t: &Term, acc: &mut Vec<Name>) {
            match t {
                Term::Var(_) => {}
                Term::Abs(x, b) => {
                    acc.push(x.clone());
                    go(b, acc);
                }
                Term::App(_, f, a) => {
                    go(f, acc);
                    go(a, acc);
                }
                Term::ESub(b, x, u) => {
                    acc.push(x.clone());
                    go(b, acc);
                    go(u, acc);
                }
            }
        }
        let mut acc = Vec::new();
        go(self, &mut acc);
        acc
    }

    pub fn has_distinct_binders(&self) -> bool {
        let bs = self.binders();
        let set: HashSet<&Name> = bs.iter().collect();
        set.len() == bs.len()
    }

    /// Replace the strategy of every application.
    pub fn with_strategy(&self, s: Strategy) -> Term {
        match self {
            Term::Var(x) => Term::Var(x.clone()),
            Term::Abs(x, b) => Term::Abs(x.clone(), Box::new(b.with_strategy(s))),
            Term::App(_, f, a) => Term::App(s, Box::new(f.with_strategy(s)), Box::new(a.with_strategy(s))),
            Term::ESub(b, x, u) => {
                Term::ESub(Box::new(b.with_strategy(s)), x.clone(), Box::new(u.with_strategy(s)))
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// `|t|`: every constructor counts one.
pub fn size(t: &Term) -> usize {
    match t {
        Term::Var(_) => 1,
        Term::Abs(_, b) => size(b) + 1,
        Term::App(_, f, a) => size(f) + size(a) + 1,
        Term::ESub(b, _, u) => size(b) + size(u) + 1,
    }
}

/// Multiset of variable names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarMultiset(BTreeMap<Name, usize>);

impl VarMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(x: Name) -> Self {
        let mut m = Self::new();
        m.insert(x, 1);
        m
    }

    pub fn from_names<I: IntoIterator<Item = Name>>(names: I) -> Self {
        let mut m = Self::new();
        for n in names {
            m.insert(n, 1);
        }
        m
    }

    pub fn insert(&mut self, x: Name, k: usize) {
        if k > 0 {
            *self.0.entry(x).or_insert(0) += k;
        }
    }

    /// `M + M'`
    pub fn sum(mut self, other: &VarMultiset) -> Self {
        for (x, k) in &other.0 {
            self.insert(x.clone(), *k);
        }
        self
    }

    /// `M \ x`: removes every occurrence of `x`.
    pub fn without(mut self, x: &Name) -> Self {
        self.0.remove(x);
        self
    }

    /// `k` such that `x ∈^k M`.
    pub fn multiplicity(&self, x: &Name) -> usize {
        self.0.get(x).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of occurrences.
    pub fn len(&self) -> usize {
        self.0.values().sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, usize)> {
        self.0.iter().map(|(n, k)| (n, *k))
    }
}

impl fmt::Display for VarMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .0
            .iter()
            .flat_map(|(x, k)| std::iter::repeat_n(x.0.clone(), *k))
            .collect();
        write!(f, "[{}]", items.join(", "))
    }
}

pub fn free_vars(t: &Term) -> VarMultiset {
    match t {
        Term::Var(x) => VarMultiset::singleton(x.clone()),
        Term::Abs(x, b) => free_vars(b).without(x),
        Term::App(_, f, a) => free_vars(f).sum(&free_vars(a)),
        Term::ESub(b, x, u) => free_vars(b).without(x).sum(&free_vars(u)),
    }
}

/// Free variable occurrences in left-to-right order.
pub fn free_occurrences(t: &Term) -> Vec<Name> {
    fn go(t: &Term, bound: &mut Vec<Name>, acc: &mut Vec<Name>) {
        match t {
            Term::Var(x) => {
                if !bound.contains(x) {
                    acc.push(x.clone());
                }
            }
            Term::Abs(x, b) => {
                bound.push(x.clone());
                go(b, bound, acc);
                bound.pop();
            }
            Term::App(_, f, a) => {
                go(f, bound, acc);
                go(a, bound, acc);
            }
            Term::ESub(b, x, u) => {
                bound.push(x.clone());
                go(b, bound, acc);
                bound.pop();
                go(u, bound, acc);
            }
        }
    }
    let mut acc = Vec::new();
    go(t, &mut Vec::new(), &mut acc);
    acc
}

/// One layer of an evaluation context, with the hole somewhere below it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// `E[x <- t]`
    ESubBody { binder: Name, bound: Term },
    /// `E'[x][x <- E]`; `body` is `E'`, whose hole holds the looked-up occurrence of `binder`.
    ESubBound { binder: Name, body: ContextPath },
    /// `E @ t`, and for right-to-left values `E @ A[v]`.
    AppFun { strategy: Strategy, arg: Term },
    /// `A[v] @ E` (left-to-right values).
    AppArgWithAnswer { strategy: Strategy, function: Term },
    /// `t @ E` (right-to-left values).
    AppArg { strategy: Strategy, function: Term },
}

/// Evaluation context as a list of frames, outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextPath(pub Vec<Frame>);

impl ContextPath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn push(&mut self, f: Frame) {
        self.0.push(f);
    }

    /// A path made only of `ESubBody` frames is an answer context.
    pub fn is_answer_context(&self) -> bool {
        self.0.iter().all(|f| matches!(f, Frame::ESubBody { .. }))
    }

    /// Checks the frames against the evaluation-context grammar.
    pub fn is_evaluation_context(&self) -> bool {
        self.0.iter().all(|f| match f {
            Frame::ESubBody { .. } => true,
            Frame::ESubBound { body, .. } => body.is_evaluation_context(),
            Frame::AppFun { strategy, arg } => match strategy {
                Strategy::RightToLeftValue => is_answer(arg),
                _ => true,
            },
            Frame::AppArgWithAnswer { strategy, function } => {
                *strategy == Strategy::LeftToRightValue && is_answer(function)
            }
            Frame::AppArg { strategy, .. } => *strategy == Strategy::RightToLeftValue,
        })
    }

    /// `E[t]`
    pub fn plug(&self, t: Term) -> Term {
        self.0.iter().rev().fold(t, |acc, f| plug_frame(f, acc))
    }
}

pub(crate) fn plug_frame(f: &Frame, t: Term) -> Term {
    match f {
        Frame::ESubBody { binder, bound } => Term::ESub(Box::new(t), binder.clone(), Box::new(bound.clone())),
        Frame::ESubBound { binder, body } => Term::ESub(
            Box::new(body.plug(Term::Var(binder.clone()))),
            binder.clone(),
            Box::new(t),
        ),
        Frame::AppFun { strategy, arg } => Term::App(*strategy, Box::new(t), Box::new(arg.clone())),
        Frame::AppArgWithAnswer { strategy, function } | Frame::AppArg { strategy, function } => {
            Term::App(*strategy, Box::new(function.clone()), Box::new(t))
        }
    }
}

/// True iff `t` has the shape `A[v]`.
pub fn is_answer(t: &Term) -> bool {
    match t {
        Term::Abs(..) => true,
        Term::ESub(b, _, _) => is_answer(b),
        _ => false,
    }
}

/// Splits `t = A[u]` with `u` not an explicit substitution. The answer context
/// is returned outermost first.
pub fn split_esubs(t: &Term) -> (Vec<(Name, Term)>, &Term) {
    let mut subs = Vec::new();
    let mut cur = t;
    while let Term::ESub(b, x, u) = cur {
        subs.push((x.clone(), (**u).clone()));
        cur = b;
    }
    (subs, cur)
}

/// `FV_M(E)`
pub fn free_vars_ctx(e: &ContextPath, m: &VarMultiset) -> VarMultiset {
    e.0.iter().rev().fold(m.clone(), |acc, f| match f {
        Frame::AppFun { arg, .. } => acc.sum(&free_vars(arg)),
        Frame::AppArgWithAnswer { function, .. } | Frame::AppArg { function, .. } => {
            free_vars(function).sum(&acc)
        }
        Frame::ESubBody { binder, bound } => acc.without(binder).sum(&free_vars(bound)),
        Frame::ESubBound { binder, body } => {
            let outer = free_vars_ctx(body, &VarMultiset::singleton(binder.clone()));
            outer.without(binder).sum(&acc)
        }
    })
}

/// Monotone supply of fresh name suffixes.
#[derive(Debug, Clone)]
pub struct NameSupply {
    next: u64,
}

impl NameSupply {
    pub fn starting_at(next: u64) -> Self {
        NameSupply { next }
    }

    /// A supply whose suffixes exceed every numeric suffix already used in `t`.
    pub fn above(t: &Term) -> Self {
        fn go(t: &Term, max: &mut u64) {
            let mut see = |n: &Name| {
                if let Some(k) = n.numeric_suffix() {
                    *max = (*max).max(k);
                }
            };
            match t {
                Term::Var(x) => see(x),
                Term::Abs(x, b) => {
                    see(x);
                    go(b, max);
                }
                Term::App(_, f, a) => {
                    go(f, max);
                    go(a, max);
                }
                Term::ESub(b, x, u) => {
                    see(x);
                    go(b, max);
                    go(u, max);
                }
            }
        }
        let mut max = 0;
        go(t, &mut max);
        NameSupply { next: max + 1 }
    }

    pub fn fresh(&mut self, base: &Name) -> Name {
        let n = self.next;
        self.next += 1;
        Name(format!("{}{}", base.stem(), n))
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Alpha-equivalent copy of `t` whose binders are all drawn from `supply`.
/// Free names are left untouched.
pub fn fresh_copy(t: &Term, supply: &mut NameSupply) -> Term {
    fn go(t: &Term, supply: &mut NameSupply, env: &mut Vec<(Name, Name)>) -> Term {
        match t {
            Term::Var(x) => {
                let renamed = env.iter().rev().find(|(old, _)| old == x).map(|(_, new)| new.clone());
                Term::Var(renamed.unwrap_or_else(|| x.clone()))
            }
            Term::Abs(x, b) => {
                let y = supply.fresh(x);
                env.push((x.clone(), y.clone()));
                let b = go(b, supply, env);
                env.pop();
                Term::Abs(y, Box::new(b))
            }
            Term::App(s, f, a) => Term::App(*s, Box::new(go(f, supply, env)), Box::new(go(a, supply, env))),
            Term::ESub(b, x, u) => {
                let u = go(u, supply, env);
                let y = supply.fresh(x);
                env.push((x.clone(), y.clone()));
                let b = go(b, supply, env);
                env.pop();
                Term::ESub(Box::new(b), y, Box::new(u))
            }
        }
    }
    go(t, supply, &mut Vec::new())
}

/// Alpha-equivalence. Free variables must coincide by name.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha_eq_with(a, b, &mut Vec::new(), &mut None)
}

/// Alpha-equivalence up to a consistent bijective renaming of free variables.
pub fn alpha_eq_open(a: &Term, b: &Term) -> bool {
    alpha_eq_with(a, b, &mut Vec::new(), &mut Some((HashMap::new(), HashMap::new())))
}

type FreeMap = Option<(HashMap<Name, Name>, HashMap<Name, Name>)>;

fn alpha_eq_with(a: &Term, b: &Term, env: &mut Vec<(Name, Name)>, free: &mut FreeMap) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => {
            for (l, r) in env.iter().rev() {
                if l == x || r == y {
                    return l == x && r == y;
                }
            }
            match free {
                None => x == y,
                Some((fwd, bwd)) => {
                    let f_ok = fwd.get(x).is_none_or(|m| m == y);
                    let b_ok = bwd.get(y).is_none_or(|m| m == x);
                    if f_ok && b_ok {
                        fwd.insert(x.clone(), y.clone());
                        bwd.insert(y.clone(), x.clone());
                        true
                    } else {
                        false
                    }
                }
            }
        }
        (Term::Abs(x, s), Term::Abs(y, t)) => {
            env.push((x.clone(), y.clone()));
            let r = alpha_eq_with(s, t, env, free);
            env.pop();
            r
        }
        (Term::App(s1, f1, a1), Term::App(s2, f2, a2)) => {
            s1 == s2 && alpha_eq_with(f1, f2, env, free) && alpha_eq_with(a1, a2, env, free)
        }
        (Term::ESub(b1, x, u1), Term::ESub(b2, y, u2)) => {
            if !alpha_eq_with(u1, u2, env, free) {
                return false;
            }
            env.push((x.clone(), y.clone()));
            let r = alpha_eq_with(b1, b2, env, free);
            env.pop();
            r
        }
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
}

/// Parses the concrete syntax. `\` or `λ` introduces an abstraction whose body
/// extends as far right as possible; application is juxtaposition, left
/// associative. A postfix `[x <- t]` denotes an explicit substitution. `#`
/// starts a comment running to the end of the line.
///
/// Binders are renamed where necessary so that they are pairwise distinct;
/// free names are kept.
pub fn parse(text: &str, strategy: Strategy) -> Result<Term, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, strategy };
    let t = p.term()?;
    if p.pos < p.tokens.len() {
        return Err(p.error("unexpected token after end of term"));
    }
    Ok(distinct_binders(&t))
}

/// Renames repeated binders apart, keeping the first occurrence of each name.
pub fn distinct_binders(t: &Term) -> Term {
    fn go(
        t: &Term,
        seen: &mut HashSet<Name>,
        supply: &mut NameSupply,
        env: &mut Vec<(Name, Name)>,
    ) -> Term {
        let bind = |x: &Name, seen: &mut HashSet<Name>, supply: &mut NameSupply| {
            let y = if seen.contains(x) {
                let mut y = supply.fresh(x);
                while seen.contains(&y) {
                    y = supply.fresh(x);
                }
                y
            } else {
                x.clone()
            };
            seen.insert(y.clone());
            y
        };
        match t {
            Term::Var(x) => {
                let renamed = env.iter().rev().find(|(old, _)| old == x).map(|(_, new)| new.clone());
                Term::Var(renamed.unwrap_or_else(|| x.clone()))
            }
            Term::Abs(x, b) => {
                let y = bind(x, seen, supply);
                env.push((x.clone(), y.clone()));
                let b = go(b, seen, supply, env);
                env.pop();
                Term::Abs(y, Box::new(b))
            }
            Term::App(s, f, a) => {
                let f = go(f, seen, supply, env);
                let a = go(a, seen, supply, env);
                Term::App(*s, Box::new(f), Box::new(a))
            }
            Term::ESub(b, x, u) => {
                let y = bind(x, seen, supply);
                let u = go(u, seen, supply, env);
                env.push((x.clone(), y.clone()));
                let b = go(b, seen, supply, env);
                env.pop();
                Term::ESub(Box::new(b), y, Box::new(u))
            }
        }
    }
    let mut seen: HashSet<Name> = free_occurrences(t).into_iter().collect();
    let mut supply = NameSupply::above(t);
    go(t, &mut seen, &mut supply, &mut Vec::new())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lambda,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Arrow,
    Ident(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (col, c) = chars[i];
            let at = |tok| Spanned { tok, line: li + 1, column: col + 1 };
            match c {
                c if c.is_whitespace() => {
                    i += 1;
                }
                '\\' | 'λ' => {
                    out.push(at(Tok::Lambda));
                    i += 1;
                }
                '.' => {
                    out.push(at(Tok::Dot));
                    i += 1;
                }
                '(' => {
                    out.push(at(Tok::LParen));
                    i += 1;
                }
                ')' => {
                    out.push(at(Tok::RParen));
                    i += 1;
                }
                '[' => {
                    out.push(at(Tok::LBracket));
                    i += 1;
                }
                ']' => {
                    out.push(at(Tok::RBracket));
                    i += 1;
                }
                '<' if chars.get(i + 1).map(|p| p.1) == Some('-') => {
                    out.push(at(Tok::Arrow));
                    i += 2;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '\'') {
                        i += 1;
                    }
                    let s: String = chars[start..i].iter().map(|p| p.1).collect();
                    out.push(at(Tok::Ident(s)));
                }
                other => {
                    return Err(ParseError::Syntax {
                        line: li + 1,
                        column: col + 1,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    strategy: Strategy,
}

impl Parser {
    fn error(&self, message: &str) -> ParseError {
        let (line, column) = match self.tokens.get(self.pos).or(self.tokens.last()) {
            Some(s) => (s.line, s.column),
            None => (1, 1),
        };
        ParseError::Syntax { line, column, message: message.to_owned() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let n = Name(s.clone());
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.error("expected a variable")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.peek() == Some(&Tok::Lambda) {
            return self.lambda();
        }
        let mut acc = self.postfix()?;
        loop {
            match self.peek() {
                Some(Tok::Lambda) => {
                    let arg = self.lambda()?;
                    acc = Term::App(self.strategy, Box::new(acc), Box::new(arg));
                    return Ok(acc);
                }
                Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    let arg = self.postfix()?;
                    acc = Term::App(self.strategy, Box::new(acc), Box::new(arg));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn lambda(&mut self) -> Result<Term, ParseError> {
        self.expect(Tok::Lambda, "`\\`")?;
        let x = self.ident()?;
        self.expect(Tok::Dot, "`.` after binder")?;
        let body = self.term()?;
        Ok(Term::Abs(x, Box::new(body)))
    }

    fn postfix(&mut self) -> Result<Term, ParseError> {
        let mut t = self.atom()?;
        while self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            let x = self.ident()?;
            self.expect(Tok::Arrow, "`<-`")?;
            let u = self.term()?;
            self.expect(Tok::RBracket, "`]`")?;
            t = Term::ESub(Box::new(t), x, Box::new(u));
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => Ok(Term::Var(self.ident()?)),
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("unbalanced parenthesis: expected `)`"));
                }
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.error("unexpected end of input")),
            Some(_) => Err(self.error("expected a term")),
        }
    }
}

/// Concrete syntax accepted by [`parse`]; strategies are not printed.
pub fn render(t: &Term) -> String {
    let mut s = String::new();
    render_into(t, &mut s);
    s
}

fn render_into(t: &Term, out: &mut String) {
    match t {
        Term::Var(x) => out.push_str(&x.0),
        Term::Abs(x, b) => {
            out.push('\\');
            out.push_str(&x.0);
            out.push_str(". ");
            render_into(b, out);
        }
        Term::App(_, f, a) => {
            match **f {
                Term::Abs(..) => paren(f, out),
                _ => render_into(f, out),
            }
            out.push(' ');
            match **a {
                Term::Var(_) => render_into(a, out),
                _ => paren(a, out),
            }
        }
        Term::ESub(b, x, u) => {
            match **b {
                Term::Var(_) | Term::ESub(..) => render_into(b, out),
                _ => paren(b, out),
            }
            out.push_str(" [");
            out.push_str(&x.0);
            out.push_str(" <- ");
            render_into(u, out);
            out.push(']');
        }
    }
}

fn paren(t: &Term, out: &mut String) {
    out.push('(');
    render_into(t, out);
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn need(s: &str) -> Term {
        parse(s, Strategy::Need).unwrap()
    }

    #[test]
    fn parse_identity() {
        assert_eq!(need(r"\x. x"), Term::abs("x", Term::var("x")));
    }

    #[test]
    fn parse_application_is_left_associative() {
        let t = need("a b c");
        let want = Term::app(
            Strategy::Need,
            Term::app(Strategy::Need, Term::var("a"), Term::var("b")),
            Term::var("c"),
        );
        assert_eq!(t, want);
        assert_eq!(render(&t), "a b c");
    }

    #[test]
    fn parse_self_application() {
        let t = need(r"(\x. x x) (\y. y)");
        let want = Term::app(
            Strategy::Need,
            Term::abs("x", Term::app(Strategy::Need, Term::var("x"), Term::var("x"))),
            Term::abs("y", Term::var("y")),
        );
        assert_eq!(t, want);
    }

    #[test]
    fn parse_renames_repeated_binders() {
        let t = need(r"(\x. x x) (\x. x x)");
        assert!(t.has_distinct_binders());
        let want = need(r"(\x. x x) (\y. y y)");
        assert!(alpha_eq(&t, &want));
    }

    #[test]
    fn parse_rejects_unbalanced() {
        let err = parse(r"\x. (x", Strategy::Need).unwrap_err();
        assert!(err.to_string().contains("unbalanced"), "{err}");
        assert!(parse("(x))", Strategy::Need).is_err());
        assert!(parse("", Strategy::Need).is_err());
    }

    #[test]
    fn parse_comments_and_free_variables() {
        let t = parse("# header\nf x # trailing\n", Strategy::LeftToRightValue).unwrap();
        assert_eq!(free_vars(&t).len(), 2);
        assert_eq!(t.strategies().into_iter().collect::<Vec<_>>(), vec![Strategy::LeftToRightValue]);
    }

    #[test]
    fn sizes() {
        assert_eq!(size(&Term::var("x")), 1);
        assert_eq!(size(&need(r"\x. x")), 2);
        assert_eq!(size(&need(r"(\x. x) (\y. y)")), 5);
        assert_eq!(size(&need(r"x [x <- \y. y]")), 4);
    }

    #[test]
    fn free_variable_multisets() {
        assert_eq!(free_vars(&Term::var("x")), VarMultiset::singleton("x".into()));
        assert!(free_vars(&need(r"\x. x")).is_empty());
        let m = free_vars(&need("x x y"));
        assert_eq!(m.multiplicity(&"x".into()), 2);
        assert_eq!(m.multiplicity(&"y".into()), 1);
        assert_eq!(m.len(), 3);
        let m = VarMultiset::from_names(["x".into(), "x".into(), "y".into()]).without(&"x".into());
        assert_eq!(m, VarMultiset::singleton("y".into()));
    }

    #[test]
    fn free_variables_of_contexts() {
        let m = VarMultiset::singleton("x".into());
        assert_eq!(free_vars_ctx(&ContextPath::empty(), &m), m);
        let e = ContextPath(vec![Frame::AppFun { strategy: Strategy::Need, arg: Term::var("y") }]);
        assert_eq!(free_vars_ctx(&e, &m), VarMultiset::from_names(["x".into(), "y".into()]));
        let e = ContextPath(vec![Frame::ESubBody { binder: "x".into(), bound: Term::var("z") }]);
        let xx = VarMultiset::from_names(["x".into(), "x".into()]);
        assert_eq!(free_vars_ctx(&e, &xx), VarMultiset::singleton("z".into()));
    }

    #[test]
    fn fresh_copies() {
        let mut s = NameSupply::starting_at(7);
        assert_eq!(fresh_copy(&need(r"\x. x"), &mut s), Term::abs("x7", Term::var("x7")));
        assert_eq!(fresh_copy(&Term::var("y"), &mut s), Term::var("y"));
        let t = need(r"\x. \y. x");
        let c = fresh_copy(&t, &mut s);
        match &c {
            Term::Abs(x, b) => match &**b {
                Term::Abs(y, body) => {
                    assert_ne!(x.as_str(), "x");
                    assert_ne!(y.as_str(), "y");
                    assert_eq!(**body, Term::Var(x.clone()));
                }
                _ => panic!(),
            },
            _ => panic!(),
        }
        assert!(alpha_eq(&t, &c));
    }

    #[test]
    fn render_substitution() {
        let t = Term::esub(Term::var("x"), "x", Term::abs("y", Term::var("y")));
        assert_eq!(render(&t), r"x [x <- \y. y]");
        assert_eq!(parse(&render(&t), Strategy::Need).unwrap(), t);
        assert_eq!(render(&need(r"\x. x")), r"\x. x");
    }

    #[test]
    fn open_alpha_equivalence_renames_free_names_consistently() {
        assert!(alpha_eq_open(&need(r"\a. a f"), &need(r"\b. b g")));
        assert!(!alpha_eq_open(&need(r"f g"), &need(r"h h")));
        assert!(!alpha_eq(&need(r"\a. a f"), &need(r"\b. b g")));
    }
}
