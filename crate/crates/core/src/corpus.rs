//! Seeded random terms and evaluation contexts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::term::{ContextPath, Frame, Name, Strategy, Term};

/// Generator state: a seeded RNG and a counter for binder names.
pub struct TermGen {
    rng: ChaCha8Rng,
    next: u64,
    pub strategy: Strategy,
}

impl TermGen {
    pub fn new(seed: u64, strategy: Strategy) -> Self {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), next: 0, strategy }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn binder(&mut self) -> Name {
        let n = Name(format!("x{}", self.next));
        self.next += 1;
        n
    }

    /// A pure term of exactly `size` nodes whose free names come from
    /// `scope`. Needs `size >= 2` when the scope is empty.
    pub fn term_of_size(&mut self, size: usize, scope: &[Name]) -> Term {
        let mut scope = scope.to_vec();
        self.go(size, &mut scope)
    }

    fn go(&mut self, size: usize, scope: &mut Vec<Name>) -> Term {
        debug_assert!(size >= 1 && (size >= 2 || !scope.is_empty()));
        if size == 1 {
            return Term::Var(self.pick_var(scope));
        }
        let app_ok = size >= 3 && (!scope.is_empty() || size >= 5);
        if size == 2 || !app_ok || self.rng.gen_bool(0.4) {
            let x = self.binder();
            scope.push(x.clone());
            let body = self.go(size - 1, scope);
            scope.pop();
            return Term::Abs(x, Box::new(body));
        }
        let min = if scope.is_empty() { 2 } else { 1 };
        let k = self.rng.gen_range(min..=size - 1 - min);
        let f = self.go(k, scope);
        let a = self.go(size - 1 - k, scope);
        Term::App(self.strategy, Box::new(f), Box::new(a))
    }

    /// Prefers recently bound names.
    fn pick_var(&mut self, scope: &[Name]) -> Name {
        let n = scope.len();
        if self.rng.gen_bool(0.5) {
            scope[n - 1 - self.rng.gen_range(0..n.min(2))].clone()
        } else {
            scope.choose(&mut self.rng).expect("non-empty scope").clone()
        }
    }

    /// A closed pure term with `3 <= size <= max_size`.
    pub fn closed_term(&mut self, max_size: usize) -> Term {
        let size = self.rng.gen_range(3..=max_size.max(3));
        self.term_of_size(size, &[])
    }

    /// A value `λx.t` of at most `max_size` nodes.
    pub fn value(&mut self, max_size: usize, scope: &[Name]) -> Term {
        let size = self.rng.gen_range(2..=max_size.max(2));
        let x = self.binder();
        let mut inner = scope.to_vec();
        inner.push(x.clone());
        Term::Abs(x, Box::new(self.term_of_size(size - 1, &inner)))
    }

    /// An answer `A[v]` with up to two substitutions.
    pub fn answer(&mut self, max_size: usize, scope: &[Name]) -> Term {
        let subs = self.rng.gen_range(0..=2);
        let mut names = Vec::new();
        let mut inner = scope.to_vec();
        for _ in 0..subs {
            let x = self.binder();
            inner.push(x.clone());
            names.push(x);
        }
        let mut t = self.value(max_size, &inner);
        for x in names.into_iter().rev() {
            let size = self.rng.gen_range(2..=max_size.max(2));
            let bound = self.term_of_size(size, scope);
            t = Term::ESub(Box::new(t), x, Box::new(bound));
        }
        t
    }

    /// A random evaluation context for the generator's strategy with at most
    /// `depth` frames. Terms inside draw free names from `scope`; binders
    /// introduced by the context are fresh. Frames of the shape `A[v] @ E`
    /// are produced only when `with_answer_args` is set.
    pub fn eval_context(&mut self, depth: usize, scope: &[Name], with_answer_args: bool) -> ContextPath {
        let mut frames = Vec::new();
        let mut scope = scope.to_vec();
        let n = self.rng.gen_range(0..=depth);
        for _ in 0..n {
            frames.push(self.frame(&mut scope, depth, with_answer_args));
        }
        ContextPath(frames)
    }

    fn frame(&mut self, scope: &mut Vec<Name>, depth: usize, with_answer_args: bool) -> Frame {
        let s = self.strategy;
        let choice = self.rng.gen_range(0..4);
        let arbitrary = |g: &mut Self, scope: &[Name]| {
            let size = g.rng.gen_range(2..=6);
            g.term_of_size(size, scope)
        };
        match choice {
            0 => {
                let x = self.binder();
                let bound = arbitrary(self, scope);
                scope.push(x.clone());
                Frame::ESubBody { binder: x, bound }
            }
            1 if depth > 1 => {
                let x = self.binder();
                let mut inner = scope.clone();
                inner.push(x.clone());
                let body = self.eval_context(depth / 2, &inner, with_answer_args);
                Frame::ESubBound { binder: x, body }
            }
            2 if s == Strategy::LeftToRightValue && with_answer_args => {
                let function = self.answer(5, scope);
                Frame::AppArgWithAnswer { strategy: s, function }
            }
            2 if s == Strategy::RightToLeftValue => {
                let function = arbitrary(self, scope);
                Frame::AppArg { strategy: s, function }
            }
            _ => {
                let arg = if s == Strategy::RightToLeftValue { self.answer(5, scope) } else { arbitrary(self, scope) };
                Frame::AppFun { strategy: s, arg }
            }
        }
    }
}

/// `count` closed pure terms, deterministic in the seed.
pub fn gen_corpus(seed: u64, count: usize, max_size: usize, strategy: Strategy) -> Vec<Term> {
    let mut g = TermGen::new(seed, strategy);
    (0..count).map(|_| g.closed_term(max_size)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::size;

    #[test]
    fn corpus_is_closed_bounded_and_deterministic() {
        for s in Strategy::ALL {
            let a = gen_corpus(42, 200, 50, s);
            assert_eq!(a, gen_corpus(42, 200, 50, s));
            for t in &a {
                assert!(t.is_closed() && t.is_pure() && (3..=50).contains(&size(t)));
            }
        }
    }

    #[test]
    fn contexts_are_evaluation_contexts() {
        for s in Strategy::ALL {
            let mut g = TermGen::new(7, s);
            for _ in 0..200 {
                let e = g.eval_context(4, &[Name::from("y")], true);
                assert!(e.is_evaluation_context());
            }
        }
    }
}
