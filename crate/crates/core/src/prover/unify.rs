use super::proof::UnificationStep;
use super::{Aggregator, ProverConfig};
use crate::embed::Similarity;
use crate::kb::{Atom, Substitution, Symbol, Term, Var};

/// Weak unification without occurs check. Returns the updated score, or
/// `None` for failure; on failure `subst` and `steps` may hold partial
/// additions that the caller must truncate.
pub(crate) struct Unifier<'a, S: ?Sized> {
    pub sim: &'a S,
    pub aggregator: Aggregator,
    pub threshold: f64,
}

impl<S: Similarity + ?Sized> Unifier<'_, S> {
    pub fn atoms(
        &self,
        x: &Atom,
        y: &Atom,
        subst: &mut Substitution,
        score: f64,
        steps: &mut Vec<UnificationStep>,
    ) -> Option<f64> {
        if score < self.threshold {
            return None;
        }
        if x == y {
            return Some(score);
        }
        let score = self.symbols(x.pred, y.pred, score, steps)?;
        self.list(&x.args, &y.args, subst, score, steps)
    }

    pub fn list(
        &self,
        xs: &[Term],
        ys: &[Term],
        subst: &mut Substitution,
        score: f64,
        steps: &mut Vec<UnificationStep>,
    ) -> Option<f64> {
        if score < self.threshold {
            return None;
        }
        match (xs.split_first(), ys.split_first()) {
            (None, None) => Some(score),
            (Some((x, xs)), Some((y, ys))) => {
                let score = self.term(*x, *y, subst, score, steps)?;
                self.list(xs, ys, subst, score, steps)
            }
            _ => None,
        }
    }

    fn term(&self, x: Term, y: Term, subst: &mut Substitution, score: f64, steps: &mut Vec<UnificationStep>) -> Option<f64> {
        if score < self.threshold {
            return None;
        }
        if x == y {
            return Some(score);
        }
        match (x, y) {
            (Term::Var(v), o) => self.var(v, o, subst, score, steps),
            (o, Term::Var(v)) => self.var(v, o, subst, score, steps),
            (Term::Const(a), Term::Const(b)) => self.symbols(a, b, score, steps),
        }
    }

    fn var(&self, v: Var, o: Term, subst: &mut Substitution, score: f64, steps: &mut Vec<UnificationStep>) -> Option<f64> {
        if let Some(val) = subst.get(v) {
            return self.term(val, o, subst, score, steps);
        }
        if let Term::Var(ov) = o {
            if let Some(val) = subst.get(ov) {
                return self.term(Term::Var(v), val, subst, score, steps);
            }
        }
        subst.bind(v, o);
        Some(score)
    }

    /// Compares two symbols; they unify when their similarity reaches the
    /// threshold.
    fn symbols(&self, a: Symbol, b: Symbol, score: f64, steps: &mut Vec<UnificationStep>) -> Option<f64> {
        let s = self.sim.similarity(a, b);
        if s < self.threshold {
            return None;
        }
        steps.push(UnificationStep { left: a, right: b, score: s, exact: a == b });
        Some(self.aggregator.combine(score, s))
    }
}

/// Weakly unifies two atoms starting from `subst` and `score`.
pub fn weak_unify<S: Similarity + ?Sized>(
    x: &Atom,
    y: &Atom,
    subst: &Substitution,
    score: f64,
    sim: &S,
    cfg: &ProverConfig,
) -> Option<(Substitution, f64)> {
    let u = Unifier { sim, aggregator: cfg.aggregator, threshold: cfg.threshold };
    let mut s = subst.clone();
    let mut steps = Vec::new();
    u.atoms(x, y, &mut s, score, &mut steps).map(|score| (s, score))
}

/// Weakly unifies two term lists element-wise.
pub fn weak_unify_terms<S: Similarity + ?Sized>(
    xs: &[Term],
    ys: &[Term],
    subst: &Substitution,
    score: f64,
    sim: &S,
    cfg: &ProverConfig,
) -> Option<(Substitution, f64)> {
    let u = Unifier { sim, aggregator: cfg.aggregator, threshold: cfg.threshold };
    let mut s = subst.clone();
    let mut steps = Vec::new();
    u.list(xs, ys, &mut s, score, &mut steps).map(|score| (s, score))
}
