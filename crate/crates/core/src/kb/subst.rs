use super::{Atom, Rule, Term, Var};

/// Triangular substitution: bindings may point at other variables and are
/// resolved on lookup. Insertion order is kept so that the search can undo
/// bindings by truncating.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: Vec<(Var, Term)>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<Term> {
        self.bindings.iter().rev().find(|(w, _)| *w == v).map(|(_, t)| *t)
    }

    /// Adds `v/t`. Callers must not rebind an already bound variable.
    pub fn bind(&mut self, v: Var, t: Term) {
        debug_assert!(self.get(v).is_none(), "variable bound twice");
        self.bindings.push((v, t));
    }

    pub fn truncate(&mut self, len: usize) {
        self.bindings.truncate(len);
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Var, Term)> {
        self.bindings.iter()
    }

    /// Follows variable bindings until a constant or an unbound variable.
    pub fn walk(&self, mut t: Term) -> Term {
        // Without an occurs check a chain can be at most as long as the
        // binding list; the bound protects against malformed inputs.
        for _ in 0..=self.bindings.len() {
            match t {
                Term::Var(v) => match self.get(v) {
                    Some(next) if next != t => t = next,
                    _ => return t,
                },
                Term::Const(_) => return t,
            }
        }
        t
    }

    pub fn apply(&self, a: &Atom) -> Atom {
        Atom { pred: a.pred, args: [self.walk(a.args[0]), self.walk(a.args[1])] }
    }

    /// Fully resolved copy restricted to `vars`, in the order given.
    pub fn restricted(&self, vars: impl IntoIterator<Item = Var>) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if out.get(v).is_some() {
                continue;
            }
            let t = self.walk(Term::Var(v));
            if t != Term::Var(v) {
                out.bindings.push((v, t));
            }
        }
        out
    }

    /// Every binding replaced by its fully resolved term.
    pub fn resolved(&self) -> Substitution {
        Substitution {
            bindings: self.bindings.iter().map(|(v, _)| (*v, self.walk(Term::Var(*v)))).collect(),
        }
    }
}

impl FromIterator<(Var, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (v, t) in iter {
            s.bind(v, t);
        }
        s
    }
}

pub fn apply_substitution(a: &Atom, s: &Substitution) -> Atom {
    s.apply(a)
}

/// Source of fresh variable generations.
#[derive(Debug, Clone, Default)]
pub struct FreshVars {
    next: u32,
}

impl FreshVars {
    pub fn new() -> Self {
        FreshVars { next: 1 }
    }

    pub fn starting_at(next: u32) -> Self {
        FreshVars { next: next.max(1) }
    }

    pub fn next_gen(&mut self) -> u32 {
        let g = self.next;
        self.next += 1;
        g
    }
}

/// Renames every variable of `r` to a generation no other call has used.
pub fn standardize_apart(r: &Rule, fresh: &mut FreshVars) -> Rule {
    let gen = fresh.next_gen();
    let rename = |a: &Atom| {
        let mut a = *a;
        for t in &mut a.args {
            if let Term::Var(v) = t {
                v.gen = gen;
            }
        }
        a
    };
    Rule { head: rename(&r.head), body: r.body.iter().map(rename).collect() }
}
