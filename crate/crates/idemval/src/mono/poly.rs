//! Multivariate polynomial view of an expression over opaque atoms.
//!
//! Add/Mul structure is expanded; every other node (division, masks, min/max,
//! plain variables) becomes an atom. Subtracting the polynomial of an
//! expression from the polynomial of its shifted copy cancels the parts a
//! variable does not reach, leaving a step polynomial whose sign can be
//! bounded by interval evaluation of the surviving monomials.

use std::collections::HashMap;

use crate::sym::{Node, SymExpr, SymVarId};

use super::interval::{eval_interval, Interval};

/// Atom ids sorted ascending, with multiplicity; `[]` is the constant term.
type Monomial = Vec<u32>;

const TERM_CAP: usize = 1024;

#[derive(Debug, Default)]
pub struct AtomTable {
    atoms: Vec<SymExpr>,
    index: HashMap<SymExpr, u32>,
}

impl AtomTable {
    fn intern(&mut self, e: &SymExpr) -> u32 {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        let i = self.atoms.len() as u32;
        self.atoms.push(e.clone());
        self.index.insert(e.clone(), i);
        i
    }

    pub fn expr(&self, id: u32) -> &SymExpr {
        &self.atoms[id as usize]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Poly {
    terms: HashMap<Monomial, i128>,
}

impl Poly {
    fn constant(c: i128) -> Poly {
        let mut terms = HashMap::new();
        if c != 0 {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    fn atom(id: u32) -> Poly {
        let mut terms = HashMap::new();
        terms.insert(vec![id], 1);
        Poly { terms }
    }

    fn add_term(&mut self, m: Monomial, c: i128) -> Option<()> {
        use std::collections::hash_map::Entry;
        // Cancelled terms are removed eagerly so an all-cancelling
        // difference is recognizable as the empty polynomial.
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                let v = o.get().checked_add(c)?;
                if v == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            Entry::Vacant(slot) => {
                if c != 0 {
                    slot.insert(c);
                }
            }
        }
        if self.terms.len() > TERM_CAP {
            return None;
        }
        Some(())
    }

    fn add(mut self, other: &Poly) -> Option<Poly> {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), *c)?;
        }
        Some(self)
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                m.sort_unstable();
                out.add_term(m, ca.checked_mul(*cb)?)?;
            }
        }
        Some(out)
    }

    fn sub(self, other: &Poly) -> Option<Poly> {
        let mut out = self;
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.checked_neg()?)?;
        }
        Some(out)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Interval of the polynomial's value given atom domains.
    pub fn bound(
        &self,
        atoms: &AtomTable,
        dom: &impl Fn(SymVarId) -> Interval,
    ) -> Interval {
        let mut lo = 0i128;
        let mut hi = 0i128;
        for (m, c) in &self.terms {
            let mut t = Interval::point(0);
            let mut first = true;
            for &a in m {
                let av = eval_interval(atoms.expr(a), dom).iv;
                t = if first { av } else { mul_iv(t, av) };
                first = false;
            }
            let t = if first { Interval::point(1) } else { t };
            let scaled = mul_iv(t, Interval { lo: *c, hi: *c });
            lo = lo.saturating_add(scaled.lo);
            hi = hi.saturating_add(scaled.hi);
        }
        Interval::new(lo, hi)
    }
}

fn mul_iv(a: Interval, b: Interval) -> Interval {
    let mut lo = i128::MAX;
    let mut hi = i128::MIN;
    for x in [a.lo, a.hi] {
        for y in [b.lo, b.hi] {
            let v = x.saturating_mul(y).clamp(-(1 << 80), 1 << 80);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Interval { lo, hi }
}

/// Expand an expression into a polynomial over `atoms`. `None` means the
/// expansion blew past the term cap or a coefficient overflowed; callers
/// treat that as an unprovable query.
pub fn expand(e: &SymExpr, atoms: &mut AtomTable) -> Option<Poly> {
    match e.node() {
        Node::Const(c) => Some(Poly::constant(*c as i128)),
        Node::Add(xs) => {
            let mut acc = Poly::default();
            for x in xs {
                acc = acc.add(&expand(x, atoms)?)?;
            }
            Some(acc)
        }
        Node::Mul(xs) => {
            let mut acc = Poly::constant(1);
            for x in xs {
                acc = acc.mul(&expand(x, atoms)?)?;
            }
            Some(acc)
        }
        _ => Some(Poly::atom(atoms.intern(e))),
    }
}

/// poly(e[v := v+1]) - poly(e): the per-step change of `e` in `v`.
pub fn step_poly(e: &SymExpr, v: SymVarId, atoms: &mut AtomTable) -> Option<Poly> {
    let shifted = e.subst(&|u| {
        (u == v).then(|| SymExpr::add2(SymExpr::var(v), SymExpr::constant(1)))
    });
    expand(&shifted, atoms)?.sub(&expand(e, atoms)?)
}
