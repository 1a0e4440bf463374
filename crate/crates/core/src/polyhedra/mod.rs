//! Integer linear constraint engine.
//!
//! A [`Polyhedron`] is a finite conjunction of integer linear constraints
//! over a typed variable namespace ([`VarId`]). Satisfiability, entailment
//! and variable elimination are exact over the integers (Omega-test
//! style); `eliminate` additionally offers a dark-shadow mode that
//! under-approximates a projection with a single polyhedron.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

mod compose;
mod omega;
mod parse;
mod sample;

pub use compose::{compose_pl, compose_pl_all, ComposeError, ProjectionMode};
pub use omega::{eliminate_dark, eliminate_exact, entails, entails_any, sat_check_count, sat_int};
pub use parse::{parse_constraint, parse_constraint_with, resolve_token, ConstraintParseError};
pub use sample::sample_model;

/// Typed variable namespace for path-length constraints.
///
/// Input/output locals (`il`/`ol`) and stack slots (`is`/`os`), the
/// temporaries used by relational composition (`t`), per-block return-length
/// variables (`rin`/`rout`) and anonymous fresh variables (`f`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    InL(u32),
    InS(u32),
    OutL(u32),
    OutS(u32),
    Tmp(u32),
    RetIn(String),
    RetOut(String),
    Fresh(u64),
}

impl VarId {
    /// Token form used in constraint text and JSON, e.g. `il0`, `rin_b1`.
    pub fn token(&self) -> String {
        match self {
            VarId::InL(k) => format!("il{k}"),
            VarId::InS(k) => format!("is{k}"),
            VarId::OutL(k) => format!("ol{k}"),
            VarId::OutS(k) => format!("os{k}"),
            VarId::Tmp(k) => format!("t{k}"),
            VarId::RetIn(b) => format!("rin_{b}"),
            VarId::RetOut(b) => format!("rout_{b}"),
            VarId::Fresh(k) => format!("f{k}"),
        }
    }

    /// Uppercase token used for Prolog-style clause listings.
    pub fn token_upper(&self) -> String {
        self.token().to_uppercase()
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// Comparison relation of a constraint. `>=` inputs are stored negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Le,
    Eq,
}

/// A single integer linear constraint `sum(coeffs * vars) REL bound`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearConstraint {
    pub coeffs: BTreeMap<VarId, BigInt>,
    pub rel: Rel,
    pub bound: BigInt,
}

/// A total or partial map from variables to integers.
pub type Assignment = BTreeMap<VarId, BigInt>;

impl LinearConstraint {
    pub fn new(terms: Vec<(VarId, BigInt)>, rel: Rel, bound: BigInt) -> Self {
        let mut coeffs: BTreeMap<VarId, BigInt> = BTreeMap::new();
        for (v, c) in terms {
            let e = coeffs.entry(v).or_insert_with(BigInt::zero);
            *e += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        LinearConstraint { coeffs, rel, bound }
    }

    /// `a = b` between two variables.
    pub fn var_eq(a: VarId, b: VarId) -> Self {
        if a == b {
            // trivially true; keep as 0 = 0
            return LinearConstraint::new(vec![], Rel::Eq, BigInt::zero());
        }
        LinearConstraint::new(
            vec![(a, BigInt::one()), (b, -BigInt::one())],
            Rel::Eq,
            BigInt::zero(),
        )
    }

    /// `v = c`.
    pub fn var_eq_const(v: VarId, c: impl Into<BigInt>) -> Self {
        LinearConstraint::new(vec![(v, BigInt::one())], Rel::Eq, c.into())
    }

    /// `v <= c`.
    pub fn var_le_const(v: VarId, c: impl Into<BigInt>) -> Self {
        LinearConstraint::new(vec![(v, BigInt::one())], Rel::Le, c.into())
    }

    /// `v >= c`, stored as `-v <= -c`.
    pub fn var_ge_const(v: VarId, c: impl Into<BigInt>) -> Self {
        LinearConstraint::new(vec![(v, -BigInt::one())], Rel::Le, -c.into())
    }

    /// The canonical unsatisfiable constraint `0 <= -1`.
    pub fn falsum() -> Self {
        LinearConstraint {
            coeffs: BTreeMap::new(),
            rel: Rel::Le,
            bound: -BigInt::one(),
        }
    }

    pub fn is_falsum(&self) -> bool {
        self.coeffs.is_empty()
            && match self.rel {
                Rel::Le => self.bound < BigInt::zero(),
                Rel::Eq => !self.bound.is_zero(),
            }
    }

    /// Normalize: drop zero coefficients, divide by the gcd (tightening the
    /// bound for `<=`), orient equalities so the first coefficient is
    /// positive. Returns `None` for a trivially true constraint and
    /// [`LinearConstraint::falsum`] for an unsatisfiable ground one.
    pub fn normalized(mut self) -> Option<LinearConstraint> {
        self.coeffs.retain(|_, c| !c.is_zero());
        if self.coeffs.is_empty() {
            let sat = match self.rel {
                Rel::Le => self.bound >= BigInt::zero(),
                Rel::Eq => self.bound.is_zero(),
            };
            return if sat { None } else { Some(Self::falsum()) };
        }
        let mut g = BigInt::zero();
        for c in self.coeffs.values() {
            g = g.gcd(c);
        }
        if g > BigInt::one() {
            match self.rel {
                Rel::Le => {
                    for c in self.coeffs.values_mut() {
                        *c = &*c / &g;
                    }
                    self.bound = self.bound.div_floor(&g);
                }
                Rel::Eq => {
                    if !self.bound.mod_floor(&g).is_zero() {
                        return Some(Self::falsum());
                    }
                    for c in self.coeffs.values_mut() {
                        *c = &*c / &g;
                    }
                    self.bound = &self.bound / &g;
                }
            }
        }
        if self.rel == Rel::Eq {
            let first_neg = self
                .coeffs
                .values()
                .next()
                .map(|c| c.is_negative())
                .unwrap_or(false);
            if first_neg {
                for c in self.coeffs.values_mut() {
                    *c = -&*c;
                }
                self.bound = -self.bound;
            }
        }
        Some(self)
    }

    /// Evaluate under a total assignment (missing variables count as 0).
    pub fn eval(&self, asg: &Assignment) -> bool {
        let mut lhs = BigInt::zero();
        for (v, c) in &self.coeffs {
            if let Some(x) = asg.get(v) {
                lhs += c * x;
            }
        }
        match self.rel {
            Rel::Le => lhs <= self.bound,
            Rel::Eq => lhs == self.bound,
        }
    }

    /// Rename variables; unmapped variables are kept.
    pub fn rename(&self, map: &BTreeMap<VarId, VarId>) -> LinearConstraint {
        let terms = self
            .coeffs
            .iter()
            .map(|(v, c)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), c.clone()))
            .collect();
        LinearConstraint::new(terms, self.rel, self.bound.clone())
    }

    pub fn support(&self) -> impl Iterator<Item = &VarId> {
        self.coeffs.keys()
    }
}

fn fmt_terms(f: &mut fmt::Formatter<'_>, terms: &[(&VarId, BigInt)]) -> fmt::Result {
    for (i, (v, c)) in terms.iter().enumerate() {
        if i == 0 {
            if *c == BigInt::one() {
                write!(f, "{v}")?;
            } else if *c == -BigInt::one() {
                write!(f, "-{v}")?;
            } else {
                write!(f, "{c}*{v}")?;
            }
        } else if c.is_negative() {
            let a = -c;
            if a.is_one() {
                write!(f, " - {v}")?;
            } else {
                write!(f, " - {a}*{v}")?;
            }
        } else if c.is_one() {
            write!(f, " + {v}")?;
        } else {
            write!(f, " + {c}*{v}")?;
        }
    }
    Ok(())
}

impl fmt::Display for LinearConstraint {
    /// Prints `lhs REL rhs` with positive terms on the left, e.g.
    /// `il0 = os1 + 1`, `2*il0 - os1 <= 3`, `0 = os0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (pos, neg): (Vec<_>, Vec<_>) = self
            .coeffs
            .iter()
            .map(|(v, c)| (v, c.clone()))
            .partition(|(_, c)| c.is_positive());
        let op = match self.rel {
            Rel::Le => "<=",
            Rel::Eq => "=",
        };
        match self.rel {
            Rel::Eq => {
                // lhs(pos) = rhs(-neg) + bound
                if pos.is_empty() {
                    write!(f, "{}", self.bound)?;
                } else {
                    fmt_terms(f, &pos)?;
                }
                write!(f, " {op} ")?;
                let flipped: Vec<_> = neg.iter().map(|(v, c)| (*v, -c)).collect();
                if flipped.is_empty() {
                    if pos.is_empty() {
                        write!(f, "0")?;
                    } else {
                        write!(f, "{}", self.bound)?;
                    }
                } else {
                    fmt_terms(f, &flipped)?;
                    if pos.is_empty() {
                        // bound already written on the left
                    } else if self.bound.is_positive() {
                        write!(f, " + {}", self.bound)?;
                    } else if self.bound.is_negative() {
                        write!(f, " - {}", -&self.bound)?;
                    }
                }
                Ok(())
            }
            Rel::Le => {
                let all: Vec<_> = self.coeffs.iter().map(|(v, c)| (v, c.clone())).collect();
                if all.is_empty() {
                    write!(f, "0")?;
                } else {
                    fmt_terms(f, &all)?;
                }
                write!(f, " {op} {}", self.bound)
            }
        }
    }
}

/// A finite set of integer linear constraints with a declared variable scope.
///
/// Constraints may mention variables outside the scope; those are read as
/// existentially quantified (they arise as internal connectives in clause
/// constraints).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedron {
    pub constraints: Vec<LinearConstraint>,
    pub scope: BTreeSet<VarId>,
}

impl Polyhedron {
    pub fn top(scope: impl IntoIterator<Item = VarId>) -> Self {
        Polyhedron {
            constraints: Vec::new(),
            scope: scope.into_iter().collect(),
        }
    }

    pub fn from_constraints(
        constraints: Vec<LinearConstraint>,
        scope: impl IntoIterator<Item = VarId>,
    ) -> Self {
        Polyhedron {
            constraints,
            scope: scope.into_iter().collect(),
        }
    }

    /// Conjunction; the scope is the union of both scopes.
    pub fn and(&self, other: &Polyhedron) -> Polyhedron {
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        let mut scope = self.scope.clone();
        scope.extend(other.scope.iter().cloned());
        Polyhedron { constraints, scope }
    }

    pub fn push(&mut self, c: LinearConstraint) {
        self.constraints.push(c);
    }

    /// All variables actually occurring in constraints.
    pub fn support(&self) -> BTreeSet<VarId> {
        self.constraints
            .iter()
            .flat_map(|c| c.support().cloned())
            .collect()
    }

    /// gcd-normalizes, orients, deduplicates and sorts the constraints.
    /// Idempotent; a ground contradiction collapses to `{0 <= -1}`.
    pub fn canonicalize(&self) -> Polyhedron {
        let mut set: BTreeSet<LinearConstraint> = BTreeSet::new();
        for c in &self.constraints {
            match c.clone().normalized() {
                None => {}
                Some(n) => {
                    if n.is_falsum() {
                        return Polyhedron {
                            constraints: vec![LinearConstraint::falsum()],
                            scope: self.scope.clone(),
                        };
                    }
                    set.insert(n);
                }
            }
        }
        Polyhedron {
            constraints: set.into_iter().collect(),
            scope: self.scope.clone(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<VarId, VarId>) -> Polyhedron {
        let constraints = self.constraints.iter().map(|c| c.rename(map)).collect();
        let scope = self
            .scope
            .iter()
            .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
            .collect();
        Polyhedron { constraints, scope }
    }

    /// True when the constraint set contains a ground contradiction.
    pub fn is_trivially_false(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c.clone().normalized(), Some(n) if n.is_falsum()))
    }

    pub fn eval(&self, asg: &Assignment) -> bool {
        self.constraints.iter().all(|c| c.eval(asg))
    }
}

impl fmt::Display for Polyhedron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}
