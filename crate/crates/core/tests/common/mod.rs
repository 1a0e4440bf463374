//! Shared helpers for integration tests: seeded random constraint
//! instances, fast boxed enumeration, and a loop-clause generator.

#![allow(dead_code)]

use nonterm_core::polyhedra::{LinearConstraint, Polyhedron, Rel, VarId};
use num_bigint::BigInt;
use rand::Rng;

pub const BOX_LO: i64 = -8;
pub const BOX_HI: i64 = 8;

/// A random conjunction over `t0..t{n-1}`, each variable boxed in
/// `[BOX_LO, BOX_HI]`.
pub struct RandomInstance {
    pub poly: Polyhedron,
    pub vars: Vec<VarId>,
}

pub fn random_instance(rng: &mut impl Rng, max_vars: usize, max_cs: usize) -> RandomInstance {
    let nvars = rng.gen_range(1..=max_vars);
    let vars: Vec<VarId> = (0..nvars).map(|k| VarId::Tmp(k as u32)).collect();
    let ncs = rng.gen_range(1..=max_cs);
    let mut constraints = Vec::new();
    for _ in 0..ncs {
        let mut terms = Vec::new();
        for v in &vars {
            let c: i64 = rng.gen_range(-3..=3);
            if c != 0 {
                terms.push((v.clone(), BigInt::from(c)));
            }
        }
        if terms.is_empty() {
            terms.push((vars[rng.gen_range(0..nvars)].clone(), BigInt::from(1)));
        }
        let rel = if rng.gen_bool(0.25) { Rel::Eq } else { Rel::Le };
        let bound = BigInt::from(rng.gen_range(-6..=6));
        constraints.push(LinearConstraint::new(terms, rel, bound));
    }
    for v in &vars {
        constraints.push(LinearConstraint::var_ge_const(v.clone(), BOX_LO));
        constraints.push(LinearConstraint::var_le_const(v.clone(), BOX_HI));
    }
    RandomInstance {
        poly: Polyhedron::from_constraints(constraints, vars.iter().cloned()),
        vars,
    }
}

/// Constraint rows compiled down to i64 for fast enumeration.
pub struct FastPoly {
    rows: Vec<(Vec<i64>, bool, i64)>, // (coeffs per var position, is_eq, bound)
}

impl FastPoly {
    /// Panics if the polyhedron mentions variables outside `vars` or
    /// coefficients outside i64; test instances never do.
    pub fn compile(p: &Polyhedron, vars: &[VarId]) -> FastPoly {
        let rows = p
            .constraints
            .iter()
            .map(|c| {
                let coeffs: Vec<i64> = vars
                    .iter()
                    .map(|v| {
                        c.coeffs
                            .get(v)
                            .map(|b| i64::try_from(b).expect("coeff fits i64"))
                            .unwrap_or(0)
                    })
                    .collect();
                for v in c.support() {
                    assert!(vars.contains(v), "unexpected variable {v} in constraints");
                }
                (
                    coeffs,
                    c.rel == Rel::Eq,
                    i64::try_from(&c.bound).expect("bound fits i64"),
                )
            })
            .collect();
        FastPoly { rows }
    }

    pub fn eval(&self, point: &[i64]) -> bool {
        self.rows.iter().all(|(coeffs, is_eq, bound)| {
            let lhs: i64 = coeffs.iter().zip(point).map(|(c, x)| c * x).sum();
            if *is_eq {
                lhs == *bound
            } else {
                lhs <= *bound
            }
        })
    }
}

/// Visit every point of `[lo, hi]^n`.
pub fn for_each_point(n: usize, lo: i64, hi: i64, mut f: impl FnMut(&[i64])) {
    let mut point = vec![lo; n];
    loop {
        f(&point);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            point[i] += 1;
            if point[i] <= hi {
                break;
            }
            point[i] = lo;
            i += 1;
        }
    }
}
