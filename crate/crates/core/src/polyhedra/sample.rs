//! Randomized model sampling.
//!
//! Fixes variables one by one to random values from a box, keeping the
//! system satisfiable; variables that cannot hit the box take the value
//! from the current Omega model. Seed-driven and reproducible.

use super::{sat_int, Assignment, LinearConstraint, Polyhedron, VarId};
use rand::seq::SliceRandom;
use rand::Rng;

/// Sample a model of `p`, steering the variables in `order` towards random
/// values in `[lo, hi]`. Returns `None` iff `p` is unsatisfiable.
pub fn sample_model(
    p: &Polyhedron,
    order: &[VarId],
    rng: &mut impl Rng,
    lo: i64,
    hi: i64,
) -> Option<Assignment> {
    let mut current = sat_int(p)?;
    let mut fixed = p.clone();
    for v in order {
        let mut candidates: Vec<i64> = (lo..=hi).collect();
        candidates.shuffle(rng);
        candidates.truncate(8);
        let mut done = false;
        for c in candidates {
            let mut sys = fixed.clone();
            sys.push(LinearConstraint::var_eq_const(v.clone(), c));
            if let Some(m) = sat_int(&sys) {
                fixed = sys;
                current = m;
                done = true;
                break;
            }
        }
        if !done {
            let val = current.get(v).cloned().unwrap_or_default();
            fixed.push(LinearConstraint::var_eq_const(v.clone(), val));
        }
    }
    Some(current)
}
