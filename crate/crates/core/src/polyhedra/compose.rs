//! Relational composition of path-length polyhedra.
//!
//! `compose_pl(pl1, pl2, (lt, st))` renames pl1's outputs and pl2's inputs
//! to shared temporaries, conjoins, and eliminates the temporaries. The
//! default dark-shadow projection stays a single polyhedron and is exact
//! whenever all coefficients are units, which is the case for every
//! instruction abstraction.

use super::{eliminate_dark, eliminate_exact, Polyhedron, VarId};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("arity mismatch: pl1 outputs {left:?} do not line up with pl2 inputs {right:?} at mid arity ({lt}, {st})")]
    ArityMismatch {
        lt: usize,
        st: usize,
        left: Vec<String>,
        right: Vec<String>,
    },
}

/// Projection flavour used when temporaries (or unfolding variables) are
/// eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    #[default]
    DarkShadow,
    Exact,
}

fn mid_map_outputs(lt: usize, st: usize) -> BTreeMap<VarId, VarId> {
    let mut m = BTreeMap::new();
    for k in 0..lt {
        m.insert(VarId::OutL(k as u32), VarId::Tmp(k as u32));
    }
    for k in 0..st {
        m.insert(VarId::OutS(k as u32), VarId::Tmp((lt + k) as u32));
    }
    m
}

fn mid_map_inputs(lt: usize, st: usize) -> BTreeMap<VarId, VarId> {
    let mut m = BTreeMap::new();
    for k in 0..lt {
        m.insert(VarId::InL(k as u32), VarId::Tmp(k as u32));
    }
    for k in 0..st {
        m.insert(VarId::InS(k as u32), VarId::Tmp((lt + k) as u32));
    }
    m
}

fn check_arity(
    pl1: &Polyhedron,
    pl2: &Polyhedron,
    lt: usize,
    st: usize,
) -> Result<(), ComposeError> {
    let bad_left: Vec<String> = pl1
        .support()
        .into_iter()
        .filter(|v| match v {
            VarId::OutL(k) => *k as usize >= lt,
            VarId::OutS(k) => *k as usize >= st,
            _ => false,
        })
        .map(|v| v.token())
        .collect();
    let bad_right: Vec<String> = pl2
        .support()
        .into_iter()
        .filter(|v| match v {
            VarId::InL(k) => *k as usize >= lt,
            VarId::InS(k) => *k as usize >= st,
            _ => false,
        })
        .map(|v| v.token())
        .collect();
    if bad_left.is_empty() && bad_right.is_empty() {
        Ok(())
    } else {
        Err(ComposeError::ArityMismatch {
            lt,
            st,
            left: bad_left,
            right: bad_right,
        })
    }
}

/// General composition; returns one polyhedron per projection disjunct
/// (always a singleton in dark-shadow mode).
pub fn compose_pl_all(
    pl1: &Polyhedron,
    pl2: &Polyhedron,
    mid: (usize, usize),
    mode: ProjectionMode,
) -> Result<Vec<Polyhedron>, ComposeError> {
    let (lt, st) = mid;
    check_arity(pl1, pl2, lt, st)?;
    let left = pl1.rename(&mid_map_outputs(lt, st));
    let right = pl2.rename(&mid_map_inputs(lt, st));
    let joined = left.and(&right);
    let drop: BTreeSet<VarId> = (0..lt + st).map(|k| VarId::Tmp(k as u32)).collect();
    let scope: BTreeSet<VarId> = pl1
        .scope
        .iter()
        .filter(|v| matches!(v, VarId::InL(_) | VarId::InS(_)))
        .cloned()
        .chain(
            pl2.scope
                .iter()
                .filter(|v| matches!(v, VarId::OutL(_) | VarId::OutS(_)))
                .cloned(),
        )
        .collect();
    let rescope = |mut p: Polyhedron| {
        p.scope = scope.clone();
        p.canonicalize()
    };
    Ok(match mode {
        ProjectionMode::DarkShadow => vec![rescope(eliminate_dark(&joined, &drop))],
        ProjectionMode::Exact => eliminate_exact(&joined, &drop)
            .into_iter()
            .map(rescope)
            .collect(),
    })
}

/// Default composition (dark-shadow projection, single polyhedron).
pub fn compose_pl(
    pl1: &Polyhedron,
    pl2: &Polyhedron,
    mid: (usize, usize),
) -> Result<Polyhedron, ComposeError> {
    Ok(compose_pl_all(pl1, pl2, mid, ProjectionMode::DarkShadow)?
        .pop()
        .expect("dark mode yields one polyhedron"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::parse_constraint;

    fn poly(cs: &[&str], scope: &[VarId]) -> Polyhedron {
        Polyhedron::from_constraints(
            cs.iter().map(|s| parse_constraint(s).unwrap()).collect(),
            scope.iter().cloned(),
        )
    }

    #[test]
    fn ifeq_then_const_matches_the_b1_block_constraint() {
        // (ifeq int at (1,1)) ;PL (const 0 at (1,0)) = {il0=ol0, is0=0, 0=os0}
        let ifeq = poly(
            &["il0 = ol0", "is0 = 0"],
            &[VarId::InL(0), VarId::InS(0), VarId::OutL(0)],
        );
        let konst = poly(
            &["il0 = ol0", "0 = os0"],
            &[VarId::InL(0), VarId::OutL(0), VarId::OutS(0)],
        );
        let got = compose_pl(&ifeq, &konst, (1, 0)).unwrap();
        let want = poly(
            &["il0 = ol0", "is0 = 0", "0 = os0"],
            &[VarId::InL(0), VarId::InS(0), VarId::OutL(0), VarId::OutS(0)],
        )
        .canonicalize();
        assert_eq!(got.constraints, want.constraints);
    }

    #[test]
    fn identity_composition_is_identity() {
        let pl = poly(
            &["il0 = ol0", "il0 - os0 <= 2", "os0 <= 5"],
            &[VarId::InL(0), VarId::OutL(0), VarId::OutS(0)],
        );
        let id = poly(
            &["il0 = ol0", "is0 = os0"],
            &[VarId::InL(0), VarId::InS(0), VarId::OutL(0), VarId::OutS(0)],
        );
        let got = compose_pl(&pl, &id, (1, 1)).unwrap();
        assert_eq!(got.constraints, pl.canonicalize().constraints);
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let pl1 = poly(&["il0 = ol0"], &[VarId::InL(0), VarId::OutL(0)]);
        let pl2 = poly(
            &["il0 = ol0", "is1 = os0"],
            &[VarId::InL(0), VarId::InS(1), VarId::OutL(0), VarId::OutS(0)],
        );
        assert!(compose_pl(&pl1, &pl2, (1, 0)).is_err());
    }
}
