//! Integer satisfiability, entailment and variable elimination.
//!
//! Satisfiability follows the Omega test: equalities are removed by exact
//! substitution (with Pugh's coefficient-reduction step when no unit
//! coefficient exists), then one variable at a time is eliminated through
//! real/dark shadows with splintering on the inexact pairs. Elimination
//! comes in two flavours: `eliminate_exact` returns a finite disjunction
//! covering the projection precisely, `eliminate_dark` a single polyhedron
//! under-approximating it.

use super::{Assignment, LinearConstraint, Polyhedron, Rel, VarId};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

static SAT_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of integer satisfiability queries answered so far (process-wide).
pub fn sat_check_count() -> u64 {
    SAT_CHECKS.load(Ordering::Relaxed)
}

/// A linear expression `sum(coeffs * vars) + konst`, used for substitutions.
#[derive(Debug, Clone)]
struct Expr {
    coeffs: BTreeMap<VarId, BigInt>,
    konst: BigInt,
}

impl Expr {
    fn eval(&self, asg: &Assignment) -> BigInt {
        let mut acc = self.konst.clone();
        for (v, c) in &self.coeffs {
            if let Some(x) = asg.get(v) {
                acc += c * x;
            }
        }
        acc
    }
}

/// Symmetric residue of `a` modulo `m`, in `(-m/2, m/2]`.
fn mod_hat(a: &BigInt, m: &BigInt) -> BigInt {
    let mut r = a.mod_floor(m);
    if &r * 2 > *m {
        r -= m;
    }
    r
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    debug_assert!(b.is_positive());
    -(-a).div_floor(b)
}

/// Solve an equality with a unit coefficient on `z` into `z = expr`.
fn solve_unit(eq: &LinearConstraint, z: &VarId) -> Expr {
    debug_assert_eq!(eq.rel, Rel::Eq);
    let az = eq.coeffs[z].clone();
    debug_assert!(az.abs().is_one());
    // az*z + rest = bound  =>  z = (bound - rest) / az, and 1/az = az.
    let mut coeffs = BTreeMap::new();
    for (v, c) in &eq.coeffs {
        if v != z {
            coeffs.insert(v.clone(), -(c * &az));
        }
    }
    Expr {
        coeffs,
        konst: &eq.bound * &az,
    }
}

/// Replace `z` by `expr` in a constraint.
fn substitute(c: &LinearConstraint, z: &VarId, expr: &Expr) -> LinearConstraint {
    let Some(a) = c.coeffs.get(z).cloned() else {
        return c.clone();
    };
    let mut terms: Vec<(VarId, BigInt)> = c
        .coeffs
        .iter()
        .filter(|(v, _)| *v != z)
        .map(|(v, k)| (v.clone(), k.clone()))
        .collect();
    for (v, q) in &expr.coeffs {
        terms.push((v.clone(), &a * q));
    }
    LinearConstraint::new(terms, c.rel, &c.bound - &a * &expr.konst)
}

/// Lower bound `gamma <= a*z` or upper bound `b*z <= beta` on a variable.
struct Bound {
    coeff: BigInt, // a or b, always positive
    expr: Expr,    // gamma or beta
}

fn split_bounds(
    cs: &[LinearConstraint],
    z: &VarId,
    equalities_too: bool,
) -> (Vec<Bound>, Vec<Bound>, Vec<LinearConstraint>) {
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    let mut rest = Vec::new();
    for c in cs {
        let Some(a) = c.coeffs.get(z) else {
            rest.push(c.clone());
            continue;
        };
        let others = || -> BTreeMap<VarId, BigInt> {
            c.coeffs
                .iter()
                .filter(|(v, _)| *v != z)
                .map(|(v, k)| (v.clone(), k.clone()))
                .collect()
        };
        let mk_upper = |coeff: BigInt| Bound {
            coeff,
            expr: Expr {
                coeffs: others().into_iter().map(|(v, k)| (v, -k)).collect(),
                konst: c.bound.clone(),
            },
        };
        let mk_lower = |coeff: BigInt| Bound {
            coeff,
            expr: Expr {
                coeffs: others(),
                konst: -c.bound.clone(),
            },
        };
        match c.rel {
            Rel::Le => {
                if a.is_positive() {
                    uppers.push(mk_upper(a.clone()));
                } else {
                    lowers.push(mk_lower(-a));
                }
            }
            Rel::Eq => {
                debug_assert!(equalities_too, "equalities must be removed before FM");
                if a.is_positive() {
                    // a*z = bound - rest gives both bounds with the same expr
                    uppers.push(mk_upper(a.clone()));
                    lowers.push(Bound {
                        coeff: a.clone(),
                        expr: Expr {
                            coeffs: others().into_iter().map(|(v, k)| (v, -k)).collect(),
                            konst: c.bound.clone(),
                        },
                    });
                } else {
                    let na = -a;
                    // -na*z + rest = b  <=>  na*z = rest - b
                    lowers.push(Bound {
                        coeff: na.clone(),
                        expr: Expr {
                            coeffs: others(),
                            konst: -c.bound.clone(),
                        },
                    });
                    uppers.push(Bound {
                        coeff: na,
                        expr: Expr {
                            coeffs: others(),
                            konst: -c.bound.clone(),
                        },
                    });
                }
            }
        }
    }
    (lowers, uppers, rest)
}

/// `b*gamma - a*beta <= -slack` for a (lower, upper) pair.
fn shadow_constraint(lo: &Bound, up: &Bound, slack: BigInt) -> LinearConstraint {
    let mut terms: Vec<(VarId, BigInt)> = Vec::new();
    for (v, c) in &lo.expr.coeffs {
        terms.push((v.clone(), &up.coeff * c));
    }
    for (v, c) in &up.expr.coeffs {
        terms.push((v.clone(), -(&lo.coeff * c)));
    }
    let bound = &lo.coeff * &up.expr.konst - &up.coeff * &lo.expr.konst - slack;
    LinearConstraint::new(terms, Rel::Le, bound)
}

fn normalize_all(cs: impl IntoIterator<Item = LinearConstraint>) -> Option<Vec<LinearConstraint>> {
    let mut out = Vec::new();
    for c in cs {
        match c.normalized() {
            None => {}
            Some(n) => {
                if n.is_falsum() {
                    return None;
                }
                out.push(n);
            }
        }
    }
    Some(out)
}

fn support_of(cs: &[LinearConstraint]) -> BTreeSet<VarId> {
    cs.iter().flat_map(|c| c.support().cloned()).collect()
}

/// Pick the elimination variable with the smallest (lowers * uppers) product,
/// ties broken by the variable order.
fn pick_fm_var<'a>(cs: &[LinearConstraint], candidates: impl Iterator<Item = &'a VarId>) -> Option<VarId> {
    let mut best: Option<(usize, VarId)> = None;
    for v in candidates {
        let mut lo = 0usize;
        let mut hi = 0usize;
        let mut occurs = false;
        for c in cs {
            if let Some(a) = c.coeffs.get(v) {
                occurs = true;
                match c.rel {
                    Rel::Le => {
                        if a.is_positive() {
                            hi += 1;
                        } else {
                            lo += 1;
                        }
                    }
                    Rel::Eq => {
                        lo += 1;
                        hi += 1;
                    }
                }
            }
        }
        if !occurs {
            continue;
        }
        let score = lo * hi;
        match &best {
            Some((s, w)) if *s < score || (*s == score && *w < *v) => {}
            _ => best = Some((score, v.clone())),
        }
    }
    best.map(|(_, v)| v)
}

struct Solver {
    fresh_next: u64,
    fuel: u64,
}

impl Solver {
    fn new(cs: &[LinearConstraint]) -> Self {
        let mut fresh_next = 0;
        for c in cs {
            for v in c.support() {
                if let VarId::Fresh(k) = v {
                    fresh_next = fresh_next.max(k + 1);
                }
            }
        }
        Solver {
            fresh_next,
            fuel: 2_000_000,
        }
    }

    fn fresh(&mut self) -> VarId {
        let v = VarId::Fresh(self.fresh_next);
        self.fresh_next += 1;
        v
    }

    fn spend(&mut self) {
        assert!(self.fuel > 0, "omega solver fuel exhausted (solver bug)");
        self.fuel -= 1;
    }

    fn solve(&mut self, cs: Vec<LinearConstraint>) -> Option<Assignment> {
        self.spend();
        let work = normalize_all(cs)?;

        // Equality elimination first.
        if let Some(eq_idx) = work
            .iter()
            .position(|c| c.rel == Rel::Eq && !c.coeffs.is_empty())
        {
            let eq = work[eq_idx].clone();
            let (z, az) = eq
                .coeffs
                .iter()
                .min_by(|(v1, c1), (v2, c2)| c1.abs().cmp(&c2.abs()).then(v1.cmp(v2)))
                .map(|(v, c)| (v.clone(), c.clone()))
                .unwrap();
            if az.abs().is_one() {
                let expr = solve_unit(&eq, &z);
                let rest: Vec<_> = work
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != eq_idx)
                    .map(|(_, c)| substitute(c, &z, &expr))
                    .collect();
                let mut model = self.solve(rest)?;
                let zv = expr.eval(&model);
                model.insert(z, zv);
                return Some(model);
            }
            // Coefficient reduction (Pugh): introduce sigma so that z gets a
            // unit coefficient in a derived equality, substitute, recurse.
            let m = az.abs() + 1;
            let sigma = self.fresh();
            let mut terms: Vec<(VarId, BigInt)> = eq
                .coeffs
                .iter()
                .map(|(v, c)| (v.clone(), mod_hat(c, &m)))
                .collect();
            terms.push((sigma, -m.clone()));
            let eq2 = LinearConstraint::new(terms, Rel::Eq, mod_hat(&eq.bound, &m));
            let expr = solve_unit(&eq2, &z);
            let rest: Vec<_> = work.iter().map(|c| substitute(c, &z, &expr)).collect();
            let mut model = self.solve(rest)?;
            let zv = expr.eval(&model);
            model.insert(z, zv);
            return Some(model);
        }

        // Inequalities only.
        let vars = support_of(&work);
        let Some(z) = pick_fm_var(&work, vars.iter()) else {
            // No variables left; all ground constraints were checked by
            // normalize_all, so the system is satisfiable.
            return Some(Assignment::new());
        };
        let (lowers, uppers, rest) = split_bounds(&work, &z, false);

        if lowers.is_empty() || uppers.is_empty() {
            let mut model = self.solve(rest)?;
            let zv = pick_in_bounds(&lowers, &uppers, &model);
            model.insert(z, zv);
            return Some(model);
        }

        let all_exact = lowers
            .iter()
            .all(|lo| lo.coeff.is_one() || uppers.iter().all(|up| up.coeff.is_one()));
        if all_exact {
            let mut sys = rest;
            for lo in &lowers {
                for up in &uppers {
                    sys.push(shadow_constraint(lo, up, BigInt::zero()));
                }
            }
            let mut model = self.solve(sys)?;
            let zv = pick_in_bounds(&lowers, &uppers, &model);
            debug_assert!(check_bounds(&lowers, &uppers, &model, &zv));
            model.insert(z, zv);
            return Some(model);
        }

        // Dark shadow: satisfiable there implies satisfiable overall.
        let mut dark = rest.clone();
        let mut real = rest.clone();
        for lo in &lowers {
            for up in &uppers {
                let slack = (&lo.coeff - 1) * (&up.coeff - 1);
                dark.push(shadow_constraint(lo, up, slack));
                real.push(shadow_constraint(lo, up, BigInt::zero()));
            }
        }
        if let Some(mut model) = self.solve(dark) {
            let zv = pick_in_bounds(&lowers, &uppers, &model);
            debug_assert!(check_bounds(&lowers, &uppers, &model, &zv));
            model.insert(z, zv);
            return Some(model);
        }
        self.solve(real)?;
        // Splinters: some lower bound must be nearly tight.
        let bmax = uppers.iter().map(|u| u.coeff.clone()).max().unwrap();
        for lo in &lowers {
            let kmax = (&lo.coeff * &bmax - &lo.coeff - &bmax).div_floor(&bmax);
            let mut i = BigInt::zero();
            while i <= kmax {
                // a*z = gamma + i
                let mut terms: Vec<(VarId, BigInt)> = vec![(z.clone(), lo.coeff.clone())];
                for (v, c) in &lo.expr.coeffs {
                    terms.push((v.clone(), -c.clone()));
                }
                let eqc =
                    LinearConstraint::new(terms, Rel::Eq, &lo.expr.konst + &i);
                let mut sys = work.clone();
                sys.push(eqc);
                if let Some(model) = self.solve(sys) {
                    return Some(model);
                }
                i += 1;
            }
        }
        None
    }
}

fn pick_in_bounds(lowers: &[Bound], uppers: &[Bound], model: &Assignment) -> BigInt {
    if !lowers.is_empty() {
        lowers
            .iter()
            .map(|lo| ceil_div(&lo.expr.eval(model), &lo.coeff))
            .max()
            .unwrap()
    } else if !uppers.is_empty() {
        uppers
            .iter()
            .map(|up| up.expr.eval(model).div_floor(&up.coeff))
            .min()
            .unwrap()
    } else {
        BigInt::zero()
    }
}

fn check_bounds(lowers: &[Bound], uppers: &[Bound], model: &Assignment, zv: &BigInt) -> bool {
    lowers.iter().all(|lo| lo.expr.eval(model) <= &lo.coeff * zv)
        && uppers.iter().all(|up| &up.coeff * zv <= up.expr.eval(model))
}

/// Decide integer satisfiability; on success returns a model that is total
/// on the polyhedron's scope (unconstrained variables get 0).
pub fn sat_int(p: &Polyhedron) -> Option<Assignment> {
    SAT_CHECKS.fetch_add(1, Ordering::Relaxed);
    let mut solver = Solver::new(&p.constraints);
    let mut model = solver.solve(p.constraints.clone())?;
    for v in &p.scope {
        model.entry(v.clone()).or_insert_with(BigInt::zero);
    }
    debug_assert!(p.eval(&model), "omega model does not satisfy input");
    let support = p.support();
    model.retain(|v, _| p.scope.contains(v) || support.contains(v));
    Some(model)
}

/// True iff every integer point of `p` satisfies `q`.
///
/// Each constraint of `q` is checked by refuting its negation under `p`;
/// equalities split into two refutations.
pub fn entails(p: &Polyhedron, q: &Polyhedron) -> bool {
    for c in &q.constraints {
        let Some(n) = c.clone().normalized() else {
            continue;
        };
        if n.is_falsum() {
            // q is unsatisfiable; p must be too.
            return sat_int(p).is_none();
        }
        let negations: Vec<LinearConstraint> = match n.rel {
            Rel::Le => {
                // not (t <= b)  ==  -t <= -b-1
                vec![LinearConstraint::new(
                    n.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
                    Rel::Le,
                    -&n.bound - 1,
                )]
            }
            Rel::Eq => vec![
                // t <= b-1
                LinearConstraint::new(
                    n.coeffs.iter().map(|(v, c)| (v.clone(), c.clone())).collect(),
                    Rel::Le,
                    &n.bound - 1,
                ),
                // t >= b+1
                LinearConstraint::new(
                    n.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
                    Rel::Le,
                    -&n.bound - 1,
                ),
            ],
        };
        for neg in negations {
            let mut sys = p.clone();
            sys.push(neg);
            if sat_int(&sys).is_some() {
                return false;
            }
        }
    }
    true
}

/// True iff every integer point of `p` lies in the union of `qs`.
///
/// Splits the complement of the first disjunct into per-constraint
/// negations and recurses into the remaining disjuncts.
pub fn entails_any(p: &Polyhedron, qs: &[Polyhedron]) -> bool {
    let Some((q0, rest)) = qs.split_first() else {
        return sat_int(p).is_none();
    };
    let mut negation_branches: Vec<LinearConstraint> = Vec::new();
    for c in &q0.constraints {
        let Some(n) = c.clone().normalized() else {
            continue;
        };
        match n.rel {
            Rel::Le => negation_branches.push(LinearConstraint::new(
                n.coeffs.iter().map(|(v, k)| (v.clone(), -k)).collect(),
                Rel::Le,
                -&n.bound - 1,
            )),
            Rel::Eq => {
                negation_branches.push(LinearConstraint::new(
                    n.coeffs.iter().map(|(v, k)| (v.clone(), k.clone())).collect(),
                    Rel::Le,
                    &n.bound - 1,
                ));
                negation_branches.push(LinearConstraint::new(
                    n.coeffs.iter().map(|(v, k)| (v.clone(), -k)).collect(),
                    Rel::Le,
                    -&n.bound - 1,
                ));
            }
        }
    }
    if negation_branches.is_empty() {
        // q0 is trivially true (or empty): everything is covered.
        return true;
    }
    for neg in negation_branches {
        let mut branch = p.clone();
        branch.push(neg);
        if sat_int(&branch).is_none() {
            continue;
        }
        if !entails_any(&branch, rest) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Variable elimination
// ---------------------------------------------------------------------------

/// Substitute away drop variables with a unit coefficient in some equality.
/// Returns `None` when a contradiction surfaces.
fn unit_substitutions(
    work: Vec<LinearConstraint>,
    remaining: &mut BTreeSet<VarId>,
) -> Option<Vec<LinearConstraint>> {
    let mut work = normalize_all(work)?;
    loop {
        let mut found: Option<(usize, VarId)> = None;
        'outer: for (i, c) in work.iter().enumerate() {
            if c.rel != Rel::Eq {
                continue;
            }
            for (v, a) in &c.coeffs {
                if a.abs().is_one() && remaining.contains(v) {
                    found = Some((i, v.clone()));
                    break 'outer;
                }
            }
        }
        let Some((idx, z)) = found else {
            return Some(work);
        };
        let eq = work.remove(idx);
        let expr = solve_unit(&eq, &z);
        let next: Vec<_> = work.iter().map(|c| substitute(c, &z, &expr)).collect();
        remaining.remove(&z);
        work = normalize_all(next)?;
    }
}

/// One Fourier-Motzkin step on `z`, pairing lowers with uppers at the given
/// slack policy (`dark`), equalities split into both bound lists.
fn fm_step(work: &[LinearConstraint], z: &VarId, dark: bool) -> Vec<LinearConstraint> {
    let (lowers, uppers, mut rest) = split_bounds(work, z, true);
    for lo in &lowers {
        for up in &uppers {
            let slack = if dark {
                (&lo.coeff - 1) * (&up.coeff - 1)
            } else {
                BigInt::zero()
            };
            rest.push(shadow_constraint(lo, up, slack));
        }
    }
    rest
}

/// Dark-shadow elimination: a single polyhedron whose integer points are a
/// subset of the projection (equal to it when all eliminated coefficients
/// are units, which holds throughout the path-length pipeline).
pub fn eliminate_dark(p: &Polyhedron, drop: &BTreeSet<VarId>) -> Polyhedron {
    let scope: BTreeSet<VarId> = p.scope.difference(drop).cloned().collect();
    let mut remaining: BTreeSet<VarId> = drop.clone();
    let mut work = p.constraints.clone();
    loop {
        work = match unit_substitutions(work, &mut remaining) {
            Some(w) => w,
            None => {
                return Polyhedron::from_constraints(vec![LinearConstraint::falsum()], scope)
            }
        };
        let present: BTreeSet<VarId> = support_of(&work)
            .intersection(&remaining)
            .cloned()
            .collect();
        if present.is_empty() {
            let mut out = Polyhedron::from_constraints(work, scope);
            out = out.canonicalize();
            return out;
        }
        let z = pick_fm_var(&work, present.iter()).unwrap();
        work = fm_step(&work, &z, true);
        remaining.remove(&z);
    }
}

/// Exact elimination: a finite disjunction of polyhedra whose integer points
/// are precisely the projection on bounded instances. Irreducible stride
/// residues (e.g. parity through an unbounded `2y = x`) keep a fresh
/// auxiliary variable, read existentially.
pub fn eliminate_exact(p: &Polyhedron, drop: &BTreeSet<VarId>) -> Vec<Polyhedron> {
    let scope: BTreeSet<VarId> = p.scope.difference(drop).cloned().collect();
    let mut solver = Solver::new(&p.constraints);

    struct Branch {
        work: Vec<LinearConstraint>,
        remaining: BTreeSet<VarId>,
        reductions: u32,
    }
    let mut queue = vec![Branch {
        work: p.constraints.clone(),
        remaining: drop.clone(),
        reductions: 0,
    }];
    let mut out: Vec<Polyhedron> = Vec::new();
    let mut seen: BTreeSet<Vec<LinearConstraint>> = BTreeSet::new();

    while let Some(mut br) = queue.pop() {
        let Some(work) = unit_substitutions(br.work, &mut br.remaining) else {
            continue;
        };
        br.work = work;
        let present: BTreeSet<VarId> = support_of(&br.work)
            .intersection(&br.remaining)
            .cloned()
            .collect();
        if present.is_empty() {
            let poly = Polyhedron::from_constraints(br.work, scope.clone()).canonicalize();
            if sat_int(&poly).is_some() && seen.insert(poly.constraints.clone()) {
                out.push(poly);
            }
            continue;
        }
        let z = pick_fm_var(&br.work, present.iter()).unwrap();
        let in_equality = br
            .work
            .iter()
            .any(|c| c.rel == Rel::Eq && c.coeffs.contains_key(&z));
        if in_equality {
            // Every drop coefficient in equalities is non-unit here.
            if br.reductions < 16 {
                let eq = br
                    .work
                    .iter()
                    .find(|c| c.rel == Rel::Eq && c.coeffs.contains_key(&z))
                    .unwrap()
                    .clone();
                let az = eq.coeffs[&z].clone();
                let m = az.abs() + 1;
                let sigma = solver.fresh();
                let mut terms: Vec<(VarId, BigInt)> = eq
                    .coeffs
                    .iter()
                    .map(|(v, c)| (v.clone(), mod_hat(c, &m)))
                    .collect();
                terms.push((sigma.clone(), -m.clone()));
                let eq2 = LinearConstraint::new(terms, Rel::Eq, mod_hat(&eq.bound, &m));
                let expr = solve_unit(&eq2, &z);
                let work: Vec<_> = br.work.iter().map(|c| substitute(c, &z, &expr)).collect();
                let mut remaining = br.remaining.clone();
                remaining.remove(&z);
                remaining.insert(sigma);
                queue.push(Branch {
                    work,
                    remaining,
                    reductions: br.reductions + 1,
                });
            } else if let Some((lo, hi)) = rational_bounds(&br.work, &z) {
                // Coefficient reduction stalled; the variable is bounded,
                // so enumerate its finitely many values.
                let mut v = lo;
                while v <= hi {
                    let mut work = br.work.clone();
                    work.push(LinearConstraint::var_eq_const(z.clone(), v.clone()));
                    queue.push(Branch {
                        work,
                        remaining: br.remaining.clone(),
                        reductions: 0,
                    });
                    v += 1;
                }
            } else {
                // Unbounded stride residue: keep the variable as a fresh
                // existential and move on.
                let aux = solver.fresh();
                let map: BTreeMap<VarId, VarId> = [(z.clone(), aux)].into_iter().collect();
                let work: Vec<_> = br.work.iter().map(|c| c.rename(&map)).collect();
                let mut remaining = br.remaining.clone();
                remaining.remove(&z);
                queue.push(Branch {
                    work,
                    remaining,
                    reductions: br.reductions,
                });
            }
            continue;
        }
        // Pure inequalities on z.
        let (lowers, uppers, rest) = split_bounds(&br.work, &z, false);
        let mut remaining = br.remaining.clone();
        remaining.remove(&z);
        if lowers.is_empty() || uppers.is_empty() {
            queue.push(Branch {
                work: rest,
                remaining,
                reductions: br.reductions,
            });
            continue;
        }
        let all_exact = lowers
            .iter()
            .all(|lo| lo.coeff.is_one() || uppers.iter().all(|up| up.coeff.is_one()));
        if all_exact {
            let mut sys = rest;
            for lo in &lowers {
                for up in &uppers {
                    sys.push(shadow_constraint(lo, up, BigInt::zero()));
                }
            }
            queue.push(Branch {
                work: sys,
                remaining,
                reductions: br.reductions,
            });
            continue;
        }
        // Dark branch plus splinters.
        let mut dark = rest.clone();
        for lo in &lowers {
            for up in &uppers {
                let slack = (&lo.coeff - 1) * (&up.coeff - 1);
                dark.push(shadow_constraint(lo, up, slack));
            }
        }
        queue.push(Branch {
            work: dark,
            remaining: remaining.clone(),
            reductions: br.reductions,
        });
        let bmax = uppers.iter().map(|u| u.coeff.clone()).max().unwrap();
        for lo in &lowers {
            let kmax = (&lo.coeff * &bmax - &lo.coeff - &bmax).div_floor(&bmax);
            let mut i = BigInt::zero();
            while i <= kmax {
                let mut terms: Vec<(VarId, BigInt)> = vec![(z.clone(), lo.coeff.clone())];
                for (v, c) in &lo.expr.coeffs {
                    terms.push((v.clone(), -c.clone()));
                }
                let eqc = LinearConstraint::new(terms, Rel::Eq, &lo.expr.konst + &i);
                let mut work = br.work.clone();
                work.push(eqc);
                queue.push(Branch {
                    work,
                    remaining: br.remaining.clone(),
                    reductions: br.reductions,
                });
                i += 1;
            }
        }
    }
    out
}

/// Conservative integer bounds for `z` obtained by rational Fourier-Motzkin
/// elimination of all other variables. `None` when unbounded or too large.
fn rational_bounds(cs: &[LinearConstraint], z: &VarId) -> Option<(BigInt, BigInt)> {
    const MAX_CONSTRAINTS: usize = 2000;
    const MAX_WIDTH: i64 = 256;
    let mut work: Vec<LinearConstraint> = cs.to_vec();
    loop {
        if work.len() > MAX_CONSTRAINTS {
            return None;
        }
        let vars: BTreeSet<VarId> = support_of(&work).into_iter().filter(|v| v != z).collect();
        let Some(w) = pick_fm_var(&work, vars.iter()) else {
            break;
        };
        work = fm_step(&work, &w, false);
        work = normalize_all(work)?;
    }
    // Only constraints on z (or ground) remain.
    let mut lo: Option<BigInt> = None;
    let mut hi: Option<BigInt> = None;
    for c in &work {
        let Some(a) = c.coeffs.get(z) else { continue };
        match c.rel {
            Rel::Le | Rel::Eq => {
                if a.is_positive() {
                    let b = c.bound.div_floor(a);
                    hi = Some(hi.map_or(b.clone(), |h: BigInt| h.min(b)));
                    if c.rel == Rel::Eq {
                        let b2 = ceil_div(&c.bound, a);
                        lo = Some(lo.map_or(b2.clone(), |l: BigInt| l.max(b2)));
                    }
                } else {
                    let na = -a;
                    let b = ceil_div(&-&c.bound, &na);
                    lo = Some(lo.map_or(b.clone(), |l: BigInt| l.max(b)));
                    if c.rel == Rel::Eq {
                        let b2 = (-&c.bound).div_floor(&na);
                        hi = Some(hi.map_or(b2.clone(), |h: BigInt| h.min(b2)));
                    }
                }
            }
        }
    }
    match (lo, hi) {
        (Some(l), Some(h)) if &h - &l <= BigInt::from(MAX_WIDTH) => Some((l, h)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::parse_constraint;

    fn poly(cs: &[&str]) -> Polyhedron {
        let constraints: Vec<_> = cs.iter().map(|s| parse_constraint(s).unwrap()).collect();
        let scope: BTreeSet<VarId> = constraints
            .iter()
            .flat_map(|c| c.support().cloned())
            .collect();
        Polyhedron { constraints, scope }
    }

    #[test]
    fn empty_interval_is_unsat() {
        assert!(sat_int(&poly(&["t0 >= 1", "t0 <= 0"])).is_none());
    }

    #[test]
    fn odd_value_of_doubled_var_is_unsat() {
        // 2x = y, y = 1 has no integer solution.
        let p = poly(&["2*t0 - t1 = 0", "t1 >= 1", "t1 <= 1"]);
        assert!(sat_int(&p).is_none());
    }

    #[test]
    fn model_satisfies_all_constraints() {
        let p = poly(&["t0 - t1 <= -1", "t1 <= 5", "t0 >= -3", "2*t0 + t1 <= 7"]);
        let m = sat_int(&p).expect("sat");
        assert!(p.eval(&m));
    }

    #[test]
    fn entailment_on_intervals() {
        assert!(entails(&poly(&["t0 >= 1"]), &poly(&["t0 >= 0"])));
        assert!(!entails(&poly(&["t0 >= 0"]), &poly(&["t0 >= 1"])));
    }

    #[test]
    fn entailment_through_equality() {
        // {x <= -1, y = x - 1} entails {y <= -1}
        let p = poly(&["t0 <= -1", "t0 - t1 = 1"]);
        let q = poly(&["t1 <= -1"]);
        assert!(entails(&p, &q));
    }

    #[test]
    fn eliminate_substitutes_equalities() {
        // eliminate y from {x = y + 1, y >= 0} -> {x >= 1}
        let p = poly(&["t0 - t1 = 1", "t1 >= 0"]);
        let drop: BTreeSet<_> = [VarId::Tmp(1)].into_iter().collect();
        let d = eliminate_dark(&p, &drop);
        let expect = poly(&["t0 >= 1"]).canonicalize();
        assert_eq!(d.canonicalize().constraints, expect.constraints);
        let e = eliminate_exact(&p, &drop);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].constraints, expect.constraints);
    }

    #[test]
    fn eliminate_nothing_from_empty() {
        let p = Polyhedron::top([VarId::Tmp(0)]);
        let drop: BTreeSet<_> = [VarId::Tmp(1)].into_iter().collect();
        assert!(eliminate_dark(&p, &drop).constraints.is_empty());
        let e = eliminate_exact(&p, &drop);
        assert_eq!(e.len(), 1);
        assert!(e[0].constraints.is_empty());
    }

    #[test]
    fn exact_projection_keeps_parity_on_bounded_instance() {
        // eliminate y from {2y = x, 0 <= x <= 3}: points are {0, 2}
        let p = poly(&["2*t1 - t0 = 0", "t0 >= 0", "t0 <= 3"]);
        let drop: BTreeSet<_> = [VarId::Tmp(1)].into_iter().collect();
        let disjuncts = eliminate_exact(&p, &drop);
        let mut points = BTreeSet::new();
        for x in 0..=3i64 {
            let asg: Assignment = [(VarId::Tmp(0), BigInt::from(x))].into_iter().collect();
            if disjuncts.iter().any(|d| d.eval(&asg)) {
                points.insert(x);
            }
        }
        assert_eq!(points.into_iter().collect::<Vec<_>>(), vec![0, 2]);
        // dark shadow must be a subset
        let d = eliminate_dark(&p, &drop);
        for x in 0..=3i64 {
            let asg: Assignment = [(VarId::Tmp(0), BigInt::from(x))].into_iter().collect();
            if d.eval(&asg) {
                assert!(x == 0 || x == 2);
            }
        }
    }
}
