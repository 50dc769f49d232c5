//! Proof obligation generation by weakest-precondition traversal.
//!
//! FOR loops are unrolled (their bounds are literals), so the calculus is
//! plain substitution: `wp(x := e, Q) = Q[e/x]`, array element writes
//! substitute an override term, and conditionals split into guarded
//! conjuncts. Well-definedness sites inside a loop body yield one
//! obligation whose goal conjoins every iteration.

use std::collections::BTreeMap;

use crate::b0::ast::{ArithOp, B0Type, Expr, Pos, RelOp, Stmt, StmtKind, Target};
use crate::b0::typed::{TStmt, TStmtKind, TypedModel};

use super::{PoKind, ProofObligation};

pub fn generate_pos(tm: &TypedModel) -> Vec<ProofObligation> {
    let model = &tm.model;
    let state_domains: Vec<(String, B0Type)> = tm.state.iter().map(|s| (s.name.clone(), s.ty.clone())).collect();
    let mut cycle_domains = state_domains.clone();
    cycle_domains.extend(tm.inputs.iter().map(|i| (i.name.clone(), i.ty.clone())));

    let mut cycle_hyps: Vec<Expr> = cycle_domains.iter().flat_map(|(n, t)| typing_hyps(n, t)).collect();
    if model.invariant != Expr::Bool(true) {
        cycle_hyps.push(model.invariant.clone());
    }

    let mut pos = vec![ProofObligation {
        id: 1,
        kind: PoKind::InitEstablishes,
        loc: model.init_pos,
        hypotheses: vec![],
        goal: wp_stmts(&model.init, model.invariant.clone()),
        domains: state_domains.clone(),
    }];
    pos.push(ProofObligation {
        id: 2,
        kind: PoKind::CyclePreserves,
        loc: model.cycle_pos,
        hypotheses: cycle_hyps.clone(),
        goal: wp_stmts(&model.cycle, model.invariant.clone()),
        domains: cycle_domains.clone(),
    });

    for (body, typed, hyps, domains) in
        [(&model.init, &tm.init, vec![], &state_domains), (&model.cycle, &tm.cycle, cycle_hyps, &cycle_domains)]
    {
        let mut sites = Sites::default();
        sites.walk(tm, body, typed, &mut vec![]);
        for (_, site) in sites.into_ordered() {
            let id = pos.len() as u32 + 1;
            pos.push(ProofObligation {
                id,
                kind: site.kind,
                loc: site.loc,
                hypotheses: hyps.clone(),
                goal: Expr::conj(site.goals),
                domains: domains.clone(),
            });
        }
    }
    pos
}

/// `lo <= x & x <= hi` for integers, one conjunct pair per array cell.
pub fn typing_hyps(name: &str, ty: &B0Type) -> Vec<Expr> {
    let range = |e: Expr, lo: i64, hi: i64| {
        Expr::and(Expr::rel(RelOp::Le, Expr::Int(lo), e.clone()), Expr::rel(RelOp::Le, e, Expr::Int(hi)))
    };
    match ty {
        B0Type::Bool => vec![],
        B0Type::Int { lo, hi } => vec![range(Expr::var(name), *lo, *hi)],
        B0Type::Array { len, elem } => match **elem {
            B0Type::Int { lo, hi } => {
                (0..*len).map(|i| range(Expr::index(Expr::var(name), Expr::Int(i as i64)), lo, hi)).collect()
            }
            _ => vec![],
        },
    }
}

pub fn wp_stmts(stmts: &[Stmt], post: Expr) -> Expr {
    stmts.iter().rev().fold(post, |q, s| wp_stmt(s, q))
}

fn wp_stmt(s: &Stmt, q: Expr) -> Expr {
    match &s.kind {
        StmtKind::Assign(Target::Var(x), e) => q.subst(x, e),
        StmtKind::Assign(Target::Elem(a, i), e) => {
            let stored = Expr::Store(Box::new(Expr::var(a.clone())), Box::new(i.clone()), Box::new(e.clone()));
            q.subst(a, &stored)
        }
        StmtKind::If(arms, els) => {
            let mut parts = vec![];
            let mut prior: Vec<Expr> = vec![];
            for (g, body) in arms {
                let guard = Expr::conj(prior.iter().cloned().chain([g.clone()]));
                parts.push(Expr::implies(guard, wp_stmts(body, q.clone())));
                prior.push(Expr::not(g.clone()));
            }
            let else_body = els.as_deref().unwrap_or(&[]);
            parts.push(Expr::implies(Expr::conj(prior), wp_stmts(else_body, q)));
            Expr::conj(parts)
        }
        StmtKind::For { var, from, to, body } => {
            let (from, to) = (literal(from), literal(to));
            (from..=to).rev().fold(q, |q, k| wp_stmts(body, q).subst(var, &Expr::Int(k)))
        }
    }
}

fn literal(e: &Expr) -> i64 {
    match e {
        Expr::Int(v) => *v,
        _ => unreachable!("loop bounds are literals in a checked model"),
    }
}

/// Context of a well-definedness site, outermost first.
#[derive(Clone)]
enum Frame<'a> {
    Before(&'a Stmt),
    Guard(Expr),
    /// Inside iteration `value` of a loop whose earlier iterations
    /// `from..value` have already run.
    Iter { var: &'a str, value: i64, from: i64, body: &'a [Stmt] },
}

fn close(frames: &[Frame<'_>], cond: Expr) -> Expr {
    frames.iter().rev().fold(cond, |q, f| match f {
        Frame::Before(s) => wp_stmt(s, q),
        Frame::Guard(g) => Expr::implies(g.clone(), q),
        Frame::Iter { var, value, from, body } => {
            let q = q.subst(var, &Expr::Int(*value));
            (*from..*value).rev().fold(q, |q, k| wp_stmts(body, q).subst(var, &Expr::Int(k)))
        }
    })
}

struct Site {
    kind: PoKind,
    loc: Pos,
    goals: Vec<Expr>,
    order: usize,
}

#[derive(Default)]
struct Sites {
    by_key: BTreeMap<(Pos, usize), Site>,
}

impl Sites {
    fn into_ordered(self) -> Vec<((Pos, usize), Site)> {
        let mut v: Vec<_> = self.by_key.into_iter().collect();
        v.sort_by_key(|(_, s)| s.order);
        v
    }

    fn add(&mut self, key: (Pos, usize), kind: PoKind, frames: &[Frame<'_>], cond: Expr) {
        let goal = close(frames, cond);
        let order = self.by_key.len();
        let site = self.by_key.entry(key).or_insert(Site { kind, loc: key.0, goals: vec![], order });
        if !site.goals.contains(&goal) {
            site.goals.push(goal);
        }
    }

    fn walk<'a>(&mut self, tm: &TypedModel, stmts: &'a [Stmt], typed: &[TStmt], frames: &mut Vec<Frame<'a>>) {
        let depth = frames.len();
        for (s, ts) in stmts.iter().zip(typed) {
            let mut ordinal = 0;
            let mut expr_sites = |this: &mut Self, e: &Expr, frames: &[Frame<'_>]| {
                for (kind, cond) in expr_wd(tm, e) {
                    this.add((s.pos, ordinal), kind, frames, cond);
                    ordinal += 1;
                }
            };
            match (&s.kind, &ts.kind) {
                (StmtKind::Assign(target, value), TStmtKind::Assign { check, .. }) => {
                    if let Target::Elem(a, i) = target {
                        expr_sites(self, i, frames);
                        if let Some(cond) = index_cond(tm, a, i) {
                            self.add((s.pos, 1000), PoKind::WdIndex, frames, cond);
                        }
                    }
                    expr_sites(self, value, frames);
                    if let Some((lo, hi)) = check {
                        let cond = Expr::and(
                            Expr::rel(RelOp::Le, Expr::Int(*lo), value.clone()),
                            Expr::rel(RelOp::Le, value.clone(), Expr::Int(*hi)),
                        );
                        self.add((s.pos, 1001), PoKind::WdRange, frames, cond);
                    }
                }
                (StmtKind::If(arms, els), TStmtKind::If { arms: tarms, els: tels }) => {
                    let mut prior: Vec<Expr> = vec![];
                    for ((g, body), (_, tbody)) in arms.iter().zip(tarms) {
                        frames.push(Frame::Guard(Expr::conj(prior.clone())));
                        expr_sites(self, g, frames);
                        frames.pop();
                        frames.push(Frame::Guard(Expr::conj(prior.iter().cloned().chain([g.clone()]))));
                        self.walk(tm, body, tbody, frames);
                        frames.pop();
                        prior.push(Expr::not(g.clone()));
                    }
                    if let Some(body) = els {
                        frames.push(Frame::Guard(Expr::conj(prior)));
                        self.walk(tm, body, tels, frames);
                        frames.pop();
                    }
                }
                (StmtKind::For { var, body, .. }, TStmtKind::For { from, to, body: tbody, .. }) => {
                    for k in *from..=*to {
                        frames.push(Frame::Iter { var, value: k, from: *from, body });
                        self.walk(tm, body, tbody, frames);
                        frames.pop();
                    }
                }
                _ => unreachable!("typed and untyped statements are isomorphic"),
            }
            frames.push(Frame::Before(s));
        }
        frames.truncate(depth);
    }
}

fn array_len(tm: &TypedModel, name: &str) -> Option<u32> {
    let ty = tm
        .state
        .iter()
        .map(|s| (&s.name, &s.ty))
        .chain(tm.inputs.iter().map(|i| (&i.name, &i.ty)))
        .find(|(n, _)| *n == name)?
        .1;
    match ty {
        B0Type::Array { len, .. } => Some(*len),
        _ => None,
    }
}

/// `0 <= i & i < len`, or `None` for a literal index (checked statically).
fn index_cond(tm: &TypedModel, array: &str, index: &Expr) -> Option<Expr> {
    if matches!(index, Expr::Int(_)) {
        return None;
    }
    let len = array_len(tm, array)?;
    Some(Expr::and(
        Expr::rel(RelOp::Le, Expr::Int(0), index.clone()),
        Expr::rel(RelOp::Lt, index.clone(), Expr::Int(len as i64)),
    ))
}

/// Well-definedness conditions of an expression, in evaluation order.
fn expr_wd(tm: &TypedModel, e: &Expr) -> Vec<(PoKind, Expr)> {
    let mut out = vec![];
    collect_wd(tm, e, &mut out);
    out
}

fn collect_wd(tm: &TypedModel, e: &Expr, out: &mut Vec<(PoKind, Expr)>) {
    match e {
        Expr::Bool(_) | Expr::Int(_) | Expr::Var(_) => {}
        Expr::Index(a, i) => {
            collect_wd(tm, i, out);
            if let Expr::Var(name) = &**a {
                if let Some(cond) = index_cond(tm, name, i) {
                    out.push((PoKind::WdIndex, cond));
                }
            }
        }
        Expr::Store(a, i, v) => {
            collect_wd(tm, a, out);
            collect_wd(tm, i, out);
            collect_wd(tm, v, out);
        }
        Expr::Arith(op, x, y) => {
            collect_wd(tm, x, out);
            collect_wd(tm, y, out);
            if matches!(op, ArithOp::Div | ArithOp::Mod) && !matches!(**y, Expr::Int(v) if v != 0) {
                out.push((PoKind::WdDiv, Expr::rel(RelOp::Ne, (**y).clone(), Expr::Int(0))));
            }
        }
        Expr::Neg(x) | Expr::Not(x) => collect_wd(tm, x, out),
        Expr::Rel(_, x, y) | Expr::And(x, y) | Expr::Or(x, y) => {
            collect_wd(tm, x, out);
            collect_wd(tm, y, out);
        }
    }
}
