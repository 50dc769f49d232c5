//! Automatic discharge: interval reasoning, then bounded enumeration.

use std::collections::HashSet;

use crate::b0::ast::{B0Type, Expr};
use crate::b0::Value;

use super::eval::{eval_pred, Valuation};
use super::generate::typing_hyps;
use super::interval::{interval_truth, Truth};
use super::{ProofObligation, ProofResult, ProofStatus};

pub const DEFAULT_BUDGET: u64 = 1 << 20;

pub fn prove_all(pos: &[ProofObligation], budget: u64) -> Vec<ProofResult> {
    pos.iter().map(|po| prove(po, budget)).collect()
}

/// Intervals first; if inconclusive and the goal's dependency cone is
/// small enough, exhaustive enumeration over it. A definite interval
/// refutation still goes through enumeration so a witness can be shown.
pub fn prove(po: &ProofObligation, budget: u64) -> ProofResult {
    let status = match interval_truth(po) {
        Truth::True => ProofStatus::ProvedInterval,
        _ => enumerate(po, budget.max(1)),
    };
    ProofResult { po_id: po.id, status }
}

fn vars_of(e: &Expr) -> Vec<String> {
    let mut v = vec![];
    e.free_vars(&mut v);
    v
}

/// Names connected to `seed` through shared hypotheses, plus the
/// hypotheses that mention them.
fn cone(seed: Vec<String>, hyps: &[(Expr, Vec<String>)]) -> (Vec<String>, Vec<&Expr>) {
    let mut names = seed;
    let mut used = vec![false; hyps.len()];
    loop {
        let mut grew = false;
        for (k, (_, hv)) in hyps.iter().enumerate() {
            if !used[k] && hv.iter().any(|n| names.contains(n)) {
                used[k] = true;
                grew = true;
                for n in hv {
                    if !names.contains(n) {
                        names.push(n.clone());
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    let picked = hyps.iter().zip(&used).filter(|(_, u)| **u).map(|((h, _), _)| h).collect();
    (names, picked)
}

fn enumerate(po: &ProofObligation, budget: u64) -> ProofStatus {
    // Typing hypotheses hold for every enumerated value by construction.
    let typing: HashSet<Expr> = po.domains.iter().flat_map(|(n, t)| typing_hyps(n, t)).collect();
    let hyps: Vec<(Expr, Vec<String>)> =
        po.hypotheses.iter().filter(|h| !typing.contains(h)).map(|h| (h.clone(), vars_of(h))).collect();
    let (names, relevant) = cone(vars_of(&po.goal), &hyps);
    let Some(doms) = domains(po, &names, budget) else { return ProofStatus::Unproven };

    let mut found = None;
    let complete = for_each_valuation(&doms, |env| {
        if !relevant.iter().all(|h| eval_pred(h, env) == Some(true)) {
            return true;
        }
        if eval_pred(&po.goal, env) == Some(true) {
            return true;
        }
        found = Some(env.clone());
        false
    });
    if complete {
        return ProofStatus::ProvedEnum;
    }
    let mut env = found.expect("enumeration stopped on a counterexample");

    // Remaining hypotheses are independent of the witness; extend it
    // with some valuation satisfying them, one connected group at a time.
    let mut rest: Vec<(Expr, Vec<String>)> =
        hyps.into_iter().filter(|(_, hv)| !hv.iter().any(|n| names.contains(n))).collect();
    while let Some((_, hv)) = rest.first() {
        let (group, group_hyps) = cone(hv.clone(), &rest);
        let Some(doms) = domains(po, &group, budget) else { return ProofStatus::Unproven };
        let mut ext = None;
        for_each_valuation(&doms, |e| {
            if group_hyps.iter().all(|h| eval_pred(h, e) == Some(true)) {
                ext = Some(e.clone());
                return false;
            }
            true
        });
        // Unsatisfiable side hypotheses make the obligation vacuous.
        let Some(ext) = ext else { return ProofStatus::ProvedEnum };
        env.extend(ext);
        rest.retain(|(_, hv)| !hv.iter().any(|n| group.contains(n)));
    }

    let witness = po.domains.iter().filter_map(|(n, _)| env.get(n).map(|v| (n.clone(), v.clone()))).collect();
    ProofStatus::Counterexample(witness)
}

/// Domains of `names` in obligation order, if their product fits the budget.
fn domains<'a>(po: &'a ProofObligation, names: &[String], budget: u64) -> Option<Vec<(String, &'a B0Type)>> {
    let mut out = vec![];
    let mut size: u128 = 1;
    for (n, ty) in &po.domains {
        if names.contains(n) {
            size = size.saturating_mul(ty.domain_size());
            out.push((n.clone(), ty));
        }
    }
    if out.len() != names.len() || size > budget as u128 {
        return None;
    }
    Some(out)
}

/// Visits every valuation in lexicographic order (first name slowest)
/// until `visit` returns false. Returns whether the walk completed.
fn for_each_valuation(doms: &[(String, &B0Type)], mut visit: impl FnMut(&Valuation) -> bool) -> bool {
    let values: Vec<Vec<Value>> = doms.iter().map(|(_, t)| Value::enumerate(t)).collect();
    if values.iter().any(Vec::is_empty) {
        return true;
    }
    let mut idx = vec![0usize; doms.len()];
    let mut env: Valuation = doms.iter().zip(&values).map(|((n, _), vs)| (n.clone(), vs[0].clone())).collect();
    loop {
        if !visit(&env) {
            return false;
        }
        let mut k = doms.len();
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < values[k].len() {
                env.insert(doms[k].0.clone(), values[k][idx[k]].clone());
                break;
            }
            idx[k] = 0;
            env.insert(doms[k].0.clone(), values[k][0].clone());
        }
    }
}
