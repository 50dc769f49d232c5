//! Type checking and name resolution.
//!
//! The checked form resolves every name to a slot: inputs by declaration
//! index, state (vars then outputs) by canonical index, loop counters by
//! nesting depth.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::TypeError;

pub const I32_MIN: i64 = i32::MIN as i64;
pub const I32_MAX: i64 = i32::MAX as i64;

/// Type of a scalar expression. Integer expressions carry a static range
/// only when they are a literal or a name read; arithmetic results carry
/// none and are range-checked when stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarTy {
    Bool,
    Int(Option<(i64, i64)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: ScalarTy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TExprKind {
    Bool(bool),
    Int(i64),
    Input(usize),
    State(usize),
    Loop(usize),
    InputElem(usize, Box<TExpr>),
    StateElem(usize, Box<TExpr>),
    Neg(Box<TExpr>),
    Arith(ArithOp, Box<TExpr>, Box<TExpr>),
    Rel(RelOp, Box<TExpr>, Box<TExpr>),
    And(Box<TExpr>, Box<TExpr>),
    Or(Box<TExpr>, Box<TExpr>),
    Not(Box<TExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TTarget {
    State(usize),
    Elem(usize, TExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TStmt {
    pub kind: TStmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TStmtKind {
    /// `check` holds the declared range when the stored value is not
    /// statically known to fit it.
    Assign { target: TTarget, value: TExpr, check: Option<(i64, i64)> },
    If { arms: Vec<(TExpr, Vec<TStmt>)>, els: Vec<TStmt> },
    For { slot: usize, from: i64, to: i64, body: Vec<TStmt> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Var,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVar {
    pub name: String,
    pub ty: B0Type,
    pub kind: StateKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputVar {
    pub name: String,
    pub ty: B0Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedModel {
    pub model: Model,
    /// Canonical order: VARS in declaration order, then OUTPUTS.
    pub state: Vec<StateVar>,
    pub inputs: Vec<InputVar>,
    pub invariant: TExpr,
    pub init: Vec<TStmt>,
    pub cycle: Vec<TStmt>,
    /// Number of loop-counter slots (maximum FOR nesting depth).
    pub loop_slots: usize,
}

impl TypedModel {
    pub fn name(&self) -> &str {
        &self.model.name
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state.iter().position(|s| s.name == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s.name == name)
    }

    /// Total scalar cells of the state, arrays flattened.
    pub fn state_scalar_count(&self) -> usize {
        self.state.iter().map(|s| s.ty.scalar_count()).sum()
    }

    pub fn outputs(&self) -> impl Iterator<Item = (usize, &StateVar)> {
        self.state.iter().enumerate().filter(|(_, s)| s.kind == StateKind::Output)
    }
}

pub fn typecheck(model: &Model) -> Result<TypedModel, TypeError> {
    let mut names: HashMap<&str, Sym> = HashMap::new();
    let mut inputs = vec![];
    let mut state = vec![];
    for d in &model.inputs {
        check_type(&d.ty, d)?;
        names.insert(&d.name, Sym::Input(inputs.len()));
        inputs.push(InputVar { name: d.name.clone(), ty: d.ty.clone() });
    }
    for (decls, kind) in [(&model.vars, StateKind::Var), (&model.outputs, StateKind::Output)] {
        for d in decls {
            check_type(&d.ty, d)?;
            names.insert(&d.name, Sym::State(state.len()));
            state.push(StateVar { name: d.name.clone(), ty: d.ty.clone(), kind });
        }
    }
    let mut cx = Checker { names, inputs: &inputs, state: &state, loops: vec![], max_depth: 0, in_init: false };
    let mut free = vec![];
    model.invariant.free_vars(&mut free);
    if let Some(name) = free.iter().find(|n| model.inputs.iter().any(|d| &&d.name == n)) {
        return Err(TypeError::InputInInvariant { name: name.clone() });
    }
    let invariant = cx.bool_expr(&model.invariant, model.init_pos)?;

    cx.in_init = true;
    let init = cx.stmts(&model.init)?;
    cx.in_init = false;
    let cycle = cx.stmts(&model.cycle)?;
    let loop_slots = cx.max_depth;

    let mut init_state = InitState::new(&state);
    init_state.stmts(&model.init, &[])?;
    for (i, s) in state.iter().enumerate() {
        if !init_state.fully_assigned(i) {
            return Err(TypeError::NotInitialised { name: s.name.clone(), pos: model.init_pos });
        }
    }

    Ok(TypedModel { model: model.clone(), state, inputs, invariant, init, cycle, loop_slots })
}

fn check_type(ty: &B0Type, d: &Decl) -> Result<(), TypeError> {
    let bad = |why: &str| Err(TypeError::BadType { name: d.name.clone(), pos: d.pos, reason: why.to_string() });
    match ty {
        B0Type::Bool => Ok(()),
        B0Type::Int { lo, hi } => {
            if lo > hi {
                bad("empty integer range")
            } else if *lo < I32_MIN || *hi > I32_MAX {
                bad("integer bounds must fit 32 bits")
            } else {
                Ok(())
            }
        }
        B0Type::Array { len, elem } => {
            if *len == 0 {
                bad("array length must be at least 1")
            } else if !elem.is_scalar() {
                bad("array elements must be scalar")
            } else {
                check_type(elem, d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Sym {
    Input(usize),
    State(usize),
}

struct Checker<'a> {
    names: HashMap<&'a str, Sym>,
    inputs: &'a [InputVar],
    state: &'a [StateVar],
    /// Active loop counters: (name, from, to).
    loops: Vec<(String, i64, i64)>,
    max_depth: usize,
    in_init: bool,
}

impl Checker<'_> {
    fn mismatch<T>(&self, pos: Pos, expected: &str, found: &str) -> Result<T, TypeError> {
        Err(TypeError::Mismatch { pos, expected: expected.to_string(), found: found.to_string() })
    }

    fn lookup(&self, name: &str, pos: Pos) -> Result<Lookup<'_>, TypeError> {
        if let Some(depth) = self.loops.iter().rposition(|(n, ..)| n == name) {
            let (_, lo, hi) = self.loops[depth];
            return Ok(Lookup::Loop(depth, lo.min(hi), hi.max(lo)));
        }
        match self.names.get(name) {
            Some(Sym::Input(i)) => {
                if self.in_init {
                    return Err(TypeError::InputInInit { name: name.to_string(), pos });
                }
                Ok(Lookup::Input(*i, &self.inputs[*i].ty))
            }
            Some(Sym::State(i)) => Ok(Lookup::State(*i, &self.state[*i].ty)),
            None => Err(TypeError::Undeclared { name: name.to_string(), pos }),
        }
    }

    fn bool_expr(&self, e: &Expr, pos: Pos) -> Result<TExpr, TypeError> {
        let t = self.expr(e, pos)?;
        if t.ty != ScalarTy::Bool {
            return self.mismatch(pos, "BOOL", "INT");
        }
        Ok(t)
    }

    fn int_expr(&self, e: &Expr, pos: Pos) -> Result<TExpr, TypeError> {
        let t = self.expr(e, pos)?;
        if t.ty == ScalarTy::Bool {
            return self.mismatch(pos, "INT", "BOOL");
        }
        Ok(t)
    }

    fn expr(&self, e: &Expr, pos: Pos) -> Result<TExpr, TypeError> {
        let int = ScalarTy::Int(None);
        let (kind, ty) = match e {
            Expr::Bool(v) => (TExprKind::Bool(*v), ScalarTy::Bool),
            Expr::Int(v) => {
                if *v < I32_MIN || *v > I32_MAX {
                    return self.mismatch(pos, "32-bit integer literal", &v.to_string());
                }
                (TExprKind::Int(*v), ScalarTy::Int(Some((*v, *v))))
            }
            Expr::Var(name) => match self.lookup(name, pos)? {
                Lookup::Loop(d, lo, hi) => (TExprKind::Loop(d), ScalarTy::Int(Some((lo, hi)))),
                Lookup::Input(i, ty) => (TExprKind::Input(i), scalar_of(ty, name, pos)?),
                Lookup::State(i, ty) => (TExprKind::State(i), scalar_of(ty, name, pos)?),
            },
            Expr::Index(arr, idx) => {
                let Expr::Var(name) = &**arr else {
                    return self.mismatch(pos, "array name", "array expression");
                };
                let index = self.int_expr(idx, pos)?;
                let (kind, ty) = match self.lookup(name, pos)? {
                    Lookup::Input(i, ty) => (TExprKind::InputElem as fn(_, _) -> _, (i, ty)),
                    Lookup::State(i, ty) => (TExprKind::StateElem as fn(_, _) -> _, (i, ty)),
                    Lookup::Loop(..) => return self.mismatch(pos, "array", "loop counter"),
                };
                let B0Type::Array { len, elem } = ty.1 else {
                    return self.mismatch(pos, "array", &ty.1.to_string());
                };
                check_literal_index(&index, *len, pos)?;
                (kind(ty.0, Box::new(index)), scalar_of(elem, name, pos)?)
            }
            Expr::Store(..) => return self.mismatch(pos, "expression", "array override"),
            Expr::Neg(x) => (TExprKind::Neg(Box::new(self.int_expr(x, pos)?)), int),
            Expr::Arith(op, x, y) => {
                let (x, y) = (self.int_expr(x, pos)?, self.int_expr(y, pos)?);
                (TExprKind::Arith(*op, Box::new(x), Box::new(y)), int)
            }
            Expr::Rel(op, x, y) => {
                let (x, y) = (self.expr(x, pos)?, self.expr(y, pos)?);
                match (x.ty, y.ty) {
                    (ScalarTy::Bool, ScalarTy::Bool) if matches!(op, RelOp::Eq | RelOp::Ne) => {}
                    (ScalarTy::Int(_), ScalarTy::Int(_)) => {}
                    (ScalarTy::Bool, ScalarTy::Bool) => return self.mismatch(pos, "INT operands", "BOOL"),
                    _ => return self.mismatch(pos, "operands of the same type", "BOOL and INT"),
                }
                (TExprKind::Rel(*op, Box::new(x), Box::new(y)), ScalarTy::Bool)
            }
            Expr::And(x, y) => {
                let (x, y) = (self.bool_expr(x, pos)?, self.bool_expr(y, pos)?);
                (TExprKind::And(Box::new(x), Box::new(y)), ScalarTy::Bool)
            }
            Expr::Or(x, y) => {
                let (x, y) = (self.bool_expr(x, pos)?, self.bool_expr(y, pos)?);
                (TExprKind::Or(Box::new(x), Box::new(y)), ScalarTy::Bool)
            }
            Expr::Not(x) => (TExprKind::Not(Box::new(self.bool_expr(x, pos)?)), ScalarTy::Bool),
        };
        Ok(TExpr { kind, ty })
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<Vec<TStmt>, TypeError> {
        stmts.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Result<TStmt, TypeError> {
        let pos = s.pos;
        let kind = match &s.kind {
            StmtKind::Assign(target, value) => {
                let name = target.name();
                let (idx, declared) = match self.lookup(name, pos) {
                    Ok(Lookup::State(i, ty)) => (i, ty.clone()),
                    Ok(Lookup::Input(..)) | Err(TypeError::InputInInit { .. })
                        if self.names.contains_key(name) =>
                    {
                        return Err(TypeError::AssignToInput { name: name.to_string(), pos });
                    }
                    Ok(Lookup::Loop(..)) => {
                        return Err(TypeError::AssignToLoopCounter { name: name.to_string(), pos })
                    }
                    Ok(Lookup::Input(..)) => unreachable!(),
                    Err(e) => return Err(e),
                };
                let (target, cell_ty) = match (target, &declared) {
                    (Target::Var(_), B0Type::Array { .. }) => {
                        return self.mismatch(pos, "scalar target", &declared.to_string());
                    }
                    (Target::Var(_), t) => (TTarget::State(idx), t.clone()),
                    (Target::Elem(_, i), B0Type::Array { len, elem }) => {
                        let index = self.int_expr(i, pos)?;
                        check_literal_index(&index, *len, pos)?;
                        (TTarget::Elem(idx, index), (**elem).clone())
                    }
                    (Target::Elem(..), t) => return self.mismatch(pos, "array", &t.to_string()),
                };
                let value = self.expr(value, pos)?;
                let check = match (&cell_ty, value.ty) {
                    (B0Type::Bool, ScalarTy::Bool) => None,
                    (B0Type::Int { lo, hi }, ScalarTy::Int(range)) => match range {
                        Some((vlo, vhi)) if vlo >= *lo && vhi <= *hi => None,
                        _ => Some((*lo, *hi)),
                    },
                    (B0Type::Bool, _) => return self.mismatch(pos, "BOOL", "INT"),
                    _ => return self.mismatch(pos, &cell_ty.to_string(), "BOOL"),
                };
                TStmtKind::Assign { target, value, check }
            }
            StmtKind::If(arms, els) => {
                let mut typed = vec![];
                for (g, body) in arms {
                    typed.push((self.bool_expr(g, pos)?, self.stmts(body)?));
                }
                let els = match els {
                    Some(b) => self.stmts(b)?,
                    None => vec![],
                };
                TStmtKind::If { arms: typed, els }
            }
            StmtKind::For { var, from, to, body } => {
                if self.names.contains_key(var.as_str()) || self.loops.iter().any(|(n, ..)| n == var) {
                    return Err(TypeError::Shadowing { name: var.clone(), pos });
                }
                let (from, to) = (literal_bound(from, pos)?, literal_bound(to, pos)?);
                let slot = self.loops.len();
                self.loops.push((var.clone(), from, to));
                self.max_depth = self.max_depth.max(self.loops.len());
                let body = self.stmts(body);
                self.loops.pop();
                TStmtKind::For { slot, from, to, body: body? }
            }
        };
        Ok(TStmt { kind, pos })
    }
}

enum Lookup<'t> {
    Input(usize, &'t B0Type),
    State(usize, &'t B0Type),
    Loop(usize, i64, i64),
}

fn scalar_of(ty: &B0Type, name: &str, pos: Pos) -> Result<ScalarTy, TypeError> {
    match ty {
        B0Type::Bool => Ok(ScalarTy::Bool),
        B0Type::Int { lo, hi } => Ok(ScalarTy::Int(Some((*lo, *hi)))),
        B0Type::Array { .. } => Err(TypeError::Mismatch {
            pos,
            expected: "scalar".into(),
            found: format!("array `{name}` used without index"),
        }),
    }
}

fn literal_bound(e: &Expr, pos: Pos) -> Result<i64, TypeError> {
    match e {
        Expr::Int(v) if (I32_MIN..=I32_MAX).contains(v) => Ok(*v),
        Expr::Int(v) => Err(TypeError::Mismatch { pos, expected: "32-bit loop bound".into(), found: v.to_string() }),
        other => Err(TypeError::NonLiteralBound { bound: super::pretty::expr_to_string(other), pos }),
    }
}

fn check_literal_index(index: &TExpr, len: u32, pos: Pos) -> Result<(), TypeError> {
    if let TExprKind::Int(v) = index.kind {
        if v < 0 || v >= len as i64 {
            return Err(TypeError::IndexOutOfRange { index: v, len, pos });
        }
    }
    Ok(())
}

/// Definite-assignment tracking for INIT.
struct InitState<'a> {
    state: &'a [StateVar],
    names: HashMap<&'a str, usize>,
    /// Per state variable, the set of assigned cells.
    cells: Vec<BTreeSet<u32>>,
}

impl<'a> InitState<'a> {
    fn new(state: &'a [StateVar]) -> Self {
        InitState {
            state,
            names: state.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect(),
            cells: vec![BTreeSet::new(); state.len()],
        }
    }

    fn fully_assigned(&self, i: usize) -> bool {
        self.cells[i].len() == self.state[i].ty.scalar_count()
    }

    /// `loops`: enclosing counters as (name, from, to).
    fn stmts(&mut self, stmts: &[Stmt], loops: &[(&str, i64, i64)]) -> Result<(), TypeError> {
        let mut written_at_counter: Vec<(usize, String)> = vec![];
        self.stmts_inner(stmts, loops, &mut written_at_counter)
    }

    fn stmts_inner(
        &mut self,
        stmts: &[Stmt],
        loops: &[(&str, i64, i64)],
        at_counter: &mut Vec<(usize, String)>,
    ) -> Result<(), TypeError> {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign(target, value) => {
                    self.reads(value, s.pos, at_counter)?;
                    let Some(&i) = self.names.get(target.name()) else { continue };
                    match target {
                        Target::Var(_) => {
                            self.cells[i].insert(0);
                        }
                        Target::Elem(_, idx) => {
                            self.reads(idx, s.pos, at_counter)?;
                            match idx {
                                Expr::Int(v) => {
                                    self.cells[i].insert(*v as u32);
                                }
                                Expr::Var(k) if loops.iter().any(|(n, ..)| n == k) => {
                                    at_counter.push((i, k.clone()));
                                }
                                _ => {}
                            }
                        }
                    }
                }
                StmtKind::If(arms, els) => {
                    let before = self.cells.clone();
                    let mut merged: Option<Vec<BTreeSet<u32>>> = None;
                    for (g, body) in arms {
                        self.reads(g, s.pos, at_counter)?;
                        self.cells = before.clone();
                        self.stmts_inner(body, loops, &mut at_counter.clone())?;
                        merged = Some(intersect(merged, &self.cells));
                    }
                    self.cells = before.clone();
                    if let Some(body) = els {
                        self.stmts_inner(body, loops, &mut at_counter.clone())?;
                    }
                    self.cells = intersect(merged, &self.cells);
                }
                StmtKind::For { var, from, to, body } => {
                    let (from, to) = (&literal_bound(from, s.pos)?, &literal_bound(to, s.pos)?);
                    if from > to {
                        continue;
                    }
                    let mut inner = loops.to_vec();
                    inner.push((var.as_str(), *from, *to));
                    // Counter-indexed writes become definite once the loop has
                    // run; writes indexed by an outer counter propagate outwards.
                    let mut body_counter = at_counter.clone();
                    let base = body_counter.len();
                    self.stmts_inner(body, &inner, &mut body_counter)?;
                    for (i, k) in body_counter.drain(base..) {
                        if &k == var {
                            let len = self.state[i].ty.scalar_count() as i64;
                            for c in (*from).max(0)..=(*to).min(len - 1) {
                                self.cells[i].insert(c as u32);
                            }
                        } else {
                            at_counter.push((i, k));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn reads(&self, e: &Expr, pos: Pos, at_counter: &[(usize, String)]) -> Result<(), TypeError> {
        let err = |name: &str| Err(TypeError::UseBeforeInit { name: name.to_string(), pos });
        match e {
            Expr::Var(n) => {
                if let Some(&i) = self.names.get(n.as_str()) {
                    if !self.fully_assigned(i) {
                        return err(n);
                    }
                }
                Ok(())
            }
            Expr::Index(a, idx) => {
                self.reads(idx, pos, at_counter)?;
                let Expr::Var(n) = &**a else { return Ok(()) };
                let Some(&i) = self.names.get(n.as_str()) else { return Ok(()) };
                let ok = match &**idx {
                    Expr::Int(v) => self.cells[i].contains(&(*v as u32)),
                    Expr::Var(k) => {
                        self.fully_assigned(i) || at_counter.iter().any(|(j, c)| *j == i && c == k)
                    }
                    _ => self.fully_assigned(i),
                };
                if ok {
                    Ok(())
                } else {
                    err(n)
                }
            }
            Expr::Bool(_) | Expr::Int(_) => Ok(()),
            Expr::Neg(x) | Expr::Not(x) => self.reads(x, pos, at_counter),
            Expr::Arith(_, x, y) | Expr::Rel(_, x, y) | Expr::And(x, y) | Expr::Or(x, y) => {
                self.reads(x, pos, at_counter)?;
                self.reads(y, pos, at_counter)
            }
            Expr::Store(a, i, v) => {
                self.reads(a, pos, at_counter)?;
                self.reads(i, pos, at_counter)?;
                self.reads(v, pos, at_counter)
            }
        }
    }
}

fn intersect(acc: Option<Vec<BTreeSet<u32>>>, cells: &[BTreeSet<u32>]) -> Vec<BTreeSet<u32>> {
    match acc {
        None => cells.to_vec(),
        Some(acc) => acc.iter().zip(cells).map(|(a, b)| a.intersection(b).copied().collect()).collect(),
    }
}
