//! Untyped syntax tree of B0 control programs.
//!
//! The same expression type is used for source programs and for the
//! predicates produced by the proof obligation generator, which is why it
//! carries an array-override node ([`Expr::Store`]) that the parser never
//! produces.

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum B0Type {
    Bool,
    Int { lo: i64, hi: i64 },
    Array { len: u32, elem: Box<B0Type> },
}

impl B0Type {
    pub fn int(lo: i64, hi: i64) -> Self {
        B0Type::Int { lo, hi }
    }

    pub fn array(len: u32, elem: B0Type) -> Self {
        B0Type::Array { len, elem: Box::new(elem) }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, B0Type::Array { .. })
    }

    /// Number of scalar cells a value of this type occupies.
    pub fn scalar_count(&self) -> usize {
        match self {
            B0Type::Array { len, .. } => *len as usize,
            _ => 1,
        }
    }

    /// The scalar type of each cell (the type itself for scalars).
    pub fn cell_type(&self) -> &B0Type {
        match self {
            B0Type::Array { elem, .. } => elem,
            t => t,
        }
    }

    /// Number of distinct values, saturating.
    pub fn domain_size(&self) -> u128 {
        match self {
            B0Type::Bool => 2,
            B0Type::Int { lo, hi } => (*hi as i128 - *lo as i128 + 1).max(0) as u128,
            B0Type::Array { len, elem } => {
                let base = elem.domain_size();
                (0..*len).fold(1u128, |acc, _| acc.saturating_mul(base))
            }
        }
    }
}

impl fmt::Display for B0Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            B0Type::Bool => f.write_str("BOOL"),
            B0Type::Int { lo, hi } => write!(f, "INT({lo}..{hi})"),
            B0Type::Array { len, elem } => write!(f, "ARRAY {len} OF {elem}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "div",
            ArithOp::Mod => "mod",
        }
    }

    /// Checked evaluation with Euclidean `div`/`mod`. `None` on overflow or
    /// a zero divisor.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
            ArithOp::Div => a.checked_div_euclid(b),
            ArithOp::Mod => a.checked_rem_euclid(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Ne => "/=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Var(String),
    /// `array(index)`; `array` is a [`Expr::Var`] or a [`Expr::Store`].
    Index(Box<Expr>, Box<Expr>),
    /// Functional array update `(array <+ {index |-> value})`.
    Store(Box<Expr>, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Rel(RelOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn index(array: Expr, index: Expr) -> Expr {
        Expr::Index(Box::new(array), Box::new(index))
    }

    pub fn arith(op: ArithOp, a: Expr, b: Expr) -> Expr {
        Expr::Arith(op, Box::new(a), Box::new(b))
    }

    pub fn rel(op: RelOp, a: Expr, b: Expr) -> Expr {
        Expr::Rel(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Conjunction that folds away literal `true`.
    pub fn and(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Bool(true), e) | (e, Expr::Bool(true)) => e,
            (a, b) => Expr::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    /// `not guard or body`, the encoding of implication in B0 predicates.
    pub fn implies(guard: Expr, body: Expr) -> Expr {
        match (guard, body) {
            (Expr::Bool(true), b) => b,
            (_, Expr::Bool(true)) => Expr::Bool(true),
            (g, b) => Expr::or(Expr::not(g), b),
        }
    }

    pub fn conj(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts.into_iter().fold(Expr::Bool(true), Expr::and)
    }

    /// Capture-free substitution of a scalar or array variable.
    pub fn subst(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Bool(_) | Expr::Int(_) | Expr::Var(_) => self.clone(),
            Expr::Index(a, i) => Expr::Index(Box::new(a.subst(name, with)), Box::new(i.subst(name, with))),
            Expr::Store(a, i, v) => Expr::Store(
                Box::new(a.subst(name, with)),
                Box::new(i.subst(name, with)),
                Box::new(v.subst(name, with)),
            ),
            Expr::Neg(e) => Expr::Neg(Box::new(e.subst(name, with))),
            Expr::Arith(op, a, b) => Expr::arith(*op, a.subst(name, with), b.subst(name, with)),
            Expr::Rel(op, a, b) => Expr::rel(*op, a.subst(name, with), b.subst(name, with)),
            Expr::And(a, b) => Expr::And(Box::new(a.subst(name, with)), Box::new(b.subst(name, with))),
            Expr::Or(a, b) => Expr::or(a.subst(name, with), b.subst(name, with)),
            Expr::Not(e) => Expr::not(e.subst(name, with)),
        }
    }

    /// Collects free variable names in first-occurrence order.
    pub fn free_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => {
                if !out.iter().any(|o| o == v) {
                    out.push(v.clone());
                }
            }
            Expr::Bool(_) | Expr::Int(_) => {}
            Expr::Neg(e) | Expr::Not(e) => e.free_vars(out),
            Expr::Index(a, b)
            | Expr::Arith(_, a, b)
            | Expr::Rel(_, a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Expr::Store(a, i, v) => {
                a.free_vars(out);
                i.free_vars(out);
                v.free_vars(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Bool(_) | Expr::Int(_) | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Not(e) => 1 + e.node_count(),
            Expr::Index(a, b)
            | Expr::Arith(_, a, b)
            | Expr::Rel(_, a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => 1 + a.node_count() + b.node_count(),
            Expr::Store(a, i, v) => 1 + a.node_count() + i.node_count() + v.node_count(),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Expr {
        self.subst(from, &Expr::Var(to.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Var(String),
    Elem(String, Expr),
}

impl Target {
    pub fn name(&self) -> &str {
        match self {
            Target::Var(n) | Target::Elem(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign(Target, Expr),
    /// `(guard, body)` arms in order; the optional `ELSE` body last.
    If(Vec<(Expr, Vec<Stmt>)>, Option<Vec<Stmt>>),
    /// Bounds must be integer literals; the type checker enforces it.
    For { var: String, from: Expr, to: Expr, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub ty: B0Type,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub name: String,
    pub inputs: Vec<Decl>,
    pub outputs: Vec<Decl>,
    pub vars: Vec<Decl>,
    pub invariant: Expr,
    pub init: Vec<Stmt>,
    pub cycle: Vec<Stmt>,
    pub init_pos: Pos,
    pub cycle_pos: Pos,
}

impl Model {
    /// Copy with every source position zeroed, for structural comparison.
    pub fn without_positions(&self) -> Model {
        fn decls(ds: &[Decl]) -> Vec<Decl> {
            ds.iter().map(|d| Decl { pos: Pos::default(), ..d.clone() }).collect()
        }
        Model {
            name: self.name.clone(),
            inputs: decls(&self.inputs),
            outputs: decls(&self.outputs),
            vars: decls(&self.vars),
            invariant: self.invariant.clone(),
            init: strip_stmts(&self.init),
            cycle: strip_stmts(&self.cycle),
            init_pos: Pos::default(),
            cycle_pos: Pos::default(),
        }
    }

    /// Consistently renames one identifier everywhere it occurs.
    pub fn rename(&self, from: &str, to: &str) -> Model {
        let decl = |d: &Decl| Decl {
            name: if d.name == from { to.to_string() } else { d.name.clone() },
            ..d.clone()
        };
        Model {
            name: self.name.clone(),
            inputs: self.inputs.iter().map(decl).collect(),
            outputs: self.outputs.iter().map(decl).collect(),
            vars: self.vars.iter().map(decl).collect(),
            invariant: self.invariant.rename(from, to),
            init: rename_stmts(&self.init, from, to),
            cycle: rename_stmts(&self.cycle, from, to),
            init_pos: self.init_pos,
            cycle_pos: self.cycle_pos,
        }
    }

    pub fn all_decls(&self) -> impl Iterator<Item = &Decl> {
        self.inputs.iter().chain(&self.outputs).chain(&self.vars)
    }
}

fn strip_stmts(stmts: &[Stmt]) -> Vec<Stmt> {
    stmts
        .iter()
        .map(|s| Stmt {
            pos: Pos::default(),
            kind: match &s.kind {
                StmtKind::Assign(t, e) => StmtKind::Assign(t.clone(), e.clone()),
                StmtKind::If(arms, els) => StmtKind::If(
                    arms.iter().map(|(g, b)| (g.clone(), strip_stmts(b))).collect(),
                    els.as_deref().map(strip_stmts),
                ),
                StmtKind::For { var, from, to, body } => StmtKind::For {
                    var: var.clone(),
                    from: from.clone(),
                    to: to.clone(),
                    body: strip_stmts(body),
                },
            },
        })
        .collect()
}

fn rename_stmts(stmts: &[Stmt], from: &str, to: &str) -> Vec<Stmt> {
    let name = |n: &String| if n == from { to.to_string() } else { n.clone() };
    stmts
        .iter()
        .map(|s| Stmt {
            pos: s.pos,
            kind: match &s.kind {
                StmtKind::Assign(Target::Var(n), e) => StmtKind::Assign(Target::Var(name(n)), e.rename(from, to)),
                StmtKind::Assign(Target::Elem(n, i), e) => {
                    StmtKind::Assign(Target::Elem(name(n), i.rename(from, to)), e.rename(from, to))
                }
                StmtKind::If(arms, els) => StmtKind::If(
                    arms.iter().map(|(g, b)| (g.rename(from, to), rename_stmts(b, from, to))).collect(),
                    els.as_deref().map(|b| rename_stmts(b, from, to)),
                ),
                StmtKind::For { var, from: lo, to: hi, body } => StmtKind::For {
                    var: name(var),
                    from: lo.clone(),
                    to: hi.clone(),
                    body: rename_stmts(body, from, to),
                },
            },
        })
        .collect()
}
