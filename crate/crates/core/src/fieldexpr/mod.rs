//! Scalar field expressions with exact differentiation and delta-net primitives.
//!
//! Expressions are immutable DAGs of reference-counted nodes. Parsing builds
//! the tree exactly as written; the arithmetic constructors on [`FieldExpr`]
//! (`add`, `mul`, ...) fold constants and apply 0/1 identities, which is the
//! only simplification performed anywhere.

mod delta;
mod diff;
mod eval;
mod parse;
mod tape;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub use delta::{validate_strict_delta_net, DeltaNet, DeltaNetReport, DeltaNetRow, Profile, ScaledDelta};
pub use eval::{evaluate, Bindings};
pub(crate) use eval::evaluate_plain;
pub use parse::parse;
pub use tape::Tape;

use crate::error::{Error, Result};

pub const RESERVED: [&str; 12] = [
    "eps", "delta", "delta1", "delta2", "heaviside", "pos", "sin", "cos", "exp", "log", "sqrt", "tanh",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

#[derive(Debug)]
pub enum Node {
    Num(f64),
    Var(Arc<str>),
    Eps,
    Neg(FieldExpr),
    Add(FieldExpr, FieldExpr),
    Sub(FieldExpr, FieldExpr),
    Mul(FieldExpr, FieldExpr),
    Div(FieldExpr, FieldExpr),
    Pow(FieldExpr, FieldExpr),
    Call(Func, FieldExpr),
    /// Active delta net (order 0) or its first/second derivative.
    Delta(u8, FieldExpr),
    Heaviside(FieldExpr),
    Pos(FieldExpr),
}

/// Shared handle to an expression node.
#[derive(Clone)]
pub struct FieldExpr(Arc<Node>);

impl fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldExpr({self})")
    }
}

impl PartialEq for FieldExpr {
    /// Structural equality.
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        use Node::*;
        match (self.node(), other.node()) {
            (Num(a), Num(b)) => a.to_bits() == b.to_bits(),
            (Var(a), Var(b)) => a == b,
            (Eps, Eps) => true,
            (Neg(a), Neg(b)) | (Heaviside(a), Heaviside(b)) | (Pos(a), Pos(b)) => a == b,
            (Add(a, b), Add(c, d))
            | (Sub(a, b), Sub(c, d))
            | (Mul(a, b), Mul(c, d))
            | (Div(a, b), Div(c, d))
            | (Pow(a, b), Pow(c, d)) => a == c && b == d,
            (Call(f, a), Call(g, b)) => f == g && a == b,
            (Delta(k, a), Delta(j, b)) => k == j && a == b,
            _ => false,
        }
    }
}

impl FieldExpr {
    pub(crate) fn from_node(node: Node) -> Self {
        FieldExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn num(v: f64) -> Self {
        Self::from_node(Node::Num(v))
    }

    pub fn zero() -> Self {
        Self::num(0.0)
    }

    pub fn one() -> Self {
        Self::num(1.0)
    }

    pub fn var(name: &str) -> Self {
        Self::from_node(Node::Var(Arc::from(name)))
    }

    pub fn eps() -> Self {
        Self::from_node(Node::Eps)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self.node() {
            Node::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Structurally the literal 0.
    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Num(v) => Self::num(-v),
            Node::Neg(a) => a.clone(),
            _ => Self::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => Self::num(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => match other.node() {
                Node::Neg(b) => Self::from_node(Node::Sub(self.clone(), b.clone())),
                _ => Self::from_node(Node::Add(self.clone(), other.clone())),
            },
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        if self.ptr_eq(other) {
            return Self::zero();
        }
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => Self::num(a - b),
            (Some(a), _) if a == 0.0 => other.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => match other.node() {
                Node::Neg(b) => Self::from_node(Node::Add(self.clone(), b.clone())),
                _ => Self::from_node(Node::Sub(self.clone(), other.clone())),
            },
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) => Self::num(a * b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 0.0 => Self::zero(),
            (Some(a), _) if a == 1.0 => other.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => other.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            (Some(a), _) => match other.node() {
                // c1 * (c2 * x) -> (c1 c2) * x
                Node::Mul(l, r) if l.as_num().is_some() => Self::num(a * l.as_num().unwrap()).mul(r),
                Node::Neg(x) => Self::num(-a).mul(x),
                _ => Self::from_node(Node::Mul(self.clone(), other.clone())),
            },
            (_, Some(_)) => other.mul(self),
            _ => match (self.node(), other.node()) {
                (Node::Neg(a), Node::Neg(b)) => a.mul(b),
                (Node::Neg(a), _) => a.mul(other).neg(),
                (_, Node::Neg(b)) => self.mul(b).neg(),
                _ => Self::from_node(Node::Mul(self.clone(), other.clone())),
            },
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        match (self.as_num(), other.as_num()) {
            (Some(a), Some(b)) if b != 0.0 => Self::num(a / b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            (_, Some(b)) if b != 0.0 && (1.0 / b).is_finite() && b.abs().log2().fract() == 0.0 => {
                // exact reciprocal for powers of two
                Self::num(1.0 / b).mul(self)
            }
            _ => Self::from_node(Node::Div(self.clone(), other.clone())),
        }
    }

    pub fn pow(&self, other: &Self) -> Self {
        match (self.as_num(), other.as_num()) {
            (_, Some(b)) if b == 0.0 => Self::one(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), Some(b)) if eval::pow(a, b).is_finite() => Self::num(eval::pow(a, b)),
            _ => Self::from_node(Node::Pow(self.clone(), other.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Self {
        self.pow(&Self::num(n as f64))
    }

    pub fn call(f: Func, arg: &Self) -> Self {
        if let Some(a) = arg.as_num() {
            let v = eval::call(f, a);
            if v.is_finite() {
                return Self::num(v);
            }
        }
        Self::from_node(Node::Call(f, arg.clone()))
    }

    pub fn delta(order: u8, arg: &Self) -> Self {
        Self::from_node(Node::Delta(order, arg.clone()))
    }

    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a FieldExpr>) -> Self {
        terms.into_iter().fold(Self::zero(), |acc, t| acc.add(t))
    }

    /// Visit every distinct node once (DAG order, children before parents).
    pub(crate) fn visit(&self, f: &mut impl FnMut(&FieldExpr)) {
        let mut seen = std::collections::HashSet::new();
        fn walk(e: &FieldExpr, seen: &mut std::collections::HashSet<usize>, f: &mut impl FnMut(&FieldExpr)) {
            if !seen.insert(e.id()) {
                return;
            }
            for c in e.children() {
                walk(c, seen, f);
            }
            f(e);
        }
        walk(self, &mut seen, f);
    }

    pub fn children(&self) -> Vec<&FieldExpr> {
        use Node::*;
        match self.node() {
            Num(_) | Var(_) | Eps => vec![],
            Neg(a) | Call(_, a) | Delta(_, a) | Heaviside(a) | Pos(a) => vec![a],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => vec![a, b],
        }
    }

    /// Identifiers other than `eps`.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Var(v) = e.node() {
                out.insert(v.to_string());
            }
        });
        out
    }

    pub fn contains_eps(&self) -> bool {
        self.any(|n| matches!(n, Node::Eps))
    }

    pub fn contains_delta(&self) -> bool {
        self.any(|n| matches!(n, Node::Delta(..)))
    }

    pub fn contains_reference_only(&self) -> bool {
        self.any(|n| matches!(n, Node::Heaviside(_) | Node::Pos(_)))
    }

    fn any(&self, pred: impl Fn(&Node) -> bool) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= pred(e.node()));
        hit
    }

    /// Distinct arguments of delta nodes (structural dedup).
    pub fn delta_args(&self) -> Vec<FieldExpr> {
        let mut out: Vec<FieldExpr> = Vec::new();
        self.visit(&mut |e| {
            if let Node::Delta(_, a) = e.node() {
                if !out.iter().any(|b| b == a) {
                    out.push(a.clone());
                }
            }
        });
        out
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Reject delta*/heaviside/pos inside the argument of a delta*.
    pub fn validate(&self) -> Result<()> {
        let mut bad = None;
        self.visit(&mut |e| {
            if let Node::Delta(_, a) = e.node() {
                if a.contains_delta() || a.contains_reference_only() {
                    bad = Some(format!("singular symbol nested inside delta argument: {e}"));
                }
            }
        });
        match bad {
            Some(msg) => Err(Error::Validation(msg)),
            None => Ok(()),
        }
    }

    /// Replace variables by expressions (simultaneous).
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<FieldExpr>) -> FieldExpr {
        let mut memo: std::collections::HashMap<usize, FieldExpr> = std::collections::HashMap::new();
        fn go(
            e: &FieldExpr,
            map: &dyn Fn(&str) -> Option<FieldExpr>,
            memo: &mut std::collections::HashMap<usize, FieldExpr>,
        ) -> FieldExpr {
            if let Some(r) = memo.get(&e.id()) {
                return r.clone();
            }
            use Node::*;
            let r = match e.node() {
                Num(_) | Eps => e.clone(),
                Var(v) => map(v).unwrap_or_else(|| e.clone()),
                Neg(a) => go(a, map, memo).neg(),
                Add(a, b) => go(a, map, memo).add(&go(b, map, memo)),
                Sub(a, b) => go(a, map, memo).sub(&go(b, map, memo)),
                Mul(a, b) => go(a, map, memo).mul(&go(b, map, memo)),
                Div(a, b) => go(a, map, memo).div(&go(b, map, memo)),
                Pow(a, b) => go(a, map, memo).pow(&go(b, map, memo)),
                Call(f, a) => FieldExpr::call(*f, &go(a, map, memo)),
                Delta(k, a) => FieldExpr::delta(*k, &go(a, map, memo)),
                Heaviside(a) => FieldExpr::from_node(Heaviside(go(a, map, memo))),
                Pos(a) => FieldExpr::from_node(Pos(go(a, map, memo))),
            };
            memo.insert(e.id(), r.clone());
            r
        }
        go(self, map, &mut memo)
    }

    /// Rebuild through the simplifying constructors.
    pub fn simplify(&self) -> FieldExpr {
        self.substitute(&|_| None)
    }

    pub fn differentiate(&self, var: &str) -> Result<FieldExpr> {
        diff::differentiate(self, var)
    }
}

// Binding strength used for printing: higher binds tighter.
fn prec(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_finite() {
        write!(f, "{v:?}")
    } else if v.is_nan() {
        write!(f, "(0/0)")
    } else if v > 0.0 {
        write!(f, "(1/0)")
    } else {
        write!(f, "(-1/0)")
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &FieldExpr, min: u8) -> fmt::Result {
            if prec(e.node()) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        use Node::*;
        match self.node() {
            Num(v) => write_num(f, *v),
            Var(v) => write!(f, "{v}"),
            Eps => write!(f, "eps"),
            Neg(a) => {
                write!(f, "-")?;
                child(f, a, 4)
            }
            Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Div(a, b) => {
                child(f, a, 2)?;
                write!(f, "/")?;
                child(f, b, 4)
            }
            Pow(a, b) => {
                child(f, a, 5)?;
                write!(f, "^")?;
                child(f, b, 4)
            }
            Call(func, a) => write!(f, "{}({a})", func.name()),
            Delta(0, a) => write!(f, "delta({a})"),
            Delta(k, a) => write!(f, "delta{k}({a})"),
            Heaviside(a) => write!(f, "heaviside({a})"),
            Pos(a) => write!(f, "pos({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_fold() {
        let x = FieldExpr::var("x");
        assert!(x.mul(&FieldExpr::zero()).is_zero());
        assert!(x.sub(&x).is_zero());
        assert!(FieldExpr::num(2.0).mul(&FieldExpr::num(3.0)).as_num() == Some(6.0));
        assert!(x.mul(&FieldExpr::one()).ptr_eq(&x));
        assert!(x.neg().neg().ptr_eq(&x));
        assert_eq!(FieldExpr::num(2.0).mul(&FieldExpr::num(3.0).mul(&x)).to_string(), "6.0*x");
        assert!(x.pow(&FieldExpr::zero()).is_one());
    }

    #[test]
    fn display_reparses() {
        for text in ["x^2 - y^2", "-(x + 1)^2", "a/(b*c)", "(a - b) - (c - d)", "2^-x", "f0*delta1(u)", "(-2.0)^x"] {
            let e = parse(text).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{text} printed as {e}");
        }
    }

    #[test]
    fn free_vars_and_flags() {
        let e = parse("f0*delta(u) + sin(x*y) + eps").unwrap();
        let vars: Vec<String> = e.free_vars().into_iter().collect();
        assert_eq!(vars, ["f0", "u", "x", "y"]);
        assert!(e.contains_delta());
        assert!(e.contains_eps());
        assert!(!e.contains_reference_only());
        assert_eq!(e.delta_args().len(), 1);
    }

    #[test]
    fn substitution() {
        let e = parse("x^2 + y").unwrap();
        let s = e.substitute(&|v| (v == "x").then(|| FieldExpr::num(3.0)));
        assert_eq!(s.to_string(), "9.0 + y");
    }
}
