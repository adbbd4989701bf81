use std::collections::HashMap;

use super::delta::ScaledDelta;
use super::eval::{checked_call, checked_div, heaviside, pow};
use super::{FieldExpr, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(u32),
    Eps,
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    PowI(u32, i32),
    Pow(u32, u32),
    Call(Func, u32),
    Delta(u8, u32),
    Heaviside(u32),
    Pos(u32),
}

#[derive(Hash, PartialEq, Eq)]
struct Key(u8, u32, u32, u64);

/// A batch of expressions compiled to a straight-line program.
///
/// Structurally identical subexpressions are computed once across the whole
/// batch, so evaluating, say, every Riemann component at a point costs one
/// pass over the shared DAG. Variables are resolved to slots at compile time.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
    vars: Vec<String>,
}

struct Builder<'a> {
    ops: Vec<Op>,
    cse: HashMap<Key, u32>,
    memo: HashMap<usize, u32>,
    vars: &'a [String],
}

impl Builder<'_> {
    fn push(&mut self, key: Key, op: Op) -> u32 {
        if let Some(&slot) = self.cse.get(&key) {
            return slot;
        }
        let slot = self.ops.len() as u32;
        self.ops.push(op);
        self.cse.insert(key, slot);
        slot
    }

    fn build(&mut self, e: &FieldExpr) -> Result<u32> {
        if let Some(&s) = self.memo.get(&e.id()) {
            return Ok(s);
        }
        use Node::*;
        let slot = match e.node() {
            Num(v) => self.push(Key(0, 0, 0, v.to_bits()), Op::Const(*v)),
            Var(name) => {
                let idx = self
                    .vars
                    .iter()
                    .position(|v| v == &**name)
                    .ok_or_else(|| Error::Validation(format!("unknown variable '{name}'")))?
                    as u32;
                self.push(Key(1, idx, 0, 0), Op::Var(idx))
            }
            Eps => self.push(Key(2, 0, 0, 0), Op::Eps),
            Neg(a) => {
                let a = self.build(a)?;
                self.push(Key(3, a, 0, 0), Op::Neg(a))
            }
            Add(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                let (a, b) = (a.min(b), a.max(b));
                self.push(Key(4, a, b, 0), Op::Add(a, b))
            }
            Sub(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                self.push(Key(5, a, b, 0), Op::Sub(a, b))
            }
            Mul(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                let (a, b) = (a.min(b), a.max(b));
                self.push(Key(6, a, b, 0), Op::Mul(a, b))
            }
            Div(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                self.push(Key(7, a, b, 0), Op::Div(a, b))
            }
            Pow(a, b) => {
                let base = self.build(a)?;
                match b.as_num() {
                    Some(n) if n.fract() == 0.0 && n.abs() <= 1024.0 => {
                        self.push(Key(8, base, n as i32 as u32, 0), Op::PowI(base, n as i32))
                    }
                    _ => {
                        let ex = self.build(b)?;
                        self.push(Key(9, base, ex, 0), Op::Pow(base, ex))
                    }
                }
            }
            Call(f, a) => {
                let a = self.build(a)?;
                self.push(Key(10, a, *f as u32, 0), Op::Call(*f, a))
            }
            Delta(k, a) => {
                let a = self.build(a)?;
                self.push(Key(11, a, *k as u32, 0), Op::Delta(*k, a))
            }
            Heaviside(a) => {
                let a = self.build(a)?;
                self.push(Key(12, a, 0, 0), Op::Heaviside(a))
            }
            Pos(a) => {
                let a = self.build(a)?;
                self.push(Key(13, a, 0, 0), Op::Pos(a))
            }
        };
        self.memo.insert(e.id(), slot);
        Ok(slot)
    }
}

impl Tape {
    /// Compile `exprs`; variables are looked up by name in `vars`.
    pub fn compile(exprs: &[FieldExpr], vars: &[String]) -> Result<Self> {
        let mut b = Builder {
            ops: Vec::new(),
            cse: HashMap::new(),
            memo: HashMap::new(),
            vars,
        };
        let outputs = exprs.iter().map(|e| b.build(e)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ops: b.ops,
            outputs,
            vars: vars.to_vec(),
        })
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    fn fail(&self, message: String, vars: &[f64], eps: f64) -> Error {
        let mut snapshot: std::collections::BTreeMap<String, f64> =
            self.vars.iter().cloned().zip(vars.iter().copied()).collect();
        snapshot.insert("eps".into(), eps);
        Error::Evaluation { message, snapshot }
    }

    /// Evaluate every output into `out`.
    pub fn eval(&self, vars: &[f64], eps: f64, delta: &ScaledDelta, out: &mut [f64]) -> Result<()> {
        self.eval_with(vars, eps, Some(delta), out)
    }

    pub(crate) fn eval_with(&self, vars: &[f64], eps: f64, delta: Option<&ScaledDelta>, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(vars.len(), self.vars.len());
        debug_assert_eq!(out.len(), self.outputs.len());
        let mut r = vec![0.0; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            let g = |s: &u32| r[*s as usize];
            r[i] = match op {
                Op::Const(v) => *v,
                Op::Var(k) => vars[*k as usize],
                Op::Eps => eps,
                Op::Neg(a) => -g(a),
                Op::Add(a, b) => g(a) + g(b),
                Op::Sub(a, b) => g(a) - g(b),
                Op::Mul(a, b) => g(a) * g(b),
                Op::Div(a, b) => checked_div(g(a), g(b)).map_err(|e| self.fail(e.to_string(), vars, eps))?,
                Op::PowI(a, n) => g(a).powi(*n),
                Op::Pow(a, b) => pow(g(a), g(b)),
                Op::Call(f, a) => checked_call(*f, g(a)).map_err(|e| self.fail(e.to_string(), vars, eps))?,
                Op::Delta(k, a) => match delta {
                    Some(d) => d.value(*k, g(a)),
                    None => return Err(Error::Validation("delta symbol where no delta net is active".into())),
                },
                Op::Heaviside(a) => heaviside(g(a)),
                Op::Pos(a) => g(a).max(0.0),
            };
        }
        for (o, &s) in out.iter_mut().zip(&self.outputs) {
            let v = r[s as usize];
            if !v.is_finite() {
                return Err(self.fail(format!("non-finite result {v}"), vars, eps));
            }
            *o = v;
        }
        Ok(())
    }

    pub fn eval_vec(&self, vars: &[f64], eps: f64, delta: &ScaledDelta) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.outputs.len()];
        self.eval(vars, eps, delta, &mut out)?;
        Ok(out)
    }
}
