use std::collections::BTreeMap;

use super::delta::{DeltaNet, ScaledDelta};
use super::{FieldExpr, Func, Node};
use crate::error::{Error, Result};

/// Variable values, the active eps and the active delta net.
#[derive(Debug, Clone)]
pub struct Bindings {
    vars: BTreeMap<String, f64>,
    eps: f64,
    delta: DeltaNet,
}

impl Bindings {
    pub fn new(eps: f64, delta: DeltaNet) -> Self {
        Self {
            vars: BTreeMap::new(),
            eps,
            delta,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
    }

    pub fn delta(&self) -> &DeltaNet {
        &self.delta
    }

    pub fn snapshot(&self) -> BTreeMap<String, f64> {
        let mut s = self.vars.clone();
        s.insert("eps".into(), self.eps);
        s
    }
}

pub(crate) fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 1024.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

pub(crate) fn call(f: Func, a: f64) -> f64 {
    match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => a.ln(),
        Func::Sqrt => a.sqrt(),
        Func::Tanh => a.tanh(),
    }
}

pub(crate) fn checked_div(a: f64, b: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::eval("division by zero"));
    }
    Ok(a / b)
}

pub(crate) fn checked_call(f: Func, a: f64) -> Result<f64> {
    match f {
        Func::Log if a <= 0.0 => Err(Error::eval(format!("log of non-positive value {a}"))),
        Func::Sqrt if a < 0.0 => Err(Error::eval(format!("sqrt of negative value {a}"))),
        _ => Ok(call(f, a)),
    }
}

pub(crate) fn heaviside(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Evaluate an expression. Every free variable must be bound.
pub fn evaluate(e: &FieldExpr, b: &Bindings) -> Result<f64> {
    if !(b.eps > 0.0 && b.eps <= 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1], got {}", b.eps)));
    }
    let scaled = b.delta.at(b.eps)?;
    let v = eval_node(e, &b.vars, b.eps, Some(&scaled)).map_err(|err| err.with_snapshot(b.snapshot()))?;
    if !v.is_finite() {
        return Err(Error::Evaluation {
            message: format!("non-finite result {v}"),
            snapshot: b.snapshot(),
        });
    }
    Ok(v)
}

/// Evaluate without an active delta net; delta symbols are an error.
pub(crate) fn evaluate_plain(e: &FieldExpr, vars: &BTreeMap<String, f64>, eps: f64) -> Result<f64> {
    let v = eval_node(e, vars, eps, None)?;
    if !v.is_finite() {
        return Err(Error::eval(format!("non-finite result {v}")));
    }
    Ok(v)
}

fn eval_node(e: &FieldExpr, vars: &BTreeMap<String, f64>, eps: f64, d: Option<&ScaledDelta>) -> Result<f64> {
    use Node::*;
    let go = |x: &FieldExpr| eval_node(x, vars, eps, d);
    Ok(match e.node() {
        Num(v) => *v,
        Var(name) => vars
            .get(&**name)
            .copied()
            .ok_or_else(|| Error::eval(format!("unbound variable '{name}'")))?,
        Eps => eps,
        Neg(a) => -go(a)?,
        Add(x, y) => go(x)? + go(y)?,
        Sub(x, y) => go(x)? - go(y)?,
        Mul(x, y) => go(x)? * go(y)?,
        Div(x, y) => checked_div(go(x)?, go(y)?)?,
        Pow(x, y) => pow(go(x)?, go(y)?),
        Call(f, a) => checked_call(*f, go(a)?)?,
        Delta(k, a) => match d {
            Some(d) => d.value(*k, go(a)?),
            None => return Err(Error::Validation("delta symbol where no delta net is active".into())),
        },
        Heaviside(a) => heaviside(go(a)?),
        Pos(a) => go(a)?.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    const BUMP_RHO0: f64 = 0.828_568_839_869_105_5; // C e^-1, C = 1/int exp(-1/(1-x^2))

    #[test]
    fn spec_examples() {
        let b = Bindings::new(0.1, DeltaNet::bump());
        let delta = parse("delta(u)").unwrap();
        assert_eq!(evaluate(&delta, &b.clone().with("u", 0.2)).unwrap(), 0.0);
        let at0 = evaluate(&delta, &b.clone().with("u", 0.0)).unwrap();
        assert!((at0 - BUMP_RHO0 / 0.1).abs() < 1e-9 * at0);

        let e = parse("x^2 - y^2").unwrap();
        assert_eq!(evaluate(&e, &b.clone().with("x", 1.0).with("y", 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn errors_carry_bindings() {
        let b = Bindings::new(0.5, DeltaNet::bump()).with("x", 0.0);
        match evaluate(&parse("1/x").unwrap(), &b) {
            Err(Error::Evaluation { snapshot, message }) => {
                assert!(message.contains("division"));
                assert_eq!(snapshot["x"], 0.0);
                assert_eq!(snapshot["eps"], 0.5);
            }
            other => panic!("{other:?}"),
        }
        assert!(evaluate(&parse("log(x)").unwrap(), &b).is_err());
        assert!(evaluate(&parse("sqrt(x - 1)").unwrap(), &b).is_err());
        assert!(evaluate(&parse("exp(1000)").unwrap(), &b).is_err());
        assert!(evaluate(&parse("y").unwrap(), &b).is_err());
    }

    #[test]
    fn reference_symbols() {
        let b = Bindings::new(0.5, DeltaNet::bump());
        let e = parse("3*heaviside(u) + 5*pos(u)").unwrap();
        assert_eq!(evaluate(&e, &b.clone().with("u", 0.5)).unwrap(), 5.5);
        assert_eq!(evaluate(&e, &b.clone().with("u", -0.5)).unwrap(), 0.0);
    }

    #[test]
    fn negative_base_integer_power() {
        let b = Bindings::new(0.5, DeltaNet::bump()).with("x", -2.0);
        assert_eq!(evaluate(&parse("x^3").unwrap(), &b).unwrap(), -8.0);
        assert!(evaluate(&parse("x^0.5").unwrap(), &b).is_err());
    }
}
