use std::collections::HashMap;

use super::{FieldExpr, Func, Node};
use crate::error::{Error, Result};

/// Exact partial derivative with respect to `var`.
///
/// Delta nets step up one order per differentiation (`delta -> delta1 ->
/// delta2`); a third derivative is refused. When the argument of a delta
/// does not depend on `var` the result is zero and no order is consumed.
pub(super) fn differentiate(e: &FieldExpr, var: &str) -> Result<FieldExpr> {
    let mut memo = HashMap::new();
    go(e, var, &mut memo)
}

fn go(e: &FieldExpr, var: &str, memo: &mut HashMap<usize, FieldExpr>) -> Result<FieldExpr> {
    if let Some(d) = memo.get(&e.id()) {
        return Ok(d.clone());
    }
    use Node::*;
    let d = match e.node() {
        Num(_) | Eps => FieldExpr::zero(),
        Var(v) => {
            if &**v == var {
                FieldExpr::one()
            } else {
                FieldExpr::zero()
            }
        }
        Neg(a) => go(a, var, memo)?.neg(),
        Add(a, b) => go(a, var, memo)?.add(&go(b, var, memo)?),
        Sub(a, b) => go(a, var, memo)?.sub(&go(b, var, memo)?),
        Mul(a, b) => {
            let da = go(a, var, memo)?;
            let db = go(b, var, memo)?;
            da.mul(b).add(&a.mul(&db))
        }
        Div(a, b) => {
            let da = go(a, var, memo)?;
            let db = go(b, var, memo)?;
            // a'/b - a b'/b^2
            da.div(b).sub(&a.mul(&db).div(&b.powi(2)))
        }
        Pow(a, b) => {
            let da = go(a, var, memo)?;
            let db = go(b, var, memo)?;
            if db.is_zero() {
                if da.is_zero() {
                    FieldExpr::zero()
                } else {
                    let lowered = match b.as_num() {
                        Some(n) => FieldExpr::num(n - 1.0),
                        None => b.sub(&FieldExpr::one()),
                    };
                    b.mul(&a.pow(&lowered)).mul(&da)
                }
            } else {
                // a^b (b' log a + b a'/a)
                let log_a = FieldExpr::call(Func::Log, a);
                let inner = db.mul(&log_a).add(&b.mul(&da).div(a));
                e.mul(&inner)
            }
        }
        Call(f, a) => {
            let da = go(a, var, memo)?;
            if da.is_zero() {
                FieldExpr::zero()
            } else {
                let outer = match f {
                    Func::Sin => FieldExpr::call(Func::Cos, a),
                    Func::Cos => FieldExpr::call(Func::Sin, a).neg(),
                    Func::Exp => e.clone(),
                    Func::Log => FieldExpr::one().div(a),
                    Func::Sqrt => FieldExpr::num(0.5).div(e),
                    Func::Tanh => FieldExpr::one().sub(&e.powi(2)),
                };
                outer.mul(&da)
            }
        }
        Delta(k, a) => {
            let da = go(a, var, memo)?;
            if da.is_zero() {
                FieldExpr::zero()
            } else if *k >= 2 {
                return Err(Error::DeltaOrder { requested: k + 1 });
            } else {
                FieldExpr::delta(k + 1, a).mul(&da)
            }
        }
        Heaviside(_) => return Err(Error::ReferenceOnly("heaviside")),
        Pos(_) => return Err(Error::ReferenceOnly("pos")),
    };
    memo.insert(e.id(), d.clone());
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::super::{evaluate, parse, Bindings, DeltaNet};
    use super::*;

    fn eval_at(e: &FieldExpr, vars: &[(&str, f64)]) -> f64 {
        let mut b = Bindings::new(0.1, DeltaNet::bump());
        for (k, v) in vars {
            b.set(k, *v);
        }
        evaluate(e, &b).unwrap()
    }

    #[test]
    fn spec_examples() {
        let d = parse("x^2 - y^2").unwrap().differentiate("x").unwrap();
        assert_eq!(d.to_string(), "2.0*x");

        let d = parse("f0*delta(u)").unwrap().differentiate("u").unwrap();
        assert_eq!(d.to_string(), "f0*delta1(u)");

        let d = parse("sin(x*y)").unwrap().differentiate("x").unwrap();
        let v = eval_at(&d, &[("x", 0.3), ("y", 1.7)]);
        assert!((v - 1.7 * (0.3f64 * 1.7).cos()).abs() < 1e-15);
    }

    #[test]
    fn delta_order_cap() {
        let e = parse("delta(u)").unwrap();
        let d1 = e.differentiate("u").unwrap();
        let d2 = d1.differentiate("u").unwrap();
        assert_eq!(d2.to_string(), "delta2(u)");
        assert!(matches!(d2.differentiate("u"), Err(Error::DeltaOrder { requested: 3 })));
        // argument independent of the variable: no order consumed
        assert!(d2.differentiate("x").unwrap().is_zero());
    }

    #[test]
    fn chain_rule_through_delta() {
        let d = parse("delta(2*u - x)").unwrap().differentiate("u").unwrap();
        assert_eq!(d.to_string(), "2.0*delta1(2.0*u - x)");
    }

    #[test]
    fn reference_symbols_refuse() {
        assert!(matches!(
            parse("heaviside(u)").unwrap().differentiate("u"),
            Err(Error::ReferenceOnly("heaviside"))
        ));
        assert!(matches!(parse("pos(u)").unwrap().differentiate("x"), Err(Error::ReferenceOnly("pos"))));
    }

    #[test]
    fn shared_subexpressions_stay_shared() {
        // x^(2^30) by repeated squaring: exponential tree size, linear DAG size
        let mut e = FieldExpr::var("x");
        for _ in 0..30 {
            e = e.mul(&e);
        }
        let d = e.differentiate("x").unwrap();
        assert!(d.node_count() < 400);
    }
}
