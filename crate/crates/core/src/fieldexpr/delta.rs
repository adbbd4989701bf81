use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use super::eval::evaluate_plain;
use super::{parse, FieldExpr, Node, Tape};
use crate::asymptotics::{linear_fit, EpsilonGrid};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

const NORMALIZATION_TOL: f64 = 1e-10;
const INTEGRAL_TOL: f64 = 1e-8;

// (1-s^2)^3 (1 + B cos(3 pi s)) with B chosen so that the L1 norm is 3.
const OSCILLATORY: &str = "(1 - s^2)^3*(1 + 4.38891040129888713*cos(9.42477796076938*s))";
// Goes negative for |s| > 1/sqrt(6).
const SIGNED: &str = "(1 - s^2)^3*(1 - 6*s^2)";
// Gaussian with sigma = 1/2, cut to [-1, 1] with a C2 taper.
const GAUSSIAN: &str = "exp(-2*s^2)*(1 - s^2)^3";

/// Shape of the unscaled mollifier on [-1, 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Profile {
    Bump,
    GaussianTruncated,
    Signed,
    Oscillatory,
    /// Expression in `s`, taken as zero outside (-1, 1).
    Custom(String),
}

impl Profile {
    fn expression(&self) -> Option<&str> {
        match self {
            Profile::Bump => None,
            Profile::GaussianTruncated => Some(GAUSSIAN),
            Profile::Signed => Some(SIGNED),
            Profile::Oscillatory => Some(OSCILLATORY),
            Profile::Custom(text) => Some(text),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Bump => write!(f, "bump"),
            Profile::GaussianTruncated => write!(f, "gaussian-truncated"),
            Profile::Signed => write!(f, "signed"),
            Profile::Oscillatory => write!(f, "oscillatory"),
            Profile::Custom(text) => write!(f, "custom:{text}"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        Ok(match text {
            "bump" => Profile::Bump,
            "gaussian-truncated" | "gaussian" => Profile::GaussianTruncated,
            "signed" => Profile::Signed,
            "oscillatory" => Profile::Oscillatory,
            _ => match text.strip_prefix("custom:") {
                Some(expr) => Profile::Custom(expr.trim().to_string()),
                None => {
                    return Err(Error::Config(format!(
                        "unknown delta profile '{text}' (bump, gaussian-truncated, signed, oscillatory, custom:EXPR)"
                    )))
                }
            },
        })
    }
}

#[derive(Debug)]
enum Shape {
    Bump,
    /// Tapes for rho, rho', rho'' in the variable `s`.
    Expr(Box<[Tape; 3]>),
}

impl Shape {
    fn raw(&self, order: u8, s: f64) -> f64 {
        match self {
            Shape::Bump => bump_raw(order, s),
            Shape::Expr(tapes) => {
                let mut out = [0.0];
                match tapes[order as usize].eval_with(&[s], 0.0, None, &mut out) {
                    Ok(()) => out[0],
                    Err(_) => f64::NAN,
                }
            }
        }
    }
}

fn bump_raw(order: u8, s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        return 0.0;
    }
    let rho = (-1.0 / w).exp();
    if rho == 0.0 {
        return 0.0;
    }
    let w2 = w * w;
    match order {
        0 => rho,
        1 => rho * (-2.0 * s / w2),
        _ => rho * (4.0 * s * s / (w2 * w2) - 2.0 / w2 - 8.0 * s * s / (w2 * w)),
    }
}

#[derive(Debug)]
struct Inner {
    profile: Profile,
    shape: Arc<Shape>,
    norm: f64,
    l1_unit: f64,
    radius_rule: FieldExpr,
}

/// A family of mollifiers `delta_eps(x) = rho(x / r(eps)) / r(eps)` with `∫rho = 1`.
#[derive(Debug, Clone)]
pub struct DeltaNet(Arc<Inner>);

/// One member of a delta net at a fixed eps.
#[derive(Debug, Clone)]
pub struct ScaledDelta {
    radius: f64,
    norm: f64,
    shape: Arc<Shape>,
}

impl ScaledDelta {
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    /// `order`-th derivative of the net at `x`.
    pub fn value(&self, order: u8, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let s = x / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        self.norm * self.shape.raw(order, s) / self.radius.powi(order as i32 + 1)
    }
}

impl DeltaNet {
    /// Smooth bump profile with radius equal to eps.
    pub fn bump() -> Self {
        Self::new(Profile::Bump, "eps").expect("bump net")
    }

    pub fn from_spec(profile: &str, radius_rule: &str) -> Result<Self> {
        Self::new(profile.parse()?, radius_rule)
    }

    pub fn new(profile: Profile, radius_rule: &str) -> Result<Self> {
        let rule = parse(radius_rule)?;
        if !rule.free_vars().is_empty() || rule.contains_delta() || rule.contains_reference_only() {
            return Err(Error::Config(format!(
                "radius rule '{radius_rule}' may only use eps and numbers"
            )));
        }
        let shape = match profile.expression() {
            None => Shape::Bump,
            Some(text) => Shape::Expr(Box::new(compile_profile(text)?)),
        };
        let shape = Arc::new(shape);
        let opts = QuadOptions::default();
        let raw = integrate(|s| finite(shape.raw(0, s)), -1.0, 1.0, &[0.0], opts)?;
        if !(raw.value > 0.0) || raw.value.abs() < 1e-12 {
            return Err(Error::Validation(format!(
                "profile {profile} has non-positive integral {}",
                raw.value
            )));
        }
        let norm = 1.0 / raw.value;
        let check = integrate(|s| finite(norm * shape.raw(0, s)), -1.0, 1.0, &[0.0], opts)?;
        if (check.value - 1.0).abs() > NORMALIZATION_TOL || check.error > NORMALIZATION_TOL {
            return Err(Error::Quadrature {
                a: -1.0,
                b: 1.0,
                error: check.error.max((check.value - 1.0).abs()),
            });
        }
        let l1 = integrate(|s| finite(norm * shape.raw(0, s).abs()), -1.0, 1.0, &[0.0], opts)?;
        Ok(DeltaNet(Arc::new(Inner {
            profile,
            shape,
            norm,
            l1_unit: l1.value,
            radius_rule: rule,
        })))
    }

    pub fn profile(&self) -> &Profile {
        &self.0.profile
    }

    pub fn radius_rule(&self) -> &FieldExpr {
        &self.0.radius_rule
    }

    /// Normalization constant C with `∫ C rho_raw = 1`.
    pub fn normalization(&self) -> f64 {
        self.0.norm
    }

    /// `∫|rho|`, the same for every member.
    pub fn l1_norm(&self) -> f64 {
        self.0.l1_unit
    }

    pub fn label(&self) -> String {
        format!("{} (radius {})", self.0.profile, self.0.radius_rule)
    }

    pub fn support_radius(&self, eps: f64) -> Result<f64> {
        let r = match self.0.radius_rule.node() {
            Node::Eps => eps,
            _ => evaluate_plain(&self.0.radius_rule, &BTreeMap::new(), eps)?,
        };
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("radius rule gives {r} at eps = {eps}")));
        }
        Ok(r)
    }

    pub fn at(&self, eps: f64) -> Result<ScaledDelta> {
        Ok(ScaledDelta {
            radius: self.support_radius(eps)?,
            norm: self.0.norm,
            shape: self.0.shape.clone(),
        })
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::eval("profile is not finite on (-1, 1)"))
    }
}

fn compile_profile(text: &str) -> Result<[Tape; 3]> {
    let rho = parse(text)?;
    let extra: Vec<String> = rho.free_vars().into_iter().filter(|v| v != "s").collect();
    if !extra.is_empty() || rho.contains_eps() || rho.contains_delta() || rho.contains_reference_only() {
        return Err(Error::Config(format!(
            "profile '{text}' must be an expression in s only"
        )));
    }
    let d1 = rho.differentiate("s")?;
    let d2 = d1.differentiate("s")?;
    let vars = ["s".to_string()];
    let tapes = [
        Tape::compile(&[rho], &vars)?,
        Tape::compile(&[d1], &vars)?,
        Tape::compile(&[d2], &vars)?,
    ];
    // The net is used up to its second derivative, so the zero extension
    // must be C2 across the support boundary.
    let scale = (0..=20)
        .map(|i| {
            let mut o = [0.0];
            tapes[0].eval_with(&[-1.0 + i as f64 * 0.1], 0.0, None, &mut o).map(|_| o[0].abs())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    for (k, tape) in tapes.iter().enumerate() {
        for s in [-1.0, 1.0] {
            let mut o = [0.0];
            tape.eval_with(&[s], 0.0, None, &mut o)?;
            if o[0].abs() > 1e-9 * scale {
                return Err(Error::Validation(format!(
                    "profile '{text}' is not C2 at the support boundary: derivative {k} at s = {s} is {}",
                    o[0]
                )));
            }
        }
    }
    Ok(tapes)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaNetRow {
    pub eps: f64,
    pub integral: f64,
    pub radius: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaNetReport {
    pub label: String,
    pub rows: Vec<DeltaNetRow>,
    pub integral_ok: bool,
    pub shrinking: bool,
    pub l1_bounded: bool,
    pub l1_bound: f64,
    pub passes: bool,
    pub notes: Vec<String>,
}

/// Check the strict delta net conditions on a grid: unit integral, shrinking
/// support and a common L1 bound.
///
/// On a finite grid, "shrinking" means the radius falls with eps at a
/// log-log slope of at least 1/4, and "bounded" means the L1 norms do not
/// grow as a power of 1/eps (log-log slope of at least -0.1).
pub fn validate_strict_delta_net(net: &DeltaNet, grid: &EpsilonGrid) -> Result<DeltaNetReport> {
    let opts = QuadOptions::default();
    let mut rows = Vec::with_capacity(grid.len());
    for &eps in grid.values() {
        let d = net.at(eps)?;
        let r = d.support_radius();
        let bp = [-r, 0.0, r];
        let integral = integrate(|x| finite(d.value(0, x)), -r, r, &bp, opts)?.value;
        let l1 = integrate(|x| finite(d.value(0, x).abs()), -r, r, &bp, opts)?.value;
        rows.push(DeltaNetRow {
            eps,
            integral,
            radius: r,
            l1,
        });
    }
    let mut notes = Vec::new();
    let integral_ok = rows.iter().all(|r| (r.integral - 1.0).abs() <= INTEGRAL_TOL);
    if !integral_ok {
        notes.push(format!("integral differs from 1 by more than {INTEGRAL_TOL}"));
    }
    let ln_eps: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let shrinking = if rows.len() < 2 {
        notes.push("a single eps cannot show a shrinking support".into());
        false
    } else {
        let ln_r: Vec<f64> = rows.iter().map(|r| r.radius.ln()).collect();
        let (_, slope, _) = linear_fit(&ln_eps, &ln_r);
        let first = rows.first().unwrap().radius;
        let last = rows.last().unwrap().radius;
        let small_at_small = if grid.values()[0] > grid.smallest() { last < first } else { first < last };
        let ok = slope >= 0.25 && small_at_small;
        if !ok {
            notes.push(format!("support radius does not shrink with eps (log-log slope {slope:.3})"));
        }
        ok
    };
    let l1_bound = rows.iter().map(|r| r.l1).fold(0.0, f64::max);
    let l1_bounded = l1_bound.is_finite()
        && (rows.len() < 2 || {
            let ln_l1: Vec<f64> = rows.iter().map(|r| r.l1.ln()).collect();
            let (_, slope, _) = linear_fit(&ln_eps, &ln_l1);
            if slope < -0.1 {
                notes.push(format!("L1 norm grows as eps shrinks (log-log slope {slope:.3})"));
            }
            slope >= -0.1
        });
    Ok(DeltaNetReport {
        label: net.label(),
        rows,
        integral_ok,
        shrinking,
        l1_bounded,
        l1_bound,
        passes: integral_ok && shrinking && l1_bounded,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1 / ∫_{-1}^{1} exp(-1/(1-x^2)) dx, independent high-precision quadrature
    const BUMP_C: f64 = 2.252_283_621_043_581_5;

    fn grid() -> EpsilonGrid {
        EpsilonGrid::geometric(0.5, 1e-3, 8).unwrap()
    }

    #[test]
    fn bump_normalization() {
        let net = DeltaNet::bump();
        assert!((net.normalization() - BUMP_C).abs() < 1e-12);
        assert!((net.l1_norm() - 1.0).abs() < 1e-10);
        let d = net.at(0.1).unwrap();
        assert!((d.value(0, 0.0) - BUMP_C * (-1f64).exp() / 0.1).abs() < 1e-10);
        assert_eq!(d.value(0, 0.2), 0.0);
        assert_eq!(d.value(1, 0.0), 0.0);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let d = DeltaNet::bump().at(1.0).unwrap();
        let h = 1e-5;
        for s in [-0.9, -0.5, -0.1, 0.3, 0.7, 0.95] {
            let fd1 = (d.value(0, s + h) - d.value(0, s - h)) / (2.0 * h);
            let fd2 = (d.value(1, s + h) - d.value(1, s - h)) / (2.0 * h);
            assert!((fd1 - d.value(1, s)).abs() < 1e-6 * (1.0 + fd1.abs()), "{s}");
            assert!((fd2 - d.value(2, s)).abs() < 1e-5 * (1.0 + fd2.abs()), "{s}");
        }
    }

    #[test]
    fn strict_net_bump_passes() {
        let rep = validate_strict_delta_net(&DeltaNet::bump(), &grid()).unwrap();
        assert!(rep.passes, "{:?}", rep.notes);
        for row in &rep.rows {
            assert!((row.integral - 1.0).abs() < 1e-8);
            assert!((row.l1 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn oscillatory_profile_has_l1_three() {
        let net = DeltaNet::new(Profile::Oscillatory, "eps").unwrap();
        let rep = validate_strict_delta_net(&net, &grid()).unwrap();
        assert!(rep.passes, "{:?}", rep.notes);
        assert!((rep.l1_bound - 3.0).abs() < 1e-8, "{}", rep.l1_bound);
    }

    #[test]
    fn constant_radius_fails() {
        let net = DeltaNet::new(Profile::Bump, "0.5").unwrap();
        let rep = validate_strict_delta_net(&net, &grid()).unwrap();
        assert!(!rep.shrinking);
        assert!(!rep.passes);
        assert!(rep.integral_ok);
    }

    #[test]
    fn profiles_parse_and_normalize() {
        for name in ["bump", "gaussian-truncated", "signed", "oscillatory", "custom:(1-s^2)^4"] {
            let net = DeltaNet::from_spec(name, "eps").unwrap();
            assert_eq!(net.profile().to_string(), name);
        }
        assert!(DeltaNet::from_spec("triangle", "eps").is_err());
        // not C2 at the boundary
        assert!(DeltaNet::from_spec("custom:1 - s^2", "eps").is_err());
        assert!(DeltaNet::from_spec("custom:(1-s^2)^3*x", "eps").is_err());
        assert!(DeltaNet::from_spec("bump", "eps*y").is_err());
    }

    #[test]
    fn signed_net_goes_negative() {
        let d = DeltaNet::from_spec("signed", "eps").unwrap().at(0.1).unwrap();
        assert!(d.value(0, 0.0) > 0.0);
        assert!(d.value(0, 0.08) < 0.0);
    }

    #[test]
    fn integration_by_parts_identities() {
        let opts = QuadOptions::default();
        for net in [DeltaNet::bump(), DeltaNet::from_spec("gaussian-truncated", "eps").unwrap()] {
            for &eps in grid().values() {
                let d = net.at(eps).unwrap();
                let r = d.support_radius();
                let bp = [-r, 0.0, r];
                let i1 = integrate(|x| Ok(d.value(1, x)), -r, r, &bp, opts).unwrap().value;
                let i2 = integrate(|x| Ok(x * d.value(1, x)), -r, r, &bp, opts).unwrap().value;
                assert!(i1.abs() < 1e-6, "{eps} {i1}");
                assert!((i2 + 1.0).abs() < 1e-6, "{eps} {i2}");
            }
        }
    }
}
