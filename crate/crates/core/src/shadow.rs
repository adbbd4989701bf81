//! Association: pairings against test densities, eps -> 0 extrapolation,
//! k-association checks and limit curves of geodesic families.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{linear_fit, EpsValue, EpsilonGrid, FieldNet, Region};
use crate::error::{Error, Result};
use crate::fieldexpr::{evaluate_plain, parse, DeltaNet, FieldExpr, Tape};
use crate::geodesic::GeodesicFamily;
use crate::quadrature::{integrate, QuadOptions};

/// Tolerance for the boundary spot check of a test density.
pub const SUPPORT_CHECK_TOL: f64 = 1e-12;
/// Samples whose spread is below this (relative to `max(1, |mean|)`) are
/// treated as already converged.
pub const SETTLED_SPREAD: f64 = 1e-9;
/// Largest log-log residual a trustworthy fit may have.
pub const TRUST_RESIDUAL: f64 = 0.3;
pub const MIN_ORDER: f64 = 0.25;
pub const MAX_ORDER: f64 = 4.0;

/// A compactly supported test density in one variable.
#[derive(Debug, Clone)]
pub struct TestDensity {
    var: String,
    expr: FieldExpr,
    support: (f64, f64),
    note: String,
    tape: Arc<Tape>,
}

impl TestDensity {
    /// The expression must vanish (to [`SUPPORT_CHECK_TOL`]) at the support
    /// ends and at 14 points just outside them.
    pub fn new(var: &str, expr: FieldExpr, support: (f64, f64)) -> Result<Self> {
        let d = Self::unchecked(var, expr, support, String::new())?;
        let (a, b) = support;
        let w = b - a;
        let mut pts = vec![a, b];
        for k in 1..=7 {
            let off = w * k as f64 / 16.0;
            pts.push(a - off);
            pts.push(b + off);
        }
        for t in pts {
            let v = d.raw(t)?;
            if v.abs() > SUPPORT_CHECK_TOL {
                return Err(Error::Validation(format!(
                    "test density '{}' is {v:e} at {var} = {t}, outside its declared support [{a}, {b}]",
                    d.expr
                )));
            }
        }
        Ok(d)
    }

    /// A density obtained by cutting `expr` off outside `support`; no
    /// vanishing check.
    pub fn truncated(var: &str, expr: FieldExpr, support: (f64, f64)) -> Result<Self> {
        Self::unchecked(var, expr, support, "truncated to its support".into())
    }

    pub fn parse(var: &str, text: &str, support: (f64, f64)) -> Result<Self> {
        Self::new(var, parse(text)?, support)
    }

    fn unchecked(var: &str, expr: FieldExpr, support: (f64, f64), note: String) -> Result<Self> {
        let (a, b) = support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("test density support [{a}, {b}] is not a finite interval")));
        }
        if expr.contains_eps() || expr.contains_delta() {
            return Err(Error::Validation("test densities cannot reference eps or delta".into()));
        }
        if let Some(v) = expr.free_vars().into_iter().find(|v| v != var) {
            return Err(Error::Validation(format!("test density uses '{v}', expected only '{var}'")));
        }
        let tape = Tape::compile(std::slice::from_ref(&expr), &[var.to_string()])?;
        Ok(Self {
            var: var.into(),
            expr,
            support,
            note,
            tape: Arc::new(tape),
        })
    }

    fn raw(&self, t: f64) -> Result<f64> {
        let mut out = [0.0];
        self.tape.eval_with(&[t], 1.0, None, &mut out)?;
        Ok(out[0])
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (a, b) = self.support;
        if t < a || t > b {
            return Ok(0.0);
        }
        self.raw(t)
    }

    pub fn derivative(&self) -> Result<FieldExpr> {
        self.expr.differentiate(&self.var)
    }

    pub fn integral(&self) -> Result<f64> {
        let (a, b) = self.support;
        Ok(integrate(|t| self.raw(t), a, b, &[], QuadOptions::default())?.value)
    }
}

/// A field given by one expression over named coordinates, regularized by a
/// delta net.
#[derive(Debug, Clone)]
pub struct ExprNet {
    expr: FieldExpr,
    vars: Vec<String>,
    delta: DeltaNet,
}

impl ExprNet {
    pub fn new(expr: FieldExpr, vars: &[&str], delta: DeltaNet) -> Result<Self> {
        expr.validate()?;
        if expr.contains_reference_only() {
            return Err(Error::Validation("heaviside/pos cannot appear in a regularized field".into()));
        }
        if let Some(v) = expr.free_vars().into_iter().find(|v| !vars.contains(&v.as_str())) {
            return Err(Error::Validation(format!("unknown variable '{v}'")));
        }
        Ok(Self {
            expr,
            vars: vars.iter().map(|s| s.to_string()).collect(),
            delta,
        })
    }

    pub fn parse(text: &str, vars: &[&str], delta: DeltaNet) -> Result<Self> {
        Self::new(parse(text)?, vars, delta)
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn delta(&self) -> &DeltaNet {
        &self.delta
    }

    /// Sampled view. One-variable nets carry the delta support edges as
    /// quadrature breakpoints.
    pub fn to_field_net(&self, label: &str) -> Result<FieldNet> {
        let tape = Arc::new(Tape::compile(std::slice::from_ref(&self.expr), &self.vars)?);
        let delta = self.delta.clone();
        let mut net = FieldNet::fallible(label, self.vars.len(), move |eps, p| {
            let mut out = [0.0];
            tape.eval(p, eps, &delta.at(eps)?, &mut out)?;
            Ok(out[0])
        });
        if self.vars.len() == 1 && self.expr.contains_delta() {
            let var = self.vars[0].clone();
            let args = self.expr.delta_args();
            let delta = self.delta.clone();
            net = net.with_breakpoints(move |eps| {
                let Ok(r) = delta.support_radius(eps) else {
                    return Vec::new();
                };
                let mut out = vec![-r, r];
                for arg in &args {
                    // affine arguments a*t + b put the edges at (±r - b)/a
                    let Some(a) = arg.differentiate(&var).ok().and_then(|d| d.as_num()) else {
                        continue;
                    };
                    if a == 0.0 {
                        continue;
                    }
                    let at0 = BTreeMap::from([(var.clone(), 0.0)]);
                    if let Ok(b) = evaluate_plain(arg, &at0, eps) {
                        out.push((-r - b) / a);
                        out.push((r - b) / a);
                    }
                }
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            });
        }
        Ok(net)
    }
}

/// `∫ u_eps φ` over the support of `φ`, by adaptive Gauss-Kronrod with the
/// field's breakpoints forced as panel edges.
pub fn pair(field: &FieldNet, phi: &TestDensity, eps: f64) -> Result<f64> {
    if field.dim() != 1 {
        return Err(Error::Config(format!("pairing needs a field in one variable, got dimension {}", field.dim())));
    }
    let (a, b) = phi.support();
    let bps = field.breakpoints(eps);
    let r = integrate(
        |t| Ok(field.sample(eps, &[t])? * phi.raw(t)?),
        a,
        b,
        &bps,
        QuadOptions::default(),
    )?;
    Ok(r.value)
}

/// Pair at every grid eps (in parallel), in grid order.
pub fn pair_over(field: &FieldNet, phi: &TestDensity, grid: &EpsilonGrid) -> Result<Vec<EpsValue>> {
    grid.values()
        .par_iter()
        .map(|&eps| Ok(EpsValue { eps, value: pair(field, phi, eps)? }))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowEstimate {
    pub limit: f64,
    /// `p` in `|I(eps) - limit| ≈ C eps^p`.
    pub fitted_order: f64,
    pub constant: f64,
    pub samples: Vec<EpsValue>,
    pub tail_len: usize,
    /// RMS residual of `log|I - limit|` against `log eps` over the tail.
    pub residual: f64,
    pub trustworthy: bool,
}

fn fit_fixed_order(x: &[f64], y: &[f64], p: f64) -> Option<(f64, f64, f64)> {
    let z: Vec<f64> = x.iter().map(|v| v.powf(p)).collect();
    let (l, c, rms) = linear_fit(&z, y);
    let mz = z.iter().sum::<f64>() / z.len() as f64;
    if z.iter().all(|v| (v - mz).abs() <= 1e-15) {
        return None;
    }
    Some((l, c, rms))
}

/// Fit `value = L + C eps^p` over the tail of `samples` (eps decreasing),
/// with `p` restricted to `[MIN_ORDER, MAX_ORDER]`.
pub fn estimate_shadow(samples: &[EpsValue]) -> ShadowEstimate {
    let n = samples.len();
    let tail_len = n.min(4.max(n.div_ceil(2)));
    let mut est = ShadowEstimate {
        limit: samples.last().map_or(f64::NAN, |s| s.value),
        fitted_order: f64::NAN,
        constant: f64::NAN,
        samples: samples.to_vec(),
        tail_len,
        residual: f64::INFINITY,
        trustworthy: false,
    };
    let ok = samples.iter().all(|s| s.eps > 0.0 && s.eps.is_finite() && s.value.is_finite())
        && samples.windows(2).all(|w| w[1].eps < w[0].eps);
    if !ok {
        return est;
    }
    if n < 4 {
        // too few points for a three-parameter fit: first-order
        // extrapolation, never trusted
        if n >= 2 {
            let x: Vec<f64> = samples.iter().map(|s| s.eps).collect();
            let y: Vec<f64> = samples.iter().map(|s| s.value).collect();
            let (l, c, _) = linear_fit(&x, &y);
            est.limit = l;
            est.constant = c;
            est.fitted_order = 1.0;
        }
        return est;
    }
    let tail = &samples[n - tail_len..];
    let emax = tail[0].eps;
    let x: Vec<f64> = tail.iter().map(|s| s.eps / emax).collect();
    let y: Vec<f64> = tail.iter().map(|s| s.value).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= SETTLED_SPREAD * mean.abs().max(1.0) {
        est.limit = y[y.len() - 1];
        est.fitted_order = MAX_ORDER;
        est.constant = 0.0;
        est.residual = 0.0;
        est.trustworthy = true;
        return est;
    }

    let steps = 1500;
    let h = (MAX_ORDER - MIN_ORDER) / steps as f64;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for i in 0..=steps {
        let p = MIN_ORDER + h * i as f64;
        if let Some((l, c, rms)) = fit_fixed_order(&x, &y, p) {
            if best.is_none_or(|b| rms < b.3) {
                best = Some((p, l, c, rms));
            }
        }
    }
    let Some(mut best) = best else {
        return est;
    };
    // golden-section polish around the best lattice order
    let (mut lo, mut hi) = ((best.0 - h).max(MIN_ORDER), (best.0 + h).min(MAX_ORDER));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let rms_at = |p: f64| fit_fixed_order(&x, &y, p).map_or(f64::INFINITY, |f| f.2);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if rms_at(a) < rms_at(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let p = 0.5 * (lo + hi);
    if let Some((l, c, rms)) = fit_fixed_order(&x, &y, p) {
        if rms <= best.3 {
            best = (p, l, c, rms);
        }
    }
    let (p, l, c, _) = best;
    est.limit = l;
    est.fitted_order = p;
    est.constant = c / emax.powf(p);

    let r: Vec<f64> = y.iter().map(|v| v - l).collect();
    let same_sign = r.iter().all(|v| *v > 0.0) || r.iter().all(|v| *v < 0.0);
    if same_sign {
        let lx: Vec<f64> = tail.iter().map(|s| s.eps.ln()).collect();
        let ly: Vec<f64> = r.iter().map(|v| v.abs().ln()).collect();
        est.residual = linear_fit(&lx, &ly).2;
    }
    est.trustworthy = est.residual <= TRUST_RESIDUAL && tail_len >= 4;
    est
}

#[derive(Debug, Clone, Serialize)]
pub struct KAssociationRow {
    /// Variables differentiated, e.g. `"x,y"`; empty for the field itself.
    pub derivative: String,
    pub order: usize,
    pub sups: Vec<EpsValue>,
    pub decaying: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KAssociationReport {
    pub k: usize,
    pub target: String,
    pub rows: Vec<KAssociationRow>,
    pub passes: bool,
}

fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for m in &frontier {
            let start = m.last().copied().unwrap_or(0);
            for v in start..d {
                let mut n: Vec<usize> = m.clone();
                n.push(v);
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// A sequence of sups tends to zero on the tail when it never increases and
/// either vanishes or decays like a positive power of eps.
fn decays(sups: &[EpsValue]) -> bool {
    if sups.iter().all(|s| s.value <= 1e-13) {
        return true;
    }
    if sups.windows(2).any(|w| w[1].value > w[0].value * (1.0 + 1e-9) + 1e-15) {
        return false;
    }
    if sups.iter().any(|s| s.value <= 0.0) {
        return true;
    }
    let lx: Vec<f64> = sups.iter().map(|s| s.eps.ln()).collect();
    let ly: Vec<f64> = sups.iter().map(|s| s.value.ln()).collect();
    linear_fit(&lx, &ly).1 >= 0.1
}

/// Tabulate `sup |∂^α (u_eps - f)|` over the region for every coordinate
/// multi-index with `|α| ≤ k`.
pub fn k_association_check(
    field: &ExprNet,
    target: &FieldExpr,
    k: usize,
    region: &Region,
    grid: &EpsilonGrid,
) -> Result<KAssociationReport> {
    if k > 2 {
        return Err(Error::Config(format!("k-association order {k} exceeds the supported maximum of 2")));
    }
    if target.contains_eps() || target.contains_delta() || target.contains_reference_only() {
        return Err(Error::Validation("k-association target must be a smooth eps-free expression".into()));
    }
    let vars = field.vars();
    if let Some(v) = target.free_vars().into_iter().find(|v| !vars.contains(v)) {
        return Err(Error::Validation(format!("target uses unknown variable '{v}'")));
    }
    if region.dim() != vars.len() {
        return Err(Error::Config(format!("region has dimension {}, field has {}", region.dim(), vars.len())));
    }
    let diff = field.expr().sub(target);
    let indices = multi_indices(vars.len(), k);
    let mut exprs = Vec::with_capacity(indices.len());
    for alpha in &indices {
        let mut e = diff.clone();
        for &v in alpha {
            e = e.differentiate(&vars[v])?;
        }
        exprs.push(e);
    }
    let tape = Tape::compile(&exprs, vars)?;
    let points = region.points();
    let per_eps: Vec<Vec<f64>> = grid
        .values()
        .par_iter()
        .map(|&eps| {
            let delta = field.delta().at(eps)?;
            let mut sup = vec![0.0_f64; exprs.len()];
            let mut out = vec![0.0; exprs.len()];
            for p in &points {
                tape.eval(p, eps, &delta, &mut out)?;
                for (s, v) in sup.iter_mut().zip(&out) {
                    *s = s.max(v.abs());
                }
            }
            Ok(sup)
        })
        .collect::<Result<_>>()?;
    let tail_start = grid.len() - grid.tail().len();
    let rows: Vec<KAssociationRow> = indices
        .iter()
        .enumerate()
        .map(|(j, alpha)| {
            let sups: Vec<EpsValue> = grid
                .values()
                .iter()
                .zip(&per_eps)
                .map(|(&eps, s)| EpsValue { eps, value: s[j] })
                .collect();
            let decaying = decays(&sups[tail_start..]);
            KAssociationRow {
                derivative: alpha.iter().map(|&v| vars[v].as_str()).collect::<Vec<_>>().join(","),
                order: alpha.len(),
                sups,
                decaying,
            }
        })
        .collect();
    Ok(KAssociationReport {
        k,
        target: target.to_string(),
        passes: rows.iter().all(|r| r.decaying),
        rows,
    })
}

/// A family of curves sampled on a shared parameter grid, one member per eps.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTable {
    pub param: String,
    pub coords: Vec<String>,
    pub t: Vec<f64>,
    pub members: Vec<FamilyMember>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub eps: f64,
    /// `values[i][c]`: coordinate `c` at `t[i]`.
    pub values: Vec<Vec<f64>>,
}

impl FamilyTable {
    pub fn from_geodesic(family: &GeodesicFamily, param: &str, coords: &[String]) -> Result<Self> {
        let members = family
            .members
            .iter()
            .map(|m| FamilyMember { eps: m.eps, values: m.positions.clone() })
            .collect();
        let table = Self {
            param: param.into(),
            coords: coords.to_vec(),
            t: family.t.clone(),
            members,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let names: std::collections::BTreeSet<&str> =
            self.coords.iter().map(String::as_str).chain([self.param.as_str(), "eps"]).collect();
        if names.len() != self.coords.len() + 2 {
            return Err(Error::Validation("family column names must be distinct and not 'eps'".into()));
        }
        if self.coords.is_empty() {
            return Err(Error::Validation("family has no coordinate columns".into()));
        }
        if self.t.is_empty() || self.t.iter().any(|t| !t.is_finite()) || self.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("family parameter grid must be finite and strictly increasing".into()));
        }
        if self.members.is_empty() {
            return Err(Error::Validation("family has no members".into()));
        }
        for m in &self.members {
            if !(m.eps > 0.0 && m.eps <= 1.0) {
                return Err(Error::Validation(format!("member eps {} outside (0, 1]", m.eps)));
            }
            if m.values.len() != self.t.len() || m.values.iter().any(|r| r.len() != self.coords.len()) {
                return Err(Error::Validation(format!("member eps = {} does not match the shared grid", m.eps)));
            }
        }
        if self.members.windows(2).any(|w| w[1].eps >= w[0].eps) {
            return Err(Error::Validation("family members must have distinct eps in decreasing order".into()));
        }
        Ok(())
    }

    /// Parse `eps,<param>,<coords...>` rows grouped by eps.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Validation(format!("family CSV: {e}")))?.clone();
        if header.len() < 3 || &header[0] != "eps" {
            return Err(Error::Validation("family CSV header must be eps,<param>,<coordinates...>".into()));
        }
        let param = header[1].to_string();
        let coords: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut groups: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Validation(format!("family CSV: {e}")))?;
            let row: Vec<f64> = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Validation(format!("family CSV row {}: bad number '{f}'", line + 2)))
                })
                .collect::<Result<_>>()?;
            let eps = row[0];
            match groups.last_mut() {
                Some(g) if g.0.to_bits() == eps.to_bits() => {
                    g.1.push(row[1]);
                    g.2.push(row[2..].to_vec());
                }
                _ => groups.push((eps, vec![row[1]], vec![row[2..].to_vec()])),
            }
        }
        let Some(first) = groups.first() else {
            return Err(Error::Validation("family CSV has no rows".into()));
        };
        let t = first.1.clone();
        for g in &groups {
            if g.1 != t {
                return Err(Error::Validation(format!("member eps = {} does not share the parameter grid", g.0)));
            }
        }
        let mut members: Vec<FamilyMember> =
            groups.into_iter().map(|(eps, _, values)| FamilyMember { eps, values }).collect();
        members.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        let table = Self { param, coords, t, members };
        table.validate()?;
        Ok(table)
    }

    /// Rows ordered by eps (decreasing) then parameter; shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["eps".to_string(), self.param.clone()];
        header.extend(self.coords.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for m in &self.members {
            for (t, row) in self.t.iter().zip(&m.values) {
                let mut rec = vec![m.eps.to_string(), t.to_string()];
                rec.extend(row.iter().map(f64::to_string));
                w.write_record(&rec).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Delta support radius as a function of eps.
pub type RadiusRule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Default)]
pub struct ShadowOptions {
    /// Points with `|t - impulse_at| < exclusion_radius` are left out of the
    /// closed-form comparison.
    pub exclusion_radius: f64,
    pub impulse_at: f64,
    /// When set, a member only enters the fit at `t` once `t` lies outside
    /// its impulse window `|t - impulse_at| <= radius(eps)`.
    pub support_radius: Option<RadiusRule>,
}

impl std::fmt::Debug for ShadowOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShadowOptions")
            .field("exclusion_radius", &self.exclusion_radius)
            .field("impulse_at", &self.impulse_at)
            .field("support_radius", &self.support_radius.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateShadow {
    /// Members that entered the fit at each point.
    pub members_used: Vec<usize>,
    pub limit: Vec<f64>,
    pub fitted_orders: Vec<f64>,
    pub trustworthy: Vec<bool>,
    pub trustworthy_fraction: f64,
    pub closed_form: Option<String>,
    pub max_dev: Option<f64>,
    pub worst_t: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicShadow {
    pub param: String,
    pub t: Vec<f64>,
    pub eps: Vec<f64>,
    pub coordinates: BTreeMap<String, CoordinateShadow>,
    /// More than 10% of the per-point fits were untrustworthy.
    pub flagged: bool,
}

/// Per-point eps extrapolation of every coordinate, compared against closed
/// forms (which may use the parameter name, the coordinate names bound to
/// their limits, and `heaviside`/`pos`).
pub fn geodesic_shadow(
    family: &FamilyTable,
    closed_forms: &BTreeMap<String, FieldExpr>,
    opts: &ShadowOptions,
) -> Result<GeodesicShadow> {
    family.validate()?;
    for (name, e) in closed_forms {
        if !family.coords.contains(name) {
            return Err(Error::Validation(format!("closed form for unknown coordinate '{name}'")));
        }
        if e.contains_eps() || e.contains_delta() {
            return Err(Error::Validation(format!("closed form for '{name}' must not use eps or delta")));
        }
        if let Some(v) = e.free_vars().into_iter().find(|v| *v != family.param && !family.coords.contains(v)) {
            return Err(Error::Validation(format!("closed form for '{name}' uses unknown variable '{v}'")));
        }
    }
    let nc = family.coords.len();
    let fits: Vec<Vec<ShadowEstimate>> = (0..family.t.len())
        .into_par_iter()
        .map(|i| {
            (0..nc)
                .map(|c| {
                    let t = family.t[i];
                    let s: Vec<EpsValue> = family
                        .members
                        .iter()
                        .filter(|m| {
                            opts.support_radius.as_ref().is_none_or(|r| (t - opts.impulse_at).abs() > r(m.eps))
                        })
                        .map(|m| EpsValue { eps: m.eps, value: m.values[i][c] })
                        .collect();
                    estimate_shadow(&s)
                })
                .collect()
        })
        .collect();

    let mut coordinates = BTreeMap::new();
    let mut untrusted = 0usize;
    for (c, name) in family.coords.iter().enumerate() {
        let limit: Vec<f64> = fits.iter().map(|f| f[c].limit).collect();
        let trustworthy: Vec<bool> = fits.iter().map(|f| f[c].trustworthy).collect();
        let bad = trustworthy.iter().filter(|t| !**t).count();
        untrusted += bad;
        coordinates.insert(
            name.clone(),
            CoordinateShadow {
                members_used: fits.iter().map(|f| f[c].samples.len()).collect(),
                fitted_orders: fits.iter().map(|f| f[c].fitted_order).collect(),
                trustworthy_fraction: 1.0 - bad as f64 / trustworthy.len() as f64,
                trustworthy,
                limit,
                closed_form: closed_forms.get(name).map(|e| e.to_string()),
                max_dev: None,
                worst_t: None,
            },
        );
    }
    for (name, e) in closed_forms {
        let mut max_dev = 0.0_f64;
        let mut worst = None;
        for (i, &t) in family.t.iter().enumerate() {
            if (t - opts.impulse_at).abs() < opts.exclusion_radius {
                continue;
            }
            let mut vars = BTreeMap::from([(family.param.clone(), t)]);
            for (c, cn) in family.coords.iter().enumerate() {
                vars.insert(cn.clone(), fits[i][c].limit);
            }
            let expected = evaluate_plain(e, &vars, 1.0)?;
            let dev = (coordinates[name].limit[i] - expected).abs();
            if dev.is_nan() || dev > max_dev {
                max_dev = dev;
                worst = Some(t);
            }
        }
        let cs = coordinates.get_mut(name).expect("validated coordinate");
        cs.max_dev = Some(max_dev);
        cs.worst_t = worst;
    }
    let total = family.t.len() * nc;
    Ok(GeodesicShadow {
        param: family.param.clone(),
        t: family.t.clone(),
        eps: family.members.iter().map(|m| m.eps).collect(),
        coordinates,
        flagged: untrusted * 10 > total,
    })
}
