//! Epsilon-nets of numbers and fields, and grid-based asymptotic classifiers.
//!
//! A net is a rule `eps -> value` (or `(eps, p) -> value`), never a stored
//! array. All classifiers sample on a caller-supplied [`EpsilonGrid`] and
//! judge asymptotics from the grid tail (the last half of the grid): the
//! quantifier "for all sufficiently small eps" is not decidable, so these are
//! evidence-based verdicts, not certificates.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponents are searched in `0..=MAX_EXPONENT`. Past eps^32 on grids that
/// reach 1e-3 there is no double precision left to compare against.
pub const MAX_EXPONENT: u32 = 32;

/// Log-log fit residual above which a power law is rejected.
pub const POWER_LAW_RESIDUAL: f64 = 0.2;

pub const DEFAULT_SAMPLES_PER_AXIS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Geometric,
    Custom,
}

/// Strictly decreasing regularization parameters in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    values: Vec<f64>,
    spacing: Spacing,
}

impl EpsilonGrid {
    /// Geometric sequence from `e_max` down to `e_min` with `count` entries.
    pub fn geometric(e_max: f64, e_min: f64, count: usize) -> Result<Self> {
        if !(e_min > 0.0 && e_min < e_max && e_max <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon grid needs 0 < e_min < e_max <= 1, got e_max = {e_max}, e_min = {e_min}"
            )));
        }
        if count < 4 {
            return Err(Error::Config(format!("epsilon grid needs at least 4 entries, got {count}")));
        }
        let ratio = (e_min / e_max).powf(1.0 / (count - 1) as f64);
        let mut values: Vec<f64> = (0..count).map(|i| e_max * ratio.powi(i as i32)).collect();
        values[count - 1] = e_min;
        Ok(Self { values, spacing: Spacing::Geometric })
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Config(format!("epsilon grid needs at least 4 entries, got {}", values.len())));
        }
        if !(values[0] <= 1.0) {
            return Err(Error::Config(format!("epsilon grid must start at or below 1, got {}", values[0])));
        }
        for w in values.windows(2) {
            if !(w[0] > w[1]) {
                return Err(Error::Config(format!("epsilon grid must strictly decrease: {} then {}", w[0], w[1])));
            }
        }
        if !(values[values.len() - 1] > 0.0) {
            return Err(Error::Config("epsilon grid entries must be positive".into()));
        }
        Ok(Self { values, spacing: Spacing::Custom })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The last half of the grid (the smallest eps values).
    pub fn tail(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }
}

/// Convenience wrapper for [`EpsilonGrid::geometric`].
pub fn make_epsilon_grid(e_max: f64, e_min: f64, count: usize) -> Result<EpsilonGrid> {
    EpsilonGrid::geometric(e_max, e_min, count)
}

type ScalarSampler = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;
type FieldSampler = Arc<dyn Fn(f64, &[f64]) -> Result<f64> + Send + Sync>;
type BreakpointRule = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A net of numbers `(r_eps)`.
#[derive(Clone)]
pub struct ScalarNet {
    label: String,
    sampler: ScalarSampler,
}

impl fmt::Debug for ScalarNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarNet").field("label", &self.label).finish_non_exhaustive()
    }
}

impl ScalarNet {
    pub fn new(label: impl Into<String>, rule: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::fallible(label, move |eps| Ok(rule(eps)))
    }

    pub fn fallible(label: impl Into<String>, rule: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            sampler: Arc::new(rule),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample(&self, eps: f64) -> Result<f64> {
        let v = (self.sampler)(eps)?;
        if !v.is_finite() {
            return Err(Error::Evaluation {
                message: format!("net '{}' is not finite ({v})", self.label),
                snapshot: [("eps".to_string(), eps)].into_iter().collect(),
            });
        }
        Ok(v)
    }

    /// Scale the net by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.sampler.clone();
        Self::fallible(format!("{}*{c}", self.label), move |eps| Ok(c * inner(eps)?))
    }
}

/// A net of scalar fields `(u_eps)` on a subset of R^d.
#[derive(Clone)]
pub struct FieldNet {
    label: String,
    dim: usize,
    sampler: FieldSampler,
    breakpoints: Option<BreakpointRule>,
}

impl fmt::Debug for FieldNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldNet")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl FieldNet {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        rule: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::fallible(label, dim, move |eps, p| Ok(rule(eps, p)))
    }

    pub fn fallible(
        label: impl Into<String>,
        dim: usize,
        rule: impl Fn(f64, &[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            sampler: Arc::new(rule),
            breakpoints: None,
        }
    }

    /// Attach a rule giving, per eps, the 1-D points where the field has
    /// narrow features (delta-net support edges). Used by quadrature.
    pub fn with_breakpoints(mut self, rule: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.breakpoints = Some(Arc::new(rule));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self, eps: f64) -> Vec<f64> {
        self.breakpoints.as_ref().map(|r| r(eps)).unwrap_or_default()
    }

    pub fn sample(&self, eps: f64, point: &[f64]) -> Result<f64> {
        let v = (self.sampler)(eps, point)?;
        if !v.is_finite() {
            let mut snapshot: std::collections::BTreeMap<String, f64> =
                point.iter().enumerate().map(|(i, &x)| (format!("x{i}"), x)).collect();
            snapshot.insert("eps".into(), eps);
            return Err(Error::Evaluation {
                message: format!("field '{}' is not finite ({v})", self.label),
                snapshot,
            });
        }
        Ok(v)
    }

    /// Freeze the point argument, giving the net of point values.
    pub fn at_point(&self, point: &[f64]) -> ScalarNet {
        let me = self.clone();
        let p = point.to_vec();
        ScalarNet::fallible(format!("{}@{:?}", self.label, point), move |eps| me.sample(eps, &p))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.sampler.clone();
        Self {
            label: format!("{}*{c}", self.label),
            dim: self.dim,
            sampler: Arc::new(move |eps, p| Ok(c * inner(eps, p)?)),
            breakpoints: self.breakpoints.clone(),
        }
    }
}

/// A closed box in R^d sampled on a regular lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    bounds: Vec<(f64, f64)>,
    samples: Vec<usize>,
}

impl Region {
    pub fn new(bounds: Vec<(f64, f64)>, samples_per_axis: usize) -> Result<Self> {
        let n = bounds.len();
        Self::with_counts(bounds, vec![samples_per_axis; n])
    }

    pub fn with_counts(bounds: Vec<(f64, f64)>, samples: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config("region needs at least one axis".into()));
        }
        if bounds.len() != samples.len() {
            return Err(Error::Config("one sample count per axis required".into()));
        }
        for &(a, b) in &bounds {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::Config(format!("region interval [{a}, {b}] is empty or unbounded")));
            }
        }
        if samples.iter().any(|&s| s == 0) {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        Ok(Self { bounds, samples })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn point_count(&self) -> usize {
        self.samples.iter().product()
    }

    /// Lattice spacing along `axis` (zero for single-sample axes).
    pub fn cell_size(&self, axis: usize) -> f64 {
        let (a, b) = self.bounds[axis];
        let n = self.samples[axis];
        if n > 1 {
            (b - a) / (n - 1) as f64
        } else {
            0.0
        }
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        let (a, b) = self.bounds[axis];
        let n = self.samples[axis];
        if n == 1 {
            0.5 * (a + b)
        } else if i == n - 1 {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    }

    /// Point for a flat row-major lattice index (last axis fastest).
    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; d];
        for axis in (0..d).rev() {
            let n = self.samples[axis];
            p[axis] = self.coord(axis, flat % n);
            flat /= n;
        }
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.point_count()).map(|i| self.point(i)).collect()
    }

    /// The sub-box spanned by lattice indices `lo[k]..=hi[k]` on each axis;
    /// its lattice is exactly the corresponding subset of this lattice.
    pub fn sub_lattice(&self, lo: &[usize], hi: &[usize]) -> Result<Self> {
        if lo.len() != self.dim() || hi.len() != self.dim() {
            return Err(Error::Config("sub-lattice index dimension mismatch".into()));
        }
        let mut bounds = Vec::new();
        let mut samples = Vec::new();
        for axis in 0..self.dim() {
            if !(lo[axis] <= hi[axis] && hi[axis] < self.samples[axis]) {
                return Err(Error::Config(format!("bad sub-lattice range on axis {axis}")));
            }
            if self.samples[axis] == 1 {
                bounds.push(self.bounds[axis]);
                samples.push(1);
            } else {
                bounds.push((self.coord(axis, lo[axis]), self.coord(axis, hi[axis])));
                samples.push(hi[axis] - lo[axis] + 1);
            }
        }
        Self::with_counts(bounds, samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsValue {
    pub eps: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ModerateLike,
    NegligibleLike(u32),
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::ModerateLike => write!(f, "moderate-like"),
            Verdict::NegligibleLike(m) => write!(f, "negligible-like({m})"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub label: String,
    pub grid: Vec<f64>,
    /// Fitted N with sup ~ eps^(-N).
    #[serde(rename = "order")]
    pub estimated_order: f64,
    pub fit_residual: f64,
    /// Fitted decay exponent over the grid tail (positive means decaying).
    pub tail_decay: f64,
    #[serde(rename = "table")]
    pub per_eps_sup: Vec<EpsValue>,
    pub verdict: Verdict,
}

impl GrowthReport {
    /// True when the tail evidence supports decay at least as fast as eps^m.
    pub fn is_negligible_like(&self, m: u32) -> bool {
        matches!(self.verdict, Verdict::NegligibleLike(k) if k >= m)
    }
}

/// The net whose growth is measured.
#[derive(Debug, Clone, Copy)]
pub enum NetSource<'a> {
    Scalar(&'a ScalarNet),
    Field(&'a FieldNet, &'a Region),
}

impl NetSource<'_> {
    fn label(&self) -> &str {
        match self {
            NetSource::Scalar(n) => n.label(),
            NetSource::Field(n, _) => n.label(),
        }
    }
}

/// Least-squares line through (x, y); returns (intercept, slope, rms residual).
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    (intercept, slope, (ss / n).sqrt())
}

fn sup_abs(net: &NetSource<'_>, eps: f64) -> Result<f64> {
    match net {
        NetSource::Scalar(n) => Ok(n.sample(eps)?.abs()),
        NetSource::Field(n, region) => {
            let mut sup = 0.0_f64;
            for i in 0..region.point_count() {
                sup = sup.max(n.sample(eps, &region.point(i))?.abs());
            }
            Ok(sup)
        }
    }
}

// ln of a sup; exact zeros map to the log of the smallest subnormal.
fn safe_ln(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        (f64::from_bits(1)).ln()
    }
}

/// Fit sup |u_eps| ~ eps^(-N) on the grid and classify the growth.
pub fn estimate_growth_order(net: NetSource<'_>, grid: &EpsilonGrid) -> Result<GrowthReport> {
    let sups: Vec<f64> = grid
        .values()
        .par_iter()
        .map(|&eps| sup_abs(&net, eps))
        .collect::<Result<_>>()?;

    let x: Vec<f64> = grid.values().iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = sups.iter().map(|&s| safe_ln(s)).collect();
    let (_, slope, residual) = linear_fit(&x, &y);
    let order = -slope;

    let t0 = grid.len() / 2;
    let tail_sups = &sups[t0..];
    let (_, tail_slope, _) = linear_fit(&x[t0..], &y[t0..]);

    let verdict = if tail_sups.iter().all(|&s| s == 0.0) {
        Verdict::NegligibleLike(MAX_EXPONENT)
    } else if tail_slope >= 1.0 && (residual > POWER_LAW_RESIDUAL || tail_slope >= MAX_EXPONENT as f64) {
        Verdict::NegligibleLike((tail_slope.floor() as u32).min(MAX_EXPONENT))
    } else if order <= MAX_EXPONENT as f64 && residual <= POWER_LAW_RESIDUAL {
        Verdict::ModerateLike
    } else {
        Verdict::Inconclusive
    };

    Ok(GrowthReport {
        label: net.label().to_string(),
        grid: grid.values().to_vec(),
        estimated_order: order,
        fit_residual: residual,
        tail_decay: tail_slope,
        per_eps_sup: grid
            .values()
            .iter()
            .zip(&sups)
            .map(|(&eps, &value)| EpsValue { eps, value })
            .collect(),
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictNonzeroReport {
    pub label: String,
    pub decision: bool,
    pub witness_exponent: Option<u32>,
    pub table: Vec<EpsValue>,
}

/// Smallest m in 0..=32 with |r_eps| >= eps^m at every tail eps.
fn smallest_exponent(tail: &[(f64, f64)]) -> Option<u32> {
    (0..=MAX_EXPONENT).find(|&m| tail.iter().all(|&(eps, v)| v.abs() >= eps.powi(m as i32)))
}

/// Grid-tail test of |r_eps| >= eps^m for some non-negative integer m.
pub fn is_strictly_nonzero(net: &ScalarNet, grid: &EpsilonGrid) -> StrictNonzeroReport {
    let samples: Vec<Option<f64>> = grid.values().par_iter().map(|&e| net.sample(e).ok()).collect();
    let table: Vec<EpsValue> = grid
        .values()
        .iter()
        .zip(&samples)
        .map(|(&eps, v)| EpsValue { eps, value: v.unwrap_or(f64::NAN) })
        .collect();
    let t0 = grid.len() / 2;
    let tail: Option<Vec<(f64, f64)>> = grid.values()[t0..]
        .iter()
        .zip(&samples[t0..])
        .map(|(&e, v)| v.map(|v| (e, v)))
        .collect();
    let witness = tail.and_then(|t| smallest_exponent(&t));
    StrictNonzeroReport {
        label: net.label().to_string(),
        decision: witness.is_some(),
        witness_exponent: witness,
        table,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertibilityReport {
    pub label: String,
    pub grid: Vec<f64>,
    pub decision: bool,
    #[serde(rename = "order")]
    pub exponent: Option<u32>,
    pub worst_point: Vec<f64>,
    #[serde(rename = "table")]
    pub inf_table: Vec<EpsValue>,
    /// Location of a sign change found between lattice neighbours at the
    /// smallest eps; a continuous field vanishes there, so the inf is 0.
    pub sign_change: Option<Vec<f64>>,
    pub verdict: &'static str,
}

struct InfScan {
    inf: f64,
    argmin: Vec<f64>,
    zero: Option<Vec<f64>>,
}

fn bisect_zero(field: &FieldNet, eps: f64, mut a: Vec<f64>, mut b: Vec<f64>, mut fa: f64) -> Result<Vec<f64>> {
    for _ in 0..80 {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fm = field.sample(eps, &mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
}

fn scan_inf(field: &FieldNet, region: &Region, eps: f64) -> Result<InfScan> {
    let n = region.point_count();
    let values: Vec<f64> = (0..n).map(|i| field.sample(eps, &region.point(i))).collect::<Result<_>>()?;
    let mut inf = f64::INFINITY;
    let mut arg = 0;
    for (i, v) in values.iter().enumerate() {
        if v.abs() < inf {
            inf = v.abs();
            arg = i;
        }
    }
    if inf == 0.0 {
        let p = region.point(arg);
        return Ok(InfScan { inf: 0.0, argmin: p.clone(), zero: Some(p) });
    }
    // sign changes along lattice edges
    let d = region.dim();
    let counts = region.samples();
    let mut stride = vec![1usize; d];
    for axis in (0..d.saturating_sub(1)).rev() {
        stride[axis] = stride[axis + 1] * counts[axis + 1];
    }
    for i in 0..n {
        for axis in 0..d {
            let idx = (i / stride[axis]) % counts[axis];
            if idx + 1 < counts[axis] {
                let j = i + stride[axis];
                if values[i] * values[j] < 0.0 {
                    let z = bisect_zero(field, eps, region.point(i), region.point(j), values[i])?;
                    return Ok(InfScan { inf: 0.0, argmin: z.clone(), zero: Some(z) });
                }
            }
        }
    }
    Ok(InfScan { inf, argmin: region.point(arg), zero: None })
}

/// Uniform invertibility test: inf over the region of |u_eps| >= eps^q for
/// some integer q at every tail eps.
pub fn check_invertible_on(field: &FieldNet, region: &Region, grid: &EpsilonGrid) -> Result<InvertibilityReport> {
    if field.dim() != region.dim() {
        return Err(Error::Config(format!(
            "field '{}' has dimension {} but region has {}",
            field.label(),
            field.dim(),
            region.dim()
        )));
    }
    let scans: Vec<InfScan> = grid
        .values()
        .par_iter()
        .map(|&eps| scan_inf(field, region, eps))
        .collect::<Result<_>>()?;
    let inf_table: Vec<EpsValue> = grid
        .values()
        .iter()
        .zip(&scans)
        .map(|(&eps, s)| EpsValue { eps, value: s.inf })
        .collect();
    let t0 = grid.len() / 2;
    let tail: Vec<(f64, f64)> = inf_table[t0..].iter().map(|r| (r.eps, r.value)).collect();
    let exponent = smallest_exponent(&tail);
    let last = scans.last().expect("grid has at least 4 entries");
    Ok(InvertibilityReport {
        label: field.label().to_string(),
        grid: grid.values().to_vec(),
        decision: exponent.is_some(),
        exponent,
        worst_point: last.argmin.clone(),
        inf_table,
        sign_change: last.zero.clone(),
        verdict: if exponent.is_some() { "invertible" } else { "not-invertible" },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid6() -> EpsilonGrid {
        make_epsilon_grid(0.2, 0.00625, 6).unwrap()
    }

    #[test]
    fn geometric_grid_halving() {
        let g = make_epsilon_grid(0.1, 0.0125, 4).unwrap();
        let want = [0.1, 0.05, 0.025, 0.0125];
        for (a, b) in g.values().iter().zip(want) {
            assert!((a - b).abs() <= 1e-15 * b, "{a} vs {b}");
        }
        assert_eq!(g.spacing(), Spacing::Geometric);
    }

    #[test]
    fn geometric_grid_ratio_oracle() {
        let g = make_epsilon_grid(0.2, 0.00625, 6).unwrap();
        let ratio = (0.00625f64 / 0.2).powf(1.0 / 5.0);
        assert!((ratio - 0.5).abs() < 1e-15);
        for (i, v) in g.values().iter().enumerate() {
            assert!((v - 0.2 * 0.5f64.powi(i as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_domain_errors() {
        assert!(matches!(make_epsilon_grid(1.0, 1.0, 4), Err(Error::Config(_))));
        assert!(make_epsilon_grid(1.5, 0.1, 4).is_err());
        assert!(make_epsilon_grid(0.5, 0.1, 3).is_err());
        assert!(make_epsilon_grid(0.5, 0.0, 5).is_err());
        assert!(EpsilonGrid::custom(vec![0.5, 0.4, 0.4, 0.1]).is_err());
        assert!(EpsilonGrid::custom(vec![0.5, 0.4, 0.3, 0.1]).is_ok());
    }

    #[test]
    fn tail_is_last_half() {
        let g = make_epsilon_grid(0.2, 0.0125, 5).unwrap();
        assert_eq!(g.tail().len(), 3);
        assert_eq!(g.tail()[2], 0.0125);
    }

    #[test]
    fn power_law_orders() {
        for k in 0..4 {
            let net = ScalarNet::new(format!("eps^-{k}"), move |e| e.powi(-k));
            let r = estimate_growth_order(NetSource::Scalar(&net), &grid6()).unwrap();
            assert!((r.estimated_order - k as f64).abs() < 0.05);
            assert_eq!(r.verdict, Verdict::ModerateLike);
            assert_eq!(r.per_eps_sup.len(), 6);
        }
    }

    #[test]
    fn exponential_decay_is_negligible_like() {
        let g = make_epsilon_grid(0.2, 0.01, 8).unwrap();
        let net = ScalarNet::new("exp(-1/eps)", |e| (-1.0 / e).exp());
        let r = estimate_growth_order(NetSource::Scalar(&net), &g).unwrap();
        // oracle: the local log-log decay slope of exp(-1/eps) is 1/eps >= 1/0.05
        // on the tail of this grid
        assert!(g.tail().iter().all(|&e| 1.0 / e >= 10.0));
        for m in 0..=10 {
            assert!(r.is_negligible_like(m), "m = {m}: {:?}", r.verdict);
        }
    }

    #[test]
    fn nonfinite_sampler_reports_eps() {
        let net = ScalarNet::new("bad", |e| if e < 0.05 { f64::NAN } else { 1.0 });
        let err = estimate_growth_order(NetSource::Scalar(&net), &grid6()).unwrap_err();
        match err {
            Error::Evaluation { snapshot, .. } => assert!(snapshot["eps"] < 0.05),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn field_growth_uses_region_sup() {
        let f = FieldNet::new("x/eps", 1, |e, p| p[0] / e);
        let region = Region::new(vec![(-2.0, 1.0)], 31).unwrap();
        let r = estimate_growth_order(NetSource::Field(&f, &region), &grid6()).unwrap();
        assert!((r.estimated_order - 1.0).abs() < 1e-9);
        assert!((r.per_eps_sup[0].value - 2.0 / 0.2).abs() < 1e-12);
    }

    #[test]
    fn strictly_nonzero_examples() {
        let g = grid6();
        let r = is_strictly_nonzero(&ScalarNet::new("eps", |e| e), &g);
        assert!(r.decision);
        assert_eq!(r.witness_exponent, Some(1));

        let r = is_strictly_nonzero(&ScalarNet::new("3", |_| 3.0), &g);
        assert_eq!(r.witness_exponent, Some(0));

        let r = is_strictly_nonzero(&ScalarNet::new("eps^(1/(2eps^2))", |e| e.powf(1.0 / (2.0 * e * e))), &g);
        assert!(!r.decision);
        assert_eq!(r.witness_exponent, None);
    }

    #[test]
    fn invertible_affine_field() {
        let f = FieldNet::new("1+eps*x", 1, |e, p| 1.0 + e * p[0]);
        let region = Region::new(vec![(0.0, 1.0)], 64).unwrap();
        let r = check_invertible_on(&f, &region, &grid6()).unwrap();
        assert!(r.decision);
        assert_eq!(r.exponent, Some(0));
        assert!(r.sign_change.is_none());
    }

    fn concentrating_net() -> FieldNet {
        FieldNet::new("concentrating", 1, |e, p| {
            let x = p[0];
            e.powf(x * x / (x.powi(4) + e.powi(4)))
        })
    }

    #[test]
    fn pointwise_but_not_uniformly_invertible() {
        let g = make_epsilon_grid(0.2, 0.0125, 5).unwrap();
        let region = Region::new(vec![(0.0, 1.0)], 64).unwrap();
        let r = check_invertible_on(&concentrating_net(), &region, &g).unwrap();
        assert!(!r.decision);
        let x = r.worst_point[0];
        assert!((x - g.smallest()).abs() <= 2.0 * region.cell_size(0), "worst point {x}");

        let at_half = is_strictly_nonzero(&concentrating_net().at_point(&[0.5]), &g);
        assert_eq!(at_half.witness_exponent, Some(4));
    }

    #[test]
    fn sign_change_forces_zero_inf() {
        // 1 - 2x has a root at 1/2, which the 64-point lattice on [0,1] misses
        let f = FieldNet::new("1-2x", 1, |_, p| 1.0 - 2.0 * p[0]);
        let region = Region::new(vec![(0.0, 1.0)], 64).unwrap();
        let r = check_invertible_on(&f, &region, &grid6()).unwrap();
        assert!(!r.decision);
        let z = r.sign_change.unwrap();
        assert!((z[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lattice_geometry() {
        let r = Region::with_counts(vec![(0.0, 1.0), (-1.0, 1.0)], vec![3, 2]).unwrap();
        assert_eq!(r.point_count(), 6);
        assert_eq!(r.point(0), vec![0.0, -1.0]);
        assert_eq!(r.point(1), vec![0.0, 1.0]);
        assert_eq!(r.point(5), vec![1.0, 1.0]);
        let s = r.sub_lattice(&[1, 0], &[2, 0]).unwrap();
        assert_eq!(s.points(), vec![vec![0.5, -1.0], vec![1.0, -1.0]]);
        assert!(Region::new(vec![(1.0, 0.0)], 4).is_err());
    }

    #[test]
    fn report_json_shape() {
        let net = ScalarNet::new("one", |_| 1.0);
        let r = estimate_growth_order(NetSource::Scalar(&net), &grid6()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["label", "grid", "table", "order", "verdict"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "moderate-like");
        assert_eq!(v["table"][0]["eps"], 0.2);
    }
}
