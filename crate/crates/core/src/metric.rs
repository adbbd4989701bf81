//! Generalized metrics given by expression-valued component matrices.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{check_invertible_on, EpsilonGrid, EpsValue, FieldNet, InvertibilityReport, Region};
use crate::error::{Error, Result};
use crate::fieldexpr::{parse, DeltaNet, FieldExpr, ScaledDelta, Tape, RESERVED};

/// Largest supported dimension; symbolic cofactor inverses swell beyond it.
pub const MAX_DIM: usize = 6;

/// Determinants smaller than this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

#[derive(Debug)]
struct Inner {
    label: String,
    coords: Vec<String>,
    components: Vec<Vec<FieldExpr>>,
    resolved: Vec<Vec<FieldExpr>>,
    parameters: BTreeMap<String, f64>,
    delta: DeltaNet,
    tape: Tape,
}

/// A symmetric matrix of field expressions over a coordinate chart.
///
/// `component(i, j)` and `component(j, i)` are the same expression object.
/// Parameters are substituted into `resolved` components, which are what
/// every numerical and symbolic consumer sees.
#[derive(Debug, Clone)]
pub struct GeneralizedMetric(Arc<Inner>);

#[derive(Debug, Clone, Serialize)]
pub struct MetricEvaluation {
    pub point: Vec<f64>,
    pub eps: f64,
    pub matrix: Vec<Vec<f64>>,
    pub det: f64,
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
}

impl MetricEvaluation {
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl GeneralizedMetric {
    /// Build from a text matrix. Entries below the diagonal may be left empty
    /// to mirror the upper triangle; if given they must agree with it.
    pub fn build(
        label: &str,
        coords: &[&str],
        texts: &[Vec<String>],
        parameters: BTreeMap<String, f64>,
        delta: DeltaNet,
    ) -> Result<Self> {
        let d = coords.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::Config(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
        }
        if texts.len() != d || texts.iter().any(|row| row.len() != d) {
            return Err(Error::Config(format!("component matrix must be {d}x{d}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &c in coords {
            if !is_identifier(c) || RESERVED.contains(&c) {
                return Err(Error::Config(format!("'{c}' is not a usable coordinate name")));
            }
            if !seen.insert(c) {
                return Err(Error::Config(format!("coordinate '{c}' repeated")));
            }
        }
        for (name, value) in &parameters {
            if !is_identifier(name) || RESERVED.contains(&name.as_str()) || seen.contains(name.as_str()) {
                return Err(Error::Config(format!("'{name}' is not a usable parameter name")));
            }
            if !value.is_finite() {
                return Err(Error::Config(format!("parameter '{name}' is not finite")));
            }
        }

        let mut comps: Vec<Vec<Option<FieldExpr>>> = vec![vec![None; d]; d];
        for i in 0..d {
            for j in i..d {
                let text = texts[i][j].trim();
                let e = if text.is_empty() { FieldExpr::zero() } else { parse(text)? };
                comps[i][j] = Some(e);
            }
        }
        for i in 0..d {
            for j in 0..i {
                let upper = comps[j][i].clone().unwrap();
                let text = texts[i][j].trim();
                if !text.is_empty() {
                    let lower = parse(text)?;
                    if lower != upper {
                        return Err(Error::Validation(format!(
                            "component ({},{}) = {lower} differs from ({},{}) = {upper}",
                            coords[i], coords[j], coords[j], coords[i]
                        )));
                    }
                }
                comps[i][j] = Some(upper);
            }
        }
        let components: Vec<Vec<FieldExpr>> =
            comps.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect();

        for (i, row) in components.iter().enumerate() {
            for (j, e) in row.iter().enumerate().skip(i) {
                if e.contains_reference_only() {
                    return Err(Error::Validation(format!(
                        "component ({},{}) uses a reference-only symbol",
                        coords[i], coords[j]
                    )));
                }
                for v in e.free_vars() {
                    if !seen.contains(v.as_str()) && !parameters.contains_key(&v) {
                        return Err(Error::Validation(format!(
                            "component ({},{}) uses unknown symbol '{v}'",
                            coords[i], coords[j]
                        )));
                    }
                }
            }
        }
        Self::assemble(label, coords.iter().map(|c| c.to_string()).collect(), components, parameters, delta)
    }

    fn assemble(
        label: &str,
        coords: Vec<String>,
        components: Vec<Vec<FieldExpr>>,
        parameters: BTreeMap<String, f64>,
        delta: DeltaNet,
    ) -> Result<Self> {
        let d = coords.len();
        let params = parameters.clone();
        let subst = move |v: &str| params.get(v).map(|&x| FieldExpr::num(x));
        let mut resolved: Vec<Vec<FieldExpr>> = vec![Vec::with_capacity(d); d];
        for i in 0..d {
            for j in 0..d {
                let e = if j < i { resolved[j][i].clone() } else { components[i][j].substitute(&subst) };
                resolved[i].push(e);
            }
        }
        let upper: Vec<FieldExpr> = (0..d).flat_map(|i| resolved[i][i..].to_vec()).collect();
        let tape = Tape::compile(&upper, &coords)?;
        Ok(Self(Arc::new(Inner {
            label: label.to_string(),
            coords,
            components,
            resolved,
            parameters,
            delta,
            tape,
        })))
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    pub fn dim(&self) -> usize {
        self.0.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.0.coords
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.0.coords.iter().position(|c| c == name)
    }

    /// Component as written (parameters still symbolic).
    pub fn component(&self, i: usize, j: usize) -> &FieldExpr {
        &self.0.components[i][j]
    }

    /// Component with parameter values substituted.
    pub fn resolved(&self, i: usize, j: usize) -> &FieldExpr {
        &self.0.resolved[i][j]
    }

    pub fn resolved_matrix(&self) -> &[Vec<FieldExpr>] {
        &self.0.resolved
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.0.parameters
    }

    pub fn delta(&self) -> &DeltaNet {
        &self.0.delta
    }

    /// Same components under another delta net.
    pub fn with_delta(&self, delta: DeltaNet) -> Self {
        Self(Arc::new(Inner {
            label: self.0.label.clone(),
            coords: self.0.coords.clone(),
            components: self.0.components.clone(),
            resolved: self.0.resolved.clone(),
            parameters: self.0.parameters.clone(),
            delta,
            tape: self.0.tape.clone(),
        }))
    }

    /// The metric `g + h`, with `h` symmetric (only the upper triangle is read).
    pub fn perturbed(&self, label: &str, h: &[Vec<FieldExpr>]) -> Result<Self> {
        let d = self.dim();
        if h.len() != d || h.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("perturbation must be {d}x{d}")));
        }
        let mut comps: Vec<Vec<FieldExpr>> = vec![Vec::with_capacity(d); d];
        for i in 0..d {
            for j in 0..d {
                let e = if j < i { comps[j][i].clone() } else { self.0.components[i][j].add(&h[i][j]) };
                comps[i].push(e);
            }
        }
        Self::assemble(label, self.0.coords.clone(), comps, self.0.parameters.clone(), self.0.delta.clone())
    }

    fn check_point(&self, point: &[f64], eps: f64) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::Config(format!(
                "point has {} coordinates, metric '{}' has {}",
                point.len(),
                self.label(),
                self.dim()
            )));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
        }
        Ok(())
    }

    /// Component matrix at a point using a prepared delta member.
    pub fn matrix_with(&self, point: &[f64], eps: f64, delta: &ScaledDelta) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let upper = self.0.tape.eval_vec(point, eps, delta)?;
        let mut m = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                m[(i, j)] = upper[k];
                m[(j, i)] = upper[k];
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn matrix_at(&self, point: &[f64], eps: f64) -> Result<DMatrix<f64>> {
        self.check_point(point, eps)?;
        self.matrix_with(point, eps, &self.0.delta.at(eps)?)
    }

    pub fn evaluate(&self, point: &[f64], eps: f64) -> Result<MetricEvaluation> {
        let m = self.matrix_at(point, eps)?;
        Ok(evaluation_from(point, eps, m))
    }

    /// Inverse by the cofactor formula; fails when |det| is below [`SINGULAR_DET`].
    pub fn inverse_at(&self, point: &[f64], eps: f64) -> Result<DMatrix<f64>> {
        let m = self.matrix_at(point, eps)?;
        cofactor_inverse(&m).map_err(|det| Error::Singular {
            point: point.to_vec(),
            eps,
            det,
        })
    }

    /// The net of determinants as a field over the chart.
    pub fn det_net(&self) -> FieldNet {
        let me = self.clone();
        FieldNet::fallible(format!("det g [{}]", self.label()), self.dim(), move |eps, p| {
            Ok(me.matrix_at(p, eps)?.determinant())
        })
    }

    /// Uniform nondegeneracy: inf over the region of |det g_eps| >= eps^m.
    pub fn check_nondegenerate(&self, region: &Region, grid: &EpsilonGrid) -> Result<InvertibilityReport> {
        check_invertible_on(&self.det_net(), region, grid)
    }

    /// Negative-eigenvalue count over the region, per eps.
    pub fn compute_index(&self, region: &Region, grid: &EpsilonGrid) -> Result<IndexReport> {
        if region.dim() != self.dim() {
            return Err(Error::Config(format!(
                "region has dimension {}, metric has {}",
                region.dim(),
                self.dim()
            )));
        }
        let points = region.points();
        let per_eps: Vec<(Vec<usize>, EpsValue, MetricEvaluation, MetricEvaluation)> = grid
            .values()
            .par_iter()
            .map(|&eps| {
                let delta = self.0.delta.at(eps)?;
                let mut counts = Vec::with_capacity(points.len());
                let mut min_abs = f64::INFINITY;
                let mut lo: Option<MetricEvaluation> = None;
                let mut hi: Option<MetricEvaluation> = None;
                for p in &points {
                    self.check_point(p, eps)?;
                    let ev = evaluation_from(p, eps, self.matrix_with(p, eps, &delta)?);
                    let n = ev.negative_count();
                    min_abs = min_abs.min(ev.min_abs_eigenvalue());
                    if lo.as_ref().is_none_or(|l| n < l.negative_count()) {
                        lo = Some(ev.clone());
                    }
                    if hi.as_ref().is_none_or(|h| n > h.negative_count()) {
                        hi = Some(ev);
                    }
                    counts.push(n);
                }
                Ok((counts, EpsValue { eps, value: min_abs }, lo.unwrap(), hi.unwrap()))
            })
            .collect::<Result<_>>()?;

        let signatures: Vec<SignatureRow> = per_eps
            .iter()
            .map(|(counts, ev, _, _)| SignatureRow {
                eps: ev.eps,
                min_negative: *counts.iter().min().unwrap(),
                max_negative: *counts.iter().max().unwrap(),
            })
            .collect();
        let t0 = grid.len() / 2;
        let tail = &per_eps[t0..];
        let mut lo = &tail[0].2;
        let mut hi = &tail[0].3;
        for (_, _, l, h) in tail {
            if l.negative_count() < lo.negative_count() {
                lo = l;
            }
            if h.negative_count() > hi.negative_count() {
                hi = h;
            }
        }
        let stable = lo.negative_count() == hi.negative_count();
        Ok(IndexReport {
            label: self.label().to_string(),
            index: stable.then(|| lo.negative_count()),
            stable,
            per_eps_signatures: signatures,
            min_abs_eigenvalue_table: per_eps.iter().map(|r| r.1).collect(),
            witnesses: (!stable).then(|| (lo.clone(), hi.clone())),
        })
    }

    /// Symbolic determinant and inverse (cofactor over determinant).
    pub fn symbolic_inverse(&self) -> (FieldExpr, Vec<Vec<FieldExpr>>) {
        symbolic_inverse(&self.0.resolved)
    }
}

fn evaluation_from(point: &[f64], eps: f64, m: DMatrix<f64>) -> MetricEvaluation {
    let d = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    let det = sym.determinant();
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    MetricEvaluation {
        point: point.to_vec(),
        eps,
        matrix: (0..d).map(|i| (0..d).map(|j| sym[(i, j)]).collect()).collect(),
        det,
        eigenvalues,
    }
}

fn minor(m: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    m.clone().remove_row(row).remove_column(col)
}

/// Inverse via `G^{ij} = cof(g)_{ji} / det g`; returns the determinant on failure.
pub fn cofactor_inverse(m: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, f64> {
    let d = m.nrows();
    let det = m.determinant();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(det);
    }
    if d == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0 / det));
    }
    let mut inv = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[(j, i)] = sign * minor(m, i, j).determinant() / det;
        }
    }
    Ok(inv)
}

// Determinant of the submatrix on the given row and column sets, by Laplace
// expansion along the lowest row; memoized on the (rows, cols) masks.
fn sub_det(
    g: &[Vec<FieldExpr>],
    rows: u32,
    cols: u32,
    memo: &mut HashMap<(u32, u32), FieldExpr>,
) -> FieldExpr {
    if rows == 0 {
        return FieldExpr::one();
    }
    if let Some(e) = memo.get(&(rows, cols)) {
        return e.clone();
    }
    let r = rows.trailing_zeros() as usize;
    let rest = rows & (rows - 1);
    let mut acc = FieldExpr::zero();
    let mut sign_positive = true;
    for c in 0..g.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &g[r][c];
        if !entry.is_zero() {
            let term = entry.mul(&sub_det(g, rest, cols & !(1 << c), memo));
            acc = if sign_positive { acc.add(&term) } else { acc.sub(&term) };
        }
        sign_positive = !sign_positive;
    }
    memo.insert((rows, cols), acc.clone());
    acc
}

/// Symbolic determinant and cofactor inverse of a symmetric expression matrix.
pub fn symbolic_inverse(g: &[Vec<FieldExpr>]) -> (FieldExpr, Vec<Vec<FieldExpr>>) {
    let d = g.len();
    let all = (1u32 << d) - 1;
    let mut memo = HashMap::new();
    let det = sub_det(g, all, all, &mut memo);
    let mut inv: Vec<Vec<FieldExpr>> = vec![Vec::with_capacity(d); d];
    for i in 0..d {
        for j in 0..d {
            if j < i {
                let e = inv[j][i].clone();
                inv[i].push(e);
                continue;
            }
            // G^{ij} = (-1)^{i+j} M_{ji} / det
            let m = sub_det(g, all & !(1 << j), all & !(1 << i), &mut memo);
            let cof = if (i + j) % 2 == 0 { m } else { m.neg() };
            inv[i].push(cof.div(&det));
        }
    }
    (det, inv)
}

#[derive(Debug, Clone, Serialize)]
pub struct SignatureRow {
    pub eps: f64,
    pub min_negative: usize,
    pub max_negative: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub label: String,
    /// Common negative-eigenvalue count on the grid tail, when stable.
    pub index: Option<usize>,
    pub stable: bool,
    pub per_eps_signatures: Vec<SignatureRow>,
    pub min_abs_eigenvalue_table: Vec<EpsValue>,
    /// Two evaluations with different signatures on the tail.
    pub witnesses: Option<(MetricEvaluation, MetricEvaluation)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpec {
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_radius")]
    pub radius_rule: String,
}

fn default_profile() -> String {
    "bump".into()
}

fn default_radius() -> String {
    "eps".into()
}

impl Default for DeltaSpec {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            radius_rule: default_radius(),
        }
    }
}

/// Serialized metric description.
///
/// Component keys name two coordinates, either separated by a comma
/// (`"theta,phi"`) or concatenated when unambiguous (`"uv"`). Missing
/// components are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub label: String,
    pub dim: usize,
    pub coords: Vec<String>,
    #[serde(default)]
    pub components: BTreeMap<String, String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub delta: DeltaSpec,
}

impl MetricSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("metric JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric spec serializes")
    }

    fn split_key(&self, key: &str) -> Result<(usize, usize)> {
        let find = |name: &str| self.coords.iter().position(|c| c == name);
        if let Some((a, b)) = key.split_once(',') {
            return match (find(a.trim()), find(b.trim())) {
                (Some(i), Some(j)) => Ok((i, j)),
                _ => Err(Error::Config(format!("component key '{key}' does not name two coordinates"))),
            };
        }
        let mut hits = Vec::new();
        for cut in 1..key.len() {
            if !key.is_char_boundary(cut) {
                continue;
            }
            if let (Some(i), Some(j)) = (find(&key[..cut]), find(&key[cut..])) {
                hits.push((i, j));
            }
        }
        match hits.as_slice() {
            [one] => Ok(*one),
            [] => Err(Error::Config(format!("component key '{key}' does not name two coordinates"))),
            _ => Err(Error::Config(format!("component key '{key}' is ambiguous; use 'a,b'"))),
        }
    }

    pub fn build(&self) -> Result<GeneralizedMetric> {
        if self.dim != self.coords.len() {
            return Err(Error::Config(format!(
                "dim is {} but {} coordinates are listed",
                self.dim,
                self.coords.len()
            )));
        }
        let d = self.dim;
        let mut texts = vec![vec![String::new(); d]; d];
        for (key, text) in &self.components {
            let (i, j) = self.split_key(key)?;
            let slot = &mut texts[i][j];
            if !slot.is_empty() {
                return Err(Error::Config(format!("component '{key}' given twice")));
            }
            *slot = text.clone();
        }
        // Move lower-only entries to the upper triangle.
        for i in 0..d {
            for j in 0..i {
                if texts[j][i].is_empty() && !texts[i][j].is_empty() {
                    texts[j][i] = std::mem::take(&mut texts[i][j]);
                }
            }
        }
        let delta = DeltaNet::from_spec(&self.delta.profile, &self.delta.radius_rule)?;
        let coords: Vec<&str> = self.coords.iter().map(String::as_str).collect();
        GeneralizedMetric::build(&self.label, &coords, &texts, self.parameters.clone(), delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(label: &str, coords: &[&str], entries: &[&str]) -> GeneralizedMetric {
        let d = coords.len();
        let texts: Vec<Vec<String>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { entries[i].to_string() } else { String::new() }).collect())
            .collect();
        GeneralizedMetric::build(label, coords, &texts, BTreeMap::new(), DeltaNet::bump()).unwrap()
    }

    fn ppwave(f: &str) -> GeneralizedMetric {
        let spec = MetricSpec {
            label: "ppwave".into(),
            dim: 4,
            coords: ["u", "v", "x", "y"].map(String::from).to_vec(),
            components: [
                ("uu".to_string(), format!("({f})*delta(u)")),
                ("uv".to_string(), "-1/2".to_string()),
                ("xx".to_string(), "1".to_string()),
                ("yy".to_string(), "1".to_string()),
            ]
            .into_iter()
            .collect(),
            parameters: BTreeMap::new(),
            delta: DeltaSpec::default(),
        };
        spec.build().unwrap()
    }

    #[test]
    fn minkowski_evaluation() {
        let m = diag("minkowski", &["t", "x", "y", "z"], &["-1", "1", "1", "1"]);
        let ev = m.evaluate(&[0.3, -2.0, 5.0, 1.0], 0.5).unwrap();
        assert_eq!(ev.eigenvalues, vec![1.0, 1.0, 1.0, -1.0]);
        assert!((ev.det + 1.0).abs() < 1e-15);
        let inv = m.inverse_at(&[0.0; 4], 0.5).unwrap();
        assert_eq!(inv, m.matrix_at(&[0.0; 4], 0.5).unwrap());
    }

    #[test]
    fn ppwave_outside_support() {
        let m = ppwave("x^2 - y^2");
        let ev = m.evaluate(&[1.0, 0.0, 1.0, 1.0], 0.1).unwrap();
        assert_eq!(ev.matrix[0][0], 0.0);
        assert!((ev.det + 0.25).abs() < 1e-15);
        let inv = m.inverse_at(&[1.0, 0.0, 1.0, 1.0], 0.1).unwrap();
        assert_eq!(inv[(0, 1)], -2.0);
        assert_eq!(inv[(0, 0)], 0.0);
        assert_eq!(inv[(1, 1)], 0.0);
    }

    #[test]
    fn delta_plus_quadratic_at_origin() {
        let m = diag("remark35", &["x"], &["x^2 + delta(x)"]);
        let ev = m.evaluate(&[0.0], 0.1).unwrap();
        let c = 2.252_283_621_043_581_5;
        assert!((ev.det - c * (-1f64).exp() / 0.1).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_cofactor() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = cofactor_inverse(&m).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.6, -0.2, -0.2, 0.4]);
        assert!((inv - want).norm() < 1e-15);
        let bg = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, -0.5, 0.0]);
        assert_eq!(cofactor_inverse(&bg).unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]));
        assert!(cofactor_inverse(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn symbolic_inverse_of_ppwave() {
        let m = ppwave("x^2 - y^2");
        let (det, inv) = m.symbolic_inverse();
        assert_eq!(det.as_num(), Some(-0.25));
        assert_eq!(inv[0][0].as_num(), Some(0.0));
        assert_eq!(inv[0][1].as_num(), Some(-2.0));
        assert_eq!(inv[2][2].as_num(), Some(1.0));
        assert!(inv[1][1].contains_delta());
        assert!(inv[0][1].ptr_eq(&inv[1][0]));
    }

    #[test]
    fn asymmetric_text_rejected() {
        let texts = vec![vec!["1".to_string(), "x".to_string()], vec!["y".to_string(), "1".to_string()]];
        let err = GeneralizedMetric::build("bad", &["x", "y"], &texts, BTreeMap::new(), DeltaNet::bump());
        assert!(matches!(err, Err(Error::Validation(_))));
        let texts = vec![vec!["1".to_string(), "x".to_string()], vec!["x".to_string(), "1".to_string()]];
        let m = GeneralizedMetric::build("ok", &["x", "y"], &texts, BTreeMap::new(), DeltaNet::bump()).unwrap();
        assert!(m.component(0, 1).ptr_eq(m.component(1, 0)));
    }

    #[test]
    fn unknown_symbols_rejected() {
        let texts = vec![vec!["1 + z".to_string()]];
        assert!(GeneralizedMetric::build("bad", &["x"], &texts, BTreeMap::new(), DeltaNet::bump()).is_err());
        let params = [("z".to_string(), 2.0)].into_iter().collect();
        let m = GeneralizedMetric::build("ok", &["x"], &texts, params, DeltaNet::bump()).unwrap();
        assert_eq!(m.evaluate(&[0.0], 0.5).unwrap().det, 3.0);
        assert_eq!(m.component(0, 0).to_string(), "1.0 + z");
    }

    #[test]
    fn spec_key_forms() {
        let spec = MetricSpec::from_json(
            r#"{"label":"s2","dim":2,"coords":["theta","phi"],"components":{"thetatheta":"1","phi,phi":"sin(theta)^2"}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        let ev = m.evaluate(&[1.0, 0.0], 1.0).unwrap();
        assert!((ev.det - 1f64.sin().powi(2)).abs() < 1e-15);
        let bad = MetricSpec::from_json(r#"{"label":"b","dim":1,"coords":["x"],"components":{"xz":"1"}}"#).unwrap();
        assert!(bad.build().is_err());
        assert!(MetricSpec::from_json(r#"{"label":"b","dim":1}"#).is_err());
    }

    #[test]
    fn nondegenerate_and_index() {
        let grid = EpsilonGrid::geometric(0.2, 0.0125, 5).unwrap();
        let m = diag("minkowski", &["t", "x"], &["-1", "1"]);
        let region = Region::new(vec![(-1.0, 1.0), (-1.0, 1.0)], 5).unwrap();
        let rep = m.check_nondegenerate(&region, &grid).unwrap();
        assert!(rep.decision);
        assert_eq!(rep.exponent, Some(0));
        let idx = m.compute_index(&region, &grid).unwrap();
        assert!(idx.stable);
        assert_eq!(idx.index, Some(1));

        let e = diag("euclid", &["x", "y"], &["1", "1"]);
        assert_eq!(e.compute_index(&region, &grid).unwrap().index, Some(0));
    }

    #[test]
    fn ppwave_index_across_impulse() {
        let grid = EpsilonGrid::geometric(0.2, 0.0125, 5).unwrap();
        let m = ppwave("x^2 + y^2");
        let region = Region::with_counts(vec![(-0.3, 0.3), (-1.0, 1.0), (-2.0, 2.0), (-2.0, 2.0)], vec![25, 2, 5, 5]).unwrap();
        let idx = m.compute_index(&region, &grid).unwrap();
        assert!(idx.stable);
        assert_eq!(idx.index, Some(1));
    }

    #[test]
    fn unstable_signature_reports_witnesses() {
        // sign of g_xx flips with eps at x = 0
        let grid = EpsilonGrid::custom(vec![0.4, 0.2, 0.1, 0.05, 0.025, 0.0125]).unwrap();
        let m = diag("flip", &["x"], &["x^2 + sin(1/eps)"]);
        let region = Region::new(vec![(-0.1, 0.1)], 3).unwrap();
        let idx = m.compute_index(&region, &grid).unwrap();
        // sin(20) > 0 and sin(80) < 0 on the tail
        assert!(!idx.stable);
        let (a, b) = idx.witnesses.unwrap();
        assert_ne!(a.negative_count(), b.negative_count());
        assert!(idx.index.is_none());
    }
}
