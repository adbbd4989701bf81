//! Levi-Civita connection of a generalized metric, built symbolically.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldexpr::{parse, FieldExpr, ScaledDelta, Tape};
use crate::metric::GeneralizedMetric;

/// Christoffel symbols `Γ^k_{ij}` stored as `symbols[k][i][j]`.
///
/// `symbols[k][i][j]` and `symbols[k][j][i]` are the same expression object.
#[derive(Debug, Clone)]
pub struct ChristoffelField {
    metric: GeneralizedMetric,
    symbols: Vec<Vec<Vec<FieldExpr>>>,
    tape: Tape,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolEntry {
    pub k: String,
    pub i: String,
    pub j: String,
    pub expr: String,
}

/// First partials of the resolved metric: `dg[m][i][j] = ∂_m g_ij`.
pub(crate) fn metric_partials(m: &GeneralizedMetric) -> Result<Vec<Vec<Vec<FieldExpr>>>> {
    let d = m.dim();
    let mut out = Vec::with_capacity(d);
    for a in 0..d {
        let var = &m.coords()[a];
        let mut rows: Vec<Vec<FieldExpr>> = vec![Vec::with_capacity(d); d];
        for i in 0..d {
            for j in 0..d {
                let e = if j < i { rows[j][i].clone() } else { m.resolved(i, j).differentiate(var)? };
                rows[i].push(e);
            }
        }
        out.push(rows);
    }
    Ok(out)
}

impl ChristoffelField {
    /// `Γ^k_{ij} = ½ g^{km} (∂_i g_{jm} + ∂_j g_{im} − ∂_m g_{ij})` with the
    /// inverse formed from symbolic cofactors.
    pub fn new(m: &GeneralizedMetric) -> Result<Self> {
        let d = m.dim();
        let (_, inv) = m.symbolic_inverse();
        let dg = metric_partials(m)?;
        let half = FieldExpr::num(0.5);
        let mut symbols: Vec<Vec<Vec<FieldExpr>>> = vec![vec![Vec::with_capacity(d); d]; d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    if j < i {
                        let e = symbols[k][j][i].clone();
                        symbols[k][i].push(e);
                        continue;
                    }
                    let mut terms = Vec::new();
                    for (mm, ginv) in inv[k].iter().enumerate() {
                        if ginv.is_zero() {
                            continue;
                        }
                        let bracket = dg[i][j][mm].add(&dg[j][i][mm]).sub(&dg[mm][i][j]);
                        if !bracket.is_zero() {
                            terms.push(ginv.mul(&bracket));
                        }
                    }
                    symbols[k][i].push(half.mul(&FieldExpr::sum(&terms)));
                }
            }
        }
        let upper: Vec<FieldExpr> = (0..d)
            .flat_map(|k| (0..d).flat_map(move |i| (i..d).map(move |j| (k, i, j))))
            .map(|(k, i, j)| symbols[k][i][j].clone())
            .collect();
        let tape = Tape::compile(&upper, m.coords())?;
        Ok(Self {
            metric: m.clone(),
            symbols,
            tape,
        })
    }

    pub fn metric(&self) -> &GeneralizedMetric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn symbol(&self, k: usize, i: usize, j: usize) -> &FieldExpr {
        &self.symbols[k][i][j]
    }

    pub fn symbols(&self) -> &[Vec<Vec<FieldExpr>>] {
        &self.symbols
    }

    /// Structurally nonzero symbols with `i <= j`.
    pub fn nonzero(&self) -> Vec<SymbolEntry> {
        let d = self.dim();
        let c = self.metric.coords();
        let mut out = Vec::new();
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let e = &self.symbols[k][i][j];
                    if !e.is_zero() {
                        out.push(SymbolEntry {
                            k: c[k].clone(),
                            i: c[i].clone(),
                            j: c[j].clone(),
                            expr: e.to_string(),
                        });
                    }
                }
            }
        }
        out
    }

    /// All symbols at a point, flattened as `[k][i][j]`.
    pub fn eval_with(&self, point: &[f64], eps: f64, delta: &ScaledDelta) -> Result<Vec<f64>> {
        let d = self.dim();
        let upper = self.tape.eval_vec(point, eps, delta)?;
        let mut out = vec![0.0; d * d * d];
        let mut n = 0;
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    out[(k * d + i) * d + j] = upper[n];
                    out[(k * d + j) * d + i] = upper[n];
                    n += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn eval_at(&self, point: &[f64], eps: f64) -> Result<Vec<f64>> {
        self.eval_with(point, eps, &self.metric.delta().at(eps)?)
    }

    /// `-Γ^k_{ij} v^i v^j` written into `acc`.
    pub fn acceleration(&self, point: &[f64], vel: &[f64], eps: f64, delta: &ScaledDelta, acc: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let g = self.eval_with(point, eps, delta)?;
        for (k, a) in acc.iter_mut().enumerate().take(d) {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += g[(k * d + i) * d + j] * vel[i] * vel[j];
                }
            }
            *a = -s;
        }
        Ok(())
    }
}

/// A vector field with expression components in a metric's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr(pub Vec<FieldExpr>);

impl VectorFieldExpr {
    /// Parse components; metric parameters are substituted.
    pub fn parse(m: &GeneralizedMetric, texts: &[&str]) -> Result<Self> {
        if texts.len() != m.dim() {
            return Err(Error::Config(format!("vector field needs {} components", m.dim())));
        }
        let params = m.parameters().clone();
        let comps = texts
            .iter()
            .map(|t| {
                let e = parse(t)?;
                for v in e.free_vars() {
                    if !m.coords().contains(&v) && !params.contains_key(&v) {
                        return Err(Error::Validation(format!("vector component uses unknown symbol '{v}'")));
                    }
                }
                Ok(e.substitute(&|v| params.get(v).map(|&x| FieldExpr::num(x))))
            })
            .collect::<Result<_>>()?;
        Ok(Self(comps))
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self((0..dim).map(|k| if k == i { FieldExpr::one() } else { FieldExpr::zero() }).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `ξ(f) = ξ^i ∂_i f`.
    pub fn apply(&self, m: &GeneralizedMetric, f: &FieldExpr) -> Result<FieldExpr> {
        let mut terms = Vec::new();
        for (i, xi) in self.0.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            terms.push(xi.mul(&f.differentiate(&m.coords()[i])?));
        }
        Ok(FieldExpr::sum(&terms))
    }

    /// `[ξ, η]^k = ξ(η^k) − η(ξ^k)`.
    pub fn bracket(&self, other: &Self, m: &GeneralizedMetric) -> Result<Self> {
        let comps = (0..self.dim())
            .map(|k| Ok(self.apply(m, &other.0[k])?.sub(&other.apply(m, &self.0[k])?)))
            .collect::<Result<_>>()?;
        Ok(Self(comps))
    }
}

/// `g(a, b) = g_ij a^i b^j`.
pub fn inner(m: &GeneralizedMetric, a: &VectorFieldExpr, b: &VectorFieldExpr) -> FieldExpr {
    let d = m.dim();
    let mut terms = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let g = m.resolved(i, j);
            if g.is_zero() || a.0[i].is_zero() || b.0[j].is_zero() {
                continue;
            }
            terms.push(g.mul(&a.0[i]).mul(&b.0[j]));
        }
    }
    FieldExpr::sum(&terms)
}

/// `D_{∂_i} ξ = (∂_i ξ^k + Γ^k_{ij} ξ^j) ∂_k`.
pub fn covariant_derivative(gamma: &ChristoffelField, xi: &VectorFieldExpr, i: usize) -> Result<VectorFieldExpr> {
    let d = gamma.dim();
    let var = &gamma.metric.coords()[i];
    let comps = (0..d)
        .map(|k| {
            let mut terms = vec![xi.0[k].differentiate(var)?];
            for j in 0..d {
                terms.push(gamma.symbols[k][i][j].mul(&xi.0[j]));
            }
            Ok(FieldExpr::sum(&terms))
        })
        .collect::<Result<_>>()?;
    Ok(VectorFieldExpr(comps))
}

/// `D_ξ η = ξ^i (∂_i η^k + Γ^k_{ij} η^j) ∂_k`.
pub fn covariant_along(gamma: &ChristoffelField, xi: &VectorFieldExpr, eta: &VectorFieldExpr) -> Result<VectorFieldExpr> {
    let d = gamma.dim();
    let mut comps = vec![FieldExpr::zero(); d];
    for i in 0..d {
        if xi.0[i].is_zero() {
            continue;
        }
        let di = covariant_derivative(gamma, eta, i)?;
        for k in 0..d {
            comps[k] = comps[k].add(&xi.0[i].mul(&di.0[k]));
        }
    }
    Ok(VectorFieldExpr(comps))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// Largest absolute residual.
    pub max_residual: f64,
    /// Largest residual divided by its local scale.
    pub max_relative: f64,
    pub worst_point: Vec<f64>,
}

fn fold_residuals(rows: Vec<(f64, f64, Vec<f64>)>) -> ResidualReport {
    let mut rep = ResidualReport {
        max_residual: 0.0,
        max_relative: 0.0,
        worst_point: Vec::new(),
    };
    for (res, scale, p) in rows {
        rep.max_residual = rep.max_residual.max(res);
        let rel = if scale > 0.0 { res / scale } else if res == 0.0 { 0.0 } else { f64::INFINITY };
        if rel > rep.max_relative || rep.worst_point.is_empty() {
            rep.max_relative = rep.max_relative.max(rel);
            rep.worst_point = p;
        }
    }
    rep
}

/// Both sides of the Koszul formula at each point.
///
/// `2 g(D_ξ η, ζ)` against `ξ g(η,ζ) + η g(ζ,ξ) − ζ g(ξ,η) − g(ξ,[η,ζ]) +
/// g(η,[ζ,ξ]) + g(ζ,[ξ,η])`; the local scale is the sum of the magnitudes
/// of all seven terms.
pub fn koszul_residual(
    gamma: &ChristoffelField,
    xi: &VectorFieldExpr,
    eta: &VectorFieldExpr,
    zeta: &VectorFieldExpr,
    points: &[Vec<f64>],
    eps: f64,
) -> Result<ResidualReport> {
    let m = &gamma.metric;
    let lhs = FieldExpr::num(2.0).mul(&inner(m, &covariant_along(gamma, xi, eta)?, zeta));
    let terms = [
        xi.apply(m, &inner(m, eta, zeta))?,
        eta.apply(m, &inner(m, zeta, xi))?,
        zeta.apply(m, &inner(m, xi, eta))?.neg(),
        inner(m, xi, &eta.bracket(zeta, m)?).neg(),
        inner(m, eta, &zeta.bracket(xi, m)?),
        inner(m, zeta, &xi.bracket(eta, m)?),
    ];
    let mut exprs = vec![lhs];
    exprs.extend(terms);
    let tape = Tape::compile(&exprs, m.coords())?;
    let delta = m.delta().at(eps)?;
    let rows = points
        .iter()
        .map(|p| {
            let v = tape.eval_vec(p, eps, &delta)?;
            let rhs: f64 = v[1..].iter().sum();
            let scale: f64 = v.iter().map(|x| x.abs()).sum();
            Ok(((v[0] - rhs).abs(), scale, p.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fold_residuals(rows))
}

/// `|∂_i g_jk − Γ^m_ij g_mk − Γ^m_ik g_jm|`, scaled by `1 + |∂_i g_jk|`.
pub fn compatibility_residual(gamma: &ChristoffelField, points: &[Vec<f64>], eps: f64) -> Result<ResidualReport> {
    let m = &gamma.metric;
    let d = m.dim();
    let dg = metric_partials(m)?;
    let mut exprs = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for k in j..d {
                let mut r = dg[i][j][k].clone();
                for mm in 0..d {
                    r = r
                        .sub(&gamma.symbols[mm][i][j].mul(m.resolved(mm, k)))
                        .sub(&gamma.symbols[mm][i][k].mul(m.resolved(j, mm)));
                }
                exprs.push(r);
                exprs.push(dg[i][j][k].clone());
            }
        }
    }
    let tape = Tape::compile(&exprs, m.coords())?;
    let delta = m.delta().at(eps)?;
    let mut rows = Vec::new();
    for p in points {
        let v = tape.eval_vec(p, eps, &delta)?;
        for pair in v.chunks(2) {
            rows.push((pair[0].abs(), 1.0 + pair[1].abs(), p.clone()));
        }
    }
    Ok(fold_residuals(rows))
}

/// One sample of a curve: parameter, position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Derivative of `series` on a uniform grid of step `h`, fourth order
/// throughout (one-sided stencils at the ends).
pub fn fourth_order_derivative(series: &[f64], h: f64) -> Vec<f64> {
    let n = series.len();
    let f = series;
    (0..n)
        .map(|i| {
            let v = if i >= 2 && i + 2 < n {
                -f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]
            } else if i == 0 {
                -25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]
            } else if i == 1 {
                -3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]
            } else if i == n - 2 {
                3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]
            } else {
                25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]
            };
            v / (12.0 * h)
        })
        .collect()
}

/// Uniform step of a grid, or a config error.
pub(crate) fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 5 {
        return Err(Error::Config(format!("need at least 5 samples, got {}", t.len())));
    }
    let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(h > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::Config("samples must lie on a uniform increasing grid".into()));
    }
    Ok(h)
}

/// Covariant derivative of `xi` along a sampled curve:
/// `dξ^k/dt + Γ^k_{ij} γ'^i ξ^j`.
pub fn along_curve_derivative(
    gamma: &ChristoffelField,
    curve: &[CurveSample],
    xi: &[Vec<f64>],
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    let d = gamma.dim();
    if xi.len() != curve.len() {
        return Err(Error::Config("one field sample per curve sample required".into()));
    }
    let t: Vec<f64> = curve.iter().map(|c| c.t).collect();
    let h = uniform_step(&t)?;
    let derivs: Vec<Vec<f64>> = (0..d)
        .map(|k| fourth_order_derivative(&xi.iter().map(|v| v[k]).collect::<Vec<_>>(), h))
        .collect();
    let delta = gamma.metric.delta().at(eps)?;
    curve
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let g = gamma.eval_with(&c.point, eps, &delta)?;
            Ok((0..d)
                .map(|k| {
                    let mut s = derivs[k][n];
                    for i in 0..d {
                        for j in 0..d {
                            s += g[(k * d + i) * d + j] * c.velocity[i] * xi[n][j];
                        }
                    }
                    s
                })
                .collect())
        })
        .collect()
}
