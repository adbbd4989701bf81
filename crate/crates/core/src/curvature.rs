//! Riemann, Ricci, scalar and Einstein curvature as exact expressions.
//!
//! Sign convention: `R_{abc}^d = ∂_a Γ^d_{bc} − ∂_b Γ^d_{ac} + Γ^d_{ae} Γ^e_{bc}
//! − Γ^d_{be} Γ^e_{ac}` with `R_{ab} = R_{cab}^c`. Under this pairing the unit
//! 2-sphere has Ricci = g and scalar curvature +2.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldexpr::{FieldExpr, Tape};
use crate::levicivita::ChristoffelField;
use crate::metric::GeneralizedMetric;

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    gamma: ChristoffelField,
    /// `riemann[a][b][c][d] = R_{abc}^d`.
    riemann: Vec<Vec<Vec<Vec<FieldExpr>>>>,
    ricci: Vec<Vec<FieldExpr>>,
    scalar: FieldExpr,
    einstein: Vec<Vec<FieldExpr>>,
    tape: Tape,
}

/// Numerical values of every curvature field at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureValues {
    pub point: Vec<f64>,
    pub eps: f64,
    /// `R_{abc}^d` flattened as `[a][b][c][d]`.
    pub riemann: Vec<f64>,
    pub ricci: Vec<Vec<f64>>,
    pub scalar: f64,
    pub einstein: Vec<Vec<f64>>,
}

impl CurvatureValues {
    pub fn riemann_at(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.ricci.len();
        self.riemann[((a * n + b) * n + c) * n + d]
    }
}

fn symmetric_from(d: usize, mut f: impl FnMut(usize, usize) -> Result<FieldExpr>) -> Result<Vec<Vec<FieldExpr>>> {
    let mut out: Vec<Vec<FieldExpr>> = vec![Vec::with_capacity(d); d];
    for a in 0..d {
        for b in 0..d {
            let e = if b < a { out[b][a].clone() } else { f(a, b)? };
            out[a].push(e);
        }
    }
    Ok(out)
}

impl CurvatureBundle {
    pub fn new(gamma: &ChristoffelField) -> Result<Self> {
        let m = gamma.metric();
        let d = m.dim();
        let coords = m.coords();
        let g = gamma.symbols();
        // ∂_a Γ^k_{ij}
        let mut dgamma = vec![vec![vec![vec![FieldExpr::zero(); d]; d]; d]; d];
        for a in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in i..d {
                        let e = g[k][i][j].differentiate(&coords[a])?;
                        dgamma[a][k][i][j] = e.clone();
                        dgamma[a][k][j][i] = e;
                    }
                }
            }
        }
        let zero = FieldExpr::zero();
        let mut riemann = vec![vec![vec![vec![zero.clone(); d]; d]; d]; d];
        for a in 0..d {
            for b in (a + 1)..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mut terms = vec![dgamma[a][dd][b][c].clone(), dgamma[b][dd][a][c].neg()];
                        for e in 0..d {
                            terms.push(g[dd][a][e].mul(&g[e][b][c]));
                            terms.push(g[dd][b][e].mul(&g[e][a][c]).neg());
                        }
                        let r = FieldExpr::sum(&terms);
                        riemann[b][a][c][dd] = r.neg();
                        riemann[a][b][c][dd] = r;
                    }
                }
            }
        }
        let ricci = symmetric_from(d, |a, b| Ok(FieldExpr::sum((0..d).map(|c| &riemann[c][a][b][c]))))?;
        let (_, inv) = m.symbolic_inverse();
        let mut terms = Vec::new();
        for a in 0..d {
            for b in 0..d {
                terms.push(inv[a][b].mul(&ricci[a][b]));
            }
        }
        let scalar = FieldExpr::sum(&terms);
        let half_r = FieldExpr::num(0.5).mul(&scalar);
        let einstein = symmetric_from(d, |a, b| Ok(ricci[a][b].sub(&half_r.mul(m.resolved(a, b)))))?;

        let mut outputs = Vec::new();
        for a in 0..d {
            for b in (a + 1)..d {
                for c in 0..d {
                    outputs.extend(riemann[a][b][c].iter().cloned());
                }
            }
        }
        for a in 0..d {
            outputs.extend(ricci[a][a..].iter().cloned());
        }
        outputs.push(scalar.clone());
        for a in 0..d {
            outputs.extend(einstein[a][a..].iter().cloned());
        }
        let tape = Tape::compile(&outputs, coords)?;
        Ok(Self {
            gamma: gamma.clone(),
            riemann,
            ricci,
            scalar,
            einstein,
            tape,
        })
    }

    pub fn metric(&self) -> &GeneralizedMetric {
        self.gamma.metric()
    }

    pub fn christoffel(&self) -> &ChristoffelField {
        &self.gamma
    }

    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize) -> &FieldExpr {
        &self.riemann[a][b][c][d]
    }

    pub fn ricci(&self, a: usize, b: usize) -> &FieldExpr {
        &self.ricci[a][b]
    }

    pub fn scalar(&self) -> &FieldExpr {
        &self.scalar
    }

    pub fn einstein(&self, a: usize, b: usize) -> &FieldExpr {
        &self.einstein[a][b]
    }

    /// True when every Riemann component folded to the literal zero.
    pub fn is_structurally_flat(&self) -> bool {
        self.riemann.iter().flatten().flatten().flatten().all(FieldExpr::is_zero)
    }

    pub fn evaluate(&self, point: &[f64], eps: f64) -> Result<CurvatureValues> {
        let m = self.metric();
        let d = m.dim();
        if point.len() != d {
            return Err(Error::Config(format!("point needs {d} coordinates")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
        }
        let v = self.tape.eval_vec(point, eps, &m.delta().at(eps)?)?;
        let mut it = v.into_iter();
        let mut riemann = vec![0.0; d * d * d * d];
        let idx = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
        for a in 0..d {
            for b in (a + 1)..d {
                for c in 0..d {
                    for e in 0..d {
                        let x = it.next().unwrap();
                        riemann[idx(a, b, c, e)] = x;
                        riemann[idx(b, a, c, e)] = -x;
                    }
                }
            }
        }
        let mut ricci = vec![vec![0.0; d]; d];
        for a in 0..d {
            for b in a..d {
                let x = it.next().unwrap();
                ricci[a][b] = x;
                ricci[b][a] = x;
            }
        }
        let scalar = it.next().unwrap();
        let mut einstein = vec![vec![0.0; d]; d];
        for a in 0..d {
            for b in a..d {
                let x = it.next().unwrap();
                einstein[a][b] = x;
                einstein[b][a] = x;
            }
        }
        Ok(CurvatureValues {
            point: point.to_vec(),
            eps,
            riemann,
            ricci,
            scalar,
            einstein,
        })
    }

    /// Divergence `∇^a G_{ab}` as per-`b` lists of terms whose sum is the
    /// divergence. Fails when it would need a third delta derivative.
    pub fn einstein_divergence_terms(&self) -> Result<Vec<Vec<FieldExpr>>> {
        let m = self.metric();
        let d = m.dim();
        let (_, inv) = m.symbolic_inverse();
        let g = self.gamma.symbols();
        let coords = m.coords();
        let mut dg: Vec<Vec<Vec<FieldExpr>>> = vec![vec![Vec::with_capacity(d); d]; d];
        for c in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let e = if b < a { dg[c][b][a].clone() } else { self.einstein[a][b].differentiate(&coords[c])? };
                    dg[c][a].push(e);
                }
            }
        }
        let mut out = Vec::with_capacity(d);
        for b in 0..d {
            let mut terms = Vec::new();
            for a in 0..d {
                for c in 0..d {
                    let ginv = &inv[a][c];
                    if ginv.is_zero() {
                        continue;
                    }
                    terms.push(ginv.mul(&dg[c][a][b]));
                    for e in 0..d {
                        terms.push(ginv.mul(&g[e][c][a].mul(&self.einstein[e][b])).neg());
                        terms.push(ginv.mul(&g[e][c][b].mul(&self.einstein[a][e])).neg());
                    }
                }
            }
            out.push(terms.into_iter().filter(|t| !t.is_zero()).collect());
        }
        Ok(out)
    }
}

/// Largest violation of each classical curvature identity, relative to the
/// local curvature scale `max |R_{abcd}|`. The contracted Bianchi identity is
/// relative to the larger of that scale and the summed magnitude of its terms.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CurvatureDiagnostics {
    pub antisymmetry_first_pair: f64,
    pub antisymmetry_last_pair: f64,
    pub pair_symmetry: f64,
    pub first_bianchi: f64,
    /// `None` when the divergence needs a third delta derivative.
    pub contracted_bianchi: Option<f64>,
    pub max_curvature_scale: f64,
    pub notes: Vec<String>,
}

impl CurvatureDiagnostics {
    pub fn worst(&self) -> f64 {
        [
            self.antisymmetry_first_pair,
            self.antisymmetry_last_pair,
            self.pair_symmetry,
            self.first_bianchi,
            self.contracted_bianchi.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn relative(violation: f64, scale: f64) -> f64 {
    if violation == 0.0 {
        0.0
    } else if scale > 0.0 {
        violation / scale
    } else {
        f64::INFINITY
    }
}

/// Evaluate all five identities at each point.
pub fn curvature_diagnostics(bundle: &CurvatureBundle, points: &[Vec<f64>], eps: f64) -> Result<CurvatureDiagnostics> {
    let m = bundle.metric();
    let d = m.dim();
    let mut rep = CurvatureDiagnostics::default();
    let divergence = match bundle.einstein_divergence_terms() {
        Ok(terms) => {
            let lens: Vec<usize> = terms.iter().map(Vec::len).collect();
            let flat: Vec<FieldExpr> = terms.into_iter().flatten().collect();
            Some((Tape::compile(&flat, m.coords())?, lens))
        }
        Err(Error::DeltaOrder { requested }) => {
            rep.notes.push(format!(
                "contracted Bianchi identity skipped: divergence needs delta derivative of order {requested}"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let delta = m.delta().at(eps)?;
    let mut bianchi2: f64 = 0.0;
    for p in points {
        let vals = bundle.evaluate(p, eps)?;
        let g: DMatrix<f64> = m.matrix_with(p, eps, &delta)?;
        // R_{abcd} = R_{abc}^e g_{ed}
        let mut low = vec![0.0; d * d * d * d];
        let idx = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        low[idx(a, b, c, dd)] = (0..d).map(|e| vals.riemann_at(a, b, c, e) * g[(e, dd)]).sum();
                    }
                }
            }
        }
        let scale = low.iter().map(|x| x.abs()).fold(0.0, f64::max);
        rep.max_curvature_scale = rep.max_curvature_scale.max(scale);
        let (mut s1, mut s2, mut s3, mut s4): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let r = low[idx(a, b, c, dd)];
                        s1 = s1.max((r + low[idx(b, a, c, dd)]).abs());
                        s2 = s2.max((r + low[idx(a, b, dd, c)]).abs());
                        s3 = s3.max((r - low[idx(c, dd, a, b)]).abs());
                        s4 = s4.max((r + low[idx(b, c, a, dd)] + low[idx(c, a, b, dd)]).abs());
                    }
                }
            }
        }
        rep.antisymmetry_first_pair = rep.antisymmetry_first_pair.max(relative(s1, scale));
        rep.antisymmetry_last_pair = rep.antisymmetry_last_pair.max(relative(s2, scale));
        rep.pair_symmetry = rep.pair_symmetry.max(relative(s3, scale));
        rep.first_bianchi = rep.first_bianchi.max(relative(s4, scale));
        if let Some((tape, lens)) = &divergence {
            let v = tape.eval_vec(p, eps, &delta)?;
            let mut start = 0;
            for &n in lens {
                let chunk = &v[start..start + n];
                start += n;
                let sum: f64 = chunk.iter().sum();
                let mag: f64 = chunk.iter().map(|x| x.abs()).sum();
                bianchi2 = bianchi2.max(relative(sum.abs(), mag.max(scale)));
            }
        }
    }
    if divergence.is_some() {
        rep.contracted_bianchi = Some(bianchi2);
    }
    Ok(rep)
}
