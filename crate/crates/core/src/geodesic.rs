//! Geodesics of each member of a metric net, and the reduced impulsive
//! pp-wave system used as an independent cross-check.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::EpsilonGrid;
use crate::error::{Error, Result};
use crate::fieldexpr::{FieldExpr, ScaledDelta, Tape};
use crate::levicivita::{fourth_order_derivative, ChristoffelField};
use crate::metric::GeneralizedMetric;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicInit {
    pub t0: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicOptions {
    /// Absolute and relative local error tolerance.
    pub tol: f64,
    /// Points on the uniform output grid, endpoints included.
    pub samples: usize,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            samples: 401,
            max_steps: 5_000_000,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest |finite-difference derivative − right-hand side| on the output grid.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub eps: f64,
    pub t: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn end_position(&self) -> &[f64] {
        self.positions.last().expect("non-empty trajectory")
    }

    /// Largest change of `g(γ', γ')` along the trajectory, relative to the
    /// largest summed magnitude `Σ |g_ij v^i v^j|` of its terms. Without
    /// cancellation between terms that scale is just `|g(γ', γ')|`.
    pub fn norm_drift(&self, metric: &GeneralizedMetric) -> Result<f64> {
        let delta = metric.delta().at(self.eps)?;
        let mut first = None;
        let (mut drift, mut scale): (f64, f64) = (0.0, 0.0);
        for (p, v) in self.positions.iter().zip(&self.velocities) {
            let g = metric.matrix_with(p, self.eps, &delta)?;
            let (mut s, mut mag) = (0.0, 0.0);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    let t = g[(i, j)] * v[i] * v[j];
                    s += t;
                    mag += t.abs();
                }
            }
            let n0 = *first.get_or_insert(s);
            drift = drift.max((s - n0).abs());
            scale = scale.max(mag);
        }
        Ok(if drift == 0.0 { 0.0 } else { drift / scale })
    }

    /// `g(γ', γ')` at every sample.
    pub fn norms(&self, metric: &GeneralizedMetric) -> Result<Vec<f64>> {
        let delta = metric.delta().at(self.eps)?;
        self.positions
            .iter()
            .zip(&self.velocities)
            .map(|(p, v)| {
                let g = metric.matrix_with(p, self.eps, &delta)?;
                let mut s = 0.0;
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        s += g[(i, j)] * v[i] * v[j];
                    }
                }
                Ok(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicFamily {
    pub t: Vec<f64>,
    pub members: Vec<Trajectory>,
}

impl GeodesicFamily {
    pub fn eps_values(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.eps).collect()
    }
}

// Local error target as a fraction of the requested tolerance, so that
// accumulated (global) error stays within small multiples of it.
const LOCAL_FRACTION: f64 = 0.02;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense output
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate `y' = rhs(t, y)` from `t0` to `t_end` and sample on `grid`.
///
/// `cap(t, y)` bounds the next step; it is how narrow features such as
/// delta-net windows are forced to be resolved.
pub fn integrate_system<F, G>(
    mut rhs: F,
    mut cap: G,
    t0: f64,
    y0: &[f64],
    grid: &[f64],
    opts: &GeodesicOptions,
) -> Result<(Vec<Vec<f64>>, IntegratorStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(f64, &[f64]) -> f64,
{
    let n = y0.len();
    let t_end = *grid.last().expect("output grid");
    if !(t_end > t0) {
        return Err(Error::Config(format!("t_end {t_end} must exceed t0 {t0}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    while next < grid.len() && grid[next] <= t0 {
        out.push(y0.to_vec());
        next += 1;
    }

    let mut stats = IntegratorStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    rhs(t, &y, &mut k[0])?;
    let mut h = (0.01 * (t_end - t0)).min(cap(t, &y));
    let mut fac_prev_rejected = false;

    while t < t_end {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness { t, h });
        }
        h = h.min(cap(t, &y)).min(t_end - t);
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h < opts.min_step && !last {
            return Err(Error::Stiffness { t, h });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (_, tail) = k.split_at_mut(s);
            rhs(t + C[s] * h, &ytmp, &mut tail[0])?;
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        if ynew.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { t });
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * k[s][i];
            }
            let tol = LOCAL_FRACTION * opts.tol;
            let sc = tol + tol * y[i].abs().max(ynew[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        if err <= 1.0 {
            // dense output on [t, t + h]
            let t_new = if last { t_end } else { t + h };
            while next < grid.len() && grid[next] <= t_new {
                let theta = (grid[next] - t) / h;
                let th1 = 1.0 - theta;
                let row: Vec<f64> = (0..n)
                    .map(|i| {
                        let ydiff = ynew[i] - y[i];
                        let bspl = h * k[0][i] - ydiff;
                        let r4 = ydiff - h * k[6][i] - bspl;
                        let mut r5 = 0.0;
                        for (s, ds) in D.iter().enumerate() {
                            r5 += ds * k[s][i];
                        }
                        y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * h * r5)))
                    })
                    .collect();
                out.push(row);
                next += 1;
            }
            t = t_new;
            y.copy_from_slice(&ynew);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            stats.steps += 1;
            let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if fac_prev_rejected {
                fac = fac.min(1.0);
            }
            fac_prev_rejected = false;
            h *= fac;
        } else {
            stats.rejected += 1;
            fac_prev_rejected = true;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    while out.len() < grid.len() {
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Step cap for windows where delta-net arguments are small.
///
/// Inside `|a| <= r` the step is at most `r/10` (and `r / (10 |ȧ|)` when
/// the argument moves faster than unit speed). Outside, a step may not carry
/// an approaching argument past the window edge.
fn window_cap(args: &[(f64, f64)], r: f64) -> f64 {
    let mut h = f64::INFINITY;
    for &(a, rate) in args {
        let speed = rate.abs();
        let inner = r / (10.0 * speed.max(1.0));
        if a.abs() <= r {
            h = h.min(inner);
        } else if a * rate < 0.0 {
            h = h.min(((a.abs() - r) / speed).max(inner));
        }
    }
    h
}

/// Uniform grid of `samples` points on `[t0, t_end]`.
pub fn uniform_grid(t0: f64, t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .map(|i| if i == n - 1 { t_end } else { t0 + (t_end - t0) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Delta-net arguments appearing in the connection, with their gradients.
struct Windows {
    tape: Option<Tape>,
    count: usize,
    dim: usize,
}

impl Windows {
    fn new(gamma: &ChristoffelField) -> Result<Self> {
        let m = gamma.metric();
        let d = m.dim();
        let mut args: Vec<FieldExpr> = Vec::new();
        for row in gamma.symbols() {
            for col in row {
                for e in col {
                    for a in e.delta_args() {
                        if !args.contains(&a) {
                            args.push(a);
                        }
                    }
                }
            }
        }
        if args.is_empty() {
            return Ok(Self { tape: None, count: 0, dim: d });
        }
        let mut exprs = args.clone();
        for a in &args {
            for c in m.coords() {
                exprs.push(a.differentiate(c)?);
            }
        }
        Ok(Self {
            tape: Some(Tape::compile(&exprs, m.coords())?),
            count: args.len(),
            dim: d,
        })
    }

    fn cap(&self, y: &[f64], eps: f64, delta: &ScaledDelta) -> f64 {
        let Some(tape) = &self.tape else { return f64::INFINITY };
        let d = self.dim;
        let Ok(v) = tape.eval_vec(&y[..d], eps, delta) else { return f64::INFINITY };
        let pairs: Vec<(f64, f64)> = (0..self.count)
            .map(|k| {
                let grad = &v[self.count + k * d..self.count + (k + 1) * d];
                let rate: f64 = grad.iter().zip(&y[d..]).map(|(g, v)| g * v).sum();
                (v[k], rate)
            })
            .collect();
        window_cap(&pairs, delta.support_radius())
    }
}

/// `(velocity, -Γ^k_ij v^i v^j)`.
pub fn geodesic_rhs(gamma: &ChristoffelField, position: &[f64], velocity: &[f64], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let delta = gamma.metric().delta().at(eps)?;
    let mut acc = vec![0.0; gamma.dim()];
    gamma.acceleration(position, velocity, eps, &delta, &mut acc)?;
    Ok((velocity.to_vec(), acc))
}

fn check_init(gamma: &ChristoffelField, init: &GeodesicInit, t_end: f64, eps: f64) -> Result<()> {
    let d = gamma.dim();
    if init.position.len() != d || init.velocity.len() != d {
        return Err(Error::Config(format!("initial data must have {d} components")));
    }
    if init.position.iter().chain(&init.velocity).chain([&init.t0]).any(|v| !v.is_finite()) {
        return Err(Error::Config("initial data must be finite".into()));
    }
    if !(t_end > init.t0) {
        return Err(Error::Config(format!("t_end {t_end} must exceed t0 {}", init.t0)));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

fn residual(t: &[f64], pos: &[Vec<f64>], vel: &[Vec<f64>], acc: &[Vec<f64>]) -> f64 {
    if t.len() < 5 {
        return 0.0;
    }
    let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let d = pos[0].len();
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let x: Vec<f64> = pos.iter().map(|p| p[k]).collect();
        let v: Vec<f64> = vel.iter().map(|p| p[k]).collect();
        let dx = fourth_order_derivative(&x, h);
        let dv = fourth_order_derivative(&v, h);
        for n in 0..t.len() {
            worst = worst.max((dx[n] - v[n]).abs()).max((dv[n] - acc[n][k]).abs());
        }
    }
    worst
}

/// One member of the geodesic net.
pub fn integrate_geodesic(
    gamma: &ChristoffelField,
    init: &GeodesicInit,
    t_end: f64,
    eps: f64,
    opts: &GeodesicOptions,
) -> Result<Trajectory> {
    check_init(gamma, init, t_end, eps)?;
    let d = gamma.dim();
    let delta = gamma.metric().delta().at(eps)?;
    let windows = Windows::new(gamma)?;
    let grid = uniform_grid(init.t0, t_end, opts.samples);
    let mut y0 = init.position.clone();
    y0.extend(&init.velocity);
    let (states, mut stats) = integrate_system(
        |_, y, dy| {
            dy[..d].copy_from_slice(&y[d..]);
            gamma.acceleration(&y[..d], &y[d..], eps, &delta, &mut dy[d..])
        },
        |_, y| windows.cap(y, eps, &delta),
        init.t0,
        &y0,
        &grid,
        opts,
    )?;
    let positions: Vec<Vec<f64>> = states.iter().map(|s| s[..d].to_vec()).collect();
    let velocities: Vec<Vec<f64>> = states.iter().map(|s| s[d..].to_vec()).collect();
    let acc = positions
        .iter()
        .zip(&velocities)
        .map(|(p, v)| {
            let mut a = vec![0.0; d];
            gamma.acceleration(p, v, eps, &delta, &mut a)?;
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    stats.max_residual = residual(&grid, &positions, &velocities, &acc);
    Ok(Trajectory {
        eps,
        t: grid,
        positions,
        velocities,
        stats,
    })
}

/// Integrate every member of the net on a shared output grid.
pub fn solve_family(
    gamma: &ChristoffelField,
    init: &GeodesicInit,
    t_end: f64,
    grid: &EpsilonGrid,
    opts: &GeodesicOptions,
) -> Result<GeodesicFamily> {
    let members = grid
        .values()
        .par_iter()
        .map(|&eps| {
            integrate_geodesic(gamma, init, t_end, eps, opts).map_err(|e| Error::Member {
                eps,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeodesicFamily {
        t: uniform_grid(init.t0, t_end, opts.samples),
        members,
    })
}

/// The impulsive pp-wave geodesic system with `u` as affine parameter:
/// `ẍ^i = ½ ∂_i f δ(u)`, `v̈ = f δ'(u) + 2 ∂_i f ẋ^i δ(u)`.
#[derive(Debug, Clone)]
pub struct PpWaveReduced {
    f: FieldExpr,
    tape: Tape,
}

/// Reduced state `(v, v̇, x, ẋ, y, ẏ)`.
pub type ReducedState = [f64; 6];

impl PpWaveReduced {
    pub fn new(f: &FieldExpr) -> Result<Self> {
        if let Some(v) = f.free_vars().into_iter().find(|v| v != "x" && v != "y") {
            return Err(Error::Validation(format!("profile may only depend on x and y, found '{v}'")));
        }
        if f.contains_eps() || f.contains_delta() || f.contains_reference_only() {
            return Err(Error::Validation("profile must be a smooth function of x and y".into()));
        }
        let exprs = [f.clone(), f.differentiate("x")?, f.differentiate("y")?];
        Ok(Self {
            f: f.clone(),
            tape: Tape::compile(&exprs, &["x".to_string(), "y".to_string()])?,
        })
    }

    pub fn profile(&self) -> &FieldExpr {
        &self.f
    }

    /// Derivative of the reduced state at parameter `u`.
    pub fn rhs(&self, s: &ReducedState, u: f64, eps: f64, delta: &ScaledDelta) -> Result<ReducedState> {
        let [_, vd, x, xd, y, yd] = *s;
        let fv = self.tape.eval_vec(&[x, y], eps, delta)?;
        let (f, fx, fy) = (fv[0], fv[1], fv[2]);
        let d0 = delta.value(0, u);
        let d1 = delta.value(1, u);
        Ok([
            vd,
            f * d1 + 2.0 * (fx * xd + fy * yd) * d0,
            xd,
            0.5 * fx * d0,
            yd,
            0.5 * fy * d0,
        ])
    }

    /// Integrate from `u0` to `u_end`; output sampled like [`integrate_geodesic`].
    pub fn integrate(
        &self,
        init: &ReducedState,
        u0: f64,
        u_end: f64,
        eps: f64,
        net: &crate::fieldexpr::DeltaNet,
        opts: &GeodesicOptions,
    ) -> Result<(Vec<f64>, Vec<ReducedState>, IntegratorStats)> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
        }
        let delta = net.at(eps)?;
        let r = delta.support_radius();
        let grid = uniform_grid(u0, u_end, opts.samples);
        let (states, stats) = integrate_system(
            |u, y, dy| {
                let s: ReducedState = y.try_into().expect("six components");
                dy.copy_from_slice(&self.rhs(&s, u, eps, &delta)?);
                Ok(())
            },
            |u, _| window_cap(&[(u, 1.0)], r),
            u0,
            init,
            &grid,
            opts,
        )?;
        let states = states.into_iter().map(|s| s.try_into().expect("six components")).collect();
        Ok((grid, states, stats))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fieldexpr::{parse, DeltaNet};
    use crate::metric::MetricSpec;

    fn metric(coords: &[&str], comps: &[(&str, &str)]) -> GeneralizedMetric {
        MetricSpec {
            label: "test".into(),
            dim: coords.len(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            components: comps.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            parameters: BTreeMap::new(),
            delta: Default::default(),
        }
        .build()
        .unwrap()
    }

    fn ppwave(f: &str) -> ChristoffelField {
        let m = metric(
            &["u", "v", "x", "y"],
            &[("uu", &format!("({f})*delta(u)")), ("uv", "-1/2"), ("xx", "1"), ("yy", "1")],
        );
        ChristoffelField::new(&m).unwrap()
    }

    fn pp_init(x0: f64, y0: f64) -> GeodesicInit {
        GeodesicInit {
            t0: -1.0,
            position: vec![-1.0, 0.0, x0, y0],
            velocity: vec![1.0, 0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn flat_straight_line() {
        let m = metric(&["x", "y"], &[("xx", "1"), ("yy", "1")]);
        let g = ChristoffelField::new(&m).unwrap();
        let init = GeodesicInit { t0: 0.0, position: vec![0.0, 0.0], velocity: vec![1.0, 0.0] };
        let tr = integrate_geodesic(&g, &init, 3.0, 0.5, &GeodesicOptions::default()).unwrap();
        for (t, p) in tr.t.iter().zip(&tr.positions) {
            assert!((p[0] - t).abs() < 1e-10 && p[1].abs() < 1e-10);
        }
        let (v, a) = geodesic_rhs(&g, &[0.3, 0.1], &[2.0, -1.0], 0.5).unwrap();
        assert_eq!(v, vec![2.0, -1.0]);
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn sphere_equator_and_residual() {
        let m = metric(&["theta", "phi"], &[("theta,theta", "1"), ("phi,phi", "sin(theta)^2")]);
        let g = ChristoffelField::new(&m).unwrap();
        let (_, a) = geodesic_rhs(&g, &[std::f64::consts::FRAC_PI_2, 0.0], &[0.0, 1.0], 0.5).unwrap();
        assert!(a[0].abs() < 1e-16);

        // tilted great circle: residual and norm checks
        let init = GeodesicInit { t0: 0.0, position: vec![1.2, 0.0], velocity: vec![0.3, 0.8] };
        let opts = GeodesicOptions { samples: 301, ..Default::default() };
        let tr = integrate_geodesic(&g, &init, 3.0, 0.5, &opts).unwrap();
        assert!(tr.stats.max_residual <= 100.0 * opts.tol, "{}", tr.stats.max_residual);
        let n = tr.norms(&m).unwrap();
        for v in &n {
            assert!((v - n[0]).abs() <= 10.0 * opts.tol * n[0].abs());
        }
    }

    #[test]
    fn ppwave_rhs_examples() {
        let g = ppwave("x^2 - y^2");
        let eps = 0.1;
        let d = DeltaNet::bump().at(eps).unwrap();
        let (_, a) = geodesic_rhs(&g, &[0.02, 0.0, 0.7, 1.0], &[1.0, 0.0, 0.0, 0.0], eps).unwrap();
        assert!((a[2] - 0.5 * 2.0 * 0.7 * d.value(0, 0.02)).abs() < 1e-12);

        let red = PpWaveReduced::new(&parse("x^2 - y^2").unwrap()).unwrap();
        let out = red.rhs(&[0.0, 0.0, 1.0, 0.0, 1.0, 0.0], 0.0, eps, &d).unwrap();
        let d0 = d.value(0, 0.0);
        assert!((out[3] - d0).abs() < 1e-12);
        assert!((out[5] + d0).abs() < 1e-12);
        assert_eq!(out[1], 0.0);
        let out = red.rhs(&[0.0, 0.3, 1.0, 0.2, 1.0, 0.1], 0.5, eps, &d).unwrap();
        assert_eq!(&out[1..2], &[0.0]);
        assert_eq!(out[3], 0.0);
        assert_eq!(out[5], 0.0);
        assert!(PpWaveReduced::new(&parse("x*u").unwrap()).is_err());
    }

    #[test]
    fn ppwave_endpoint_approaches_closed_form() {
        let g = ppwave("x^2 - y^2");
        let opts = GeodesicOptions::default();
        let mut errs = Vec::new();
        for eps in [0.05, 0.025] {
            let tr = integrate_geodesic(&g, &pp_init(1.0, 1.0), 1.0, eps, &opts).unwrap();
            let p = tr.end_position();
            assert!((p[0] - 1.0).abs() < 1e-12);
            let e = (p[2] - 2.0).abs().max(p[3].abs()).max((p[1] - 2.0).abs());
            assert!(e < 5.0 * eps, "{eps}: {p:?}");
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        assert!((1.5..3.0).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn step_cap_resolves_impulse() {
        let g = ppwave("x^2 - y^2");
        let tr = integrate_geodesic(&g, &pp_init(1.0, 1.0), 1.0, 0.001, &GeodesicOptions::default()).unwrap();
        // the impulse is 0.002 wide, far below the output spacing; it must still be felt
        assert!((tr.end_position()[2] - 2.0).abs() < 0.05);
        assert!(tr.stats.steps >= 20);
    }

    #[test]
    fn reduced_and_full_agree() {
        let g = ppwave("x^2 - y^2");
        let red = PpWaveReduced::new(&parse("x^2 - y^2").unwrap()).unwrap();
        let opts = GeodesicOptions::default();
        for (x0, y0) in [(1.0, 1.0), (2.0, 1.0)] {
            for eps in [0.2, 0.05, 0.0125] {
                let full = integrate_geodesic(&g, &pp_init(x0, y0), 1.0, eps, &opts).unwrap();
                let (_, states, _) = red
                    .integrate(&[0.0, 0.0, x0, 0.0, y0, 0.0], -1.0, 1.0, eps, &DeltaNet::bump(), &opts)
                    .unwrap();
                let mut worst: f64 = 0.0;
                for ((p, v), s) in full.positions.iter().zip(&full.velocities).zip(&states) {
                    let pairs = [(p[1], s[0]), (v[1], s[1]), (p[2], s[2]), (v[2], s[3]), (p[3], s[4]), (v[3], s[5])];
                    for (a, b) in pairs {
                        worst = worst.max((a - b).abs());
                    }
                }
                assert!(worst <= 1e-8, "{x0},{y0} eps {eps}: {worst}");
            }
        }
    }

    #[test]
    fn norm_conservation_through_impulse() {
        let g = ppwave("x^2 - y^2");
        let m = g.metric().clone();
        let opts = GeodesicOptions::default();
        let init = GeodesicInit { t0: -1.0, position: vec![-1.0, 0.0, 1.0, 0.5], velocity: vec![1.0, 1.0, 0.2, -0.1] };
        for eps in [0.2, 0.05, 0.0125] {
            let tr = integrate_geodesic(&g, &init, 1.0, eps, &opts).unwrap();
            let n = tr.norms(&m).unwrap();
            let drift = n.iter().map(|v| (v - n[0]).abs()).fold(0.0, f64::max) / n[0].abs();
            assert!(drift <= 10.0 * opts.tol, "eps {eps}: drift {drift}");
        }
    }

    #[test]
    fn affine_reparametrization() {
        let g = ppwave("x^2 - y^2");
        let opts = GeodesicOptions { samples: 201, ..Default::default() };
        let base = integrate_geodesic(&g, &pp_init(1.0, 1.0), 1.0, 0.1, &opts).unwrap();
        let mut fast_init = pp_init(1.0, 1.0);
        fast_init.velocity.iter_mut().for_each(|v| *v *= 2.0);
        // t in [-1, 0] with speed 2 covers u in [-1, 1]
        let fast = integrate_geodesic(&g, &fast_init, 0.0, 0.1, &opts).unwrap();
        for (a, b) in base.positions.iter().zip(&fast.positions) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn family_is_shared_and_parallel() {
        let g = ppwave("x^2 - y^2");
        let grid = EpsilonGrid::custom(vec![0.2, 0.1, 0.05, 0.025]).unwrap();
        let fam = solve_family(&g, &pp_init(1.0, 1.0), 1.0, &grid, &GeodesicOptions::default()).unwrap();
        assert_eq!(fam.members.len(), 4);
        let errs: Vec<f64> = fam.members.iter().map(|m| (m.end_position()[2] - 2.0).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        for m in &fam.members {
            assert_eq!(m.t, fam.t);
        }

        let s = metric(&["theta", "phi"], &[("theta,theta", "1"), ("phi,phi", "sin(theta)^2")]);
        let gs = ChristoffelField::new(&s).unwrap();
        let init = GeodesicInit { t0: 0.0, position: vec![1.0, 0.0], velocity: vec![0.5, 0.5] };
        let fam = solve_family(&gs, &init, 2.0, &grid, &GeodesicOptions::default()).unwrap();
        for m in &fam.members[1..] {
            assert_eq!(m.positions, fam.members[0].positions);
        }
    }

    #[test]
    fn member_failure_carries_eps() {
        // geodesic of 1/x^2 metric blows through the singular point
        let m = metric(&["x"], &[("xx", "1/(x - eps)")]);
        let g = ChristoffelField::new(&m).unwrap();
        let init = GeodesicInit { t0: 0.0, position: vec![1.0], velocity: vec![-1.0] };
        let grid = EpsilonGrid::custom(vec![0.4, 0.2, 0.1, 0.05]).unwrap();
        let err = solve_family(&g, &init, 5.0, &grid, &GeodesicOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Member { .. }), "{err:?}");
    }

    #[test]
    fn bad_init_rejected() {
        let g = ppwave("x^2");
        let init = GeodesicInit { t0: 0.0, position: vec![0.0; 3], velocity: vec![0.0; 4] };
        assert!(integrate_geodesic(&g, &init, 1.0, 0.1, &GeodesicOptions::default()).is_err());
        assert!(integrate_geodesic(&g, &pp_init(1.0, 1.0), -2.0, 0.1, &GeodesicOptions::default()).is_err());
    }
}
