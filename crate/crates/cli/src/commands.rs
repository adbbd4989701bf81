//! One function per subcommand. Each returns its artifacts; nothing here
//! touches the filesystem except reading a family CSV.

use std::collections::BTreeMap;
use std::sync::Arc;

use gengeom::asymptotics::{estimate_growth_order, is_strictly_nonzero, EpsilonGrid, NetSource, ScalarNet};
use gengeom::curvature::{curvature_diagnostics, CurvatureBundle};
use gengeom::fieldexpr::{evaluate, parse, Bindings, DeltaNet, FieldExpr};
use gengeom::geodesic::{solve_family, GeodesicOptions};
use gengeom::levicivita::ChristoffelField;
use gengeom::scenario::{self, Scenario};
use gengeom::shadow::{estimate_shadow, geodesic_shadow, FamilyTable, ShadowOptions};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::flags;
use crate::output::{num, Artifacts, Csv};
use crate::settings::Settings;

fn summary_text(art: &mut Artifacts) {
    if let Some(b) = art.get("summary.json") {
        art.stdout = String::from_utf8_lossy(b).into_owned();
    }
}

pub fn list_scenarios() -> Artifacts {
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        dim: usize,
        coords: &'a [String],
        notes: &'a [String],
    }
    let all = scenario::registry();
    let rows: Vec<Row> = all
        .iter()
        .map(|s| Row {
            name: &s.name,
            dim: s.metric.dim,
            coords: &s.metric.coords,
            notes: &s.notes,
        })
        .collect();
    let mut art = Artifacts::default();
    let mut csv = Csv::new(&["name", "dim", "coords"]);
    for r in &rows {
        csv.row(&[r.name.to_string(), r.dim.to_string(), r.coords.join(" ")]);
    }
    art.file("result.csv", csv.finish());
    art.json("summary.json", &rows);
    art.stdout = all.iter().map(|s| format!("{}\n", s.name)).collect();
    art
}

pub fn check_metric(cfg: &Settings) -> CliResult<Artifacts> {
    let s = cfg.scenario()?;
    let m = s.metric.build()?;
    let report = m.check_nondegenerate(&cfg.region_of(&s)?, &cfg.grid_or(&s)?)?;
    let mut art = Artifacts::default();
    let mut csv = Csv::new(&["eps", "inf_abs_det"]);
    for r in &report.inf_table {
        csv.row(&[num(r.eps), num(r.value)]);
    }
    art.file("result.csv", csv.finish());
    art.json(
        "summary.json",
        &json!({ "scenario": s.name, "delta": m.delta().label(), "report": report }),
    );
    summary_text(&mut art);
    Ok(art)
}

pub fn index(cfg: &Settings) -> CliResult<Artifacts> {
    let s = cfg.scenario()?;
    let m = s.metric.build()?;
    let report = m.compute_index(&cfg.region_of(&s)?, &cfg.grid_or(&s)?)?;
    let mut art = Artifacts::default();
    let mut csv = Csv::new(&["eps", "min_negative", "max_negative", "min_abs_eigenvalue"]);
    for (row, ev) in report.per_eps_signatures.iter().zip(&report.min_abs_eigenvalue_table) {
        csv.row(&[num(row.eps), row.min_negative.to_string(), row.max_negative.to_string(), num(ev.value)]);
    }
    art.file("result.csv", csv.finish());
    art.json("summary.json", &json!({ "scenario": s.name, "report": report }));
    summary_text(&mut art);
    Ok(art)
}

pub fn christoffel(cfg: &Settings) -> CliResult<Artifacts> {
    let s = cfg.scenario()?;
    let gamma = ChristoffelField::new(&s.metric.build()?)?;
    let entries = gamma.nonzero();
    let mut art = Artifacts::default();
    let mut csv = Csv::new(&["k", "i", "j", "expr"]);
    for e in &entries {
        csv.row(&[&e.k, &e.i, &e.j, &e.expr]);
    }
    art.file("result.csv", csv.finish());
    art.json("summary.json", &json!({ "scenario": s.name, "symbols": entries }));
    if cfg.print {
        art.stdout = entries.iter().map(|e| format!("Γ^{}_{{{} {}}} = {}\n", e.k, e.i, e.j, e.expr)).collect();
        if entries.is_empty() {
            art.stdout = "all Christoffel symbols vanish\n".into();
        }
    } else {
        summary_text(&mut art);
    }
    Ok(art)
}

fn geodesic_opts(cfg: &Settings) -> CliResult<GeodesicOptions> {
    let mut opts = GeodesicOptions::default();
    if let Some(t) = cfg.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Validation(format!("--tol must lie in (0, 1), got {t}")));
        }
        opts.tol = t;
    }
    if let Some(n) = &cfg.samples {
        match flags::parse_counts(n).map_err(CliError::Validation)?.as_slice() {
            [n] if *n >= 2 => opts.samples = *n,
            _ => return Err(CliError::Validation("geodesic --samples takes one count of at least 2".into())),
        }
    }
    Ok(opts)
}

/// Scenario, initial data, end time and family for the geodesic commands.
fn family_for(cfg: &Settings) -> CliResult<(Scenario, gengeom::geodesic::GeodesicFamily, f64)> {
    // --samples means output points here, not lattice counts
    let lattice = Settings { samples: None, ..cfg.clone() };
    let s = lattice.scenario()?;
    let m = s.metric.build()?;
    let mut init = s
        .init
        .clone()
        .ok_or_else(|| CliError::Validation(format!("scenario '{}' has no default geodesic data", s.name)))?;
    if let Some(text) = &cfg.init {
        let o = flags::parse_init(text, m.coords()).map_err(CliError::Validation)?;
        if let Some(t0) = o.t0 {
            init.t0 = t0;
        }
        init.position.extend(o.position);
        init.velocity.extend(o.velocity);
    }
    let t_end = cfg.t_end.unwrap_or(init.t_end);
    let gamma = ChristoffelField::new(&m)?;
    let fam = solve_family(&gamma, &init.build(m.coords())?, t_end, &cfg.grid_or(&s)?, &geodesic_opts(cfg)?)?;
    Ok((s, fam, t_end))
}

pub fn geodesic(cfg: &Settings) -> CliResult<Artifacts> {
    let (s, fam, t_end) = family_for(cfg)?;
    let m = s.metric.build()?;
    let coords = m.coords();
    let mut header = vec!["eps".to_string(), "t".to_string()];
    header.extend(coords.iter().cloned());
    header.extend(coords.iter().map(|c| format!("{c}dot")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    let mut members = Vec::new();
    for tr in &fam.members {
        for ((t, p), v) in tr.t.iter().zip(&tr.positions).zip(&tr.velocities) {
            let mut row = vec![num(tr.eps), num(*t)];
            row.extend(p.iter().chain(v).map(|x| num(*x)));
            csv.row(&row);
        }
        members.push(json!({
            "eps": tr.eps,
            "end_position": tr.positions.last(),
            "end_velocity": tr.velocities.last(),
            "norm_drift": tr.norm_drift(&m)?,
            "stats": tr.stats,
        }));
    }
    let mut limits = BTreeMap::new();
    if fam.members.len() >= 2 {
        for (c, name) in coords.iter().enumerate() {
            let samples: Vec<_> = fam
                .members
                .iter()
                .map(|tr| gengeom::asymptotics::EpsValue { eps: tr.eps, value: tr.positions.last().unwrap()[c] })
                .collect();
            let e = estimate_shadow(&samples);
            limits.insert(name.clone(), json!({ "limit": e.limit, "fitted_order": e.fitted_order, "trustworthy": e.trustworthy }));
        }
    }
    let mut art = Artifacts::default();
    art.file("result.csv", csv.finish());
    art.file("family.csv", FamilyTable::from_geodesic(&fam, "t", coords)?.to_csv());
    art.json(
        "summary.json",
        &json!({
            "scenario": s.name,
            "coords": coords,
            "t0": fam.t.first(),
            "t_end": t_end,
            "members": members,
            "endpoint_limits": limits,
        }),
    );
    summary_text(&mut art);
    Ok(art)
}

fn point_from(text: &str, coords: &[String]) -> CliResult<Vec<f64>> {
    let at = flags::parse_assignments(text).map_err(CliError::Validation)?;
    if let Some(k) = at.keys().find(|k| !coords.contains(k)) {
        return Err(CliError::Validation(format!("--at names unknown coordinate '{k}'")));
    }
    Ok(coords.iter().map(|c| at.get(c).copied().unwrap_or(0.0)).collect())
}

pub fn curvature(cfg: &Settings) -> CliResult<Artifacts> {
    let s = cfg.scenario()?;
    let m = s.metric.build()?;
    let eps = cfg.eps.ok_or_else(|| CliError::Validation("curvature needs --eps".into()))?;
    let point = point_from(cfg.at.as_deref().unwrap_or(""), m.coords())?;
    let bundle = CurvatureBundle::new(&ChristoffelField::new(&m)?)?;
    let v = bundle.evaluate(&point, eps)?;
    let diag = curvature_diagnostics(&bundle, std::slice::from_ref(&point), eps)?;
    let c = m.coords();
    let d = m.dim();
    let mut csv = Csv::new(&["component", "value"]);
    let mut riemann = Vec::new();
    for a in 0..d {
        for b in 0..d {
            for cc in 0..d {
                for dd in 0..d {
                    let x = v.riemann_at(a, b, cc, dd);
                    if x != 0.0 {
                        let name = format!("R_{{{} {} {}}}^{}", c[a], c[b], c[cc], c[dd]);
                        csv.row(&[name.clone(), num(x)]);
                        riemann.push(json!({ "component": name, "value": x }));
                    }
                }
            }
        }
    }
    let mut two = |label: &str, mat: &[Vec<f64>]| {
        let mut out = Vec::new();
        for a in 0..d {
            for b in a..d {
                if mat[a][b] != 0.0 {
                    let name = format!("{label}_{{{} {}}}", c[a], c[b]);
                    csv.row(&[name.clone(), num(mat[a][b])]);
                    out.push(json!({ "component": name, "value": mat[a][b] }));
                }
            }
        }
        out
    };
    let ricci = two("Ric", &v.ricci);
    let einstein = two("G", &v.einstein);
    csv.row(&["R".to_string(), num(v.scalar)]);
    let mut art = Artifacts::default();
    art.file("result.csv", csv.finish());
    art.json(
        "summary.json",
        &json!({
            "scenario": s.name,
            "eps": eps,
            "point": BTreeMap::from_iter(c.iter().cloned().zip(point.iter().copied())),
            "riemann": riemann,
            "ricci": ricci,
            "scalar": v.scalar,
            "einstein": einstein,
            "diagnostics": diag,
        }),
    );
    summary_text(&mut art);
    Ok(art)
}

pub fn shadow(cfg: &Settings) -> CliResult<Artifacts> {
    let (table, scenario_forms, delta) = match (&cfg.family, &cfg.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("family {}: {e}", path.display())))?;
            let delta = DeltaNet::from_spec(cfg.delta.as_deref().unwrap_or("bump"), "eps")?;
            (FamilyTable::from_csv(&text)?, BTreeMap::new(), delta)
        }
        (None, Some(_)) => {
            let (s, fam, _) = family_for(cfg)?;
            let m = s.metric.build()?;
            (FamilyTable::from_geodesic(&fam, "t", m.coords())?, s.closed_forms.clone(), m.delta().clone())
        }
        (None, None) => return Err(CliError::Validation("shadow needs --family or --scenario".into())),
    };
    let texts = match &cfg.closed_form {
        Some(t) => flags::parse_closed_forms(t).map_err(CliError::Validation)?,
        None => scenario_forms,
    };
    let forms: BTreeMap<String, FieldExpr> =
        texts.iter().map(|(k, v)| Ok((k.clone(), parse(v)?))).collect::<gengeom::Result<_>>()?;
    let largest = table.members.iter().map(|m| m.eps).fold(0.0, f64::max);
    let exclusion_radius = match cfg.exclude {
        Some(r) if r >= 0.0 => r,
        Some(r) => return Err(CliError::Validation(format!("--exclude must be non-negative, got {r}"))),
        None => delta.support_radius(largest)?,
    };
    let rule = delta.clone();
    let opts = ShadowOptions {
        exclusion_radius,
        impulse_at: 0.0,
        support_radius: Some(Arc::new(move |e| rule.support_radius(e).unwrap_or(0.0))),
    };
    let sh = geodesic_shadow(&table, &forms, &opts)?;
    let mut header = vec![sh.param.clone()];
    header.extend(sh.coordinates.keys().cloned());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for (k, t) in sh.t.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(sh.coordinates.values().map(|c| num(c.limit[k])));
        csv.row(&row);
    }
    let coords: BTreeMap<&String, _> = sh
        .coordinates
        .iter()
        .map(|(name, c)| {
            (
                name,
                json!({
                    "closed_form": c.closed_form,
                    "max_dev": c.max_dev,
                    "worst_t": c.worst_t,
                    "trustworthy_fraction": c.trustworthy_fraction,
                    "fitted_orders": c.fitted_orders,
                }),
            )
        })
        .collect();
    let mut art = Artifacts::default();
    art.file("result.csv", csv.finish());
    art.json(
        "summary.json",
        &json!({
            "param": sh.param,
            "eps": sh.eps,
            "exclusion_radius": exclusion_radius,
            "flagged": sh.flagged,
            "coordinates": coords,
        }),
    );
    summary_text(&mut art);
    Ok(art)
}

/// Growth and strict-nonzero verdicts for a scalar net: either `--expr` in
/// eps (other variables bound by `--at`), or the metric determinant of a
/// scenario at `--at`.
pub fn classify(cfg: &Settings) -> CliResult<Artifacts> {
    let (label, net, grid): (String, ScalarNet, EpsilonGrid) = match &cfg.expr {
        Some(text) => {
            let e = parse(text)?;
            let bound = flags::parse_assignments(cfg.at.as_deref().unwrap_or("")).map_err(CliError::Validation)?;
            if let Some(v) = e.free_vars().into_iter().find(|v| !bound.contains_key(v)) {
                return Err(CliError::Validation(format!("variable '{v}' is not bound by --at")));
            }
            let delta = DeltaNet::from_spec(cfg.delta.as_deref().unwrap_or("bump"), "eps")?;
            let grid = match &cfg.grid {
                Some(g) => flags::parse_grid(g).map_err(CliError::Validation)?.build()?,
                None => scenario::minkowski().grid()?,
            };
            let net = ScalarNet::fallible(text.clone(), move |eps| {
                let mut b = Bindings::new(eps, delta.clone());
                for (k, v) in &bound {
                    b.set(k, *v);
                }
                evaluate(&e, &b)
            });
            (text.clone(), net, grid)
        }
        None => {
            let s = cfg.scenario()?;
            let m = s.metric.build()?;
            let point = point_from(cfg.at.as_deref().unwrap_or(""), m.coords())?;
            let label = format!("det g at {point:?}");
            let grid = cfg.grid_or(&s)?;
            let net = ScalarNet::fallible(label.clone(), move |eps| Ok(m.evaluate(&point, eps)?.det));
            (label, net, grid)
        }
    };
    let growth = estimate_growth_order(NetSource::Scalar(&net), &grid)?;
    let nonzero = is_strictly_nonzero(&net, &grid);
    let mut csv = Csv::new(&["eps", "value"]);
    for r in &nonzero.table {
        csv.row(&[num(r.eps), num(r.value)]);
    }
    let mut art = Artifacts::default();
    art.file("result.csv", csv.finish());
    art.json(
        "summary.json",
        &json!({ "net": label, "growth": growth, "strictly_nonzero": nonzero }),
    );
    summary_text(&mut art);
    Ok(art)
}
