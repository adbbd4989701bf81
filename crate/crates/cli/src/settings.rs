//! Run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use gengeom::asymptotics::{EpsilonGrid, Region};
use gengeom::metric::MetricSpec;
use gengeom::scenario::{self, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::flags;

/// Every option a command may read. Flags and the `--config` file share the
/// same names and syntax; flags win.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Built-in scenario name (see list-scenarios).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// JSON file with any of these options, plus an optional custom "metric".
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Epsilon grid as "emax,emin,count".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Box such as "[-1,1]x[0,2]".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    /// Lattice points per axis ("n" or "n1,n2,..."), or output points for geodesics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Output directory for result.csv, summary.json and manifest.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Delta net profile: bump, gaussian, signed or oscillatory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    /// pp-wave profile f(x, y).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Geodesic initial data, e.g. "u0=-1,x=1,xdot=0".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Print expressions as text.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub print: bool,
    /// Evaluation point, e.g. "u=0,x=1,y=1".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    /// Family CSV (eps,<param>,<coords...>).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<PathBuf>,
    /// Closed forms such as "x:1+pos(u);y:1-pos(u)".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<String>,
    /// Half-width of the window around the impulse left out of shadow comparisons.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude: Option<f64>,
    /// Expression in eps (and variables bound by --at) to classify.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    /// Acceptance criteria to run, e.g. "1,3".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only: Option<String>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
}

impl Settings {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Flags overlaid on the config file named by `--config`, if any.
    pub fn resolve(self) -> CliResult<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        Ok(self.over(Self::from_json(&text)?))
    }

    /// Field-wise `self` or else `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            scenario: self.scenario.or(base.scenario),
            config: self.config.or(base.config),
            grid: self.grid.or(base.grid),
            eps: self.eps.or(base.eps),
            region: self.region.or(base.region),
            samples: self.samples.or(base.samples),
            tol: self.tol.or(base.tol),
            out: self.out.or(base.out),
            delta: self.delta.or(base.delta),
            f: self.f.or(base.f),
            init: self.init.or(base.init),
            t_end: self.t_end.or(base.t_end),
            print: self.print || base.print,
            at: self.at.or(base.at),
            family: self.family.or(base.family),
            closed_form: self.closed_form.or(base.closed_form),
            exclude: self.exclude.or(base.exclude),
            expr: self.expr.or(base.expr),
            only: self.only.or(base.only),
            metric: self.metric.or(base.metric),
        }
    }

    /// The scenario with every scenario-level override applied.
    pub fn scenario(&self) -> CliResult<Scenario> {
        let mut s = match (&self.metric, &self.scenario) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation("give either a scenario name or a custom metric, not both".into()))
            }
            (Some(m), None) => custom(m, self.region.as_deref())?,
            (None, Some(name)) => scenario::find(name)?,
            (None, None) => return Err(CliError::Validation("no scenario given (use --scenario)".into())),
        };
        if let Some(f) = &self.f {
            if s.name != "ppwave" {
                return Err(CliError::Validation(format!("--f only applies to ppwave, not '{}'", s.name)));
            }
            s = scenario::ppwave(f);
        }
        if let Some(p) = &self.delta {
            s = s.with_delta_profile(p);
        }
        if let Some(r) = &self.region {
            let region = flags::parse_region(r).map_err(CliError::Validation)?;
            if region.len() != s.region.len() {
                s.samples = vec![21; region.len()];
            }
            s.region = region;
        }
        if let Some(n) = &self.samples {
            let counts = flags::parse_counts(n).map_err(CliError::Validation)?;
            s.samples = match counts.as_slice() {
                [one] => vec![*one; s.region.len()],
                _ => counts,
            };
        }
        if let Some(g) = &self.grid {
            s.grid = flags::parse_grid(g).map_err(CliError::Validation)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn grid_or(&self, s: &Scenario) -> CliResult<EpsilonGrid> {
        if let Some(eps) = self.eps {
            return Ok(EpsilonGrid::custom(vec![eps])?);
        }
        Ok(s.grid()?)
    }

    pub fn region_of(&self, s: &Scenario) -> CliResult<Region> {
        Ok(s.region()?)
    }

    pub fn out_dir(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

fn custom(m: &MetricSpec, region: Option<&str>) -> CliResult<Scenario> {
    let region = region
        .ok_or_else(|| CliError::Validation("a custom metric needs --region".into()))
        .and_then(|r| flags::parse_region(r).map_err(CliError::Validation))?;
    let base = scenario::minkowski();
    Ok(Scenario {
        name: m.label.clone(),
        metric: m.clone(),
        samples: vec![21; region.len()],
        region,
        grid: base.grid,
        init: None,
        param_coord: None,
        closed_forms: Default::default(),
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_config() {
        let file = Settings::from_json(r#"{"scenario": "sphere2", "grid": "0.1,0.01,3", "tol": 1e-8}"#).unwrap();
        let flags = Settings {
            grid: Some("0.2,0.0125,5".into()),
            ..Default::default()
        };
        let s = flags.over(file);
        assert_eq!(s.scenario.as_deref(), Some("sphere2"));
        assert_eq!(s.grid.as_deref(), Some("0.2,0.0125,5"));
        assert_eq!(s.tol, Some(1e-8));
        assert!(Settings::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn scenario_overrides() {
        let s = Settings {
            scenario: Some("remark35".into()),
            delta: Some("signed".into()),
            region: Some("[-0.5,0.5]".into()),
            ..Default::default()
        }
        .scenario()
        .unwrap();
        assert_eq!(s.metric.delta.profile, "signed");
        assert_eq!(s.region, vec![(-0.5, 0.5)]);
        assert_eq!(s.samples, scenario::remark35().samples);
        let bad = Settings {
            scenario: Some("sphere2".into()),
            f: Some("x".into()),
            ..Default::default()
        };
        assert!(matches!(bad.scenario(), Err(CliError::Validation(_))));
    }

    #[test]
    fn custom_metric_from_config() {
        let text = r#"{"metric": {"label": "plane", "dim": 2, "coords": ["x", "y"],
            "components": {"xx": "1", "yy": "1 + x^2"}}, "region": "[-1,1]x[-1,1]"}"#;
        let s = Settings::from_json(text).unwrap().scenario().unwrap();
        assert_eq!(s.name, "plane");
        assert_eq!(s.samples, vec![21, 21]);
    }
}
