//! Built-in metrics with default regions, grids and geodesic data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{EpsilonGrid, Region};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicInit;
use crate::metric::{DeltaSpec, MetricSpec};

pub const PPWAVE_DEFAULT_F: &str = "x^2 - y^2";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub e_max: f64,
    pub e_min: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<EpsilonGrid> {
        EpsilonGrid::geometric(self.e_max, self.e_min, self.count)
    }
}

/// Initial data by coordinate name. Missing entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub t0: f64,
    pub t_end: f64,
    pub position: BTreeMap<String, f64>,
    pub velocity: BTreeMap<String, f64>,
}

impl InitSpec {
    pub fn build(&self, coords: &[String]) -> Result<GeodesicInit> {
        for k in self.position.keys().chain(self.velocity.keys()) {
            if !coords.contains(k) {
                return Err(Error::Config(format!("initial data names unknown coordinate '{k}'")));
            }
        }
        let get = |m: &BTreeMap<String, f64>, c: &String| m.get(c).copied().unwrap_or(0.0);
        Ok(GeodesicInit {
            t0: self.t0,
            position: coords.iter().map(|c| get(&self.position, c)).collect(),
            velocity: coords.iter().map(|c| get(&self.velocity, c)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub metric: MetricSpec,
    pub region: Vec<(f64, f64)>,
    pub samples: Vec<usize>,
    pub grid: GridSpec,
    #[serde(default)]
    pub init: Option<InitSpec>,
    /// Coordinate that equals the curve parameter for the default data.
    #[serde(default)]
    pub param_coord: Option<String>,
    /// Closed-form eps -> 0 limits of the default geodesic, by coordinate.
    #[serde(default)]
    pub closed_forms: BTreeMap<String, String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn comps(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn standard_grid() -> GridSpec {
    GridSpec {
        e_max: 0.2,
        e_min: 0.0125,
        count: 5,
    }
}

fn metric(label: &str, coords: &[&str], components: &[(&str, &str)]) -> MetricSpec {
    MetricSpec {
        label: label.into(),
        dim: coords.len(),
        coords: strings(coords),
        components: comps(components),
        parameters: BTreeMap::new(),
        delta: DeltaSpec::default(),
    }
}

/// Impulsive pp-wave `f(x,y) δ(u) du² − du dv + dx² + dy²`.
pub fn ppwave(f: &str) -> Scenario {
    let uu = format!("({f})*delta(u)");
    let default_f = f.trim() == PPWAVE_DEFAULT_F;
    Scenario {
        name: "ppwave".into(),
        metric: metric("ppwave", &["u", "v", "x", "y"], &[("uu", &uu), ("uv", "-1/2"), ("xx", "1"), ("yy", "1")]),
        region: vec![(-0.5, 0.5), (-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)],
        samples: vec![9, 3, 5, 5],
        grid: standard_grid(),
        init: Some(InitSpec {
            t0: -1.0,
            t_end: 1.0,
            position: BTreeMap::from([("u".into(), -1.0), ("x".into(), 1.0), ("y".into(), 1.0)]),
            velocity: BTreeMap::from([("u".into(), 1.0)]),
        }),
        param_coord: Some("u".into()),
        closed_forms: if default_f {
            comps(&[("u", "u"), ("v", "2*pos(u)"), ("x", "1 + pos(u)"), ("y", "1 - pos(u)")])
        } else {
            BTreeMap::new()
        },
        notes: vec![format!("profile f = {f}")],
    }
}

pub fn remark35() -> Scenario {
    Scenario {
        name: "remark35".into(),
        metric: metric("remark35", &["x"], &[("xx", "x^2 + delta(x)")]),
        region: vec![(-1.0, 1.0)],
        samples: vec![201],
        grid: standard_grid(),
        init: None,
        param_coord: None,
        closed_forms: BTreeMap::new(),
        notes: strings(&["nondegeneracy depends on the chosen delta net (try --delta signed)"]),
    }
}

pub fn minkowski() -> Scenario {
    Scenario {
        name: "minkowski".into(),
        metric: metric("minkowski", &["t", "x", "y", "z"], &[("tt", "-1"), ("xx", "1"), ("yy", "1"), ("zz", "1")]),
        region: vec![(-1.0, 1.0); 4],
        samples: vec![3; 4],
        grid: standard_grid(),
        init: Some(InitSpec {
            t0: 0.0,
            t_end: 1.0,
            position: BTreeMap::new(),
            velocity: BTreeMap::from([("t".into(), 1.0), ("x".into(), 0.5)]),
        }),
        param_coord: Some("t".into()),
        closed_forms: comps(&[("t", "t"), ("x", "0.5*t"), ("y", "0"), ("z", "0")]),
        notes: Vec::new(),
    }
}

pub fn sphere2() -> Scenario {
    Scenario {
        name: "sphere2".into(),
        metric: metric("sphere2", &["theta", "phi"], &[("theta,theta", "1"), ("phi,phi", "sin(theta)^2")]),
        region: vec![(0.3, 2.8), (0.0, 6.0)],
        samples: vec![11, 11],
        grid: standard_grid(),
        init: Some(InitSpec {
            t0: 0.0,
            t_end: 3.0,
            position: BTreeMap::from([("theta".into(), std::f64::consts::FRAC_PI_2)]),
            velocity: BTreeMap::from([("phi".into(), 1.0)]),
        }),
        param_coord: Some("phi".into()),
        closed_forms: comps(&[("theta", "1.5707963267948966"), ("phi", "phi")]),
        notes: strings(&["unit sphere; the default geodesic runs along the equator"]),
    }
}

/// Scalar net `eps^(x^2/(x^4 + eps^4))` as a one-dimensional metric.
pub fn example24() -> Scenario {
    Scenario {
        name: "example24".into(),
        metric: metric("example24", &["x"], &[("xx", "eps^(x^2/(x^4 + eps^4))")]),
        region: vec![(0.0, 1.0)],
        samples: vec![64],
        grid: standard_grid(),
        init: None,
        param_coord: None,
        closed_forms: BTreeMap::new(),
        notes: strings(&["invertible at every point, not invertible on [0, 1]"]),
    }
}

pub fn euclid2() -> Scenario {
    Scenario {
        name: "euclid2".into(),
        metric: metric("euclid2", &["x", "y"], &[("xx", "1"), ("yy", "1")]),
        region: vec![(-1.0, 1.0), (-1.0, 1.0)],
        samples: vec![11, 11],
        grid: standard_grid(),
        init: Some(InitSpec {
            t0: 0.0,
            t_end: 1.0,
            position: BTreeMap::new(),
            velocity: BTreeMap::from([("x".into(), 1.0), ("y".into(), -0.5)]),
        }),
        param_coord: Some("x".into()),
        closed_forms: comps(&[("x", "x"), ("y", "-0.5*x")]),
        notes: Vec::new(),
    }
}

pub fn registry() -> Vec<Scenario> {
    vec![ppwave(PPWAVE_DEFAULT_F), remark35(), minkowski(), sphere2(), example24(), euclid2()]
}

pub fn names() -> Vec<String> {
    registry().into_iter().map(|s| s.name).collect()
}

pub fn find(name: &str) -> Result<Scenario> {
    registry().into_iter().find(|s| s.name == name).ok_or_else(|| {
        Error::Config(format!("unknown scenario '{name}' (known: {})", names().join(", ")))
    })
}

impl Scenario {
    pub fn region(&self) -> Result<Region> {
        Region::with_counts(self.region.clone(), self.samples.clone())
    }

    pub fn grid(&self) -> Result<EpsilonGrid> {
        self.grid.build()
    }

    pub fn with_delta_profile(mut self, profile: &str) -> Self {
        self.metric.delta.profile = profile.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.build()?;
        self.region()?;
        self.grid()?;
        if self.region.len() != self.metric.dim {
            return Err(Error::Config(format!("scenario '{}' region has the wrong dimension", self.name)));
        }
        if let Some(init) = &self.init {
            init.build(&self.metric.coords)?;
        }
        Ok(())
    }
}
