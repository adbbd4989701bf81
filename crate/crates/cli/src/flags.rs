//! Parsers for the compact flag syntaxes.

use std::collections::BTreeMap;

use gengeom::scenario::GridSpec;

fn number(s: &str, what: &str) -> Result<f64, String> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| format!("{what}: '{t}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{what}: '{t}' is not finite"));
    }
    Ok(v)
}

/// `"emax,emin,count"`.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("grid '{s}': expected 'emax,emin,count'"));
    };
    let count: usize = n.trim().parse().map_err(|_| format!("grid: '{}' is not a count", n.trim()))?;
    let spec = GridSpec {
        e_max: number(a, "grid")?,
        e_min: number(b, "grid")?,
        count,
    };
    spec.build().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Boxes like `"[-1,1]"` or `"[-1,1]x[0,2.5]"` (`×` also accepted).
pub fn parse_region(s: &str) -> Result<Vec<(f64, f64)>, String> {
    let text = s.trim();
    if text.is_empty() {
        return Err("region is empty".into());
    }
    let mut out = Vec::new();
    for part in text.split(['x', '×']) {
        let p = part.trim();
        let inner = p
            .strip_prefix('[')
            .and_then(|p| p.strip_suffix(']'))
            .ok_or_else(|| format!("region factor '{p}' is not of the form [a,b]"))?;
        let (a, b) = inner.split_once(',').ok_or_else(|| format!("region factor '{p}' needs two bounds"))?;
        let (a, b) = (number(a, "region")?, number(b, "region")?);
        if a >= b {
            return Err(format!("region factor '{p}' is empty"));
        }
        out.push((a, b));
    }
    Ok(out)
}

/// `"n"` or `"n1,n2,..."`.
pub fn parse_counts(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| {
            let n: usize = p.trim().parse().map_err(|_| format!("'{}' is not a count", p.trim()))?;
            if n == 0 {
                return Err("counts must be positive".into());
            }
            Ok(n)
        })
        .collect()
}

/// `"name=value,name=value"`; names must be identifiers and unique.
pub fn parse_assignments(s: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("'{}' is not name=value", part.trim()))?;
        let k = k.trim();
        let ok = k.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(format!("'{k}' is not a valid name"));
        }
        if out.insert(k.to_string(), number(v, k)?).is_some() {
            return Err(format!("'{k}' assigned twice"));
        }
    }
    Ok(out)
}

/// Geodesic initial data split by key: `t0`, `<coord>` or `<coord>0` for a
/// position, `<coord>dot` for a velocity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitOverrides {
    pub t0: Option<f64>,
    pub position: BTreeMap<String, f64>,
    pub velocity: BTreeMap<String, f64>,
}

pub fn parse_init(s: &str, coords: &[String]) -> Result<InitOverrides, String> {
    let mut out = InitOverrides::default();
    for (k, v) in parse_assignments(s)? {
        if k == "t0" && !coords.contains(&k) {
            out.t0 = Some(v);
        } else if coords.contains(&k) {
            out.position.insert(k, v);
        } else if let Some(c) = k.strip_suffix("dot").filter(|c| coords.iter().any(|x| x == c)) {
            out.velocity.insert(c.to_string(), v);
        } else if let Some(c) = k.strip_suffix('0').filter(|c| coords.iter().any(|x| x == c)) {
            out.position.insert(c.to_string(), v);
        } else {
            return Err(format!("init key '{k}' names no coordinate of ({})", coords.join(", ")));
        }
    }
    Ok(out)
}

/// `"x:1+pos(u);y:1-pos(u)"`.
pub fn parse_closed_forms(s: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once(':').ok_or_else(|| format!("'{}' is not coord:expr", part.trim()))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(format!("'{}' is not coord:expr", part.trim()));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("closed form for '{k}' given twice"));
        }
    }
    Ok(out)
}

/// Acceptance criterion selection, `"1,3,10"`.
pub fn parse_ids(s: &str) -> Result<Vec<u8>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u8>().map_err(|_| format!("'{}' is not a criterion number", p.trim())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0.2, 0.0125,5").unwrap();
        assert_eq!((g.e_max, g.e_min, g.count), (0.2, 0.0125, 5));
        assert!(parse_grid("0.2,0.0125").is_err());
        assert!(parse_grid("0.0125,0.2,5").is_err());
        assert!(parse_grid("a,b,c").is_err());
    }

    #[test]
    fn regions() {
        assert_eq!(parse_region("[-1,1]").unwrap(), vec![(-1.0, 1.0)]);
        assert_eq!(parse_region("[-1, 1]x[0,2.5]×[3,4]").unwrap().len(), 3);
        assert!(parse_region("[1,-1]").is_err());
        assert!(parse_region("-1,1").is_err());
        assert!(parse_region("[nan,1]").is_err());
    }

    #[test]
    fn init_keys() {
        let coords: Vec<String> = ["u", "v", "x", "y"].iter().map(|s| s.to_string()).collect();
        let o = parse_init("u0=-1,x=1,y=1,v=0,xdot=0.5,ydot=0,vdot=0,t0=-1", &coords).unwrap();
        assert_eq!(o.t0, Some(-1.0));
        assert_eq!(o.position["u"], -1.0);
        assert_eq!(o.position["x"], 1.0);
        assert_eq!(o.velocity["x"], 0.5);
        assert!(parse_init("w=1", &coords).is_err());
        assert!(parse_init("x=1,x=2", &coords).is_err());
    }

    #[test]
    fn closed_forms() {
        let m = parse_closed_forms("x:1+pos(u);y:1-pos(u); v:2*pos(u)").unwrap();
        assert_eq!(m["v"], "2*pos(u)");
        assert!(parse_closed_forms("x=1").is_err());
        assert!(parse_closed_forms("x:1;x:2").is_err());
    }
}
