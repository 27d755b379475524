use std::path::{Path, PathBuf};

use forcefree::beltrami::{BoundaryCondition, LagrangianChoice};
use forcefree::generators::{gen_box_minus_ring, gen_grid, read_msh, CellRing, GridSpec};
use forcefree::{Error, Result, SimplicialComplex3};

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Cube,
    SolidTorus,
    Torus3,
    BoxRing,
    Msh(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Level {
    Auto,
    Value(f64),
}

/// Everything a command needs, after merging the config file and flags.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub n: Option<[usize; 3]>,
    pub periodic: Option<[bool; 3]>,
    pub size: Option<[f64; 3]>,
    pub bc: Option<BoundaryCondition>,
    pub k: usize,
    pub tol: f64,
    pub level: Level,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: Geometry::Torus3,
            n: None,
            periodic: None,
            size: None,
            bc: None,
            k: 1,
            tol: 1e-8,
            level: Level::Auto,
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

pub fn parse_geometry(s: &str) -> Result<Geometry> {
    Ok(match s {
        "cube" => Geometry::Cube,
        "solid-torus" => Geometry::SolidTorus,
        "torus3" => Geometry::Torus3,
        "box-ring" => Geometry::BoxRing,
        _ => match s.strip_prefix("msh:") {
            Some(p) if !p.is_empty() => Geometry::Msh(PathBuf::from(p)),
            _ => return Err(invalid(format!("unknown geometry '{s}'"))),
        },
    })
}

/// `N` or `NX,NY,NZ`.
pub fn parse_n(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| invalid(format!("bad cell count '{s}'"))))
        .collect::<Result<_>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err(invalid(format!("expected N or NX,NY,NZ, got '{s}'"))),
    }
}

/// Axis letters that are periodic (`xy`, `z`, `none`), or a three-character
/// mask of `T/F` or `1/0`.
pub fn parse_periodic(s: &str) -> Result<[bool; 3]> {
    if s == "none" || s.is_empty() {
        return Ok([false; 3]);
    }
    let chars: Vec<char> = s.chars().collect();
    if chars.len() == 3 && chars.iter().all(|c| "TtFf10".contains(*c)) {
        return Ok(std::array::from_fn(|i| "Tt1".contains(chars[i])));
    }
    let mut mask = [false; 3];
    for c in chars {
        match c {
            'x' => mask[0] = true,
            'y' => mask[1] = true,
            'z' => mask[2] = true,
            _ => return Err(invalid(format!("bad periodic mask '{s}'"))),
        }
    }
    Ok(mask)
}

/// `L` or `LX,LY,LZ` box side lengths.
pub fn parse_size(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| invalid(format!("bad size '{s}'"))))
        .collect::<Result<_>>()?;
    match parts[..] {
        [l] => Ok([l; 3]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err(invalid(format!("expected L or LX,LY,LZ, got '{s}'"))),
    }
}

pub fn parse_bc(s: &str) -> Result<BoundaryCondition> {
    Ok(match s {
        "closed-mesh" => BoundaryCondition::closed_mesh(),
        "zero-trace" => BoundaryCondition::zero_trace(),
        "closed-trace" | "closed-trace:meridian" => BoundaryCondition::closed_trace(LagrangianChoice::Meridian),
        "closed-trace:longitude" => BoundaryCondition::closed_trace(LagrangianChoice::Longitude),
        _ => return Err(invalid(format!("unknown boundary condition '{s}'"))),
    })
}

pub fn parse_level(s: &str) -> Result<Level> {
    if s == "auto" {
        return Ok(Level::Auto);
    }
    s.parse().map(Level::Value).map_err(|_| invalid(format!("bad level '{s}'")))
}

impl RunConfig {
    /// Applies one `key=value` setting; keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "geometry" => self.geometry = parse_geometry(value)?,
            "n" => self.n = Some(parse_n(value)?),
            "periodic" => self.periodic = Some(parse_periodic(value)?),
            "size" => self.size = Some(parse_size(value)?),
            "bc" => self.bc = Some(parse_bc(value)?),
            "k" => self.k = value.parse().map_err(|_| invalid(format!("bad k '{value}'")))?,
            "tol" => self.tol = value.parse().map_err(|_| invalid(format!("bad tol '{value}'")))?,
            "level" => self.level = parse_level(value)?,
            "out" => self.out = PathBuf::from(value),
            "threads" => {
                self.threads = Some(value.parse().map_err(|_| invalid(format!("bad thread count '{value}'")))?)
            }
            _ => return Err(invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ParseError { line: i + 1, message: format!("expected key=value: '{raw}'") })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Option<GridSpec> {
        let mut spec = match self.geometry {
            Geometry::Cube => GridSpec::cube(4),
            Geometry::SolidTorus => GridSpec::solid_torus(2, 2, 8),
            Geometry::Torus3 => GridSpec::torus3(8),
            _ => return None,
        };
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(p) = self.periodic {
            spec.periodic = p;
        }
        if let Some(l) = self.size {
            spec.lengths = l;
        }
        Some(spec)
    }

    pub fn build_mesh(&self) -> Result<SimplicialComplex3> {
        if let Some(spec) = self.grid_spec() {
            return gen_grid(spec);
        }
        match &self.geometry {
            Geometry::BoxRing => {
                if self.periodic.is_some_and(|p| p.iter().any(|&x| x)) || self.size.is_some() {
                    return Err(invalid("box-ring takes only --n"));
                }
                let n = match self.n {
                    None => 7,
                    Some([a, b, c]) if a == b && b == c => a,
                    Some(_) => return Err(invalid("box-ring needs a single cell count")),
                };
                gen_box_minus_ring(n, CellRing::centered(n))
            }
            Geometry::Msh(path) => {
                if self.n.is_some() || self.periodic.is_some() || self.size.is_some() {
                    return Err(invalid("mesh files take no grid options"));
                }
                read_msh(path)
            }
            _ => unreachable!(),
        }
    }

    pub fn boundary_condition(&self, complex: &SimplicialComplex3) -> BoundaryCondition {
        self.bc.unwrap_or_else(|| BoundaryCondition::default_for(complex))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks() {
        assert_eq!(parse_periodic("xy").unwrap(), [true, true, false]);
        assert_eq!(parse_periodic("FFT").unwrap(), [false, false, true]);
        assert_eq!(parse_periodic("none").unwrap(), [false; 3]);
        assert!(parse_periodic("w").is_err());
    }

    #[test]
    fn counts_and_levels() {
        assert_eq!(parse_n("5").unwrap(), [5; 3]);
        assert_eq!(parse_n("2,2,8").unwrap(), [2, 2, 8]);
        assert!(parse_n("2,2").is_err());
        assert_eq!(parse_level("auto").unwrap(), Level::Auto);
        assert_eq!(parse_level("0.25").unwrap(), Level::Value(0.25));
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\ngeometry = cube\nn = 3\nk=2\n").unwrap();
        let mut c = RunConfig::default();
        c.load_file(&path).unwrap();
        c.set("k", "4").unwrap();
        assert_eq!(c.geometry, Geometry::Cube);
        assert_eq!(c.n, Some([3; 3]));
        assert_eq!(c.k, 4);
    }
}
