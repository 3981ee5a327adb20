//! Finite nonnegative atomic measures on R^d with radial and half-space
//! region operations and a plain-text CSV exchange format.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Single atom: position in R^d and a strictly positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mass: f64,
}

impl Atom {
    pub fn radius(&self) -> f64 {
        self.position.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Finite sum of point masses. Atoms are kept sorted lexicographically by
/// position and no two atoms share a position (duplicates merge on
/// construction).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

/// Radially or axially defined region used by `split`.
///
/// Shell indices follow the dyadic convention r_j = 2^{-j}; shell j is the
/// annulus (r_{j+1}, r_j]. `Tail(r)` is the complement of `Ball(r)`, so the
/// two splits swap inside and outside. `HalfSpace { sign, axis }` contains
/// points with sign * x_axis >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSpec {
    Ball(f64),
    Tail(f64),
    Shell(i32),
    HalfSpace { sign: i8, axis: usize },
}

/// Dyadic shell radius r_j = 2^{-j}.
pub fn shell_radius(j: i32) -> f64 {
    (2.0_f64).powi(-j)
}

impl RegionSpec {
    fn contains(&self, atom: &Atom) -> bool {
        match *self {
            RegionSpec::Ball(r) => atom.radius() <= r,
            RegionSpec::Tail(r) => atom.radius() > r,
            RegionSpec::Shell(j) => {
                let r = atom.radius();
                r > shell_radius(j + 1) && r <= shell_radius(j)
            }
            RegionSpec::HalfSpace { sign, axis } => f64::from(sign) * atom.position[axis] >= 0.0,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            RegionSpec::Ball(r) | RegionSpec::Tail(r) => {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::Parameter(format!("region radius {r} must be finite and nonnegative")));
                }
            }
            RegionSpec::Shell(_) => {}
            RegionSpec::HalfSpace { sign, axis } => {
                if sign != 1 && sign != -1 {
                    return Err(Error::Parameter(format!("half-space sign {sign} must be +1 or -1")));
                }
                if axis >= dim {
                    return Err(Error::Dimension { expected: dim, got: axis });
                }
            }
        }
        Ok(())
    }
}

impl DiscreteMeasure {
    /// Builds a measure from raw atoms: validates, merges duplicate
    /// positions, and sorts lexicographically by position.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!("dimension {dim} must be at least 2")));
        }
        let mut atoms = atoms;
        for (i, a) in atoms.iter().enumerate() {
            if a.position.len() != dim {
                return Err(Error::Dimension { expected: dim, got: a.position.len() });
            }
            if a.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("atom {i} has a non-finite coordinate")));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::Parameter(format!("atom {i} has nonpositive mass {}", a.mass)));
            }
        }
        atoms.sort_by(|a, b| cmp_positions(&a.position, &b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position == a.position => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        Ok(DiscreteMeasure { dim, atoms: merged })
    }

    /// The zero measure on R^d.
    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure { dim, atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Mass at distance >= r from the origin.
    pub fn tail_mass(&self, r: f64) -> f64 {
        self.atoms.iter().filter(|a| a.radius() >= r).map(|a| a.mass).sum()
    }

    /// Largest atom radius (0 for the zero measure).
    pub fn support_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.radius()).fold(0.0, f64::max)
    }

    /// Splits into (inside, outside) parts relative to a region. Atom order
    /// is preserved, so both parts are canonical without re-sorting.
    pub fn split(&self, region: RegionSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        region.validate(self.dim)?;
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for a in &self.atoms {
            if region.contains(a) {
                inside.push(a.clone());
            } else {
                outside.push(a.clone());
            }
        }
        Ok((
            DiscreteMeasure { dim: self.dim, atoms: inside },
            DiscreteMeasure { dim: self.dim, atoms: outside },
        ))
    }

    /// Multiplies every mass by t >= 0. t = 0 yields the zero measure.
    pub fn scale_mass(&self, t: f64) -> Result<DiscreteMeasure> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("mass factor {t} must be finite and nonnegative")));
        }
        if t == 0.0 {
            return Ok(DiscreteMeasure::empty(self.dim));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { position: a.position.clone(), mass: a.mass * t })
            .collect();
        Ok(DiscreteMeasure { dim: self.dim, atoms })
    }

    /// Pushes every atom position x to lambda * x (lambda > 0). Scaling
    /// preserves lexicographic order, so no re-sort is needed.
    pub fn dilate(&self, lambda: f64) -> Result<DiscreteMeasure> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("dilation factor {lambda} must be finite and positive")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                position: a.position.iter().map(|x| x * lambda).collect(),
                mass: a.mass,
            })
            .collect();
        Ok(DiscreteMeasure { dim: self.dim, atoms })
    }

    /// Sum of two measures on the same space (duplicate positions merge).
    pub fn add(&self, other: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        DiscreteMeasure::new(self.dim, atoms)
    }

    /// Parses the `x_1,...,x_d,mass` exchange format. `#` starts a comment,
    /// blank lines are skipped, and only the first data row may instead be a
    /// textual header. Row numbers in errors are 1-based over the raw input.
    pub fn parse_csv(text: &str) -> Result<DiscreteMeasure> {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut dim: Option<usize> = None;
        let mut saw_data = false;
        for (idx, raw) in text.lines().enumerate() {
            let row = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected at least 3 columns (x_1,...,x_d,mass), got {}", fields.len()),
                });
            }
            let parsed: Vec<std::result::Result<f64, _>> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            if parsed.iter().any(|p| p.is_err()) {
                if !saw_data {
                    // Header row: allowed once, before any data.
                    saw_data = true;
                    dim = Some(fields.len() - 1);
                    continue;
                }
                let bad = fields[parsed.iter().position(|p| p.is_err()).unwrap()];
                return Err(Error::Parse { row, msg: format!("non-numeric field {bad:?}") });
            }
            saw_data = true;
            let values: Vec<f64> = parsed.into_iter().map(|p| p.unwrap()).collect();
            let d = values.len() - 1;
            match dim {
                None => dim = Some(d),
                Some(expect) if expect != d => {
                    return Err(Error::Parse {
                        row,
                        msg: format!("inconsistent column count: expected {}, got {}", expect + 1, d + 1),
                    });
                }
                _ => {}
            }
            let mass = values[d];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { row, msg: "non-finite value".into() });
            }
            if mass <= 0.0 {
                return Err(Error::Parse { row, msg: format!("nonpositive mass {mass} at row {row}") });
            }
            atoms.push(Atom { position: values[..d].to_vec(), mass });
        }
        let dim = dim.ok_or(Error::Parse { row: 0, msg: "no data rows".into() })?;
        if dim < 2 {
            return Err(Error::Parse { row: 0, msg: format!("dimension {dim} must be at least 2") });
        }
        DiscreteMeasure::new(dim, atoms)
    }

    /// Emits the exchange format with a comment header. Floats print in
    /// shortest round-trip form, so parse(emit(m)) == m exactly.
    pub fn emit_csv(&self) -> String {
        let mut out = String::new();
        let cols: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        let _ = writeln!(out, "# {},mass", cols.join(","));
        for a in &self.atoms {
            for x in &a.position {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{}", a.mass);
        }
        out
    }
}

pub(crate) fn cmp_positions(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) => continue,
            Some(ord) => return ord,
            None => return std::cmp::Ordering::Equal,
        }
    }
    std::cmp::Ordering::Equal
}
