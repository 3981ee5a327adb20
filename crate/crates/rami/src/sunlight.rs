//! Light captured by an atomic measure: project onto the plane orthogonal
//! to an incoming direction, bin into cells of side h, and integrate
//! 1 - exp(-density) over the plane. Totals integrate per-direction values
//! against an intensity profile with a fixed quadrature rule.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use rayon::prelude::*;

/// Surface area of the unit sphere in R^d (d >= 1): 2 pi^{d/2} / Gamma(d/2).
pub fn sphere_area(d: usize) -> f64 {
    // d * V_d with the standard ball-volume recurrence.
    d as f64 * ball_volume(d)
}

/// Volume of the unit ball in R^d; V_0 = 1, V_1 = 2, V_d = 2 pi V_{d-2} / d.
pub fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI * ball_volume(d - 2) / d as f64,
    }
}

/// Uniform cell grid on a (d-1)-dimensional projection plane. Cells are
/// half-open boxes of side h indexed by floor(coordinate / h); `extent`
/// bounds the coordinates the grid accepts.
#[derive(Debug, Clone)]
pub struct ProjectionGrid {
    pub h: f64,
    pub extent: f64,
    pub transverse_dim: usize,
}

impl ProjectionGrid {
    pub fn new(h: f64, extent: f64, transverse_dim: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("cell size {h} must be finite and positive")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Parameter(format!("grid extent {extent} must be finite and positive")));
        }
        if transverse_dim == 0 {
            return Err(Error::Parameter("projection plane must have dimension >= 1".into()));
        }
        Ok(ProjectionGrid { h, extent, transverse_dim })
    }

    /// Grid sized to hold every projection of mu (|projection| <= |x|).
    pub fn for_measure(mu: &DiscreteMeasure, h: f64) -> Result<Self> {
        ProjectionGrid::new(h, mu.support_radius() + h, mu.dim() - 1)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.transverse_dim as i32)
    }
}

/// Projected cell densities for one direction: sparse map from cell index
/// to mass per cell volume.
#[derive(Debug, Clone)]
pub struct ProjectedDensity {
    pub cells: Vec<(Vec<i64>, f64)>,
    pub cell_volume: f64,
}

/// Direction nodes with quadrature weights and sampled intensity values.
#[derive(Debug, Clone)]
pub struct DirectionQuadrature {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl DirectionQuadrature {
    /// Total intensity integral under the rule (stands in for the L1 norm
    /// of the intensity profile).
    pub fn quadrature_norm(&self) -> f64 {
        self.weights.iter().zip(&self.intensity).map(|(w, e)| w * e).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.len() != self.weights.len() || self.directions.len() != self.intensity.len() {
            return Err(Error::Parameter("quadrature arrays have mismatched lengths".into()));
        }
        if self.intensity.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return Err(Error::Parameter("intensity values must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Equal-weight quadrature on the unit sphere of R^d sampled at K nodes:
/// equally spaced angles for d = 2, a Fibonacci lattice for d = 3. Weights
/// sum to the sphere area exactly up to rounding.
pub fn uniform_quadrature(
    dim: usize,
    k: usize,
    intensity: impl Fn(&[f64]) -> f64,
) -> Result<DirectionQuadrature> {
    if k == 0 {
        return Err(Error::Parameter("quadrature needs at least one node".into()));
    }
    let directions: Vec<Vec<f64>> = match dim {
        2 => (0..k)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere: uniform in z with golden-angle azimuths.
            let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..k)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden_angle * i as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            return Err(Error::Parameter(format!(
                "uniform quadrature supports d in {{2, 3}}, got {dim}"
            )))
        }
    };
    let w = sphere_area(dim) / k as f64;
    let intensity: Vec<f64> = directions.iter().map(|n| intensity(n)).collect();
    let quad = DirectionQuadrature { dim, directions, weights: vec![w; k], intensity };
    quad.validate()?;
    Ok(quad)
}

/// Deterministic orthonormal basis of the plane orthogonal to n: the d-1
/// coordinate axes least aligned with n, Gram-Schmidt orthogonalized in
/// ascending |n . e_i| order (ties by axis index).
fn transverse_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&i, &j| {
        n[i].abs()
            .partial_cmp(&n[j].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for &i in axes.iter().take(d - 1) {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        let dot_n: f64 = v.iter().zip(n).map(|(a, b)| a * b).sum();
        for (vk, nk) in v.iter_mut().zip(n) {
            *vk -= dot_n * nk;
        }
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vk, bk) in v.iter_mut().zip(b) {
                *vk -= dot * bk;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for vk in v.iter_mut() {
            *vk /= norm;
        }
        basis.push(v);
    }
    basis
}

fn unit_direction(n: &[f64], dim: usize) -> Result<Vec<f64>> {
    if n.len() != dim {
        return Err(Error::Dimension { expected: dim, got: n.len() });
    }
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Parameter("direction must be a nonzero finite vector".into()));
    }
    Ok(n.iter().map(|x| x / norm).collect())
}

/// Bins the projection of mu along direction n into grid cells and returns
/// mass-per-cell-volume densities.
pub fn project_density(
    mu: &DiscreteMeasure,
    n: &[f64],
    grid: &ProjectionGrid,
) -> Result<ProjectedDensity> {
    let n = unit_direction(n, mu.dim())?;
    if grid.transverse_dim != mu.dim() - 1 {
        return Err(Error::Dimension { expected: mu.dim() - 1, got: grid.transverse_dim });
    }
    let basis = transverse_basis(&n);
    let mut cells: Vec<(Vec<i64>, f64)> = Vec::new();
    for (idx, a) in mu.atoms().iter().enumerate() {
        let along: f64 = a.position.iter().zip(&n).map(|(x, nk)| x * nk).sum();
        let mut key = Vec::with_capacity(grid.transverse_dim);
        for b in &basis {
            let c: f64 = a.position.iter().zip(b).map(|(x, bk)| x * bk).sum::<f64>()
                - along * b.iter().zip(&n).map(|(bk, nk)| bk * nk).sum::<f64>();
            if c.abs() > grid.extent {
                return Err(Error::Extent {
                    what: format!("atom {idx} at {:?}", a.position),
                    detail: format!("projected coordinate {c} exceeds extent {}", grid.extent),
                });
            }
            key.push((c / grid.h).floor() as i64);
        }
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, m)) => *m += a.mass,
            None => cells.push((key, a.mass)),
        }
    }
    let cell_volume = grid.cell_volume();
    for (_, m) in cells.iter_mut() {
        *m /= cell_volume;
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ProjectedDensity { cells, cell_volume })
}

/// Exposure along one direction: sum over occupied cells of
/// (1 - exp(-density)) * cell volume.
pub fn sunlight_direction(mu: &DiscreteMeasure, n: &[f64], grid: &ProjectionGrid) -> Result<f64> {
    let density = project_density(mu, n, grid)?;
    Ok(density
        .cells
        .iter()
        .map(|(_, phi)| (1.0 - (-phi).exp()) * density.cell_volume)
        .sum())
}

/// Exposure integrated over directions with the quadrature's intensity.
pub fn sunlight_total(
    mu: &DiscreteMeasure,
    quad: &DirectionQuadrature,
    grid: &ProjectionGrid,
) -> Result<f64> {
    quad.validate()?;
    if quad.dim != mu.dim() {
        return Err(Error::Dimension { expected: mu.dim(), got: quad.dim });
    }
    let per_direction: Vec<Result<f64>> = quad
        .directions
        .par_iter()
        .map(|n| sunlight_direction(mu, n, grid))
        .collect();
    let mut total = 0.0;
    for ((s, w), e) in per_direction.into_iter().zip(&quad.weights).zip(&quad.intensity) {
        total += w * e * s?;
    }
    Ok(total)
}
