//! Finite-difference state equation on a truncated half-space and the
//! harvest functional, plus the analytic bounds in [`psi`].

pub mod psi;

pub use psi::{
    ball_harvest_bound, default_match_grid, psi_profile, small_ball_bound, GrowthFunction,
    PsiProfile, SmallBallBound,
};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Node-centered grid on `[-L, L]^{d-1} x [-L, 0]` with spacing `h`,
/// `L/h` integer. The face `x_d = 0` is a Neumann (mirror) boundary;
/// every other face carries the Dirichlet far-field value.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceGrid {
    d: usize,
    l: f64,
    h: f64,
    n: i64,
    sizes: Vec<usize>,
    strides: Vec<usize>,
}

impl HalfSpaceGrid {
    pub fn new(d: usize, l: f64, h: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension { expected: 2, got: d });
        }
        if !(h > 0.0 && l > 0.0) {
            return Err(Error::Parameter(format!("grid needs positive extent {l} and spacing {h}")));
        }
        let ratio = l / h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 2.0 {
            return Err(Error::Parameter(format!(
                "extent {l} must be an integer multiple (>= 2) of spacing {h}"
            )));
        }
        let n = n as i64;
        let lateral = (2 * n + 1) as usize;
        let depth = (n + 1) as usize;
        let mut sizes = vec![lateral; d - 1];
        sizes.push(depth);
        let mut strides = vec![0usize; d];
        let mut acc = 1usize;
        for axis in (0..d).rev() {
            strides[axis] = acc;
            acc = acc.checked_mul(sizes[axis]).ok_or_else(|| {
                Error::Parameter(format!("grid with {d} axes at spacing {h} is too large"))
            })?;
        }
        Ok(HalfSpaceGrid { d, l, h, n, sizes, strides })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn node_count(&self) -> usize {
        self.strides[0] * self.sizes[0]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Signed lattice index per axis; depth axis runs in `[-n, 0]`.
    fn multi(&self, flat: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.d);
        let mut rem = flat;
        for axis in 0..self.d {
            let idx = rem / self.strides[axis];
            rem %= self.strides[axis];
            out.push(idx as i64 - self.n);
        }
        out
    }

    fn flatten(&self, multi: &[i64]) -> usize {
        let mut flat = 0usize;
        for axis in 0..self.d {
            flat += (multi[axis] + self.n) as usize * self.strides[axis];
        }
        flat
    }

    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).iter().map(|&i| i as f64 * self.h).collect()
    }

    pub fn is_dirichlet(&self, flat: usize) -> bool {
        let multi = self.multi(flat);
        for axis in 0..self.d - 1 {
            if multi[axis].unsigned_abs() == self.n as u64 {
                return true;
            }
        }
        multi[self.d - 1] == -self.n
    }

    /// Nearest grid node of a point, or an extent error when the point is
    /// outside the box, above the surface, or inside the fixed boundary
    /// layer where absorption would be silently ignored.
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        let mut multi = Vec::with_capacity(self.d);
        for (axis, &c) in x.iter().enumerate() {
            let i = (c / self.h).round() as i64;
            let (lo, hi) = if axis == self.d - 1 { (-self.n, 0) } else { (-self.n, self.n) };
            if c.is_nan() || i < lo || i > hi || (axis == self.d - 1 && c > self.h / 2.0) {
                return Err(Error::Extent {
                    what: "atom".into(),
                    detail: format!("coordinate {c} on axis {axis} outside box of half-width {}", self.l),
                });
            }
            multi.push(i);
        }
        let flat = self.flatten(&multi);
        if self.is_dirichlet(flat) {
            return Err(Error::Extent {
                what: "atom".into(),
                detail: format!(
                    "point {x:?} falls in the fixed boundary layer; enlarge the box (L = {})",
                    self.l
                ),
            });
        }
        Ok(flat)
    }
}

/// Atom masses binned to their containing cells as densities `mass / h^d`.
pub fn deposit_density(mu: &DiscreteMeasure, grid: &HalfSpaceGrid) -> Result<Vec<f64>> {
    if mu.dim() != grid.d {
        return Err(Error::Dimension { expected: grid.d, got: mu.dim() });
    }
    let mut density = vec![0.0; grid.node_count()];
    let cell = grid.cell_volume();
    for atom in mu.atoms() {
        let node = grid.nearest_node(&atom.position)?;
        density[node] += atom.mass / cell;
    }
    Ok(density)
}

/// Grid function with values per node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: HalfSpaceGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values[self.grid.nearest_node(x)?])
    }
}

/// Solver output: the field plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub field: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

const CHECK_EVERY: usize = 10;

struct Stencil<'a> {
    grid: &'a HalfSpaceGrid,
    sigma: f64,
    a: f64,
    b: f64,
    f: GrowthFunction,
    rho: &'a [f64],
    inv_h2: f64,
}

impl Stencil<'_> {
    /// One lexicographic Gauss-Seidel sweep of the shifted fixed-point form.
    /// The shift `a b L_f` makes each update nondecreasing in the current
    /// values and nonincreasing in the absorption density, which is what
    /// drives the iterates monotonically down from the equilibrium.
    fn sweep(&self, u: &mut [f64]) {
        let g = self.grid;
        let shift = self.a * self.b * self.f.lipschitz();
        let diag = self.sigma * 2.0 * g.d as f64 * self.inv_h2 + shift;
        let surface_offset = g.n as usize;
        let mut multi = vec![0usize; g.d];
        for flat in 0..u.len() {
            if !self.is_unknown(&multi) {
                Self::advance(&mut multi, &g.sizes);
                continue;
            }
            let mut nb_sum = 0.0;
            for axis in 0..g.d - 1 {
                nb_sum += u[flat - g.strides[axis]] + u[flat + g.strides[axis]];
            }
            nb_sum += u[flat - 1];
            nb_sum += if multi[g.d - 1] == surface_offset { u[flat - 1] } else { u[flat + 1] };
            let ui = u[flat];
            let num = self.sigma * nb_sum * self.inv_h2 + shift * ui + self.a * self.f.value(self.b * ui);
            u[flat] = num / (diag + self.rho[flat]);
            Self::advance(&mut multi, &g.sizes);
        }
    }

    /// Sup-norm of the discrete equation over unknown nodes.
    fn residual(&self, u: &[f64]) -> f64 {
        let g = self.grid;
        let surface_offset = g.n as usize;
        let mut worst = 0.0f64;
        let mut multi = vec![0usize; g.d];
        for flat in 0..u.len() {
            if !self.is_unknown(&multi) {
                Self::advance(&mut multi, &g.sizes);
                continue;
            }
            let mut nb_sum = 0.0;
            for axis in 0..g.d - 1 {
                nb_sum += u[flat - g.strides[axis]] + u[flat + g.strides[axis]];
            }
            nb_sum += u[flat - 1];
            nb_sum += if multi[g.d - 1] == surface_offset { u[flat - 1] } else { u[flat + 1] };
            let lap = (nb_sum - 2.0 * g.d as f64 * u[flat]) * self.inv_h2;
            let r = self.sigma * lap + self.a * self.f.value(self.b * u[flat]) - u[flat] * self.rho[flat];
            worst = worst.max(r.abs());
            Self::advance(&mut multi, &g.sizes);
        }
        worst
    }

    fn is_unknown(&self, multi: &[usize]) -> bool {
        let g = self.grid;
        let edge = 2 * g.n as usize;
        for axis in 0..g.d - 1 {
            if multi[axis] == 0 || multi[axis] == edge {
                return false;
            }
        }
        multi[g.d - 1] != 0
    }

    fn advance(multi: &mut [usize], sizes: &[usize]) {
        for axis in (0..multi.len()).rev() {
            multi[axis] += 1;
            if multi[axis] < sizes[axis] {
                return;
            }
            multi[axis] = 0;
        }
    }
}

/// Maximal solution of `sigma lap(u) + a f(b u) - u mu = 0` on the grid,
/// by monotone iteration from the equilibrium `u = M/b`. Runs
/// single-threaded; concurrency belongs to independent solves.
pub fn solve_state(
    mu: &DiscreteMeasure,
    f: &GrowthFunction,
    grid: &HalfSpaceGrid,
    sigma: f64,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<StateSolution> {
    for (name, v) in [("sigma", sigma), ("a", a), ("b", b), ("tol", tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} = {v} must be positive")));
        }
    }
    let rho = deposit_density(mu, grid)?;
    let stencil = Stencil {
        grid,
        sigma,
        a,
        b,
        f: *f,
        rho: &rho,
        inv_h2: 1.0 / (grid.h * grid.h),
    };
    let mut values = vec![f.carrying_value() / b; grid.node_count()];
    let mut history = Vec::new();
    let mut sweeps = 0usize;
    loop {
        let residual = stencil.residual(&values);
        history.push(residual);
        if residual <= tol {
            return Ok(StateSolution {
                field: ScalarField { grid: grid.clone(), values },
                iterations: sweeps,
                residual,
            });
        }
        if sweeps >= max_iter {
            let tail = history.split_off(history.len().saturating_sub(16));
            return Err(Error::SolveDiverged { iterations: sweeps, history: tail });
        }
        let burst = CHECK_EVERY.min(max_iter - sweeps);
        for _ in 0..burst {
            stencil.sweep(&mut values);
        }
        sweeps += burst;
    }
}

/// `H(u, mu) = sum of mass * u(cell of atom)`.
pub fn harvest_value(field: &ScalarField, mu: &DiscreteMeasure) -> Result<f64> {
    let mut total = 0.0;
    for atom in mu.atoms() {
        total += atom.mass * field.value_at(&atom.position)?;
    }
    Ok(total)
}

/// Node-weight quadrature of the growth side, `a * sum f(b u) h^d`.
/// At the discrete solution this matches [`harvest_value`] up to the
/// boundary flux, which shrinks first order in `h`.
pub fn growth_integral(field: &ScalarField, f: &GrowthFunction, a: f64, b: f64) -> f64 {
    let cell = field.grid.cell_volume();
    field.values.iter().map(|&u| a * f.value(b * u) * cell).sum::<f64>()
}

/// Field emission: one `x1,..,xd,u` row per node.
pub fn emit_field_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::new();
    for axis in 0..g.d {
        out.push_str(&format!("x{},", axis + 1));
    }
    out.push_str("u\n");
    for flat in 0..g.node_count() {
        for c in g.node_position(flat) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{}\n", field.values[flat]));
    }
    out
}

/// Rebuilds a field from its CSV emission, re-deriving the grid from the
/// node coordinates and checking that the lattice is complete.
pub fn parse_field_csv(text: &str) -> Result<ScalarField> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse { row, msg: format!("expected at least 3 fields, got {}", fields.len()) });
        }
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|s| s.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && dim.is_none() => {
                // Single header row.
                dim = Some(fields.len() - 1);
                continue;
            }
            Err(e) => return Err(Error::Parse { row, msg: format!("bad number: {e}") }),
        };
        match dim {
            None => dim = Some(values.len() - 1),
            Some(d) if d + 1 != values.len() => {
                return Err(Error::Parse { row, msg: format!("expected {} fields, got {}", d + 1, values.len()) })
            }
            _ => {}
        }
        rows.push((row, values));
    }
    let d = dim.ok_or(Error::Parse { row: 0, msg: "empty field file".into() })?;
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, msg: "no field rows".into() });
    }

    // Spacing is the smallest positive gap between distinct coordinates.
    let mut h = f64::INFINITY;
    let mut l = 0.0f64;
    for axis in 0..d {
        let mut coords: Vec<f64> = rows.iter().map(|(_, v)| v[axis]).collect();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in coords.windows(2) {
            let gap = w[1] - w[0];
            if gap > 1e-12 {
                h = h.min(gap);
            }
        }
        l = l.max(coords.last().unwrap().abs()).max(coords[0].abs());
    }
    if !h.is_finite() {
        return Err(Error::Parse { row: 0, msg: "cannot infer grid spacing".into() });
    }
    let grid = HalfSpaceGrid::new(d, l, h)?;
    let mut values = vec![f64::NAN; grid.node_count()];
    for (row, fields) in &rows {
        let mut multi = Vec::with_capacity(d);
        for axis in 0..d {
            let idx = (fields[axis] / h).round();
            if (fields[axis] - idx * h).abs() > 1e-9 * l.max(1.0) {
                return Err(Error::Parse { row: *row, msg: format!("coordinate {} off-lattice", fields[axis]) });
            }
            multi.push(idx as i64);
        }
        let flat = grid.flatten(&multi);
        if !values[flat].is_nan() {
            return Err(Error::Parse { row: *row, msg: "duplicate node".into() });
        }
        values[flat] = fields[d];
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse { row: 0, msg: "incomplete lattice".into() });
    }
    Ok(ScalarField { grid, values })
}
