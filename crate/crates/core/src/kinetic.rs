//! Kinetic densities `Y(x, v)` on a periodic cell-centered grid, and the
//! conversions between scalar profiles and kinetic densities.
//!
//! Velocities are sampled at cell centers `v_j = (j + 1/2) dv` only, never at
//! the endpoints `0` or `1`, so the lift `Y = 1{v >= u}` is unambiguous and a
//! state `u = 1` lifts to an all-zero column.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic `x` grid on `[-L, L]` times a `v` grid on `[0, 1]`, both cell-centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    nx: usize,
    nv: usize,
}

impl Grid {
    pub fn new(half_length: f64, nx: usize, nv: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Domain(format!("half-length must be positive, got {half_length}")));
        }
        if nx < 4 || nv < 4 {
            return Err(Error::Domain(format!("grid needs nx, nv >= 4, got nx={nx}, nv={nv}")));
        }
        Ok(Grid { half_length, nx, nv })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        1.0 / self.nv as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + (i as f64 + 0.5) * self.dx()
    }

    pub fn v(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dv()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn vs(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    /// Same domain with `nx` and `nv` multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.half_length, self.nx * factor, self.nv * factor)
    }

    /// Periodic wrap of a signed cell index.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }
}

/// `Y[i][j]` stored row-major: the `v`-column at `x_i` is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    grid: Grid,
    time: f64,
    values: Vec<f64>,
}

impl KineticField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.nx * grid.nv {
            return Err(Error::Shape(format!(
                "expected {}x{} = {} values, got {}",
                grid.nx,
                grid.nv,
                grid.nx * grid.nv,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|y| !y.is_finite()) {
            return Err(Error::Domain(format!("non-finite kinetic value at flat index {k}")));
        }
        Ok(KineticField { grid, time, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        KineticField {
            grid,
            time: 0.0,
            values: vec![0.0; grid.nx * grid.nv],
        }
    }

    /// Builds a field from `f(x_i, v_j)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.nv);
        for i in 0..grid.nx {
            let x = grid.x(i);
            values.extend((0..grid.nv).map(|j| f(x, grid.v(j))));
        }
        KineticField {
            grid,
            time: 0.0,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nv + j]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let nv = self.grid.nv;
        &self.values[i * nv..(i + 1) * nv]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let nv = self.grid.nv;
        &mut self.values[i * nv..(i + 1) * nv]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.grid.nv)
    }

    pub fn same_grid(&self, other: &KineticField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    fn cell_area(&self) -> f64 {
        self.grid.dx() * self.grid.dv()
    }

    /// `∫∫ Y dx dv` by the midpoint rule.
    pub fn mass(&self) -> f64 {
        self.cell_area() * self.values.iter().sum::<f64>()
    }

    /// `∫∫ Y^2 dx dv` by the midpoint rule.
    pub fn l2_squared(&self) -> f64 {
        self.cell_area() * self.values.iter().map(|y| y * y).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_squared().sqrt()
    }

    /// Discrete `L^2(x, v)` distance.
    pub fn distance(&self, other: &KineticField) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((self.cell_area() * s).sqrt())
    }

    /// `‖D⁺_x Y‖` with the periodic forward difference `(Y[i+1] - Y[i]) / dx`.
    pub fn forward_dx_norm(&self) -> f64 {
        let nx = self.grid.nx;
        let dx = self.grid.dx();
        let mut s = 0.0;
        for i in 0..nx {
            let next = self.column((i + 1) % nx);
            let here = self.column(i);
            s += next
                .iter()
                .zip(here)
                .map(|(a, b)| ((a - b) / dx).powi(2))
                .sum::<f64>();
        }
        (self.cell_area() * s).sqrt()
    }

    /// Periodic centered difference `(Y[i+1] - Y[i-1]) / (2 dx)` of column `i`.
    pub fn centered_dx_column(&self, i: usize) -> Vec<f64> {
        let right = self.column(self.grid.wrap(i as isize + 1));
        let left = self.column(self.grid.wrap(i as isize - 1));
        let two_dx = 2.0 * self.grid.dx();
        right.iter().zip(left).map(|(r, l)| (r - l) / two_dx).collect()
    }

    /// First place where a column decreases by more than `tol`, as
    /// `(column, index, drop)`.
    pub fn first_monotonicity_violation(&self, tol: f64) -> Option<(usize, usize, f64)> {
        self.columns().enumerate().find_map(|(i, col)| {
            col.windows(2)
                .position(|w| w[0] - w[1] > tol)
                .map(|j| (i, j + 1, col[j] - col[j + 1]))
        })
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.first_monotonicity_violation(tol).is_none()
    }

    /// Periodic shift by `k` cells in `x`: `out[i] = Y[i - k]`.
    pub fn shifted_x(&self, k: isize) -> KineticField {
        let mut out = self.clone();
        for i in 0..self.grid.nx {
            let src = self.grid.wrap(i as isize - k);
            out.column_mut(i).copy_from_slice(self.column(src));
        }
        out
    }
}

/// Lift `Y[i][j] = 1{v_j >= u0[i]}`.
pub fn lift_function(u0: &[f64], grid: &Grid) -> Result<KineticField> {
    if u0.len() != grid.nx {
        return Err(Error::Shape(format!("profile has {} cells, grid has {}", u0.len(), grid.nx)));
    }
    if let Some((i, u)) = u0.iter().enumerate().find(|(_, u)| !(0.0..=1.0).contains(*u)) {
        return Err(Error::Domain(format!("u0[{i}] = {u} outside [0, 1]")));
    }
    let mut field = KineticField::zeros(*grid);
    for (i, &u) in u0.iter().enumerate() {
        for (j, y) in field.column_mut(i).iter_mut().enumerate() {
            *y = if grid.v(j) >= u { 1.0 } else { 0.0 };
        }
    }
    Ok(field)
}

/// One atom of a finite probability measure on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub value: f64,
}

/// Lift of per-cell atomic measures: `Y[i][j] = ν_i([0, v_j])`.
pub fn lift_measure(mixtures: &[Vec<Atom>], grid: &Grid) -> Result<KineticField> {
    if mixtures.len() != grid.nx {
        return Err(Error::Shape(format!(
            "{} mixtures for {} cells",
            mixtures.len(),
            grid.nx
        )));
    }
    let mut field = KineticField::zeros(*grid);
    for (i, atoms) in mixtures.iter().enumerate() {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights at cell {i} sum to {total}, not 1")));
        }
        if let Some(a) = atoms
            .iter()
            .find(|a| a.weight < 0.0 || !(0.0..=1.0).contains(&a.value))
        {
            return Err(Error::Domain(format!(
                "atom ({}, {}) at cell {i} has negative weight or value outside [0, 1]",
                a.weight, a.value
            )));
        }
        for (j, y) in field.column_mut(i).iter_mut().enumerate() {
            let v = grid.v(j);
            *y = atoms.iter().filter(|a| a.value <= v).map(|a| a.weight).sum();
        }
    }
    Ok(field)
}

/// Level-set profile `u_i = sup { v_j : Y[i][j] <= λ }` on the `v` nodes.
///
/// Returns `0` when the first node already exceeds `λ` and `1` when no node does.
pub fn extract_level(field: &KineticField, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("level {lambda} outside (0, 1)")));
    }
    let grid = field.grid();
    Ok(field
        .columns()
        .map(|col| {
            let below = col.iter().take_while(|&&y| y <= lambda).count();
            match below {
                0 => 0.0,
                n if n == grid.nv() => 1.0,
                n => grid.v(n - 1),
            }
        })
        .collect())
}

/// Mollifier shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierKernel {
    /// `∝ 1 + cos(π x / ε)` on `[-ε, ε]`.
    CosineBump,
    /// Smooth, equal to a constant on `[-ε, ε]`, supported on `[-2ε, 2ε]`.
    Plateau,
}

impl std::str::FromStr for MollifierKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_bump" => Ok(MollifierKernel::CosineBump),
            "plateau" => Ok(MollifierKernel::Plateau),
            other => Err(Error::Parse(format!(
                "unknown kernel `{other}` (expected cosine_bump or plateau)"
            ))),
        }
    }
}

impl MollifierKernel {
    fn support(self, eps: f64) -> f64 {
        match self {
            MollifierKernel::CosineBump => eps,
            MollifierKernel::Plateau => 2.0 * eps,
        }
    }

    fn profile(self, x: f64, eps: f64) -> f64 {
        let a = x.abs();
        match self {
            MollifierKernel::CosineBump => {
                if a >= eps {
                    0.0
                } else {
                    1.0 + (std::f64::consts::PI * a / eps).cos()
                }
            }
            MollifierKernel::Plateau => {
                if a <= eps {
                    1.0
                } else if a >= 2.0 * eps {
                    0.0
                } else {
                    smooth_step_down((a - eps) / eps)
                }
            }
        }
    }
}

/// C^∞ transition from 1 at `s = 0` to 0 at `s = 1`.
fn smooth_step_down(s: f64) -> f64 {
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    g(1.0 - s) / (g(1.0 - s) + g(s))
}

/// Discrete kernel weights `w[k]` for offsets `k - K`, `k = 0..=2K`, with unit sum.
pub fn kernel_weights(kernel: MollifierKernel, eps: f64, dx: f64) -> Result<Vec<f64>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {eps}")));
    }
    if eps < 2.0 * dx {
        return Err(Error::Resolution { eps, dx });
    }
    let half = (kernel.support(eps) / dx).floor() as isize;
    let mut w: Vec<f64> = (-half..=half)
        .map(|k| kernel.profile(k as f64 * dx, eps))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Periodic convolution of every `v`-slice with the discrete kernel.
pub fn mollify_x(field: &KineticField, eps: f64, kernel: MollifierKernel) -> Result<KineticField> {
    let grid = *field.grid();
    if eps >= grid.half_length() / 8.0 {
        return Err(Error::Domain(format!(
            "mollifier width {eps} must be below L/8 = {}",
            grid.half_length() / 8.0
        )));
    }
    let w = kernel_weights(kernel, eps, grid.dx())?;
    let half = (w.len() / 2) as isize;
    let mut out = KineticField::zeros(grid).with_time(field.time());
    for i in 0..grid.nx() {
        let dst = out.column_mut(i);
        for (k, &wk) in w.iter().enumerate() {
            let src = field.column(grid.wrap(i as isize - (k as isize - half)));
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    Ok(out)
}

/// Nonnegative `m(x, v)` with `Y_t + f_v ∂_x Y = -∂_v m` for one split step.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectMeasure {
    grid: Grid,
    time: f64,
    values: Vec<f64>,
}

impl DefectMeasure {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nv + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_i |m[i][nv - 1]|`, zero for a mean-preserving projection.
    pub fn top_abs_max(&self) -> f64 {
        self.values
            .chunks_exact(self.grid.nv)
            .map(|c| c[c.len() - 1].abs())
            .fold(0.0, f64::max)
    }
}

/// `m[i][j] = -dv Σ_{k<=j} R[i][k]` with `R = (projected - transported) / dt`.
pub fn defect_measure(transported: &KineticField, projected: &KineticField, dt: f64) -> Result<DefectMeasure> {
    transported.same_grid(projected)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let grid = *projected.grid();
    let dv = grid.dv();
    let mut values = Vec::with_capacity(grid.nx * grid.nv);
    for (p, t) in projected.columns().zip(transported.columns()) {
        let (mut acc, mut comp) = (0.0, 0.0);
        for (a, b) in p.iter().zip(t) {
            let (s, e) = crate::cone::two_sum(acc, a - b);
            acc = s;
            comp += e;
            values.push(-dv * (acc + comp) / dt);
        }
    }
    Ok(DefectMeasure {
        grid,
        time: projected.time(),
        values,
    })
}

/// Writes `x,v,Y` rows, `x` outer and `v` inner, 17 significant digits.
pub fn write_field_csv<W: Write>(field: &KineticField, mut out: W) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "x,v,Y")?;
    for i in 0..grid.nx() {
        let x = grid.x(i);
        for (j, y) in field.column(i).iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x, grid.v(j), y)?;
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; the grid is inferred from
/// the distinct `x` and `v` coordinates.
pub fn read_field_csv<R: BufRead>(input: R) -> Result<KineticField> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "x,v,Y" {
        return Err(Error::Parse(format!("expected header `x,v,Y`, got `{header}`")));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut nv: Option<usize> = None;
    let mut current_v = 0usize;
    let mut first_v: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", lineno + 2)))
        };
        let mut parts = line.split(',');
        let (Some(x), Some(v), Some(y), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 2)));
        };
        let (x, v, y) = (parse(x)?, parse(v)?, parse(y)?);
        if xs.last() != Some(&x) {
            if let Some(n) = nv {
                if current_v != n {
                    return Err(Error::Parse(format!("line {}: ragged v-column", lineno + 2)));
                }
            } else if !xs.is_empty() {
                nv = Some(current_v);
            }
            xs.push(x);
            current_v = 0;
        }
        if nv.is_none() {
            first_v.push(v);
        }
        current_v += 1;
        values.push(y);
    }
    let nv = nv.unwrap_or(current_v);
    if current_v != nv || xs.len() < 2 {
        return Err(Error::Parse("truncated or degenerate field".into()));
    }
    let nx = xs.len();
    let dx = (xs[nx - 1] - xs[0]) / (nx - 1) as f64;
    let half_length = 0.5 * dx * nx as f64;
    let grid = Grid::new(half_length, nx, nv)?;
    if first_v.len() != nv {
        return Err(Error::Parse("inconsistent v-grid".into()));
    }
    KineticField::new(grid, values, 0.0)
}
