//! Entropy solutions of `u_t + f(u)_x = 0` computed without the kinetic
//! machinery: a Godunov finite-volume scheme and closed-form Riemann
//! solutions for convex fluxes.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::Grid;

const RANGE_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;

/// Cell averages of a scalar state on the `x` part of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProfile {
    grid: Grid,
    time: f64,
    u: Vec<f64>,
}

impl ScalarProfile {
    pub fn new(grid: Grid, u: Vec<f64>, time: f64) -> Result<Self> {
        if u.len() != grid.nx() {
            return Err(Error::Shape(format!("profile has {} cells, grid has {}", u.len(), grid.nx())));
        }
        if let Some((i, &bad)) = u
            .iter()
            .enumerate()
            .find(|(_, &w)| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&w))
        {
            return Err(Error::Domain(format!("u[{i}] = {bad} outside [0, 1]")));
        }
        Ok(ScalarProfile { grid, time, u })
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.xs().into_iter().map(f).collect(), time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }

    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.u.iter().sum::<f64>()
    }

    /// Averages blocks of `factor` cells onto a grid with `nx / factor` cells.
    pub fn coarsened(&self, factor: usize) -> Result<ScalarProfile> {
        if factor == 0 || self.grid.nx() % factor != 0 || self.grid.nv() % factor != 0 {
            return Err(Error::Shape(format!(
                "cannot coarsen {}x{} grid by {factor}",
                self.grid.nx(),
                self.grid.nv()
            )));
        }
        let grid = Grid::new(self.grid.half_length(), self.grid.nx() / factor, self.grid.nv() / factor)?;
        let u = self
            .u
            .chunks_exact(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        Ok(ScalarProfile {
            grid,
            time: self.time,
            u,
        })
    }
}

/// `dx Σ |a - b|` over cells.
pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} cells", a.len(), b.len())));
    }
    Ok(dx * a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// Same as [`l1_distance`] restricted to cells whose center lies in `window`.
pub fn l1_distance_on(a: &[f64], b: &[f64], grid: &Grid, window: (f64, f64)) -> Result<f64> {
    if a.len() != grid.nx() || b.len() != grid.nx() {
        return Err(Error::Shape("profile length does not match grid".into()));
    }
    Ok(grid.dx()
        * (0..grid.nx())
            .filter(|&i| grid.x(i) > window.0 && grid.x(i) < window.1)
            .map(|i| (a[i] - b[i]).abs())
            .sum::<f64>())
}

/// Godunov flux with min/max of `f` found on the `v`-cell edges plus the endpoints.
struct GodunovFlux<'a> {
    flux: &'a FluxModel,
    nv: usize,
    edge_values: Vec<f64>,
}

impl<'a> GodunovFlux<'a> {
    fn new(flux: &'a FluxModel, nv: usize) -> Self {
        let edge_values = (0..=nv).map(|k| flux.eval(k as f64 / nv as f64)).collect();
        GodunovFlux { flux, nv, edge_values }
    }

    /// Edge indices strictly inside `(a, b)`.
    fn interior(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let n = self.nv as f64;
        let lo = ((a * n).floor() + 1.0).max(0.0) as usize;
        let hi = ((b * n).ceil() - 1.0).clamp(-1.0, n) as isize;
        lo..((hi + 1).max(lo as isize) as usize)
    }

    fn eval(&self, ul: f64, ur: f64) -> f64 {
        let (fl, fr) = (self.flux.eval(ul), self.flux.eval(ur));
        if ul <= ur {
            self.edge_values[self.interior(ul, ur)]
                .iter()
                .fold(fl.min(fr), |m, &f| m.min(f))
        } else {
            self.edge_values[self.interior(ur, ul)]
                .iter()
                .fold(fl.max(fr), |m, &f| m.max(f))
        }
    }
}

/// Largest stable Godunov step on `grid`.
pub fn godunov_max_dt(flux: &FluxModel, grid: &Grid) -> f64 {
    let c = flux.max_speed();
    if c == 0.0 {
        f64::INFINITY
    } else {
        grid.dx() / c
    }
}

pub fn godunov_step(u: &ScalarProfile, flux: &FluxModel, dt: f64) -> Result<ScalarProfile> {
    godunov_step_with(&GodunovFlux::new(flux, u.grid.nv()), u, dt)
}

fn godunov_step_with(num: &GodunovFlux<'_>, u: &ScalarProfile, dt: f64) -> Result<ScalarProfile> {
    let grid = u.grid;
    let limit = godunov_max_dt(num.flux, &grid);
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, limit });
    }
    let n = grid.nx();
    // face[i] is the flux through the right edge of cell i.
    let face: Vec<f64> = (0..n).map(|i| num.eval(u.u[i], u.u[(i + 1) % n])).collect();
    let r = dt / grid.dx();
    let next = (0..n)
        .map(|i| {
            let left = face[(i + n - 1) % n];
            (u.u[i] - r * (face[i] - left)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ScalarProfile {
        grid,
        time: u.time + dt,
        u: next,
    })
}

/// Runs Godunov steps at Courant number `cfl` and lands exactly on `u0.time() + horizon`.
pub fn godunov_evolve(u0: &ScalarProfile, flux: &FluxModel, horizon: f64, cfl: f64) -> Result<ScalarProfile> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("time horizon must be non-negative, got {horizon}")));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Domain(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    let num = GodunovFlux::new(flux, u0.grid.nv());
    let limit = godunov_max_dt(flux, &u0.grid);
    let t_end = u0.time + horizon;
    let mut u = u0.clone();
    if !limit.is_finite() {
        u.time = t_end;
        return Ok(u);
    }
    let dt0 = cfl * limit;
    let eps = 1e-12 * t_end.abs().max(horizon);
    while u.time < t_end - eps {
        let dt = dt0.min(t_end - u.time);
        u = godunov_step_with(&num, &u, dt)?;
    }
    u.time = t_end;
    Ok(u)
}

/// Self-similar solution of a Riemann problem for a convex flux.
#[derive(Debug, Clone)]
pub struct RiemannSolver<'a> {
    flux: &'a FluxModel,
    ul: f64,
    ur: f64,
    shock_speed: Option<f64>,
}

impl<'a> RiemannSolver<'a> {
    pub fn new(flux: &'a FluxModel, ul: f64, ur: f64) -> Result<Self> {
        if !flux.is_convex() {
            return Err(Error::Domain("exact Riemann solutions need a convex flux".into()));
        }
        for w in [ul, ur] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Domain(format!("state {w} outside [0, 1]")));
            }
        }
        let shock_speed = if ul > ur { Some(flux.shock_speed(ul, ur)?) } else { None };
        Ok(RiemannSolver {
            flux,
            ul,
            ur,
            shock_speed,
        })
    }

    pub fn shock_speed(&self) -> Option<f64> {
        self.shock_speed
    }

    /// `(slowest, fastest)` wave speed.
    pub fn wave_speeds(&self) -> (f64, f64) {
        match self.shock_speed {
            Some(s) => (s, s),
            None if self.ul == self.ur => (0.0, 0.0),
            None => (self.flux.deriv(self.ul), self.flux.deriv(self.ur)),
        }
    }

    /// `u(ξ)` with `ξ = x / t`.
    pub fn sample(&self, xi: f64) -> f64 {
        if self.ul == self.ur {
            return self.ul;
        }
        if let Some(s) = self.shock_speed {
            return if xi < s { self.ul } else { self.ur };
        }
        let (lo, hi) = (self.flux.deriv(self.ul), self.flux.deriv(self.ur));
        if xi <= lo {
            return self.ul;
        }
        if xi >= hi {
            return self.ur;
        }
        let (mut a, mut b) = (self.ul, self.ur);
        while b - a > BISECTION_TOL {
            let m = 0.5 * (a + b);
            if self.flux.deriv(m) < xi {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

pub fn exact_riemann_convex(flux: &FluxModel, ul: f64, ur: f64, xi: f64) -> Result<f64> {
    Ok(RiemannSolver::new(flux, ul, ur)?.sample(xi))
}

/// Periodic data equal to `u_plus` on `[-L, 0] ∪ [L/2, L]` and `u_minus` on `(0, L/2)`.
pub fn shock_rarefaction_data(grid: &Grid, u_minus: f64, u_plus: f64) -> Result<ScalarProfile> {
    let l = grid.half_length();
    ScalarProfile::from_fn(*grid, 0.0, |x| if x > 0.0 && x < 0.5 * l { u_minus } else { u_plus })
}

/// Exact solution of [`shock_rarefaction_data`] (`u_plus > u_minus`) before the shock and fan meet.
pub fn exact_shock_rarefaction(
    flux: &FluxModel,
    u_minus: f64,
    u_plus: f64,
    t: f64,
    grid: &Grid,
) -> Result<ScalarProfile> {
    if !(u_plus > u_minus) {
        return Err(Error::Domain(format!("need u_plus > u_minus, got {u_plus} <= {u_minus}")));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return shock_rarefaction_data(grid, u_minus, u_plus);
    }
    let l = grid.half_length();
    let shock = RiemannSolver::new(flux, u_plus, u_minus)?;
    let fan = RiemannSolver::new(flux, u_minus, u_plus)?;
    let s = shock.shock_speed().unwrap_or(0.0) * t;
    let (lo, hi) = fan.wave_speeds();
    let (fan_lo, fan_hi) = (0.5 * l + lo * t, 0.5 * l + hi * t);
    if !(s < fan_lo && fan_hi - 2.0 * l < s) {
        return Err(Error::OutOfValidity(format!("shock and rarefaction interact before t = {t}")));
    }
    let c_left = 0.5 * (fan_hi - 2.0 * l + s);
    let c_right = 0.5 * (s + fan_lo);
    ScalarProfile::from_fn(*grid, t, |x| {
        let x = c_left + (x - c_left).rem_euclid(2.0 * l);
        if x < c_right {
            shock.sample(x / t)
        } else {
            fan.sample((x - 0.5 * l) / t)
        }
    })
}

/// Square wave `u = 0` on `(0, 1)`, `1` elsewhere, under `f = (u - 1/2)^2`:
/// a stationary shock at `0` and a fan centred at `1`, valid until the fan reaches the shock at `t = 1`.
pub fn composite_exact_scl1(t: f64, grid: &Grid) -> Result<ScalarProfile> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfValidity(format!(
            "square-wave solution is closed-form only for t in [0, 1], got {t}"
        )));
    }
    if grid.half_length() < 2.0 {
        return Err(Error::Domain(format!(
            "half-length {} cannot hold the wave pattern (need >= 2)",
            grid.half_length()
        )));
    }
    let flux = FluxModel::shifted_square();
    let fan = RiemannSolver::new(&flux, 0.0, 1.0)?;
    ScalarProfile::from_fn(*grid, t, |x| {
        if x <= 0.0 {
            1.0
        } else if t == 0.0 {
            if x < 1.0 {
                0.0
            } else {
                1.0
            }
        } else {
            fan.sample((x - 1.0) / t)
        }
    })
}

pub fn write_profile_csv<W: Write>(profile: &ScalarProfile, mut out: W) -> Result<()> {
    writeln!(out, "x,u")?;
    for (i, u) in profile.u.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e}", profile.grid.x(i), u)?;
    }
    Ok(())
}

/// Reads `x,u` rows; `nv` fixes the velocity resolution of the returned grid.
pub fn read_profile_csv<R: BufRead>(input: R, nv: usize) -> Result<ScalarProfile> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "x,u" => {}
        other => return Err(Error::Parse(format!("expected header x,u, got {other:?}"))),
    }
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut num = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", n + 2)))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {what}: {e}", n + 2)))
        };
        xs.push(num("x")?);
        us.push(num("u")?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse("profile needs at least two rows".into()));
    }
    let dx = xs[1] - xs[0];
    let grid = Grid::new(0.5 * dx * xs.len() as f64, xs.len(), nv)?;
    ScalarProfile::new(grid, us, 0.0)
}
