//! Packaged runs: config-driven simulation, the smoothed shock/rarefaction
//! study, the square-wave counterexample, and comparison against Godunov.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::cone::{interaction_field, project_tangent, transport_column, FlatTolerance, InteractionProfile};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::{extract_level, lift_function, mollify_x, write_field_csv, Grid, KineticField, MollifierKernel};
use crate::reference::{composite_exact_scl1, godunov_evolve, l1_distance, shock_rarefaction_data};
use crate::report::Report;
use crate::solver::{evolve, Diagnostics, EvolveOptions, OutputTimes, Trajectory};

/// Levels used when comparing extracted profiles with reference solutions.
pub const COMPARE_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

/// First downward crossing of `level` by `u` between cell centers inside `window`,
/// linearly interpolated.
pub fn shock_position(u: &[f64], grid: &Grid, window: (f64, f64), level: f64) -> Option<f64> {
    (0..grid.nx().saturating_sub(1))
        .filter(|&i| grid.x(i) >= window.0 && grid.x(i + 1) <= window.1)
        .find(|&i| u[i] >= level && u[i + 1] < level)
        .map(|i| {
            let s = (u[i] - level) / (u[i] - u[i + 1]);
            grid.x(i) + s * grid.dx()
        })
}

/// Checks run on every diagnostics series; returns whether all passed.
pub fn check_solver_invariants(report: &mut Report, diag: &Diagnostics, prefix: &str) -> bool {
    let recs = &diag.records;
    let Some(first) = recs.first() else {
        return true;
    };
    let mass_drift = recs.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max);
    let l2_rise = recs
        .windows(2)
        .map(|w| w[1].l2_squared - w[0].l2_squared)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let grad_rise = recs
        .windows(2)
        .map(|w| (w[1].grad_x_norm - w[0].grad_x_norm) / w[0].grad_x_norm.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let defect_min = recs.iter().map(|r| r.defect_min).fold(0.0, f64::min);
    let defect_top = recs.iter().map(|r| r.defect_top).fold(0.0, f64::max);
    let scale = first.mass.abs().max(1.0);
    [
        report.assert_at_most(&format!("{prefix}mass_drift"), 1e-12 * scale, mass_drift),
        report.assert_at_most(&format!("{prefix}l2_squared_increase"), 1e-12 * first.l2_squared.max(1.0), l2_rise),
        report.assert_at_most(&format!("{prefix}grad_x_norm_relative_increase"), 1e-12, grad_rise),
        report.assert_at_least(&format!("{prefix}defect_min"), -1e-10, defect_min),
        report.assert_at_most(&format!("{prefix}defect_top"), 1e-12, defect_top),
    ]
    .iter()
    .all(|&p| p)
}

fn write_diagnostics(diag: &Diagnostics, path: &Path) -> Result<()> {
    diag.write_csv(BufWriter::new(fs::File::create(path)?))
}

fn write_interaction(profile: &InteractionProfile, grid: &Grid, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "x,interaction")?;
    for (i, p) in profile.profile.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e}", grid.x(i), p)?;
    }
    Ok(())
}

pub struct SimulationOutput {
    pub report: Report,
    pub trajectory: Trajectory,
    pub interaction_t0: InteractionProfile,
}

/// Evolves the configured data and checks the solver invariants.
pub fn run_simulation(cfg: &RunConfig) -> Result<SimulationOutput> {
    let y0 = cfg.initial_field()?;
    let tol = cfg.flat_tolerance();
    let interaction_t0 = interaction_field(&y0, &cfg.flux, tol)?;
    let opts = EvolveOptions {
        cfl: cfg.cfl,
        output_times: OutputTimes::At(cfg.outputs.clone()),
        tau_flat: tol,
        ..EvolveOptions::default()
    };
    let trajectory = evolve(&y0, &cfg.flux, cfg.horizon, &opts)?;
    let mut report = Report::new(cfg.resolved().clone());
    let first = trajectory.diagnostics.initial().copied().unwrap_or_default();
    let last = trajectory.diagnostics.records.last().copied().unwrap_or_default();
    report.measure("steps", trajectory.diagnostics.steps().len());
    report.measure("snapshot_times", trajectory.snapshot_times());
    report.measure("initial", first);
    report.measure("final", last);
    report.measure("interaction_total_t0", interaction_t0.total);
    check_solver_invariants(&mut report, &trajectory.diagnostics, "");
    let monotone = trajectory.snapshots.iter().all(|s| s.is_monotone(0.0)) && trajectory.final_state.is_monotone(0.0);
    report.assert("snapshots_monotone_in_v", "true", f64::from(u8::from(monotone)), 0.0, monotone);
    Ok(SimulationOutput {
        report,
        trajectory,
        interaction_t0,
    })
}

pub fn write_simulation(out: &SimulationOutput, dir: &Path) -> Result<()> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for (k, s) in out.trajectory.snapshots.iter().enumerate() {
        write_field_csv(s, BufWriter::new(fs::File::create(snaps.join(format!("snapshot_{k:03}.csv")))?))?;
    }
    write_diagnostics(&out.trajectory.diagnostics, &dir.join("diagnostics.csv"))?;
    write_interaction(&out.interaction_t0, out.trajectory.initial.grid(), &dir.join("interaction_t0.csv"))?;
    out.report.write_json(&dir.join("report.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockRarefactionParams {
    pub flux: FluxModel,
    pub u_minus: f64,
    pub u_plus: f64,
    pub half_length: f64,
    pub eps: f64,
    pub nx: usize,
    pub nv: usize,
    pub horizon: f64,
    pub kernel: MollifierKernel,
    pub cfl: f64,
}

impl Default for ShockRarefactionParams {
    fn default() -> Self {
        ShockRarefactionParams {
            flux: FluxModel::burgers(),
            u_minus: 0.0,
            u_plus: 1.0,
            half_length: 4.0,
            eps: 0.25,
            nx: 256,
            nv: 256,
            horizon: 0.5,
            kernel: MollifierKernel::CosineBump,
            cfl: 0.5,
        }
    }
}

impl ShockRarefactionParams {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.nx, self.nv)
    }

    /// Lifted and mollified data, `u_plus` on `[-L, 0] ∪ [L/2, L]` and `u_minus` on `(0, L/2)`.
    pub fn initial_field(&self) -> Result<KineticField> {
        if !(self.u_plus > self.u_minus) {
            return Err(Error::Domain(format!(
                "need u_plus > u_minus, got {} <= {}",
                self.u_plus, self.u_minus
            )));
        }
        if !(self.eps > 0.0 && self.eps < self.half_length / 8.0) {
            return Err(Error::Domain(format!(
                "need 0 < eps < L/8 = {}, got {}",
                self.half_length / 8.0,
                self.eps
            )));
        }
        let grid = self.grid()?;
        let u = shock_rarefaction_data(&grid, self.u_minus, self.u_plus)?;
        mollify_x(&lift_function(u.values(), &grid)?, self.eps, self.kernel)
    }

    fn to_config(&self) -> Vec<(String, serde_json::Value)> {
        vec![
            ("flux".into(), serde_json::to_value(&self.flux).unwrap_or_default()),
            ("u_minus".into(), json!(self.u_minus)),
            ("u_plus".into(), json!(self.u_plus)),
            ("grid.L".into(), json!(self.half_length)),
            ("grid.nx".into(), json!(self.nx)),
            ("grid.nv".into(), json!(self.nv)),
            ("mollify.eps".into(), json!(self.eps)),
            ("mollify.kernel".into(), serde_json::to_value(self.kernel).unwrap_or_default()),
            ("time.T".into(), json!(self.horizon)),
            ("time.cfl".into(), json!(self.cfl)),
        ]
    }
}

/// Structure of the tangent-cone minimizer across the shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockBlockAnalysis {
    /// Column with the steepest `x`-gradient on the block.
    pub column: usize,
    pub sigma_exact: f64,
    /// Mean of `f_v(v_j)` over the block `u_minus <= v_j < u_plus`.
    pub sigma_discrete: f64,
    /// `|sigma_discrete - sigma_exact| / max(|sigma_exact|, Lip f)`.
    pub sigma_relative_error: f64,
    /// Largest `|V_j + sigma_discrete D_j| / (max(|sigma_discrete|, Lip f) |D_j|)` on the block over shock columns.
    pub minimizer_deviation: f64,
    /// Interaction value at `column` divided by `D^2`.
    pub normalized_value: f64,
    pub gradient: f64,
}

/// Analyses the tangent-cone minimizer on the flat block created by a shock from `u_plus` down to `u_minus` near `x = 0`.
pub fn analyze_shock_block(
    field: &KineticField,
    flux: &FluxModel,
    u_minus: f64,
    u_plus: f64,
    tol: FlatTolerance,
) -> Result<ShockBlockAnalysis> {
    let grid = *field.grid();
    let block: Vec<usize> = (0..grid.nv())
        .filter(|&j| grid.v(j) >= u_minus && grid.v(j) < u_plus)
        .collect();
    if block.is_empty() {
        return Err(Error::Degenerate("no velocity nodes between the shock states".into()));
    }
    let sigma_exact = flux.shock_speed(u_plus, u_minus)?;
    let speeds: Vec<f64> = grid.vs().into_iter().map(|v| flux.deriv(v)).collect();
    let sigma_discrete = block.iter().map(|&j| speeds[j]).sum::<f64>() / block.len() as f64;
    let lip = flux.lipschitz_bound().max(f64::MIN_POSITIVE);
    let scale = sigma_discrete.abs().max(lip);
    let whole = block.len() == grid.nv();

    let near: Vec<usize> = (0..grid.nx())
        .filter(|&i| grid.x(i).abs() < 0.25 * grid.half_length())
        .collect();
    let mut column = near[0];
    let mut best = 0.0;
    let mut deviation: f64 = 0.0;
    for &i in &near {
        let state = field.column(i);
        let d = field.centered_dx_column(i)[block[0]];
        let c = state[block[0]];
        if d.abs() > best {
            best = d.abs();
            column = i;
        }
        let separated = whole || (c > 1e-9 && c < 1.0 - 1e-9);
        if d.abs() < 1e-8 || !separated {
            continue;
        }
        let g = transport_column(field, &speeds, i);
        let neg: Vec<f64> = g.iter().map(|t| -t).collect();
        let v = project_tangent(state, &neg, tol.resolve(state))?;
        for &j in &block {
            deviation = deviation.max((v[j] + sigma_discrete * d).abs() / (scale * d.abs()));
        }
    }
    if best == 0.0 {
        return Err(Error::Degenerate("no shock gradient near x = 0".into()));
    }
    let profile = interaction_field(field, flux, tol)?;
    Ok(ShockBlockAnalysis {
        column,
        sigma_exact,
        sigma_discrete,
        sigma_relative_error: (sigma_discrete - sigma_exact).abs() / sigma_exact.abs().max(lip),
        minimizer_deviation: deviation,
        normalized_value: profile.profile[column] / (best * best),
        gradient: best,
    })
}

fn periodic_distance(x: f64, center: f64, l: f64) -> f64 {
    let d = (x - center).rem_euclid(2.0 * l);
    d.min(2.0 * l - d)
}

pub struct ShockRarefactionOutput {
    pub report: Report,
    pub interaction: InteractionProfile,
    pub grid: Grid,
    pub trajectory: Trajectory,
}

pub fn experiment_shock_rarefaction(p: &ShockRarefactionParams) -> Result<ShockRarefactionOutput> {
    let y0 = p.initial_field()?;
    let grid = *y0.grid();
    let tol = FlatTolerance::default();
    let l = p.half_length;
    let mut report = Report::new(p.to_config());

    let interaction = interaction_field(&y0, &p.flux, tol)?;
    let max_where = |keep: &dyn Fn(f64) -> bool| {
        (0..grid.nx())
            .filter(|&i| keep(grid.x(i)))
            .map(|i| interaction.profile[i])
            .fold(0.0, f64::max)
    };
    let outside = max_where(&|x| periodic_distance(x, 0.0, l) >= 4.0 * p.eps);
    let rarefaction = max_where(&|x| periodic_distance(x, 0.5 * l, l) < 4.0 * p.eps);
    let shock_peak = max_where(&|x| periodic_distance(x, 0.0, l) < 4.0 * p.eps);
    report.measure("interaction_total", interaction.total);
    report.measure("interaction_max_shock", shock_peak);
    report.measure("interaction_max_rarefaction", rarefaction);
    report.assert_at_most("interaction_zero_outside_shock", 1e-10, outside);
    report.assert_at_most("interaction_zero_on_rarefaction", 1e-10, rarefaction);

    let full = analyze_shock_block(&y0, &p.flux, p.u_minus, p.u_plus, tol)?;
    report.measure("shock_block", full);
    report.assert_at_most("minimizer_constant_on_block", 1e-6, full.minimizer_deviation);
    report.assert_at_most("block_mean_speed_vs_sigma", 2.0 * grid.dv(), full.sigma_relative_error);

    let half_params = ShockRarefactionParams {
        u_plus: p.u_minus + 0.5 * (p.u_plus - p.u_minus),
        ..p.clone()
    };
    let half = analyze_shock_block(&half_params.initial_field()?, &p.flux, half_params.u_minus, half_params.u_plus, tol)?;
    let ratio = half.normalized_value / full.normalized_value;
    report.measure("normalized_value_full", full.normalized_value);
    report.measure("normalized_value_half", half.normalized_value);
    report.measure("strength_exponent", -ratio.log2());
    report.assert_close("half_strength_value_ratio", 0.5, ratio, 0.1);

    let opts = EvolveOptions {
        cfl: p.cfl,
        output_times: OutputTimes::At(vec![p.horizon]),
        ..EvolveOptions::default()
    };
    let trajectory = evolve(&y0, &p.flux, p.horizon, &opts)?;
    check_solver_invariants(&mut report, &trajectory.diagnostics, "solver_");
    let u = extract_level(&trajectory.final_state, 0.5)?;
    let level = 0.5 * (p.u_minus + p.u_plus);
    let pos = shock_position(&u, &grid, (-0.5 * l, 0.5 * l), level)
        .ok_or_else(|| Error::Degenerate("no shock found in the extracted profile".into()))?;
    let t = trajectory.final_state.time();
    report.measure("shock_position", pos);
    report.measure("sigma_measured", pos / t);
    report.measure("sigma_exact", full.sigma_exact);
    report.assert_close("shock_position", full.sigma_exact * t, pos, 2.0 * grid.dx());
    Ok(ShockRarefactionOutput {
        report,
        interaction,
        grid,
        trajectory,
    })
}

pub fn write_shock_rarefaction(out: &ShockRarefactionOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_interaction(&out.interaction, &out.grid, &dir.join("interaction_t0.csv"))?;
    write_diagnostics(&out.trajectory.diagnostics, &dir.join("diagnostics.csv"))?;
    out.report.write_json(&dir.join("report.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleParams {
    pub eps: f64,
    pub half_length: f64,
    pub nx: usize,
    pub nv: usize,
    pub kernel: MollifierKernel,
    pub cfl: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            eps: 0.1,
            half_length: 4.0,
            nx: 512,
            nv: 512,
            kernel: MollifierKernel::Plateau,
            cfl: 0.5,
        }
    }
}

/// Mollified lift of the exact square-wave solution at time `t`.
pub fn square_wave_field(t: f64, grid: &Grid, eps: f64, kernel: MollifierKernel) -> Result<KineticField> {
    let u = composite_exact_scl1(t, grid)?;
    Ok(mollify_x(&lift_function(u.values(), grid)?, eps, kernel)?.with_time(t))
}

/// `∫∫ Y_ε(t1)^2 - ∫∫ Y_ε(t0)^2` for the square-wave solution.
pub fn square_wave_l2_change(t0: f64, t1: f64, grid: &Grid, eps: f64, kernel: MollifierKernel) -> Result<f64> {
    Ok(square_wave_field(t1, grid, eps, kernel)?.l2_squared() - square_wave_field(t0, grid, eps, kernel)?.l2_squared())
}

/// Smallest `nx`, doubling from `nx`, with at least two cells per `eps`.
fn resolving_nx(nx: usize, half_length: f64, eps: f64) -> usize {
    let mut n = nx;
    while eps < 2.0 * (2.0 * half_length / n as f64) {
        n *= 2;
    }
    n
}

pub struct CounterexampleOutput {
    pub report: Report,
    pub trajectory: Trajectory,
}

pub fn experiment_counterexample(p: &CounterexampleParams) -> Result<CounterexampleOutput> {
    if !(p.half_length > 2.0) {
        return Err(Error::Domain(format!("need L > 2, got {}", p.half_length)));
    }
    if !(p.eps > 0.0 && p.eps < p.half_length / 8.0) {
        return Err(Error::Domain(format!("need 0 < eps < L/8 = {}", p.half_length / 8.0)));
    }
    let grid = Grid::new(p.half_length, p.nx, p.nv)?;
    let coarse = Grid::new(p.half_length, p.nx / 2, p.nv / 2)?;
    let mut report = Report::new([
        ("grid.L", json!(p.half_length)),
        ("grid.nx", json!(p.nx)),
        ("grid.nv", json!(p.nv)),
        ("mollify.eps", json!(p.eps)),
        ("mollify.kernel", serde_json::to_value(p.kernel).unwrap_or_default()),
        ("time.cfl", json!(p.cfl)),
        ("flux", json!("shifted_square")),
    ]);

    let delta = square_wave_l2_change(0.0, 1.0, &grid, p.eps, p.kernel)?;
    let delta_coarse = square_wave_l2_change(0.0, 1.0, &coarse, p.eps, p.kernel)?;
    let noise = (delta - delta_coarse).abs();
    report.measure("delta", delta);
    report.measure("delta_coarse", delta_coarse);
    report.measure("noise_floor", noise);
    report.assert("delta_exceeds_noise", "> 10 x noise floor", delta, 10.0 * noise, delta > 10.0 * noise);

    let same = square_wave_l2_change(0.0, 0.0, &grid, p.eps, p.kernel)?;
    report.assert_close("delta_same_time", 0.0, same, 0.0);

    let nx_trend = resolving_nx(p.nx, p.half_length, p.eps / 4.0);
    let trend_grid = Grid::new(p.half_length, nx_trend, p.nv)?;
    let trend = [1.0, 0.5, 0.25]
        .iter()
        .map(|s| square_wave_l2_change(0.0, 1.0, &trend_grid, s * p.eps, p.kernel))
        .collect::<Result<Vec<f64>>>()?;
    report.measure("trend_nx", nx_trend);
    report.measure("trend_delta", &trend);
    let decreasing = trend.windows(2).all(|w| w[1] < w[0]);
    report.assert(
        "delta_decreases_with_eps",
        "strictly decreasing",
        trend[2] - trend[0],
        0.0,
        decreasing,
    );

    let y0 = square_wave_field(0.0, &grid, p.eps, p.kernel)?;
    let opts = EvolveOptions {
        cfl: p.cfl,
        ..EvolveOptions::default()
    };
    let trajectory = evolve(&y0, &FluxModel::shifted_square(), 1.0, &opts)?;
    let d = &trajectory.diagnostics.records;
    let drift = d.last().map_or(0.0, |r| r.l2_squared) - d[0].l2_squared;
    report.measure("solver_l2_squared_drift", drift);
    check_solver_invariants(&mut report, &trajectory.diagnostics, "solver_");
    Ok(CounterexampleOutput { report, trajectory })
}

pub fn write_counterexample(out: &CounterexampleOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_diagnostics(&out.trajectory.diagnostics, &dir.join("diagnostics.csv"))?;
    out.report.write_json(&dir.join("report.json"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub nx: usize,
    pub nv: usize,
    pub time: f64,
    pub lambda: f64,
    pub l1_error: f64,
}

pub struct CompareOutput {
    pub report: Report,
    pub rows: Vec<CompareRow>,
}

/// Kinetic run from the unmollified lift against Godunov at four times the
/// resolution, averaged back and lifted so both sides share the level snapping.
pub fn compare_level(cfg: &RunConfig, grid: Grid) -> Result<Vec<CompareRow>> {
    let u0 = cfg
        .init
        .profile(&grid)
        .ok_or_else(|| Error::Domain("comparison needs piecewise-constant initial data".into()))?;
    let y0 = lift_function(u0.values(), &grid)?;
    let opts = EvolveOptions {
        cfl: cfg.cfl,
        output_times: OutputTimes::At(cfg.outputs.clone()),
        tau_flat: cfg.flat_tolerance(),
        ..EvolveOptions::default()
    };
    let traj = evolve(&y0, &cfg.flux, cfg.horizon, &opts)?;
    let fine_grid = grid.refined(4)?;
    let mut reference = cfg
        .init
        .profile(&fine_grid)
        .ok_or_else(|| Error::Domain("comparison needs piecewise-constant initial data".into()))?;
    let mut rows = Vec::new();
    for snap in &traj.snapshots {
        let dt = snap.time() - reference.time();
        if dt > 0.0 {
            reference = godunov_evolve(&reference, &cfg.flux, dt, cfg.cfl)?;
        }
        let coarse = lift_function(reference.coarsened(4)?.values(), &grid)?;
        for lambda in COMPARE_LEVELS {
            let u = extract_level(snap, lambda)?;
            let exact = extract_level(&coarse, lambda)?;
            rows.push(CompareRow {
                nx: grid.nx(),
                nv: grid.nv(),
                time: snap.time(),
                lambda,
                l1_error: l1_distance(&u, &exact, grid.dx())?,
            });
        }
    }
    Ok(rows)
}

/// `log2(e_coarse / e_fine)`, or `+inf` when both errors are at round-off.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    if coarse <= 1e-13 && fine <= 1e-13 {
        f64::INFINITY
    } else {
        (coarse / fine).log2()
    }
}

pub fn compare_with_reference(cfg: &RunConfig) -> Result<CompareOutput> {
    let mut report = Report::new(cfg.resolved().clone());
    let mut rows = Vec::new();
    let mut grid = cfg.grid;
    for level in 0..cfg.refinements {
        if level > 0 {
            grid = grid.refined(2)?;
        }
        rows.extend(compare_level(cfg, grid)?);
    }
    report.measure("table", &rows);
    let t_final = rows.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max);
    for lambda in COMPARE_LEVELS {
        let series: Vec<&CompareRow> = rows
            .iter()
            .filter(|r| r.lambda == lambda && (r.time - t_final).abs() <= 1e-9 * t_final.max(1.0))
            .collect();
        let finest = series.last().expect("at least one refinement level");
        let h = 2.0 * cfg.grid.half_length() / finest.nx as f64 + 1.0 / finest.nv as f64;
        report.assert_at_most(&format!("l1_over_h_lambda_{lambda}"), 5.0, finest.l1_error / h);
        if series.len() >= 2 {
            let rates: Vec<f64> = series.windows(2).map(|w| observed_rate(w[0].l1_error, w[1].l1_error)).collect();
            report.measure(&format!("rates_lambda_{lambda}"), rates.iter().map(|r| r.min(99.0)).collect::<Vec<_>>());
            let last = *rates.last().unwrap();
            report.assert_at_least(&format!("rate_lambda_{lambda}"), 0.7, last.min(99.0));
        }
    }
    Ok(CompareOutput { report, rows })
}

pub fn write_compare(out: &CompareOutput, dir: &Path) -> Result<()> {
    use std::io::Write;
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(fs::File::create(dir.join("compare.csv"))?);
    writeln!(f, "nx,nv,t,lambda,l1_error")?;
    for r in &out.rows {
        writeln!(f, "{},{},{:.16e},{},{:.16e}", r.nx, r.nv, r.time, r.lambda, r.l1_error)?;
    }
    out.report.write_json(&dir.join("report.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigMap;

    #[test]
    fn shock_position_interpolates() {
        let g = Grid::new(1.0, 8, 4).unwrap(); // centers -0.875, -0.625, ...
        let u = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let x = shock_position(&u, &g, (-1.0, 1.0), 0.5).unwrap();
        assert!((x - 0.0).abs() < 1e-15);
        assert!(shock_position(&u, &g, (0.2, 1.0), 0.5).is_none());
    }

    #[test]
    fn shock_block_for_burgers_is_exact() {
        let p = ShockRarefactionParams {
            half_length: 2.0,
            eps: 0.125,
            nx: 128,
            nv: 64,
            ..ShockRarefactionParams::default()
        };
        let a = analyze_shock_block(&p.initial_field().unwrap(), &p.flux, 0.0, 1.0, FlatTolerance::default()).unwrap();
        assert!((a.sigma_discrete - 0.5).abs() < 1e-14);
        assert!(a.minimizer_deviation < 1e-12);
        // Σ_j (v_j - 1/2)^2 dv = 1/12 - dv^2/12 for a full block of midpoints.
        let dv = 1.0 / 64.0;
        assert!((a.normalized_value - (1.0 - dv * dv) / 12.0).abs() < 1e-12);
    }

    #[test]
    fn square_wave_delta_is_zero_for_equal_times_and_positive_otherwise() {
        let g = Grid::new(4.0, 256, 64).unwrap();
        let k = MollifierKernel::Plateau;
        assert_eq!(square_wave_l2_change(0.5, 0.5, &g, 0.1, k).unwrap(), 0.0);
        assert!(square_wave_l2_change(0.0, 1.0, &g, 0.1, k).unwrap() > 0.0);
    }

    #[test]
    fn simulation_of_constant_data_is_trivial() {
        let text = "grid.L = 1\ngrid.nx = 16\ngrid.nv = 8\ninit.values = 0.3\ntime.T = 0.1\n";
        let cfg = RunConfig::from_map(&ConfigMap::parse(text).unwrap()).unwrap();
        let out = run_simulation(&cfg).unwrap();
        assert!(out.report.passed());
        let recs = &out.trajectory.diagnostics.records;
        for r in recs {
            assert_eq!(r.interaction_total, 0.0);
            assert_eq!(r.l2_squared, recs[0].l2_squared);
        }
    }

    #[test]
    fn comparison_of_constant_data_is_exact() {
        let text = "grid.L = 1\ngrid.nx = 16\ngrid.nv = 8\ninit.values = 0.3\ntime.T = 0.1\ncompare.refinements = 2\n";
        let cfg = RunConfig::from_map(&ConfigMap::parse(text).unwrap()).unwrap();
        let out = compare_with_reference(&cfg).unwrap();
        assert_eq!(out.rows.len(), 6);
        assert!(out.rows.iter().all(|r| r.l1_error == 0.0));
        assert!(out.report.passed());
    }
}
