//! Lie splitting for `∂_t Y + f_v ∂_x Y ∈ -∂K(Y)`: upwind free transport,
//! then column-wise projection back onto the monotone cone.
//!
//! The projection displacement is the discrete normal-cone selection, so the
//! step also yields the defect measure and the residual `R = Y_t + f_v ∂_x Y`
//! used by the variational-inequality and minimal-selection diagnostics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{interaction_field, project_monotone_in_place, transport_column, FlatTolerance};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::{defect_measure, DefectMeasure, KineticField};
use crate::transport::TransportOperator;

/// Result of one split step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub transported: KineticField,
    pub next: KineticField,
    pub defect: DefectMeasure,
}

pub fn step(field: &KineticField, flux: &FluxModel, dt: f64) -> Result<StepOutcome> {
    step_with(&TransportOperator::new(flux, field.grid()), field, dt)
}

pub(crate) fn step_with(op: &TransportOperator, field: &KineticField, dt: f64) -> Result<StepOutcome> {
    let transported = op.advect(field, dt)?;
    let mut next = transported.clone();
    let nv = next.grid().nv();
    next.values_mut()
        .par_chunks_mut(nv)
        .for_each(project_monotone_in_place);
    let defect = defect_measure(&transported, &next, dt)?;
    Ok(StepOutcome {
        transported,
        next,
        defect,
    })
}

/// Errors unless every column is non-decreasing up to its flat tolerance.
pub fn validate_state(field: &KineticField, tol: FlatTolerance) -> Result<()> {
    for (i, col) in field.columns().enumerate() {
        let t = tol.resolve(col);
        if let Some(j) = col.windows(2).position(|w| w[0] - w[1] > t) {
            return Err(Error::InvalidState {
                column: i,
                index: j + 1,
                drop: col[j] - col[j + 1],
                tol: t,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub time: f64,
    /// `∫∫ Y^2 dx dv`
    pub l2_squared: f64,
    /// `∫∫ Y dx dv`
    pub mass: f64,
    pub interaction_total: f64,
    /// `‖D⁺_x Y‖`
    pub grad_x_norm: f64,
    /// `‖ΔY / dt‖` of the step that produced this state; 0 at the initial time.
    pub dt_velocity_norm: f64,
    /// Minimum of the step's defect measure; 0 at the initial time.
    pub defect_min: f64,
    /// `max_i |m[i][nv-1]|` of the step's defect measure.
    pub defect_top: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub records: Vec<DiagnosticRecord>,
}

pub const DIAGNOSTICS_HEADER: &str = "t,l2_squared,mass,interaction_total,grad_x_norm,dt_velocity_norm,defect_min";

impl Diagnostics {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.time, r.l2_squared, r.mass, r.interaction_total, r.grad_x_norm, r.dt_velocity_norm, r.defect_min
            )?;
        }
        Ok(())
    }

    pub fn initial(&self) -> Option<&DiagnosticRecord> {
        self.records.first()
    }

    /// Records produced by steps, i.e. all but the initial one.
    pub fn steps(&self) -> &[DiagnosticRecord] {
        self.records.get(1..).unwrap_or(&[])
    }
}

fn record(
    field: &KineticField,
    flux: &FluxModel,
    tol: FlatTolerance,
    velocity: f64,
    defect: Option<&DefectMeasure>,
) -> Result<DiagnosticRecord> {
    Ok(DiagnosticRecord {
        time: field.time(),
        l2_squared: field.l2_squared(),
        mass: field.mass(),
        interaction_total: interaction_field(field, flux, tol)?.total,
        grad_x_norm: field.forward_dx_norm(),
        dt_velocity_norm: velocity,
        defect_min: defect.map_or(0.0, DefectMeasure::min),
        defect_top: defect.map_or(0.0, DefectMeasure::top_abs_max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTimes {
    /// Snapshot at the step time nearest to each requested time.
    At(Vec<f64>),
    EveryStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub cfl: f64,
    pub output_times: OutputTimes,
    pub tau_flat: FlatTolerance,
    /// Keep every post-step state and residual (needed by
    /// [`variational_residual`] and per-step selection checks).
    pub keep_history: bool,
    /// Step used when every slice speed is zero.
    pub fallback_dt: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            cfl: 0.5,
            output_times: OutputTimes::At(Vec::new()),
            tau_flat: FlatTolerance::default(),
            keep_history: false,
            fallback_dt: 0.01,
        }
    }
}

/// One recorded step: the state it produced and `R = (P(Ŷ) - Ŷ) / dt`.
#[derive(Debug, Clone)]
pub struct StepHistory {
    pub dt: f64,
    pub state: KineticField,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: KineticField,
    pub snapshots: Vec<KineticField>,
    pub final_state: KineticField,
    pub diagnostics: Diagnostics,
    pub history: Vec<StepHistory>,
}

impl Trajectory {
    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(KineticField::time).collect()
    }

    /// Pairs `(before, history entry)` for every recorded step.
    pub fn step_pairs(&self) -> impl Iterator<Item = (&KineticField, &StepHistory)> {
        std::iter::once(&self.initial)
            .chain(self.history.iter().map(|h| &h.state))
            .zip(self.history.iter())
    }
}

/// Integrates from `y0.time()` over a horizon `horizon`, the last step shortened to land on the end time.
pub fn evolve(y0: &KineticField, flux: &FluxModel, horizon: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("time horizon must be positive, got {horizon}")));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::Domain(format!("cfl must lie in (0, 1], got {}", opts.cfl)));
    }
    validate_state(y0, opts.tau_flat)?;
    let op = TransportOperator::new(flux, y0.grid());
    let dt_nominal = op.cfl_dt(opts.cfl, opts.fallback_dt);
    let t0 = y0.time();
    let t_end = t0 + horizon;
    let mut pending: Vec<f64> = match &opts.output_times {
        OutputTimes::At(ts) => {
            let mut ts = ts.clone();
            ts.sort_by(|a, b| a.total_cmp(b));
            ts
        }
        OutputTimes::EveryStep => Vec::new(),
    };
    pending.reverse(); // pop from the back in increasing order
    let every_step = matches!(opts.output_times, OutputTimes::EveryStep);

    let mut snapshots = Vec::new();
    while pending.last().is_some_and(|&p| p <= t0) {
        pending.pop();
        snapshots.push(y0.clone());
    }
    if every_step {
        snapshots.push(y0.clone());
    }

    let mut diagnostics = Diagnostics::default();
    diagnostics.records.push(record(y0, flux, opts.tau_flat, 0.0, None)?);
    let mut history = Vec::new();
    let mut current = y0.clone();
    let eps_t = 1e-12 * t_end.abs().max(horizon);
    while current.time() < t_end - eps_t {
        let t = current.time();
        let dt = dt_nominal.min(t_end - t);
        let out = step_with(&op, &current, dt)?;
        let mut next = out.next;
        let t_next = if t_end - (t + dt) <= eps_t { t_end } else { t + dt };
        next.set_time(t_next);
        let velocity = next.distance(&current)? / dt;
        diagnostics
            .records
            .push(record(&next, flux, opts.tau_flat, velocity, Some(&out.defect))?);

        while let Some(&p) = pending.last() {
            if p > t_next {
                break;
            }
            pending.pop();
            snapshots.push(if p - t < t_next - p { current.clone() } else { next.clone() });
        }
        if every_step {
            snapshots.push(next.clone());
        }
        if opts.keep_history {
            let residual = next
                .values()
                .iter()
                .zip(out.transported.values())
                .map(|(p, y)| (p - y) / dt)
                .collect();
            history.push(StepHistory {
                dt,
                state: next.clone(),
                residual,
            });
        }
        current = next;
    }
    while pending.pop().is_some() {
        snapshots.push(current.clone());
    }
    Ok(Trajectory {
        initial: y0.clone(),
        snapshots,
        final_state: current,
        diagnostics,
        history,
    })
}

/// `‖Y1(t) - Y2(t)‖` at each common snapshot time.
pub fn contraction_gap(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::Shape(format!(
            "{} vs {} snapshots",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            if (x.time() - y.time()).abs() > 1e-12 * x.time().abs().max(1.0) {
                return Err(Error::Shape(format!(
                    "snapshot times differ: {} vs {}",
                    x.time(),
                    y.time()
                )));
            }
            x.distance(y)
        })
        .collect()
}

/// Per recorded step, `dx dv Σ (W - Y)·R` where `Y` is the post-step state.
/// Non-negative for every monotone `W` when `-R` lies in the normal cone at `Y`.
pub fn variational_residual(traj: &Trajectory, test_field: &KineticField) -> Result<Vec<f64>> {
    if test_field.first_monotonicity_violation(0.0).is_some() {
        return Err(Error::Domain("test field must be non-decreasing in v".into()));
    }
    if traj.history.is_empty() && traj.final_state.time() > traj.initial.time() {
        return Err(Error::Shape("trajectory was evolved without step history".into()));
    }
    let area = test_field.grid().dx() * test_field.grid().dv();
    traj.history
        .iter()
        .map(|h| {
            test_field.same_grid(&h.state)?;
            let s: f64 = test_field
                .values()
                .iter()
                .zip(h.state.values())
                .zip(&h.residual)
                .map(|((w, y), r)| (w - y) * r)
                .sum();
            Ok(area * s)
        })
        .collect()
}

/// `‖ΔY/dt + G‖ - sqrt(min_{V ∈ T_K(Y)} ‖V + G‖²)` with `G = f_v D_x Y` at the pre-step state.
pub fn minimal_selection_gap(
    before: &KineticField,
    after: &KineticField,
    flux: &FluxModel,
    dt: f64,
    tol: FlatTolerance,
) -> Result<f64> {
    before.same_grid(after)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let grid = *before.grid();
    let speeds: Vec<f64> = grid.vs().into_iter().map(|v| flux.deriv(v)).collect();
    let mut s = 0.0;
    for i in 0..grid.nx() {
        let g = transport_column(before, &speeds, i);
        s += before
            .column(i)
            .iter()
            .zip(after.column(i))
            .zip(&g)
            .map(|((b, a), g)| ((a - b) / dt + g).powi(2))
            .sum::<f64>();
    }
    let actual = (grid.dx() * grid.dv() * s).sqrt();
    let best = interaction_field(before, flux, tol)?.total.max(0.0).sqrt();
    Ok(actual - best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{lift_function, mollify_x, Grid, MollifierKernel};

    fn shock_rarefaction(grid: &Grid) -> Vec<f64> {
        let l = grid.half_length();
        grid.xs()
            .iter()
            .map(|&x| if x > 0.0 && x < 0.5 * l { 0.0 } else { 1.0 })
            .collect()
    }

    #[test]
    fn x_constant_state_is_a_fixed_point() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let y = KineticField::from_fn(g, |_, v| v);
        let out = step(&y, &FluxModel::burgers(), 0.01).unwrap();
        assert_eq!(out.next.values(), y.values());
        assert!(out.defect.values().iter().all(|&m| m == 0.0));
        let gap = minimal_selection_gap(&y, &out.next, &FluxModel::burgers(), 0.01, FlatTolerance::default()).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn rarefaction_needs_no_collapse() {
        // u jumps up from 0 to 1: every transported column stays monotone.
        let g = Grid::new(2.0, 64, 32).unwrap();
        let u: Vec<f64> = g.xs().iter().map(|&x| if x.abs() < 1.0 { 0.0 } else { 1.0 }).collect();
        let y = mollify_x(&lift_function(&u, &g).unwrap(), 0.2, MollifierKernel::CosineBump).unwrap();
        let flux = FluxModel::burgers();
        // Look at the rarefaction half only (x > 0, where u steps up).
        let out = step(&y, &flux, 0.5 * g.dx()).unwrap();
        for i in (0..g.nx()).filter(|&i| g.x(i) > 0.0) {
            for j in 0..g.nv() {
                assert!(out.defect.get(i, j).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn smoothed_shock_travels_at_rankine_hugoniot_speed() {
        let g = Grid::new(2.0, 256, 64).unwrap();
        let u = shock_rarefaction(&g);
        let y = mollify_x(&lift_function(&u, &g).unwrap(), 0.125, MollifierKernel::CosineBump).unwrap();
        let flux = FluxModel::burgers();
        let dt = 0.5 * g.dx();
        let out = step(&y, &flux, dt).unwrap();
        // Shock columns are constant in v, so the step is an upwind shift at speed 1/2.
        let op = TransportOperator::new(&FluxModel::polynomial(vec![0.0, 0.5]).unwrap(), &g);
        let expected = op.advect(&y, dt).unwrap();
        for i in (0..g.nx()).filter(|&i| g.x(i).abs() < 0.3) {
            for j in 0..g.nv() {
                assert!((out.next.get(i, j) - expected.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evolve_partial_single_step() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let y = lift_function(&shock_rarefaction(&g), &g).unwrap();
        let opts = EvolveOptions::default();
        let traj = evolve(&y, &FluxModel::burgers(), 1e-4, &opts).unwrap();
        assert_eq!(traj.diagnostics.records.len(), 2);
        assert_eq!(traj.final_state.time(), 1e-4);
    }

    #[test]
    fn evolve_invariants_and_snapshots() {
        let g = Grid::new(2.0, 64, 32).unwrap();
        let y = lift_function(&shock_rarefaction(&g), &g).unwrap();
        let opts = EvolveOptions {
            output_times: OutputTimes::At(vec![0.0, 0.1, 0.25, 5.0]),
            keep_history: true,
            ..EvolveOptions::default()
        };
        let flux = FluxModel::shifted_square();
        let traj = evolve(&y, &flux, 0.3, &opts).unwrap();
        assert_eq!(traj.snapshots.len(), 4);
        assert_eq!(traj.snapshots[0].time(), 0.0);
        assert_eq!(traj.snapshots[3].time(), 0.3);
        let dt = 0.5 * g.dx();
        assert!((traj.snapshots[1].time() - 0.1).abs() <= 0.5 * dt + 1e-12);
        let recs = &traj.diagnostics.records;
        let m0 = recs[0].mass;
        for w in recs.windows(2) {
            assert!(w[1].time > w[0].time);
            assert!((w[1].mass - m0).abs() <= 1e-12 * m0);
            assert!(w[1].l2_squared <= w[0].l2_squared * (1.0 + 1e-12));
            assert!(w[1].grad_x_norm <= w[0].grad_x_norm * (1.0 + 1e-12));
            assert!(w[1].defect_min >= -1e-10);
            assert!(w[1].defect_top <= 1e-12);
        }
        for s in traj.snapshots.iter().chain(traj.history.iter().map(|h| &h.state)) {
            assert!(s.is_monotone(0.0));
        }
        let ones = KineticField::from_fn(g, |_, _| 1.0);
        for r in variational_residual(&traj, &ones).unwrap() {
            assert!(r.abs() < 1e-10);
        }
        let last = traj.history.last().unwrap().state.clone();
        let r = variational_residual(&traj, &last).unwrap();
        assert_eq!(*r.last().unwrap(), 0.0);
    }

    #[test]
    fn variational_residual_rejects_non_monotone_test_field() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let y = KineticField::from_fn(g, |_, v| v);
        let opts = EvolveOptions {
            keep_history: true,
            ..EvolveOptions::default()
        };
        let traj = evolve(&y, &FluxModel::burgers(), 0.05, &opts).unwrap();
        let bad = KineticField::from_fn(g, |_, v| 1.0 - v);
        assert!(matches!(variational_residual(&traj, &bad), Err(Error::Domain(_))));
        let no_hist = evolve(&y, &FluxModel::burgers(), 0.05, &EvolveOptions::default()).unwrap();
        assert!(variational_residual(&no_hist, &y).is_err());
    }

    #[test]
    fn contraction_of_identical_and_offset_data() {
        let g = Grid::new(2.0, 64, 16).unwrap();
        let y = lift_function(&shock_rarefaction(&g), &g).unwrap();
        let opts = EvolveOptions {
            output_times: OutputTimes::EveryStep,
            ..EvolveOptions::default()
        };
        let flux = FluxModel::burgers();
        let a = evolve(&y, &flux, 0.4, &opts).unwrap();
        let b = evolve(&y.shifted_x(1), &flux, 0.4, &opts).unwrap();
        let same = contraction_gap(&a, &a).unwrap();
        assert!(same.iter().all(|&d| d == 0.0));
        let d = contraction_gap(&a, &b).unwrap();
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let short = evolve(&y, &flux, 0.2, &opts).unwrap();
        assert!(matches!(contraction_gap(&a, &short), Err(Error::Shape(_))));
    }

    #[test]
    fn evolve_rejects_invalid_input() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let bad = KineticField::from_fn(g, |_, v| 1.0 - v);
        assert!(matches!(
            evolve(&bad, &FluxModel::burgers(), 0.1, &EvolveOptions::default()),
            Err(Error::InvalidState { .. })
        ));
        let y = KineticField::from_fn(g, |_, v| v);
        assert!(evolve(&y, &FluxModel::burgers(), 0.0, &EvolveOptions::default()).is_err());
    }

    #[test]
    fn diagnostics_csv_header() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let y = KineticField::from_fn(g, |_, v| v);
        let traj = evolve(&y, &FluxModel::burgers(), 0.05, &EvolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.diagnostics.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), DIAGNOSTICS_HEADER);
        assert_eq!(text.lines().count(), traj.diagnostics.records.len() + 1);
    }
}
