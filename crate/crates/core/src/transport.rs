//! Free streaming `Y_t + f_v(v) ∂_x Y = 0`, one velocity slice at a time.
//!
//! Each slice `j` is advected with the frozen speed `f_v(v_j)` by first-order
//! upwinding on the periodic `x` grid. Written as a convex combination of a
//! cell and its upwind neighbour, the update keeps the per-slice maximum
//! principle and per-slice mass.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::{Grid, KineticField};

/// Relative slack on the Courant number before a step is rejected.
const CFL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOperator {
    speeds: Vec<f64>,
    grid: Grid,
    cfl_limit: f64,
}

impl TransportOperator {
    pub fn new(flux: &FluxModel, grid: &Grid) -> Self {
        TransportOperator {
            speeds: grid.vs().into_iter().map(|v| flux.deriv(v)).collect(),
            grid: *grid,
            cfl_limit: 1.0,
        }
    }

    pub fn slice_speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cfl_limit(&self) -> f64 {
        self.cfl_limit
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `cfl · dx / max_j |f_v(v_j)|`, or `fallback` when every slice is at rest.
    pub fn cfl_dt(&self, cfl: f64, fallback: f64) -> f64 {
        let c = self.max_speed();
        if c == 0.0 {
            fallback
        } else {
            cfl * self.grid.dx() / c
        }
    }

    /// Largest stable step.
    pub fn max_dt(&self) -> f64 {
        self.cfl_dt(self.cfl_limit, f64::INFINITY)
    }

    pub fn advect(&self, field: &KineticField, dt: f64) -> Result<KineticField> {
        if *field.grid() != self.grid {
            return Err(Error::Shape("field and transport operator grids differ".into()));
        }
        let limit = self.max_dt();
        if !(dt >= 0.0) || dt > limit * (1.0 + CFL_SLACK) {
            return Err(Error::Stability { dt, limit });
        }
        let grid = self.grid;
        let nu: Vec<f64> = self.speeds.iter().map(|c| c * dt / grid.dx()).collect();
        let mut out = KineticField::zeros(grid).with_time(field.time() + dt);
        out.values_mut()
            .par_chunks_mut(grid.nv())
            .enumerate()
            .for_each(|(i, dst)| {
                let here = field.column(i);
                let left = field.column(grid.wrap(i as isize - 1));
                let right = field.column(grid.wrap(i as isize + 1));
                for (j, d) in dst.iter_mut().enumerate() {
                    let n = nu[j];
                    *d = if n > 0.0 {
                        here[j] + n * (left[j] - here[j])
                    } else if n < 0.0 {
                        here[j] - n * (right[j] - here[j])
                    } else {
                        here[j]
                    };
                }
            });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::lift_function;
    use proptest::prelude::*;

    fn slice(field: &KineticField, j: usize) -> Vec<f64> {
        (0..field.grid().nx()).map(|i| field.get(i, j)).collect()
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::new(0.04, 8, 4).unwrap(); // dx = 0.01
        let op = TransportOperator::new(&FluxModel::polynomial(vec![0.0, 1.0]).unwrap(), &g);
        assert!((op.max_speed() - 1.0).abs() < 1e-15);
        assert!((op.cfl_dt(0.5, 1.0) - 0.005).abs() < 1e-15);
        let still = TransportOperator::new(&FluxModel::polynomial(vec![2.0]).unwrap(), &g);
        assert_eq!(still.cfl_dt(0.5, 0.125), 0.125);
        let g = Grid::new(0.4, 8, 4).unwrap(); // dx = 0.1
        let fast = TransportOperator::new(&FluxModel::polynomial(vec![0.0, 2.0]).unwrap(), &g);
        assert!((fast.cfl_dt(1.0, 1.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn resting_and_uniform_slices_are_unchanged() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let still = TransportOperator::new(&FluxModel::polynomial(vec![0.3]).unwrap(), &g);
        let u: Vec<f64> = g.xs().iter().map(|&x| if x < 0.0 { 0.8 } else { 0.1 }).collect();
        let y = lift_function(&u, &g).unwrap();
        assert_eq!(still.advect(&y, 0.1).unwrap().values(), y.values());

        let moving = TransportOperator::new(&FluxModel::burgers(), &g);
        let flat = KineticField::from_fn(g, |_, v| v);
        let dt = moving.cfl_dt(0.9, 1.0);
        assert_eq!(moving.advect(&flat, dt).unwrap().values(), flat.values());
    }

    #[test]
    fn unit_courant_number_shifts_by_one_cell() {
        let g = Grid::new(1.0, 16, 4).unwrap();
        let flux = FluxModel::polynomial(vec![0.0, -1.5]).unwrap(); // speed -1.5 everywhere
        let op = TransportOperator::new(&flux, &g);
        let y = KineticField::from_fn(g, |x, v| (3.0 * x).sin() * v);
        let dt = g.dx() / 1.5;
        let out = op.advect(&y, dt).unwrap();
        let shifted = y.shifted_x(-1);
        for (a, b) in out.values().iter().zip(shifted.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = Grid::new(1.0, 16, 4).unwrap();
        let op = TransportOperator::new(&FluxModel::burgers(), &g);
        let y = KineticField::zeros(g);
        let too_big = 1.01 * op.max_dt();
        assert!(matches!(op.advect(&y, too_big), Err(Error::Stability { .. })));
    }

    proptest! {
        #[test]
        fn per_slice_invariants(u in proptest::collection::vec(0.0f64..=1.0, 32), cfl in 0.05f64..=1.0) {
            let g = Grid::new(1.0, 32, 16).unwrap();
            let op = TransportOperator::new(&FluxModel::shifted_square(), &g);
            let y = lift_function(&u, &g).unwrap();
            let out = op.advect(&y, op.cfl_dt(cfl, 1.0)).unwrap();
            for j in 0..g.nv() {
                let before = slice(&y, j);
                let after = slice(&out, j);
                let lo = before.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = before.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(after.iter().all(|&a| a >= lo && a <= hi));
                let (mb, ma): (f64, f64) = (before.iter().sum(), after.iter().sum());
                prop_assert!((ma - mb).abs() <= 1e-12 * mb.max(1.0));
                let (nb, na): (f64, f64) = (before.iter().map(|a| a * a).sum(), after.iter().map(|a| a * a).sum());
                prop_assert!(na <= nb * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
}
