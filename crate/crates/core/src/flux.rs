//! Scalar flux functions on the state interval `[0, 1]`.
//!
//! Built-in fluxes have analytic derivatives. Tabulated fluxes are given by
//! samples on a uniform grid over `[0, 1]`; their derivative is the centered
//! difference of the table, linearly interpolated between nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniform intervals used when a sup over `[0, 1]` is sampled.
const SPEED_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxKind {
    /// `f(v) = v^2 / 2`
    Burgers,
    /// `f(v) = (v - 1/2)^2`
    ShiftedSquare,
    /// `f(v) = sum_k coeffs[k] v^k`, ascending powers.
    Polynomial { coeffs: Vec<f64> },
    /// `values[k] = f(k / (n - 1))`, piecewise-linear in between.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxModel {
    kind: FluxKind,
    lipschitz_bound: f64,
}

impl FluxModel {
    pub fn new(kind: FluxKind) -> Result<Self> {
        match &kind {
            FluxKind::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::config("flux.coeffs", 0, "polynomial needs at least one coefficient"));
                }
                if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
                    return Err(Error::config("flux.coeffs", 0, format!("non-finite coefficient {c}")));
                }
            }
            FluxKind::Tabulated { values } => {
                if values.len() < 3 {
                    return Err(Error::config("flux.table", 0, "table needs at least 3 samples"));
                }
                if let Some(c) = values.iter().find(|c| !c.is_finite()) {
                    return Err(Error::config("flux.table", 0, format!("non-finite table entry {c}")));
                }
            }
            FluxKind::Burgers | FluxKind::ShiftedSquare => {}
        }
        let mut flux = FluxModel {
            kind,
            lipschitz_bound: 0.0,
        };
        flux.lipschitz_bound = flux.compute_lipschitz_bound();
        Ok(flux)
    }

    pub fn burgers() -> Self {
        Self::new(FluxKind::Burgers).expect("burgers flux is always valid")
    }

    pub fn shifted_square() -> Self {
        Self::new(FluxKind::ShiftedSquare).expect("shifted square flux is always valid")
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(FluxKind::Polynomial { coeffs })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Self::new(FluxKind::Tabulated { values })
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn eval(&self, v: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 0.5 * v * v,
            FluxKind::ShiftedSquare => (v - 0.5) * (v - 0.5),
            FluxKind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c),
            FluxKind::Tabulated { values } => interp_uniform(values, v),
        }
    }

    pub fn deriv(&self, v: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => v,
            FluxKind::ShiftedSquare => 2.0 * v - 1.0,
            FluxKind::Polynomial { coeffs } => poly_deriv(coeffs, v),
            FluxKind::Tabulated { values } => interp_uniform(&table_slopes(values), v),
        }
    }

    /// `sup |f_v|` over `[0, 1]`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Largest `|f_v|` over uniformly spaced samples of `[0, 1]`, endpoints
    /// included. This is the speed used for time-step selection.
    pub fn max_speed(&self) -> f64 {
        (0..=SPEED_SAMPLES)
            .map(|k| self.deriv(k as f64 / SPEED_SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Rankine-Hugoniot speed `(f(b) - f(a)) / (b - a)`.
    pub fn shock_speed(&self, u_minus: f64, u_plus: f64) -> Result<f64> {
        for u in [u_minus, u_plus] {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::Domain(format!("state {u} outside [0, 1]")));
            }
        }
        if u_minus == u_plus {
            return Err(Error::Degenerate(format!(
                "shock speed needs distinct states, got {u_minus} twice"
            )));
        }
        Ok((self.eval(u_plus) - self.eval(u_minus)) / (u_plus - u_minus))
    }

    /// Convexity on `[0, 1]` checked by sampled second differences.
    pub fn is_convex(&self) -> bool {
        let h = 1.0 / SPEED_SAMPLES as f64;
        (1..SPEED_SAMPLES).all(|k| {
            let v = k as f64 * h;
            self.eval(v - h) - 2.0 * self.eval(v) + self.eval(v + h) >= -1e-9
        })
    }

    fn compute_lipschitz_bound(&self) -> f64 {
        match &self.kind {
            FluxKind::Burgers | FluxKind::ShiftedSquare => 1.0,
            FluxKind::Polynomial { coeffs } => {
                // |p'| peaks at an endpoint or at a sign change of p''.
                let second: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, &c)| (k * (k - 1)) as f64 * c)
                    .collect();
                let p2 = |v: f64| second.iter().rev().fold(0.0, |acc, &c| acc * v + c);
                let mut best = poly_deriv(coeffs, 0.0).abs().max(poly_deriv(coeffs, 1.0).abs());
                let h = 1.0 / SPEED_SAMPLES as f64;
                for k in 0..SPEED_SAMPLES {
                    let (mut a, mut b) = (k as f64 * h, (k + 1) as f64 * h);
                    let (fa, fb) = (p2(a), p2(b));
                    best = best.max(poly_deriv(coeffs, a).abs());
                    if fa == 0.0 || fa.signum() == fb.signum() {
                        continue;
                    }
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if p2(m).signum() == fa.signum() {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    best = best.max(poly_deriv(coeffs, 0.5 * (a + b)).abs());
                }
                best
            }
            FluxKind::Tabulated { values } => table_slopes(values).iter().fold(0.0, |m, s| m.max(s.abs())),
        }
    }
}

fn poly_deriv(coeffs: &[f64], v: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * v + k as f64 * c)
}

/// Piecewise-linear interpolation of samples at `k / (n - 1)`, clamped to `[0, 1]`.
fn interp_uniform(values: &[f64], v: f64) -> f64 {
    let n = values.len();
    let s = v.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (s.floor() as usize).min(n - 2);
    let t = s - k as f64;
    values[k] * (1.0 - t) + values[k + 1] * t
}

/// Centered differences at interior nodes, one-sided at the two ends.
fn table_slopes(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|k| match k {
            0 => (values[1] - values[0]) / h,
            k if k == n - 1 => (values[n - 1] - values[n - 2]) / h,
            k => (values[k + 1] - values[k - 1]) / (2.0 * h),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtin() -> Vec<FluxModel> {
        vec![
            FluxModel::burgers(),
            FluxModel::shifted_square(),
            FluxModel::polynomial(vec![0.1, -0.3, 0.0, 0.7]).unwrap(),
        ]
    }

    #[test]
    fn shifted_square_values() {
        let f = FluxModel::shifted_square();
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.deriv(0.0), -1.0);
        let h = 1e-6;
        let fd = (f.eval(h) - f.eval(-h)) / (2.0 * h);
        assert!((fd - (-1.0)).abs() < 1e-9);
    }

    #[test]
    fn burgers_values() {
        let f = FluxModel::burgers();
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.max_speed(), 1.0);
        assert_eq!(f.shock_speed(0.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn max_speed_examples() {
        assert_eq!(FluxModel::shifted_square().max_speed(), 1.0);
        let c = FluxModel::polynomial(vec![3.0]).unwrap();
        assert_eq!(c.max_speed(), 0.0);
        assert_eq!(c.lipschitz_bound(), 0.0);
    }

    #[test]
    fn stationary_shock_of_shifted_square() {
        assert_eq!(FluxModel::shifted_square().shock_speed(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_states_are_degenerate() {
        let err = FluxModel::burgers().shock_speed(0.3, 0.3).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(matches!(
            FluxModel::burgers().shock_speed(-0.1, 0.3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shock_speed_tends_to_characteristic_speed() {
        for f in builtin() {
            for &u in &[0.1, 0.4, 0.8] {
                let s = f.shock_speed(u, u + 1e-7).unwrap();
                assert!((s - f.deriv(u)).abs() < 1e-5, "{s} vs {}", f.deriv(u));
            }
        }
    }

    #[test]
    fn polynomial_rejects_non_finite() {
        assert!(FluxModel::polynomial(vec![1.0, f64::NAN]).is_err());
        assert!(FluxModel::polynomial(vec![]).is_err());
    }

    #[test]
    fn polynomial_bound_covers_interior_peak() {
        // p' = 12 v (1 - v): zero at both endpoints, 3 at v = 1/2.
        let f = FluxModel::polynomial(vec![0.0, 0.0, 6.0, -4.0]).unwrap();
        assert!((f.lipschitz_bound() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_flux_matches_burgers_in_the_interior() {
        let n = 201;
        let table: Vec<f64> = (0..n).map(|k| 0.5 * (k as f64 / 200.0).powi(2)).collect();
        let f = FluxModel::tabulated(table).unwrap();
        // Centered differences are exact for quadratics at interior nodes.
        assert!((f.deriv(0.5) - 0.5).abs() < 1e-12);
        assert!((f.eval(0.3) - 0.045).abs() < 1e-5);
        assert!(f.is_convex());
    }

    #[test]
    fn convexity() {
        assert!(FluxModel::burgers().is_convex());
        assert!(FluxModel::shifted_square().is_convex());
        assert!(!FluxModel::polynomial(vec![0.0, 0.0, -1.0]).unwrap().is_convex());
    }

    proptest! {
        #[test]
        fn deriv_matches_centered_difference(v in 0.001f64..0.999) {
            for f in builtin() {
                let h = 1e-6;
                let fd = (f.eval(v + h) - f.eval(v - h)) / (2.0 * h);
                let d = f.deriv(v);
                prop_assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()));
            }
        }

        #[test]
        fn lipschitz_bound_dominates_samples(k in 0usize..=1000) {
            for f in builtin() {
                let v = k as f64 / 1000.0;
                prop_assert!(f.deriv(v).abs() <= f.lipschitz_bound() + 1e-12);
            }
        }

        #[test]
        fn shock_speed_symmetric_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assume!(a != b);
            for f in builtin() {
                let s = f.shock_speed(a, b).unwrap();
                prop_assert_eq!(s, f.shock_speed(b, a).unwrap());
                let (lo, hi) = (0..=1000).map(|k| f.deriv(k as f64 / 1000.0))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
                prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
            }
        }
    }
}
