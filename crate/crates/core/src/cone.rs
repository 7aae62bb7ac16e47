//! Geometry of the cone `K` of columns non-decreasing in `v`.
//!
//! The projection onto `K` is isotonic regression, computed exactly by
//! pool-adjacent-violators (PAVA). At a state `y ∈ K` the tangent cone only
//! constrains directions on runs where `y` is flat, so projecting onto it is
//! an independent isotonic regression on each flat run. The interaction
//! functional at `y` is the squared distance from `-G` to that tangent cone,
//! where `G = f_v ∂_x Y` is the free-transport velocity.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::KineticField;

/// Euclidean projection onto non-decreasing vectors, in place.
///
/// The output is exactly non-decreasing: each pooled block writes the mean
/// that was compared during pooling. Block sums carry a compensation term so
/// the column sum is preserved to a few ulps even after many merges.
pub fn project_monotone_in_place(y: &mut [f64]) {
    // (sum, compensation, len, mean) per pooled block.
    let mut blocks: Vec<(f64, f64, usize, f64)> = Vec::with_capacity(y.len());
    for &val in y.iter() {
        let (mut sum, mut comp, mut len, mut mean) = (val, 0.0, 1usize, val);
        while let Some(&(psum, pcomp, plen, pmean)) = blocks.last() {
            if pmean <= mean {
                break;
            }
            blocks.pop();
            let (s, e) = two_sum(sum, psum);
            sum = s;
            comp += pcomp + e;
            len += plen;
            mean = (sum + comp) / len as f64;
        }
        blocks.push((sum, comp, len, mean));
    }
    let mut k = 0;
    for (_, _, len, mean) in blocks {
        y[k..k + len].fill(mean);
        k += len;
    }
}

/// `a + b = s + e` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    (s, (a - (s - bp)) + (b - bp))
}

pub fn project_monotone(y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    project_monotone_in_place(&mut out);
    out
}

/// Moreau decomposition `y = yK + yN` with `yK = P_K(y)` and `yN` in the polar cone.
pub fn moreau_split(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let yk = project_monotone(y);
    let yn = y.iter().zip(&yk).map(|(a, b)| a - b).collect();
    (yk, yn)
}

/// Maximal runs of length at least two on which a column is flat.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBlockPartition {
    pub blocks: Vec<Range<usize>>,
    pub tol: f64,
}

impl FlatBlockPartition {
    /// Whether index `j` lies in a constrained block.
    pub fn block_of(&self, j: usize) -> Option<&Range<usize>> {
        self.blocks.iter().find(|b| b.contains(&j))
    }
}

/// Runs of consecutive indices with `y[j+1] - y[j] <= tol`.
pub fn flat_blocks(y: &[f64], tol: f64) -> FlatBlockPartition {
    let mut blocks = Vec::new();
    let mut start = 0;
    for j in 1..=y.len() {
        let continues = j < y.len() && y[j] - y[j - 1] <= tol;
        if !continues {
            if j - start >= 2 {
                blocks.push(start..j);
            }
            start = j;
        }
    }
    FlatBlockPartition { blocks, tol }
}

/// How the flat-run tolerance is chosen per column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum FlatTolerance {
    Absolute(f64),
    /// Multiple of the column's range `max - min`.
    RelativeToRange(f64),
}

impl Default for FlatTolerance {
    fn default() -> Self {
        FlatTolerance::RelativeToRange(1e-10)
    }
}

impl FlatTolerance {
    pub fn resolve(self, column: &[f64]) -> f64 {
        match self {
            FlatTolerance::Absolute(t) => t,
            FlatTolerance::RelativeToRange(r) => {
                let (lo, hi) = column
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
                if hi > lo {
                    r * (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_state(state: &[f64], tol: f64) -> Result<()> {
    match state.windows(2).position(|w| w[0] - w[1] > tol) {
        None => Ok(()),
        Some(j) => Err(Error::InvalidState {
            column: 0,
            index: j + 1,
            drop: state[j] - state[j + 1],
            tol,
        }),
    }
}

/// Projection of `g` onto the tangent cone of `K` at `state`.
pub fn project_tangent(state: &[f64], g: &[f64], tol: f64) -> Result<Vec<f64>> {
    if state.len() != g.len() {
        return Err(Error::Shape(format!(
            "state has {} entries, direction has {}",
            state.len(),
            g.len()
        )));
    }
    check_state(state, tol)?;
    let mut out = g.to_vec();
    for block in flat_blocks(state, tol).blocks {
        project_monotone_in_place(&mut out[block]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnInteraction {
    /// `argmin_{V ∈ T_K(state)} ‖V + transport‖`
    pub minimizer: Vec<f64>,
    /// `dv Σ_j (minimizer_j + transport_j)^2`
    pub value: f64,
}

pub fn interaction_column(state: &[f64], transport: &[f64], dv: f64, tol: f64) -> Result<ColumnInteraction> {
    let neg: Vec<f64> = transport.iter().map(|t| -t).collect();
    let minimizer = project_tangent(state, &neg, tol)?;
    let value = dv
        * minimizer
            .iter()
            .zip(transport)
            .map(|(m, t)| (m + t) * (m + t))
            .sum::<f64>();
    Ok(ColumnInteraction { minimizer, value })
}

/// `f_v(v_j) · (Y[i+1][j] - Y[i-1][j]) / (2 dx)` for column `i`.
pub fn transport_column(field: &KineticField, speeds: &[f64], i: usize) -> Vec<f64> {
    field
        .centered_dx_column(i)
        .into_iter()
        .zip(speeds)
        .map(|(d, c)| c * d)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionProfile {
    /// Per-cell minimal value over the tangent cone of that column.
    pub profile: Vec<f64>,
    /// `dx Σ_i profile_i`, the squared global minimum over `T_K(Y)`.
    pub total: f64,
}

pub fn interaction_field(field: &KineticField, flux: &FluxModel, tol: FlatTolerance) -> Result<InteractionProfile> {
    let grid = *field.grid();
    let speeds: Vec<f64> = grid.vs().into_iter().map(|v| flux.deriv(v)).collect();
    let profile = (0..grid.nx())
        .into_par_iter()
        .map(|i| {
            let state = field.column(i);
            let transport = transport_column(field, &speeds, i);
            interaction_column(state, &transport, grid.dv(), tol.resolve(state))
                .map(|c| c.value)
                .map_err(|e| match e {
                    Error::InvalidState { index, drop, tol, .. } => Error::InvalidState {
                        column: i,
                        index,
                        drop,
                        tol,
                    },
                    other => other,
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let total = grid.dx() * profile.iter().sum::<f64>();
    Ok(InteractionProfile { profile, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::Grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over all 2^(n-1) ways of cutting `y` into consecutive
    /// blocks: replace each block by its mean, keep the feasible candidate
    /// with the smallest squared error.
    fn brute_force_projection(y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for cuts in 0u32..(1 << (n - 1)) {
            let mut cand = Vec::with_capacity(n);
            let mut start = 0;
            for j in 1..=n {
                if j == n || cuts & (1 << (j - 1)) != 0 {
                    let mean = y[start..j].iter().sum::<f64>() / (j - start) as f64;
                    cand.extend(std::iter::repeat(mean).take(j - start));
                    start = j;
                }
            }
            if cand.windows(2).any(|w| w[0] > w[1] + 1e-12) {
                continue;
            }
            let err: f64 = cand.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().map_or(true, |(e, _)| err < *e - 1e-15) {
                best = Some((err, cand));
            }
        }
        best.unwrap().1
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_monotone(&[0.0, 0.5, 1.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(project_monotone(&[1.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(project_monotone(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        // Frozen from the brute-force oracle.
        assert_eq!(brute_force_projection(&[1.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(brute_force_projection(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn moreau_examples() {
        let (k, n) = moreau_split(&[0.1, 0.2, 0.9]);
        assert_eq!(k, vec![0.1, 0.2, 0.9]);
        assert_eq!(n, vec![0.0; 3]);
        let (k, n) = moreau_split(&[1.0, 0.0]);
        assert_eq!((k, n), (vec![0.5, 0.5], vec![0.5, -0.5]));
        let (k, n) = moreau_split(&[3.0, 1.0, 2.0]);
        assert_eq!((k, n), (vec![2.0; 3], vec![1.0, -1.0, 0.0]));
    }

    #[test]
    fn flat_block_examples() {
        assert!(flat_blocks(&[0.0, 0.1, 0.2, 0.3], 1e-12).blocks.is_empty());
        assert_eq!(flat_blocks(&[0.4; 5], 1e-12).blocks, vec![0..5]);
        assert_eq!(
            flat_blocks(&[0.0, 0.0, 0.0, 1.0, 1.0], 1e-12).blocks,
            vec![0..3, 3..5]
        );
    }

    #[test]
    fn tangent_projection_examples() {
        let g = [0.3, -0.2, 0.5, -1.0];
        let increasing = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(project_tangent(&increasing, &g, 1e-12).unwrap(), g.to_vec());
        let constant = [0.7; 4];
        assert_eq!(project_tangent(&constant, &g, 1e-12).unwrap(), project_monotone(&g));
        let bad = [0.5, 0.2, 0.6, 0.7];
        assert!(matches!(
            project_tangent(&bad, &g, 1e-12),
            Err(Error::InvalidState { index: 1, .. })
        ));
    }

    #[test]
    fn smoothed_shock_column_minimizer_is_constant() {
        // Column equal to w on [u-, u+] = [0.25, 0.75], 0 below and 1 above;
        // ∂_x Y = d on the middle block and 0 elsewhere, Burgers speeds.
        let nv = 16;
        let dv = 1.0 / nv as f64;
        let vs: Vec<f64> = (0..nv).map(|j| (j as f64 + 0.5) * dv).collect();
        let state: Vec<f64> = vs.iter().map(|&v| if v < 0.25 { 0.0 } else if v <= 0.75 { 0.4 } else { 1.0 }).collect();
        let d = 2.5;
        let transport: Vec<f64> = vs
            .iter()
            .zip(&state)
            .map(|(&v, &s)| if s == 0.4 { v * d } else { 0.0 })
            .collect();
        let res = interaction_column(&state, &transport, dv, 1e-12).unwrap();
        let block: Vec<usize> = (0..nv).filter(|&j| state[j] == 0.4).collect();
        let mean_speed = block.iter().map(|&j| vs[j]).sum::<f64>() / block.len() as f64;
        for &j in &block {
            assert!((res.minimizer[j] + mean_speed * d).abs() < 1e-12);
        }
        let sigma = 0.5; // Burgers, u- = 0.25, u+ = 0.75
        assert!((mean_speed - sigma).abs() < 1e-12);
        let expected = dv * d * d * block.iter().map(|&j| (vs[j] - sigma).powi(2)).sum::<f64>();
        assert!((res.value - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_transport_zero_interaction() {
        let res = interaction_column(&[0.0, 0.5, 0.5, 1.0], &[0.0; 4], 0.25, 1e-12).unwrap();
        assert_eq!(res.minimizer, vec![0.0; 4]);
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn flat_tolerance_resolution() {
        assert_eq!(FlatTolerance::default().resolve(&[0.0, 2.0]), 2e-10);
        assert_eq!(FlatTolerance::default().resolve(&[0.3, 0.3]), 0.0);
        assert_eq!(FlatTolerance::Absolute(1e-3).resolve(&[0.0, 2.0]), 1e-3);
    }

    #[test]
    fn interaction_field_of_x_constant_field_vanishes() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let y = KineticField::from_fn(g, |_, v| v * v);
        let p = interaction_field(&y, &FluxModel::burgers(), FlatTolerance::default()).unwrap();
        assert!(p.profile.iter().all(|&v| v == 0.0));
        assert_eq!(p.total, 0.0);
    }

    #[test]
    fn oracle_equivalence_on_small_alphabet() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alphabet = [-1.0, -0.5, 0.0, 0.5, 1.0];
        for _ in 0..2000 {
            let n = rng.gen_range(1..=8);
            let y: Vec<f64> = (0..n).map(|_| alphabet[rng.gen_range(0..5)]).collect();
            assert_close(&project_monotone(&y), &brute_force_projection(&y), 1e-9);
        }
    }

    fn random_tangent_direction(rng: &mut ChaCha8Rng, state: &[f64], tol: f64) -> Vec<f64> {
        let mut w: Vec<f64> = (0..state.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in flat_blocks(state, tol).blocks {
            w[b].sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        w
    }

    proptest! {
        #[test]
        fn projection_properties(a in proptest::collection::vec(-3.0f64..3.0, 1..40),
                                 shift in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let pa = project_monotone(&a);
            prop_assert!(pa.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(project_monotone(&pa), pa.clone());
            let abs: f64 = a.iter().map(|x| x.abs()).sum();
            prop_assert!((pa.iter().sum::<f64>() - a.iter().sum::<f64>()).abs() <= 1e-12 * abs.max(1.0));
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let pb = project_monotone(&b);
            let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let dab = d(&a, &b);
            prop_assert!(d(&pa, &pb) <= dab * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn moreau_properties(y in proptest::collection::vec(-2.0f64..2.0, 1..30), seed in 0u64..1000) {
            let (yk, yn) = moreau_split(&y);
            let norm2: f64 = y.iter().map(|v| v * v).sum();
            let inner: f64 = yk.iter().zip(&yn).map(|(a, b)| a * b).sum();
            prop_assert!(inner.abs() <= 1e-10 * norm2.max(1e-300) + 1e-14);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let mut w: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                w.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let pair: f64 = yn.iter().zip(&w).map(|(a, b)| a * b).sum();
                prop_assert!(pair <= 1e-12 * (1.0 + norm2));
            }
        }

        #[test]
        fn tangent_projection_is_optimal(
            raw in proptest::collection::vec(0usize..4, 2..24),
            g in proptest::collection::vec(-2.0f64..2.0, 24),
            seed in 0u64..1000,
        ) {
            // Non-decreasing staircase state with repeated levels.
            let mut state: Vec<f64> = raw.iter().map(|&k| k as f64 * 0.25).collect();
            state.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let g = &g[..state.len()];
            let tol = 1e-12;
            let out = project_tangent(&state, g, tol).unwrap();
            let resid: Vec<f64> = g.iter().zip(&out).map(|(a, b)| a - b).collect();
            let scale: f64 = g.iter().map(|v| v * v).sum::<f64>().max(1.0);
            let orth: f64 = resid.iter().zip(&out).map(|(a, b)| a * b).sum();
            prop_assert!(orth.abs() <= 1e-10 * scale);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let w = random_tangent_direction(&mut rng, &state, tol);
                let pair: f64 = resid.iter().zip(&w).map(|(a, b)| a * b).sum();
                prop_assert!(pair <= 1e-10 * scale);
            }
            // Value identity: dv ‖G + P‖² = dv (‖G‖² - ‖P‖²) with G = -g.
            let transport: Vec<f64> = g.iter().map(|v| -v).collect();
            let dv = 1.0 / state.len() as f64;
            let res = interaction_column(&state, &transport, dv, tol).unwrap();
            let gg: f64 = transport.iter().map(|v| v * v).sum();
            let pp: f64 = res.minimizer.iter().map(|v| v * v).sum();
            prop_assert!((res.value - dv * (gg - pp)).abs() <= 1e-10 * (dv * gg).max(1e-12));
        }
    }
}
