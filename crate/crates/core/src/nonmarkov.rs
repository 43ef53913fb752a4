//! BLP non-Markovianity of the reduced qubit dynamics.
//!
//! The reduced evolution `ρ_q ↦ Tr_M[e^{Lt}(ρ_q ⊗ R)]` is linear in `ρ_q`,
//! so four joint runs (`|0⟩⟨0|`, `|1⟩⟨1|`, `σx/2`, `σy/2`, each `⊗ R`) give
//! the trajectory of every qubit pair sharing the meter state `R`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ame::{self, DephasingModel};
use crate::error::{Error, Result};
use crate::lz::LzParams;
use crate::open::{self, ContinuousCoupling, EvolveOptions, MeterParams};
use crate::operator::{StateReport, StateTolerances};
use crate::qubit::Mat2;
use crate::trajectory::Window;

/// Increments of `D` smaller than this are dropped as noise.
pub const INCREMENT_FLOOR: f64 = 1e-12;

/// Antipodal pure pair `(|ψ⟩⟨ψ|, |ψ⊥⟩⟨ψ⊥|)` with `ψ` at Bloch angles `(θ, φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub theta: f64,
    pub phi: f64,
}

impl StatePair {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn states(&self) -> (Mat2, Mat2) {
        let n = self.bloch();
        (bloch_state(n), bloch_state([-n[0], -n[1], -n[2]]))
    }

    /// The same pair with its two members exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            theta: PI - self.theta,
            phi: self.phi + PI,
        }
    }
}

/// `(1 + r·σ)/2`.
pub fn bloch_state(r: [f64; 3]) -> Mat2 {
    Mat2([
        [C64::new(0.5 * (1.0 + r[2]), 0.0), C64::new(0.5 * r[0], -0.5 * r[1])],
        [C64::new(0.5 * r[0], 0.5 * r[1]), C64::new(0.5 * (1.0 - r[2]), 0.0)],
    ])
}

/// Sampled reduced dynamical map: `images[k][i][j] = Φ_{t_k}(|i⟩⟨j|)`.
#[derive(Clone, Debug)]
pub struct ReducedMap {
    pub times: Vec<f64>,
    pub images: Vec<[[Mat2; 2]; 2]>,
    /// Worst validity report over the two population runs.
    pub worst_state: StateReport,
    pub max_meter_tail: f64,
}

impl ReducedMap {
    pub fn apply(&self, k: usize, rho: &Mat2) -> Mat2 {
        let im = &self.images[k];
        let mut out = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                out = out + im[i][j].scale(rho.0[i][j]);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}


/// Reduced map of the joint Lindblad dynamics with a thermal meter.
pub fn joint_reduced_map(
    lz: &LzParams,
    m: &MeterParams,
    window: &Window,
    dt: f64,
    samples: usize,
) -> Result<ReducedMap> {
    let protocol = ContinuousCoupling { lz: *lz, x0: m.x0 };
    let segments = open::segments_with_breaks(window, dt, &[]);
    let checked = EvolveOptions {
        samples,
        ..Default::default()
    };
    let unchecked = EvolveOptions {
        abort_on_violation: false,
        check_positivity: false,
        ..checked
    };
    // the joint generator needs Hermitian inputs, so |0⟩⟨1| is split into σx/2 + iσy/2
    let inputs = [
        (Mat2::real(1.0, 0.0, 0.0, 0.0), true),
        (Mat2::real(0.0, 0.0, 0.0, 1.0), true),
        (Mat2::real(0.0, 0.5, 0.5, 0.0), false),
        (Mat2([[C64::new(0.0, 0.0), C64::new(0.0, -0.5)], [C64::new(0.0, 0.5), C64::new(0.0, 0.0)]]), false),
    ];
    let runs = inputs
        .par_iter()
        .map(|(q, state)| {
            let rho0 = open::product_state(q, m);
            let opts = if *state { &checked } else { &unchecked };
            open::evolve_protocol(&rho0, &segments, lz, m, &protocol, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = runs[0].trajectory.times.clone();
    let images = (0..times.len())
        .map(|k| {
            let e00 = runs[0].reduced[k];
            let e11 = runs[1].reduced[k];
            let e01 = runs[2].reduced[k] + runs[3].reduced[k].scale(C64::new(0.0, 1.0));
            [[e00, e01], [e01.dagger(), e11]]
        })
        .collect();
    let worst_state = runs[0].trajectory.worst_report().merge(runs[1].trajectory.worst_report());
    let max_meter_tail = runs[..2]
        .iter()
        .fold(0.0f64, |a, r| a.max(r.trajectory.max_meter_tail()));
    Ok(ReducedMap {
        times,
        images,
        worst_state,
        max_meter_tail,
    })
}

/// Reduced map of the adiabatic master equation.
pub fn ame_reduced_map(
    lz: &LzParams,
    model: &DephasingModel,
    window: &Window,
    dt: f64,
    samples: usize,
) -> Result<ReducedMap> {
    // Φ is fixed by its action on I/2 and the three Bloch axes
    let axes = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    let runs = axes
        .iter()
        .map(|r| ame::evolve_ame_with(&bloch_state(*r), window, dt, lz, model, samples))
        .collect::<Result<Vec<_>>>()?;
    let times = runs[0].trajectory.times.clone();
    let images = (0..times.len())
        .map(|k| {
            let c = runs[0].reduced[k];
            let dx = runs[1].reduced[k] - c;
            let dy = runs[2].reduced[k] - c;
            let dz = runs[3].reduced[k] - c;
            // d_k = Φ(σ_k / 2); |0⟩⟨1| = (σx + iσy)/2
            let e00 = c + dz;
            let e11 = c - dz;
            let e01 = dx + dy.scale(C64::new(0.0, 1.0));
            [[e00, e01], [e01.dagger(), e11]]
        })
        .collect();
    let worst_state = runs
        .iter()
        .map(|r| r.trajectory.worst_report())
        .reduce(StateReport::merge)
        .expect("four runs");
    Ok(ReducedMap {
        times,
        images,
        worst_state,
        max_meter_tail: 0.0,
    })
}

/// `D(t_k) = ½‖Φ_{t_k}(ρ₁ − ρ₂)‖₁` for the pair.
pub fn distinguishability_from_map(map: &ReducedMap, pair: &StatePair) -> Vec<f64> {
    let (r1, r2) = pair.states();
    let diff = r1 - r2;
    (0..map.len()).map(|k| 0.5 * map.apply(k, &diff).trace_norm()).collect()
}

/// `D(t)` from two direct joint runs sharing the thermal meter state.
pub fn distinguishability_trajectory(
    pair: &StatePair,
    lz: &LzParams,
    m: &MeterParams,
    window: &Window,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (s1, s2) = pair.states();
    let segments = open::segments_with_breaks(window, dt, &[]);
    let protocol = ContinuousCoupling { lz: *lz, x0: m.x0 };
    let opts = EvolveOptions::default();
    let a = open::evolve_protocol(&open::product_state(&s1, m), &segments, lz, m, &protocol, &opts)?;
    let b = open::evolve_protocol(&open::product_state(&s2, m), &segments, lz, m, &protocol, &opts)?;
    let d = a
        .reduced
        .iter()
        .zip(&b.reduced)
        .map(|(x, y)| 0.5 * (*x - *y).trace_norm())
        .collect();
    Ok((a.trajectory.times, d))
}

/// `Σ max(0, D_{k+1} − D_k)`, dropping increments below [`INCREMENT_FLOOR`].
pub fn positive_increments(d: &[f64]) -> f64 {
    d.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|inc| *inc > INCREMENT_FLOOR)
        .sum()
}

/// `(θ, φ)` grid over the upper hemisphere; antipodal symmetry covers the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub refine: bool,
}

impl Default for PairGrid {
    fn default() -> Self {
        Self {
            n_theta: 6,
            n_phi: 6,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NmResult {
    pub n_value: f64,
    pub best_pair: StatePair,
    pub times: Vec<f64>,
    pub d_trajectory: Vec<f64>,
    pub grid: PairGrid,
    pub pairs_evaluated: usize,
}

/// Maximises the positive-increment integral over the pair grid, then over
/// a 3×3 sub-grid at one-third spacing around the best cell.
pub fn blp_from_map(map: &ReducedMap, grid: &PairGrid) -> Result<NmResult> {
    if grid.n_theta == 0 || grid.n_phi == 0 {
        return Err(Error::param("pair_grid", "needs at least one point per axis"));
    }
    let d_theta = 0.5 * PI / grid.n_theta as f64;
    let d_phi = 2.0 * PI / grid.n_phi as f64;
    let mut pairs: Vec<StatePair> = (0..grid.n_theta)
        .flat_map(|i| {
            (0..grid.n_phi).map(move |j| StatePair::new((i as f64 + 0.5) * d_theta, j as f64 * d_phi))
        })
        .collect();
    let score = |p: &StatePair| positive_increments(&distinguishability_from_map(map, p));
    let best_of = |pairs: &[StatePair]| {
        pairs
            .iter()
            .map(|p| (score(p), *p))
            .fold((f64::NEG_INFINITY, pairs[0]), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (mut best_n, mut best) = best_of(&pairs);
    let mut evaluated = pairs.len();
    if grid.refine {
        pairs.clear();
        for a in -1i32..=1 {
            for b in -1i32..=1 {
                if a == 0 && b == 0 {
                    continue;
                }
                pairs.push(StatePair::new(
                    best.theta + a as f64 * d_theta / 3.0,
                    best.phi + b as f64 * d_phi / 3.0,
                ));
            }
        }
        let (n, p) = best_of(&pairs);
        evaluated += pairs.len();
        if n > best_n {
            best_n = n;
            best = p;
        }
    }
    Ok(NmResult {
        n_value: best_n.max(0.0),
        best_pair: best,
        times: map.times.clone(),
        d_trajectory: distinguishability_from_map(map, &best),
        grid: *grid,
        pairs_evaluated: evaluated,
    })
}

/// Samples stored by [`blp_measure`]; `D` increments are taken between them.
pub const BLP_SAMPLES: usize = 2000;

/// BLP measure of the joint Lindblad dynamics.
pub fn blp_measure(
    lz: &LzParams,
    m: &MeterParams,
    window: &Window,
    dt: f64,
    grid: &PairGrid,
) -> Result<NmResult> {
    let map = joint_reduced_map(lz, m, window, dt, BLP_SAMPLES)?;
    check_map(&map)?;
    blp_from_map(&map, grid)
}

fn check_map(map: &ReducedMap) -> Result<()> {
    if let Some(detail) = map.worst_state.violation(&StateTolerances::default()) {
        let t = map.times.last().copied().unwrap_or(f64::NAN);
        return Err(Error::InvariantViolation { t, detail });
    }
    Ok(())
}
