//! Seeded random test instances.
//!
//! Every instance is small, exact, and fully determined by its seed: a
//! distribution on at most sixteen points with dyadic label means, a
//! predictor on the 1/16 value lattice, and a closure-completed bounded
//! class whose raw members take values in `{-1, -1/2, 0, 1/2, 1}`. Property
//! suites and hierarchy spot-checks run over fleets of these.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{DiscreteJoint, Point, Predictor};
use crate::hypotheses::{Hypothesis, HypothesisClass};

/// Value lattice for synthetic label means and predictions.
pub const SYNTH_GRID_STEP: f64 = 1.0 / 16.0;

/// A random distribution, predictor, and class drawn from one seed.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub dist: DiscreteJoint,
    pub pred: Predictor,
    pub class: HypothesisClass,
}

/// Deterministic random instance: 2–16 points with weights proportional to
/// integers in 1..=8, label means and predictions on the 1/16 lattice, and
/// 1–6 raw members over `{-1, -1/2, 0, 1/2, 1}` closure-completed into a
/// bounded class.
pub fn random_instance(seed: u64) -> SynthInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=16usize);
    let raw_weights: Vec<u32> = (0..n).map(|_| rng.random_range(1..=8u32)).collect();
    let total: u32 = raw_weights.iter().sum();

    let mut points = Vec::with_capacity(n);
    let mut values = BTreeMap::new();
    for (i, &w) in raw_weights.iter().enumerate() {
        let id = format!("x{i:02}");
        let p_star = f64::from(rng.random_range(0..=16u32)) / 16.0;
        let v = f64::from(rng.random_range(0..=16u32)) / 16.0;
        points.push(Point {
            id: id.clone(),
            weight: f64::from(w) / f64::from(total),
            p_star,
            features: None,
        });
        values.insert(id, v);
    }
    let dist = DiscreteJoint::new(points).expect("positive integer-ratio weights sum to 1");
    let pred =
        Predictor::with_grid_step(values, SYNTH_GRID_STEP).expect("lattice values are valid");

    const LEVELS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let member_count = rng.random_range(1..=6usize);
    let members = (0..member_count)
        .map(|k| {
            let table: BTreeMap<String, f64> = dist
                .points()
                .iter()
                .map(|p| (p.id.clone(), LEVELS[rng.random_range(0..LEVELS.len())]))
                .collect();
            Hypothesis::new(format!("c{k}"), table).expect("finite bounded table")
        })
        .collect();
    let class =
        HypothesisClass::closure_completed(members, true).expect("bounded members close cleanly");

    SynthInstance { dist, pred, class }
}
