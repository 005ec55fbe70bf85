//! Finite discrete joint distributions over (point, binary label) pairs and
//! the predictors defined on their support.
//!
//! A [`DiscreteJoint`] stores, for each point `x`, a marginal weight and the
//! conditional label mean `p_star(x) = Pr[y = 1 | x]`. A [`Predictor`] maps
//! each point to a value in `[0, 1]`, snapped to a fixed lattice so that
//! level sets (groups of points sharing a prediction) are well defined under
//! exact floating-point comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights must sum to 1 within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Default lattice step for prediction values: 2^-32.
///
/// Dyadic, so every value of the bundled reference instances (multiples of
/// 1/8 and 1/2) is a fixed point of snapping, and far finer than any
/// tolerance used elsewhere in the crate.
pub const DEFAULT_VALUE_GRID: f64 = 1.0 / 4_294_967_296.0;

/// One support point of a [`DiscreteJoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    /// Opaque identifier, unique within a distribution.
    pub id: String,
    /// Marginal probability mass, nonnegative.
    pub weight: f64,
    /// Conditional label mean `Pr[y = 1 | x]`, in `[0, 1]`.
    pub p_star: f64,
    /// Optional feature vector (kept for provenance; never interpreted).
    pub features: Option<Vec<f64>>,
}

/// A finite joint distribution over (point, binary label).
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    points: Vec<Point>,
    index: BTreeMap<String, usize>,
}

impl DiscreteJoint {
    /// Validate and build a distribution from explicit points.
    ///
    /// Requires at least one point, unique nonempty ids, finite nonnegative
    /// weights summing to 1 within [`WEIGHT_SUM_TOLERANCE`], and label means
    /// in `[0, 1]`.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut index = BTreeMap::new();
        let mut total = 0.0f64;
        for (i, p) in points.iter().enumerate() {
            if p.id.is_empty() {
                return Err(Error::InvalidDistribution("point id is empty".into()));
            }
            if !p.weight.is_finite() || p.weight < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "point `{}` has weight {}, expected a finite value >= 0",
                    p.id, p.weight
                )));
            }
            if !p.p_star.is_finite() || !(0.0..=1.0).contains(&p.p_star) {
                return Err(Error::InvalidDistribution(format!(
                    "point `{}` has label mean {}, expected a value in [0, 1]",
                    p.id, p.p_star
                )));
            }
            if let Some(f) = &p.features {
                if f.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "point `{}` has a non-finite feature",
                        p.id
                    )));
                }
            }
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate point id `{}`",
                    p.id
                )));
            }
            total += p.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1 within {WEIGHT_SUM_TOLERANCE:e}"
            )));
        }
        Ok(DiscreteJoint { points, index })
    }

    /// Aggregate labeled samples into an empirical distribution.
    ///
    /// Rows with identical feature vectors (compared by canonical bit
    /// pattern, with `-0.0` normalised to `0.0`) are merged; the merged
    /// point's weight is the row frequency and its label mean is the mean of
    /// the observed binary labels. Points are ordered by feature vector and
    /// given ids `x0`, `x1`, ... in that order, so the result does not depend
    /// on the input row order.
    pub fn from_samples(samples: &[(Vec<f64>, u8)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, u64, u64)> = BTreeMap::new();
        for (features, label) in samples {
            if *label > 1 {
                return Err(Error::BadLabel(*label));
            }
            if features.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidDistribution(
                    "sample feature is NaN".into(),
                ));
            }
            let key: Vec<u64> = features
                .iter()
                .map(|x| if *x == 0.0 { 0.0f64 } else { *x }.to_bits())
                .collect();
            let entry = groups.entry(key).or_insert_with(|| (features.clone(), 0, 0));
            entry.1 += 1;
            entry.2 += u64::from(*label);
        }
        let n = samples.len() as f64;
        let points = groups
            .into_values()
            .enumerate()
            .map(|(i, (features, count, ones))| Point {
                id: format!("x{i}"),
                weight: count as f64 / n,
                p_star: ones as f64 / count as f64,
                features: Some(features),
            })
            .collect();
        DiscreteJoint::new(points)
    }

    /// The support points, in insertion order.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Look up a point by id.
    pub fn get(&self, id: &str) -> Option<&Point> {
        self.index.get(id).map(|&i| &self.points[i])
    }

    /// Expected squared error of a constant-free predictor table against the
    /// labels: `E[(y - t(x))^2]` where `t` is given per point id.
    ///
    /// Shared helper for the boosting potential and several reports; errors
    /// with [`Error::MissingPoint`] if `t` misses a positive-weight point.
    pub fn squared_error<F>(&self, mut t: F) -> Result<f64>
    where
        F: FnMut(&str) -> Option<f64>,
    {
        let mut total = 0.0;
        for p in &self.points {
            if p.weight == 0.0 {
                continue;
            }
            let v = t(&p.id).ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
            total += p.weight * ((v - p.p_star) * (v - p.p_star) + p.p_star * (1.0 - p.p_star));
        }
        Ok(total)
    }

    /// Parse a distribution from its JSON file format.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistFile =
            serde_json::from_str(s).map_err(|e| Error::parse("distribution JSON", e))?;
        DiscreteJoint::new(
            file.points
                .into_iter()
                .map(|p| Point {
                    id: p.id,
                    weight: p.weight,
                    p_star: p.p_star,
                    features: p.features,
                })
                .collect(),
        )
    }

    /// Serialize to the distribution JSON file format (deterministic).
    pub fn to_json_string(&self) -> String {
        let file = DistFile {
            points: self
                .points
                .iter()
                .map(|p| PointDto {
                    id: p.id.clone(),
                    weight: p.weight,
                    p_star: p.p_star,
                    features: p.features.clone(),
                })
                .collect(),
        };
        crate::jsonio::to_json_string(&file)
    }
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    points: Vec<PointDto>,
}

#[derive(Serialize, Deserialize)]
struct PointDto {
    id: String,
    weight: f64,
    p_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
}

/// A predictor: a map from point ids to values in `[0, 1]`, snapped to a
/// fixed lattice so that equal predictions compare exactly equal.
#[derive(Debug, Clone)]
pub struct Predictor {
    values: BTreeMap<String, f64>,
    grid_step: f64,
}

impl Predictor {
    /// Build a predictor with the default value lattice
    /// ([`DEFAULT_VALUE_GRID`]).
    pub fn new(values: BTreeMap<String, f64>) -> Result<Self> {
        Predictor::with_grid_step(values, DEFAULT_VALUE_GRID)
    }

    /// Build a predictor snapping values to multiples of `grid_step`.
    pub fn with_grid_step(values: BTreeMap<String, f64>, grid_step: f64) -> Result<Self> {
        if !(grid_step.is_finite() && grid_step > 0.0 && grid_step <= 1.0) {
            return Err(Error::InvalidPredictor(format!(
                "grid step {grid_step} outside (0, 1]"
            )));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut snapped = BTreeMap::new();
        for (id, v) in values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPredictor(format!(
                    "value {v} for point `{id}` outside [0, 1]"
                )));
            }
            snapped.insert(id, Predictor::snap(grid_step, v));
        }
        Ok(Predictor {
            values: snapped,
            grid_step,
        })
    }

    /// Constant predictor over the support of `dist`.
    pub fn constant(dist: &DiscreteJoint, v: f64) -> Result<Self> {
        Predictor::new(
            dist.points()
                .iter()
                .map(|p| (p.id.clone(), v))
                .collect(),
        )
    }

    /// Snap `v` to the nearest multiple of `grid_step`, clamped to `[0, 1]`.
    pub fn snap(grid_step: f64, v: f64) -> f64 {
        ((v / grid_step).round() * grid_step).clamp(0.0, 1.0)
    }

    /// The snapped value at `id`, if present.
    pub fn value(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    /// All snapped values, keyed by point id.
    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    /// The lattice step values were snapped to.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Parse a predictor from its JSON file format. An absent `grid_step`
    /// key selects the default value lattice.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PredictorFile =
            serde_json::from_str(s).map_err(|e| Error::parse("predictor JSON", e))?;
        Predictor::with_grid_step(file.values, file.grid_step)
    }

    /// Serialize to the predictor JSON file format (deterministic). The
    /// emitted `grid_step` makes parse → serialize a bitwise fixed point:
    /// stored values are already snapped, and snapping is idempotent.
    pub fn to_json_string(&self) -> String {
        let file = PredictorFile {
            values: self.values.clone(),
            grid_step: self.grid_step,
        };
        crate::jsonio::to_json_string(&file)
    }
}

#[derive(Serialize, Deserialize)]
struct PredictorFile {
    values: BTreeMap<String, f64>,
    #[serde(default = "default_value_grid")]
    grid_step: f64,
}

fn default_value_grid() -> f64 {
    DEFAULT_VALUE_GRID
}

/// Marginal distribution of predictions: `(value, mass)` in ascending value
/// order, positive-mass values only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionMarginal {
    pub support: Vec<(f64, f64)>,
}

impl PredictionMarginal {
    /// Total mass (should be 1 up to accumulation error).
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|(_, m)| m).sum()
    }
}

/// One level set of a predictor: the conditional distribution over points
/// sharing the prediction `v`.
#[derive(Debug, Clone)]
pub struct LevelSetView {
    /// The shared prediction value.
    pub v: f64,
    /// Marginal mass of the level set.
    pub mass: f64,
    /// Conditional point probabilities within the level set.
    pub conditional_weights: BTreeMap<String, f64>,
}

/// Internal flattened level-set layout used by audits and grid scans.
///
/// `point` indexes into `dist.points()`; levels are in ascending `v` order
/// and only positive-mass points appear.
#[derive(Debug, Clone)]
pub(crate) struct IndexedLevel {
    pub v: f64,
    pub mass: f64,
    /// `(point index, conditional weight)` pairs, in distribution order.
    pub members: Vec<(usize, f64)>,
    /// Conditional label mean of the level set.
    pub p_star_mean: f64,
}

pub(crate) fn indexed_levels(pred: &Predictor, dist: &DiscreteJoint) -> Result<Vec<IndexedLevel>> {
    // Group positive-weight points by exact (snapped) prediction value. The
    // bit pattern of a nonnegative f64 orders identically to its value, so a
    // BTreeMap keyed on bits yields ascending-v iteration.
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, p) in dist.points().iter().enumerate() {
        if p.weight == 0.0 {
            continue;
        }
        let v = pred
            .value(&p.id)
            .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
        groups.entry(v.to_bits()).or_default().push(i);
    }
    let mut levels = Vec::with_capacity(groups.len());
    for (bits, idxs) in groups {
        let v = f64::from_bits(bits);
        let mass: f64 = idxs.iter().map(|&i| dist.points()[i].weight).sum();
        if mass == 0.0 {
            continue;
        }
        let members: Vec<(usize, f64)> = idxs
            .iter()
            .map(|&i| (i, dist.points()[i].weight / mass))
            .collect();
        let p_star_mean = members
            .iter()
            .map(|&(i, cw)| cw * dist.points()[i].p_star)
            .sum();
        levels.push(IndexedLevel {
            v,
            mass,
            members,
            p_star_mean,
        });
    }
    if levels.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(levels)
}

/// Distinct prediction values with positive mass, ascending.
pub fn image(pred: &Predictor, dist: &DiscreteJoint) -> Result<Vec<f64>> {
    Ok(indexed_levels(pred, dist)?.into_iter().map(|l| l.v).collect())
}

/// Marginal distribution of the prediction value.
pub fn prediction_marginal(pred: &Predictor, dist: &DiscreteJoint) -> Result<PredictionMarginal> {
    Ok(PredictionMarginal {
        support: indexed_levels(pred, dist)?
            .into_iter()
            .map(|l| (l.v, l.mass))
            .collect(),
    })
}

/// All level sets of `pred` under `dist`, ascending in value.
pub fn level_sets(pred: &Predictor, dist: &DiscreteJoint) -> Result<Vec<LevelSetView>> {
    Ok(indexed_levels(pred, dist)?
        .into_iter()
        .map(|l| LevelSetView {
            v: l.v,
            mass: l.mass,
            conditional_weights: l
                .members
                .iter()
                .map(|&(i, cw)| (dist.points()[i].id.clone(), cw))
                .collect(),
        })
        .collect())
}

/// The level set at value `v` (snapped to the predictor's lattice).
pub fn level_set(pred: &Predictor, dist: &DiscreteJoint, v: f64) -> Result<LevelSetView> {
    let snapped = Predictor::snap(pred.grid_step(), v);
    level_sets(pred, dist)?
        .into_iter()
        .find(|l| l.v == snapped)
        .ok_or(Error::EmptyLevelSet(v))
}

/// Conditional label mean `E[y | pred = v]`.
pub fn conditional_label_mean(pred: &Predictor, dist: &DiscreteJoint, v: f64) -> Result<f64> {
    let snapped = Predictor::snap(pred.grid_step(), v);
    indexed_levels(pred, dist)?
        .into_iter()
        .find(|l| l.v == snapped)
        .map(|l| l.p_star_mean)
        .ok_or(Error::EmptyLevelSet(v))
}
