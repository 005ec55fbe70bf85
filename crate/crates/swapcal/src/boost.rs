//! Iterative calibration boosting: find the level set with the worst
//! class-correlated residual, move predictions along the witness, snap to a
//! fixed value lattice, repeat until every level set is quiet. Also the
//! bucket-coarsening transform and the end-to-end swap-agnostic learning
//! pipeline (boost, then compose the loss's optimal action).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audit::{audit, swap_agnostic_regret, Target};
use crate::distributions::{DiscreteJoint, Predictor};
use crate::error::{Error, Result};
use crate::hypotheses::{
    lin_grid_size, validate_class, weak_agnostic_learn, CompetitorSet, Hypothesis,
    HypothesisClass, DEFAULT_GRID_CAP,
};
use crate::losses::LossSpec;

/// How far an accepted update moves predictions on the chosen level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Least-squares step: the measured violation divided by the witness's
    /// conditional second moment — the one-step potential-optimal choice.
    CorrelationStep,
    /// A fixed step size in `(0, 1]`, applied along the witness direction.
    Fixed { eta: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::CorrelationStep
    }
}

/// Which weak-agnostic-learner searches for violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Exhaustive scan of the class (exact argmax).
    #[default]
    Exhaustive,
}

/// Configuration for [`mcboost`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Target swap multicalibration error, in `(0, 1]`.
    pub alpha: f64,
    /// Prediction lattice resolution; `1/grid_step` must be an integer.
    /// Defaults to `1/ceil(4/alpha)` (roughly `alpha/4`).
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub step_rule: StepRule,
    /// Iteration cap. Defaults to `ceil(16/alpha^2)`.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub learner: Learner,
}

impl BoostConfig {
    /// A config with the given target and all defaults.
    pub fn new(alpha: f64) -> Result<Self> {
        let config = BoostConfig {
            alpha,
            grid_step: None,
            step_rule: StepRule::default(),
            max_iterations: None,
            learner: Learner::default(),
        };
        config.resolve()?;
        Ok(config)
    }

    /// Validate and materialize the derived parameters:
    /// `(lattice step, lattice size, iteration cap)`.
    fn resolve(&self) -> Result<(f64, u64, usize)> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "boost target alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        let delta = match self.grid_step {
            Some(d) => d,
            None => 1.0 / (4.0 / self.alpha).ceil(),
        };
        if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
            return Err(Error::BadDelta(delta));
        }
        let m_f = 1.0 / delta;
        if (m_f - m_f.round()).abs() > 1e-6 {
            return Err(Error::BadDelta(delta));
        }
        let m = m_f.round() as u64;
        if let StepRule::Fixed { eta } = self.step_rule {
            if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "fixed step size {eta} outside (0, 1]"
                )));
            }
        }
        let cap = match self.max_iterations {
            Some(0) => {
                return Err(Error::InvalidConfig(
                    "iteration cap must be positive".into(),
                ))
            }
            Some(c) => c,
            None => (16.0 / (self.alpha * self.alpha)).ceil() as usize,
        };
        Ok((delta, m, cap))
    }
}

/// One accepted boosting update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Zero-based update index.
    pub iteration: usize,
    /// Level-set value that was corrected.
    pub v: f64,
    /// Witness member moved along.
    pub witness: String,
    /// Conditional correlation `E[c(x)(y - v) | v]` that triggered the
    /// update (nonnegative: the class is negation-closed).
    pub violation: f64,
    /// Applied step size.
    pub step: f64,
    /// Squared-error potential `E[(y - p(x))^2]` before the update.
    pub potential_before: f64,
    /// Potential after the update (strictly smaller).
    pub potential_after: f64,
}

/// Full run record of a boosting call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Audited swap multicalibration error of the final predictor.
    pub final_smce: f64,
}

/// Squared-error potential of a lattice assignment:
/// `E[(y - j/m)^2] = sum w [(j/m - p*)^2 + p*(1 - p*)]`.
fn lattice_potential(points: &[(&str, f64, f64)], j: &[u64], m: u64) -> f64 {
    let mf = m as f64;
    points
        .iter()
        .zip(j)
        .map(|((_, w, p), jj)| {
            let v = *jj as f64 / mf;
            w * ((v - p) * (v - p) + p * (1.0 - p))
        })
        .sum()
}

/// Boost a predictor to swap multicalibration target `alpha` against a
/// negation- and constant-closed, bounded hypothesis class.
///
/// Starts from the constant-1/2 predictor, repeatedly finds the level set
/// with the largest mass-weighted conditional violation via the configured
/// weak learner, steps along the witness, clamps to `[0, 1]`, and snaps to
/// the value lattice (choosing, per snapped group, the bracket endpoint
/// closest to the group's conditional label mean — this keeps the snapping
/// penalty below `mass * step^2 / 4`, so the squared-error potential
/// decreases at every accepted update). Terminates when every level set's
/// violation is at most `alpha/2`; the returned predictor is re-audited and
/// guaranteed to have `smce <= alpha`.
pub fn mcboost(
    dist: &DiscreteJoint,
    class: &HypothesisClass,
    config: &BoostConfig,
) -> Result<(Predictor, BoostTrace)> {
    let (delta, m, cap) = config.resolve()?;
    if !class.is_bounded() {
        return Err(Error::InvalidClass(
            "boosting requires a class flagged bounded (member values in [-1, 1])".into(),
        ));
    }
    let structure = validate_class(class, dist);
    if !structure.is_valid() {
        return Err(Error::InvalidClass(format!(
            "class fails structural validation: {} member/point gaps, missing constants {:?}, \
             {} members without negations, {} bound violations",
            structure.missing_points.len(),
            structure.missing_constants,
            structure.missing_negations.len(),
            structure.bound_violations.len()
        )));
    }

    let points: Vec<(&str, f64, f64)> = dist
        .points()
        .iter()
        .filter(|p| p.weight > 0.0)
        .map(|p| (p.id.as_str(), p.weight, p.p_star))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mf = m as f64;
    let mut j: Vec<u64> = vec![(0.5 * mf).round() as u64; points.len()];
    let mut potential = lattice_potential(&points, &j, m);
    let mut trace = BoostTrace {
        iterations: Vec::new(),
        converged: false,
        final_smce: f64::NAN,
    };
    let mut iterations = 0usize;

    loop {
        // Current level sets, ascending by lattice index.
        let mut levels: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, jj) in j.iter().enumerate() {
            levels.entry(*jj).or_default().push(i);
        }
        // Worst violation per level via the weak learner.
        struct Candidate {
            j: u64,
            mass: f64,
            violation: f64,
            witness: Hypothesis,
        }
        let mut candidates = Vec::with_capacity(levels.len());
        for (&jj, idx) in &levels {
            let v = jj as f64 / mf;
            let mass: f64 = idx.iter().map(|&i| points[i].1).sum();
            let residuals: Vec<(String, f64, f64)> = idx
                .iter()
                .map(|&i| {
                    let (id, w, p) = points[i];
                    (id.to_string(), w / mass, p - v)
                })
                .collect();
            let (witness, corr) = match config.learner {
                Learner::Exhaustive => weak_agnostic_learn(class, &residuals)?,
            };
            candidates.push(Candidate {
                j: jj,
                mass,
                violation: corr,
                witness,
            });
        }
        let max_violation = candidates
            .iter()
            .fold(0.0f64, |a, c| a.max(c.violation));
        if max_violation <= config.alpha / 2.0 {
            trace.converged = true;
            break;
        }
        if iterations >= cap {
            break;
        }
        // Largest mass-weighted violation first; smaller level value on ties.
        candidates.sort_by(|a, b| {
            (b.mass * b.violation)
                .partial_cmp(&(a.mass * a.violation))
                .expect("violations are finite")
                .then(a.j.cmp(&b.j))
        });
        let mut accepted = false;
        for cand in &candidates {
            if cand.violation <= config.alpha / 2.0 {
                // Only violating level sets are worth correcting, but the
                // ordering is by mass-weighted violation: a heavy level that
                // is already fine can sort ahead of a light one that still
                // violates, so keep scanning instead of stopping.
                continue;
            }
            let idx = &levels[&cand.j];
            let v = cand.j as f64 / mf;
            let witness_at = |i: usize| -> f64 {
                cand.witness
                    .value(points[i].0)
                    .expect("validated on the support")
            };
            let eta = match config.step_rule {
                StepRule::CorrelationStep => {
                    let mass: f64 = cand.mass;
                    let second_moment: f64 = idx
                        .iter()
                        .map(|&i| points[i].1 / mass * witness_at(i) * witness_at(i))
                        .sum();
                    // A nonzero violation forces a nonzero witness on the
                    // level set, so the moment is positive.
                    cand.violation / second_moment
                }
                StepRule::Fixed { eta } => eta,
            };
            // Move, clamp, then snap; snapping groups points by their moved
            // value and sends each group to whichever neighboring lattice
            // point is closest to the group's conditional label mean (the
            // group's potential-optimal choice among the two).
            let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for &i in idx {
                let t = (v + eta * witness_at(i)).clamp(0.0, 1.0);
                groups.entry(t.to_bits()).or_default().push(i);
            }
            let mut next = j.clone();
            for (tbits, gidx) in &groups {
                let t = f64::from_bits(*tbits);
                let j_lo = ((t * mf + 1e-9).floor() as u64).min(m);
                let j_hi = (j_lo + 1).min(m);
                let gmass: f64 = gidx.iter().map(|&i| points[i].1).sum();
                let gmean: f64 =
                    gidx.iter().map(|&i| points[i].1 * points[i].2).sum::<f64>() / gmass;
                let d_lo = (j_lo as f64 / mf - gmean).abs();
                let d_hi = (j_hi as f64 / mf - gmean).abs();
                let snapped = if d_hi < d_lo { j_hi } else { j_lo };
                for &i in gidx {
                    next[i] = snapped;
                }
            }
            let next_potential = lattice_potential(&points, &next, m);
            if next_potential < potential {
                trace.iterations.push(IterationRecord {
                    iteration: iterations,
                    v,
                    witness: cand.witness.name().to_string(),
                    violation: cand.violation,
                    step: eta,
                    potential_before: potential,
                    potential_after: next_potential,
                });
                j = next;
                potential = next_potential;
                accepted = true;
                break;
            }
        }
        if !accepted {
            // No violating level set admits a potential-decreasing update at
            // this lattice resolution; stop rather than loop.
            break;
        }
        iterations += 1;
    }

    let values: BTreeMap<String, f64> = points
        .iter()
        .zip(&j)
        .map(|((id, _, _), jj)| (id.to_string(), *jj as f64 / mf))
        .collect();
    let pred = Predictor::with_grid_step(values, delta)?;
    let report = audit(dist, &pred, class)?;
    trace.final_smce = report.smce;
    if trace.converged && report.smce <= config.alpha {
        Ok((pred, trace))
    } else {
        trace.converged = false;
        Err(Error::DidNotConverge {
            iterations,
            final_smce: report.smce,
            trace: Box::new(trace),
        })
    }
}

/// Coarsen a predictor onto the lattice `{delta, 2*delta, ..., 1}`: a value
/// in `[(k-1)*delta, k*delta)` maps to `k*delta` (so 0 maps to `delta`, and
/// the top bucket `[1-delta, 1]` maps to 1). Never moves a prediction by
/// more than `delta`: exactly so when `delta` is a negative power of two
/// (whose lattice is exact in floating point), and up to one unit of
/// rounding in the last place for other unit fractions, whose lattice
/// points `k*delta` must themselves be rounded.
pub fn bucketize(pred: &Predictor, delta: f64) -> Result<Predictor> {
    if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    let m_f = 1.0 / delta;
    if (m_f - m_f.round()).abs() > 1e-6 {
        return Err(Error::BadDelta(delta));
    }
    let m = m_f.round() as u64;
    let values: BTreeMap<String, f64> = pred
        .values()
        .iter()
        .map(|(id, v)| {
            let bucket = (((v * m_f + 1e-9).floor() as u64) + 1).min(m);
            (id.clone(), bucket as f64 * delta)
        })
        .collect();
    Predictor::with_grid_step(values, delta)
}

/// Options for [`swap_agnostic_learn_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SwapLearnOptions {
    /// Competitor combination budget `W` (l1 norm of member weights).
    pub budget: f64,
    /// Verification grid step; `None` picks the finest of 1/8, 1/4, 1/2
    /// whose enumeration fits the default cap.
    pub verify_step: Option<f64>,
    /// Boost lattice override.
    pub grid_step: Option<f64>,
    /// Boost iteration cap override.
    pub max_iterations: Option<usize>,
}

impl Default for SwapLearnOptions {
    fn default() -> Self {
        SwapLearnOptions {
            budget: 1.0,
            verify_step: None,
            grid_step: None,
            max_iterations: None,
        }
    }
}

/// Result of the swap-agnostic learning pipeline.
#[derive(Debug, Clone)]
pub struct SwapLearnOutcome {
    /// The learned hypothesis: the loss's optimal action composed over the
    /// boosted predictor.
    pub hypothesis: Hypothesis,
    /// The boosted predictor itself.
    pub predictor: Predictor,
    pub trace: BoostTrace,
    /// Calibration target the boost ran with: `epsilon / (2(W + B + 1))`.
    pub alpha: f64,
    /// Measured swap regret of the hypothesis against the verification grid.
    pub verified_regret: f64,
    /// Grid step the verification ran at.
    pub verify_step: f64,
    /// Competitor budget the verification ran at.
    pub budget: f64,
}

/// [`swap_agnostic_learn_with`] with default options (budget 1, automatic
/// verification grid).
pub fn swap_agnostic_learn(
    dist: &DiscreteJoint,
    class: &HypothesisClass,
    loss: &LossSpec,
    epsilon: f64,
) -> Result<SwapLearnOutcome> {
    swap_agnostic_learn_with(dist, class, loss, epsilon, &SwapLearnOptions::default())
}

/// Learn a hypothesis whose swap agnostic regret for `loss` against the
/// class's combination grid is at most `epsilon`:
/// boost to calibration target `epsilon / (2(W + B + 1))`, compose the
/// loss's optimal action over the predictor, and verify the regret by an
/// exhaustive grid scan (erroring if the guarantee is missed).
///
/// The loss must be convex and pass its own niceness check; `B` is its
/// declared label-difference bound.
pub fn swap_agnostic_learn_with(
    dist: &DiscreteJoint,
    class: &HypothesisClass,
    loss: &LossSpec,
    epsilon: f64,
    options: &SwapLearnOptions,
) -> Result<SwapLearnOutcome> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "regret target {epsilon} must be positive"
        )));
    }
    if !(options.budget.is_finite() && options.budget > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "competitor budget {} must be positive",
            options.budget
        )));
    }
    if !loss.is_convex() {
        return Err(Error::InvalidConfig(format!(
            "loss `{}` is not declared convex; the boosting guarantee needs convexity",
            loss.name()
        )));
    }
    let niceness = loss.check_nice(loss.niceness_bound(), 1e-3);
    if !niceness.is_nice() {
        return Err(Error::InvalidConfig(format!(
            "loss `{}` fails its niceness check (first violation: {:?})",
            loss.name(),
            niceness.violations.first()
        )));
    }
    let b = loss.niceness_bound();
    let w = options.budget;
    let alpha = epsilon / (2.0 * (w + b + 1.0));
    let mut config = BoostConfig::new(alpha)?;
    config.grid_step = options.grid_step;
    config.max_iterations = options.max_iterations;
    let (predictor, trace) = mcboost(dist, class, &config)?;

    // Compose the optimal action over the predictor's image.
    let mut action_by_value: BTreeMap<u64, f64> = BTreeMap::new();
    for v in crate::distributions::image(&predictor, dist)? {
        action_by_value.insert(v.to_bits(), loss.optimal_action(v));
    }
    let table: BTreeMap<String, f64> = predictor
        .values()
        .iter()
        .filter(|(id, _)| dist.get(id).map(|p| p.weight > 0.0).unwrap_or(false))
        .map(|(id, v)| {
            let action = action_by_value
                .get(&v.to_bits())
                .copied()
                .unwrap_or_else(|| loss.optimal_action(*v));
            (id.clone(), action)
        })
        .collect();
    let hypothesis = Hypothesis::new("post-processed", table)?;

    let verify_step = match options.verify_step {
        Some(s) => s,
        None => {
            let members = class.members().len();
            let mut chosen = None;
            for s in [0.125, 0.25, 0.5] {
                if lin_grid_size(members, w, s)? <= DEFAULT_GRID_CAP as u128 {
                    chosen = Some(s);
                    break;
                }
            }
            match chosen {
                Some(s) => s,
                None => {
                    return Err(Error::GridTooLarge {
                        combinations: lin_grid_size(members, w, 0.5)?,
                        cap: DEFAULT_GRID_CAP,
                    })
                }
            }
        }
    };
    let competitors = CompetitorSet::lin_grid(class, w, verify_step);
    let verified_regret =
        swap_agnostic_regret(dist, Target::Hypothesis(&hypothesis), loss, &competitors)?;
    if verified_regret > epsilon + 1e-9 {
        return Err(Error::RegretAboveTarget {
            target: epsilon,
            achieved: verified_regret,
        });
    }
    Ok(SwapLearnOutcome {
        hypothesis,
        predictor,
        trace,
        alpha,
        verified_regret,
        verify_step,
        budget: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Point;

    fn two_point(p_a: f64, p_b: f64) -> (DiscreteJoint, HypothesisClass) {
        let dist = DiscreteJoint::new(vec![
            Point {
                id: "a".into(),
                weight: 0.5,
                p_star: p_a,
                features: None,
            },
            Point {
                id: "b".into(),
                weight: 0.5,
                p_star: p_b,
                features: None,
            },
        ])
        .unwrap();
        let s = Hypothesis::new(
            "s",
            [("a".to_string(), 1.0), ("b".to_string(), -1.0)]
                .into_iter()
                .collect(),
        )
        .unwrap();
        let class = HypothesisClass::closure_completed(vec![s], true).unwrap();
        (dist, class)
    }

    #[test]
    fn two_point_instance_converges() {
        let (dist, class) = two_point(0.9, 0.1);
        let mut config = BoostConfig::new(0.01).unwrap();
        config.grid_step = Some(0.0125);
        let (pred, trace) = mcboost(&dist, &class, &config).unwrap();
        assert!(trace.converged);
        assert!(
            trace.final_smce <= 0.01,
            "audited smce {} above target",
            trace.final_smce
        );
        let first = &trace.iterations[0];
        assert_eq!(first.v, 0.5, "first correction at the initial level");
        assert!(
            (first.violation - 0.4).abs() <= 1e-12,
            "E[s(y - 1/2)] = (0.4 + 0.4)/2 = 0.4, got {}",
            first.violation
        );
        assert!(
            (pred.value("a").unwrap() - 0.9).abs() <= 1e-12,
            "one correlation step lands on the label mean, got {:?}",
            pred.value("a")
        );
        assert!((pred.value("b").unwrap() - 0.1).abs() <= 1e-12);
        // Potential is strictly decreasing across accepted updates.
        for rec in &trace.iterations {
            assert!(
                rec.potential_after < rec.potential_before,
                "potential must drop at iteration {}",
                rec.iteration
            );
        }
    }

    #[test]
    fn already_calibrated_converges_without_updates() {
        let dist = DiscreteJoint::new(vec![
            Point {
                id: "a".into(),
                weight: 0.5,
                p_star: 0.5,
                features: None,
            },
            Point {
                id: "b".into(),
                weight: 0.5,
                p_star: 0.5,
                features: None,
            },
        ])
        .unwrap();
        let s = Hypothesis::new(
            "s",
            [("a".to_string(), 1.0), ("b".to_string(), -1.0)]
                .into_iter()
                .collect(),
        )
        .unwrap();
        let class = HypothesisClass::closure_completed(vec![s], true).unwrap();
        let config = BoostConfig::new(0.05).unwrap();
        let (pred, trace) = mcboost(&dist, &class, &config).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations.is_empty(), "initial 1/2 is already perfect");
        assert_eq!(pred.value("a"), Some(0.5));
        assert_eq!(trace.final_smce, 0.0);
    }

    #[test]
    fn iteration_cap_forces_failure() {
        // Asymmetric labels: one correlation step cannot quiet both levels.
        let (dist, class) = two_point(0.9, 0.2);
        let mut config = BoostConfig::new(0.01).unwrap();
        config.max_iterations = Some(1);
        let err = mcboost(&dist, &class, &config).unwrap_err();
        match err {
            Error::DidNotConverge {
                iterations, trace, ..
            } => {
                assert_eq!(iterations, 1);
                assert_eq!(trace.iterations.len(), 1, "the single update is traced");
                assert!(!trace.converged);
            }
            other => panic!("expected DidNotConverge, got {other:?}"),
        }
    }

    #[test]
    fn fixed_step_rule_converges_on_symmetric_instance() {
        let (dist, class) = two_point(0.9, 0.1);
        let mut config = BoostConfig::new(0.01).unwrap();
        config.grid_step = Some(0.0125);
        config.step_rule = StepRule::Fixed { eta: 0.4 };
        let (pred, trace) = mcboost(&dist, &class, &config).unwrap();
        assert!(trace.converged);
        assert!((pred.value("a").unwrap() - 0.9).abs() <= 1e-12);
        assert!((pred.value("b").unwrap() - 0.1).abs() <= 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        assert!(matches!(
            BoostConfig::new(0.0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(BoostConfig::new(1.5), Err(Error::InvalidConfig(_))));
        let mut config = BoostConfig::new(0.1).unwrap();
        config.grid_step = Some(0.3); // 1/0.3 is not an integer
        assert!(matches!(
            mcboost(
                &DiscreteJoint::new(vec![Point {
                    id: "a".into(),
                    weight: 1.0,
                    p_star: 0.5,
                    features: None
                }])
                .unwrap(),
                &HypothesisClass::closure_completed(
                    vec![Hypothesis::constant("1", ["a"], 1.0).unwrap()],
                    true
                )
                .unwrap(),
                &config
            ),
            Err(Error::BadDelta(_))
        ));
        config.grid_step = None;
        config.step_rule = StepRule::Fixed { eta: 0.0 };
        assert!(matches!(config.resolve(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unclosed_class_is_rejected() {
        let (dist, _) = two_point(0.9, 0.1);
        let bare = HypothesisClass::new(
            vec![Hypothesis::new(
                "s",
                [("a".to_string(), 1.0), ("b".to_string(), -1.0)]
                    .into_iter()
                    .collect(),
            )
            .unwrap()],
            true,
        )
        .unwrap();
        let config = BoostConfig::new(0.05).unwrap();
        assert!(matches!(
            mcboost(&dist, &bare, &config),
            Err(Error::InvalidClass(_))
        ));
    }

    #[test]
    fn bucketize_frozen_examples() {
        let dist = DiscreteJoint::new(vec![
            Point {
                id: "a".into(),
                weight: 0.25,
                p_star: 0.5,
                features: None,
            },
            Point {
                id: "b".into(),
                weight: 0.25,
                p_star: 0.5,
                features: None,
            },
            Point {
                id: "c".into(),
                weight: 0.5,
                p_star: 0.5,
                features: None,
            },
        ])
        .unwrap();
        let _ = dist;
        let pred = Predictor::new(
            [
                ("a".to_string(), 0.3),
                ("b".to_string(), 1.0),
                ("c".to_string(), 0.0),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();
        let coarse = bucketize(&pred, 0.25).unwrap();
        assert_eq!(coarse.value("a"), Some(0.5), "0.3 sits in [0.25, 0.5)");
        assert_eq!(coarse.value("b"), Some(1.0), "top bucket is closed");
        assert_eq!(coarse.value("c"), Some(0.25), "0 maps to delta, not 0");
        // Never moves a value by more than delta.
        for (id, v) in pred.values() {
            let c = coarse.value(id).unwrap();
            assert!(
                (c - v).abs() <= 0.25 + 1e-15,
                "bucketing moved {id} by {}",
                (c - v).abs()
            );
        }
        assert!(matches!(bucketize(&pred, 0.3), Err(Error::BadDelta(_))));
    }

    #[test]
    fn swap_learning_end_to_end() {
        let (dist, class) = two_point(0.9, 0.1);
        let loss = crate::losses::half_squared();
        let outcome = swap_agnostic_learn(&dist, &class, &loss, 0.05).unwrap();
        assert!(
            outcome.verified_regret <= 0.05,
            "verified regret {} above target",
            outcome.verified_regret
        );
        // Half squared error's optimal action is the probability itself, so
        // the hypothesis coincides with the predictor.
        for id in ["a", "b"] {
            let h = outcome.hypothesis.value(id).unwrap();
            let p = outcome.predictor.value(id).unwrap();
            assert!(
                (h - p).abs() <= 1e-9,
                "identity post-processing, got h={h} p={p} at {id}"
            );
        }
        assert!(
            (outcome.alpha - 0.05 / (2.0 * (1.0 + 0.5 + 1.0))).abs() <= 1e-15,
            "alpha = eps / (2(W+B+1)) with W=1, B=1/2"
        );
    }

    #[test]
    fn swap_learning_rejects_non_nice_loss() {
        let (dist, class) = two_point(0.9, 0.1);
        // Raw squared loss declares bound 1 but its label difference has
        // slope 2 — the niceness check must catch it.
        let loss = crate::losses::squared();
        assert!(matches!(
            swap_agnostic_learn(&dist, &class, &loss, 0.05),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn quiet_heavy_levels_do_not_mask_violating_light_ones() {
        // Update candidates are scanned in mass-weighted-violation order, so
        // a heavy level already below the alpha/2 threshold can outrank a
        // light level still above it. The scan must skip past the quiet
        // level rather than stop; these seeds historically stalled that way
        // (converged = false after a handful of updates, cap untouched).
        let config = BoostConfig::new(0.05).expect("valid alpha");
        for seed in [77u64, 81, 85, 98] {
            let inst = crate::synth::random_instance(seed);
            let (pred, trace) = mcboost(&inst.dist, &inst.class, &config)
                .unwrap_or_else(|e| panic!("seed {seed} must converge: {e}"));
            assert!(trace.converged, "seed {seed} converged");
            let smce = crate::audit::audit(&inst.dist, &pred, &inst.class)
                .expect("boosted predictor audits")
                .smce;
            assert!(smce <= 0.05, "seed {seed}: audited smce {smce} within alpha");
        }
    }
}
