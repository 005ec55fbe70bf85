//! Exact calibration audits and regret computations over discrete
//! distributions: per-level-set correlation audits (swap multicalibration),
//! bad-interval extraction, swap/plain agnostic regret, omniprediction
//! regret, and outcome-indistinguishability violations, all with
//! deterministic witness reporting.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::distributions::{indexed_levels, DiscreteJoint, Predictor};
use crate::error::{Error, Result};
use crate::hypotheses::{CompetitorSet, Hypothesis, HypothesisClass, LinCombination};
use crate::losses::{LossFamily, LossSpec};

/// Per-level-set audit detail.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSetAudit {
    /// The prediction value.
    pub v: f64,
    /// Probability of the level set.
    pub mass: f64,
    /// Largest absolute conditional correlation `|E[c(x)(y - v) | v]|`
    /// over the class.
    pub alpha_v: f64,
    /// Name of a member attaining `alpha_v` (ties: lexicographically
    /// smallest name).
    pub witness: String,
    /// Signed correlation of the witness (its absolute value is `alpha_v`).
    pub witness_correlation: f64,
    /// Conditional label mean `E[y | v]`.
    pub p_star_v: f64,
}

/// Identification of the audited artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct AuditMetadata {
    /// Support points in the distribution.
    pub points: usize,
    /// Number of class members audited.
    pub class_members: usize,
    /// FNV-1a digest of the predictor table.
    pub predictor_digest: String,
    /// FNV-1a digest of the class member tables.
    pub class_digest: String,
}

/// Full audit: swap multicalibration, multicalibration, calibration and
/// multiaccuracy errors, with per-level-set detail in ascending `v` order.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// `E_v[ max_c |E[c(x)(y - v) | v]| ]`.
    pub smce: f64,
    /// `max_c E_v[ |E[c(x)(y - v) | v]| ]`.
    pub mce: f64,
    /// `E_v[ |E[y - v | v]| ]`.
    pub calibration_error: f64,
    /// `max_c |E[c(x)(y - p(x))]|`.
    pub multiaccuracy_error: f64,
    /// Ascending by `v`.
    pub level_sets: Vec<LevelSetAudit>,
    pub metadata: AuditMetadata,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Stable digest of a predictor's table (id, value-bits pairs).
pub fn predictor_digest(pred: &Predictor) -> String {
    let mut h = FNV_OFFSET;
    for (id, v) in pred.values() {
        h = fnv1a_extend(h, id.as_bytes());
        h = fnv1a_extend(h, &[0xff]);
        h = fnv1a_extend(h, &v.to_bits().to_le_bytes());
        h = fnv1a_extend(h, &[0xfe]);
    }
    format!("{h:016x}")
}

/// Stable digest of a class (member names and tables).
pub fn class_digest(class: &HypothesisClass) -> String {
    let mut h = FNV_OFFSET;
    for m in class.members() {
        h = fnv1a_extend(h, m.name().as_bytes());
        h = fnv1a_extend(h, &[0xff]);
        for (id, v) in m.table() {
            h = fnv1a_extend(h, id.as_bytes());
            h = fnv1a_extend(h, &[0xfd]);
            h = fnv1a_extend(h, &v.to_bits().to_le_bytes());
        }
        h = fnv1a_extend(h, &[0xfe]);
    }
    format!("{h:016x}")
}

/// Audit a predictor against a hypothesis class.
///
/// Produces all four error metrics in one pass over the level sets. Errors
/// with [`Error::MissingPoint`] when a member is undefined on a support
/// point.
pub fn audit(
    dist: &DiscreteJoint,
    pred: &Predictor,
    class: &HypothesisClass,
) -> Result<AuditReport> {
    let levels = indexed_levels(pred, dist)?;
    let points = dist.points();
    let members = class.members();
    if members.is_empty() {
        return Err(Error::EmptyClass);
    }

    let mut smce = 0.0;
    let mut calibration_error = 0.0;
    let mut level_sets = Vec::with_capacity(levels.len());
    // Accumulators across levels: per-member E_v |corr| and global
    // residual correlation.
    let mut mce_acc = vec![0.0f64; members.len()];
    let mut macc_acc = vec![0.0f64; members.len()];

    for level in &levels {
        let mut best: Option<(f64, usize)> = None; // (signed corr, member idx)
        for (m, member) in members.iter().enumerate() {
            let mut corr = 0.0;
            for &(j, cw) in &level.members {
                let p = &points[j];
                let c = member
                    .value(&p.id)
                    .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
                corr += cw * c * (p.p_star - level.v);
            }
            mce_acc[m] += level.mass * corr.abs();
            // E[c(y - p~)] restricted to this level is the same sum, since
            // the predictor equals v across the level set.
            macc_acc[m] += level.mass * corr;
            let better = match best {
                None => true,
                Some((b, bi)) => {
                    corr.abs() > b.abs()
                        || (corr.abs() == b.abs() && member.name() < members[bi].name())
                }
            };
            if better {
                best = Some((corr, m));
            }
        }
        let (corr, m) = best.expect("class is nonempty");
        let alpha_v = corr.abs();
        smce += level.mass * alpha_v;
        calibration_error += level.mass * (level.p_star_mean - level.v).abs();
        level_sets.push(LevelSetAudit {
            v: level.v,
            mass: level.mass,
            alpha_v,
            witness: members[m].name().to_string(),
            witness_correlation: corr,
            p_star_v: level.p_star_mean,
        });
    }

    let mce = mce_acc.iter().fold(0.0f64, |a, x| a.max(*x));
    let multiaccuracy_error = macc_acc.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    Ok(AuditReport {
        smce,
        mce,
        calibration_error,
        multiaccuracy_error,
        level_sets,
        metadata: AuditMetadata {
            points: points.len(),
            class_members: members.len(),
            predictor_digest: predictor_digest(pred),
            class_digest: class_digest(class),
        },
    })
}

/// The level-set values where a hypothesis (or the whole class) violates
/// calibration by at least `beta`, with their total probability mass.
#[derive(Debug, Clone, Serialize)]
pub struct BadSet {
    /// Ascending level-set values with `|E[c(x)(y - v)|v]| >= beta`.
    pub values: Vec<f64>,
    /// Total mass of those level sets.
    pub mass: f64,
}

/// Output of [`bad_intervals`].
#[derive(Debug, Clone, Serialize)]
pub struct BadIntervals {
    pub beta: f64,
    /// Per-member bad sets, keyed by member name.
    pub per_hypothesis: BTreeMap<String, BadSet>,
    /// Union over members: values where some member violates by `beta`.
    pub global: BadSet,
}

/// Level sets with conditional correlation at least `beta`, per member and
/// globally. Masses obey the Markov bounds `mass(bad_c) <= mce/beta` and
/// `mass(global) <= smce/beta`.
pub fn bad_intervals(
    dist: &DiscreteJoint,
    pred: &Predictor,
    class: &HypothesisClass,
    beta: f64,
) -> Result<BadIntervals> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bad-interval threshold {beta} must be positive"
        )));
    }
    let levels = indexed_levels(pred, dist)?;
    let points = dist.points();
    let mut per_hypothesis = BTreeMap::new();
    let mut global_values: Vec<f64> = Vec::new();
    let mut global_mass = 0.0;
    let mut global_flags = vec![false; levels.len()];
    for member in class.members() {
        let mut values = Vec::new();
        let mut mass = 0.0;
        for (li, level) in levels.iter().enumerate() {
            let mut corr = 0.0;
            for &(j, cw) in &level.members {
                let p = &points[j];
                let c = member
                    .value(&p.id)
                    .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
                corr += cw * c * (p.p_star - level.v);
            }
            if corr.abs() >= beta {
                values.push(level.v);
                mass += level.mass;
                global_flags[li] = true;
            }
        }
        per_hypothesis.insert(member.name().to_string(), BadSet { values, mass });
    }
    for (li, level) in levels.iter().enumerate() {
        if global_flags[li] {
            global_values.push(level.v);
            global_mass += level.mass;
        }
    }
    Ok(BadIntervals {
        beta,
        per_hypothesis,
        global: BadSet {
            values: global_values,
            mass: global_mass,
        },
    })
}

/// What a regret computation conditions on: a predictor's level sets or a
/// hypothesis's level sets.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Predictor(&'a Predictor),
    Hypothesis(&'a Hypothesis),
}

impl<'a> From<&'a Predictor> for Target<'a> {
    fn from(p: &'a Predictor) -> Self {
        Target::Predictor(p)
    }
}

impl<'a> From<&'a Hypothesis> for Target<'a> {
    fn from(h: &'a Hypothesis) -> Self {
        Target::Hypothesis(h)
    }
}

impl Target<'_> {
    fn value(&self, id: &str) -> Result<f64> {
        let v = match self {
            Target::Predictor(p) => p.value(id),
            Target::Hypothesis(h) => h.value(id),
        };
        v.ok_or_else(|| Error::MissingPoint(id.to_string()))
    }
}

/// Support points grouped into contiguous level slices, in ascending level
/// order, for streamed competitor scans.
struct LevelLayout<'a> {
    /// Point ids in level-major order.
    ids: Vec<&'a str>,
    /// Aligned to `ids`: conditional weight within the level.
    cond_weights: Vec<f64>,
    /// Aligned to `ids`: absolute weight.
    abs_weights: Vec<f64>,
    /// Aligned to `ids`: label mean.
    p_star: Vec<f64>,
    /// `(value, mass, start..end)` per level.
    levels: Vec<(f64, f64, std::ops::Range<usize>)>,
}

fn level_layout<'a>(dist: &'a DiscreteJoint, target: &Target) -> Result<LevelLayout<'a>> {
    // Group positive-weight points by target value bits, ascending value.
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let points = dist.points();
    for (j, p) in points.iter().enumerate() {
        if p.weight <= 0.0 {
            continue;
        }
        let t = target.value(&p.id)?;
        let key = if t == 0.0 { 0.0f64 } else { t }.to_bits();
        groups.entry(key).or_default().push(j);
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut keys: Vec<(f64, Vec<usize>)> = groups
        .into_iter()
        .map(|(bits, idx)| (f64::from_bits(bits), idx))
        .collect();
    keys.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let mut layout = LevelLayout {
        ids: Vec::new(),
        cond_weights: Vec::new(),
        abs_weights: Vec::new(),
        p_star: Vec::new(),
        levels: Vec::new(),
    };
    for (v, idx) in keys {
        let start = layout.ids.len();
        let mass: f64 = idx.iter().map(|&j| points[j].weight).sum();
        for &j in &idx {
            let p = &points[j];
            layout.ids.push(p.id.as_str());
            layout.cond_weights.push(p.weight / mass);
            layout.abs_weights.push(p.weight);
            layout.p_star.push(p.p_star);
        }
        layout.levels.push((v, mass, start..layout.ids.len()));
    }
    Ok(layout)
}

/// Swap agnostic regret: `E[loss(y, h(x))]` minus the best per-level-set
/// competitor loss, `E_v[ min_c E[loss(y, c(x)) | h(x) = v] ]`. Negative
/// values certify that `h` beats the competitor set on every level.
pub fn swap_agnostic_regret(
    dist: &DiscreteJoint,
    target: Target<'_>,
    loss: &LossSpec,
    competitors: &CompetitorSet<'_>,
) -> Result<f64> {
    let layout = level_layout(dist, &target)?;
    // Loss of the target itself: on each level set the target's action is
    // the level value (hypotheses carry their own action values).
    let mut h_loss = 0.0;
    for (v, mass, range) in &layout.levels {
        let mut acc = 0.0;
        for j in range.clone() {
            acc += layout.cond_weights[j] * loss.eval_extended(layout.p_star[j], *v);
        }
        h_loss += mass * acc;
    }
    let n_levels = layout.levels.len();
    let mins = competitors.fold(
        &layout.ids,
        || vec![f64::INFINITY; n_levels],
        |mins: &mut Vec<f64>, values, _| {
            for (li, (_, _, range)) in layout.levels.iter().enumerate() {
                let mut acc = 0.0;
                for j in range.clone() {
                    acc += layout.cond_weights[j] * loss.eval_extended(layout.p_star[j], values[j]);
                }
                if acc < mins[li] {
                    mins[li] = acc;
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y < *x {
                    *x = y;
                }
            }
            a
        },
    )?;
    let best: f64 = layout
        .levels
        .iter()
        .enumerate()
        .map(|(li, (_, mass, _))| mass * mins[li])
        .sum();
    Ok(h_loss - best)
}

/// Omniprediction regret: loss of the post-processed predictor
/// `k_loss ∘ pred` minus the single best competitor overall.
pub fn omniprediction_regret(
    dist: &DiscreteJoint,
    pred: &Predictor,
    loss: &LossSpec,
    competitors: &CompetitorSet<'_>,
) -> Result<f64> {
    let target = Target::Predictor(pred);
    let layout = level_layout(dist, &target)?;
    let mut post_loss = 0.0;
    for (v, mass, range) in &layout.levels {
        let action = loss.optimal_action(*v);
        let mut acc = 0.0;
        for j in range.clone() {
            acc += layout.cond_weights[j] * loss.eval_extended(layout.p_star[j], action);
        }
        post_loss += mass * acc;
    }
    let min = competitors.fold(
        &layout.ids,
        || f64::INFINITY,
        |min: &mut f64, values, _| {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                acc += layout.abs_weights[j] * loss.eval_extended(layout.p_star[j], *v);
            }
            if acc < *min {
                *min = acc;
            }
        },
        f64::min,
    )?;
    Ok(post_loss - min)
}

/// Swap omniprediction regret: the adversary picks a loss from the family
/// *and* a competitor per level set;
/// `E_v[ max_l ( E[l(y, k_l(v)) | v] - min_c E[l(y, c(x)) | v] ) ]`.
pub fn swap_omni_regret(
    dist: &DiscreteJoint,
    pred: &Predictor,
    family: &LossFamily,
    competitors: &CompetitorSet<'_>,
) -> Result<f64> {
    let target = Target::Predictor(pred);
    let layout = level_layout(dist, &target)?;
    let losses = family.losses();
    let n_levels = layout.levels.len();
    let n_losses = losses.len();
    // Post-processing loss per (level, loss).
    let mut post = vec![0.0f64; n_levels * n_losses];
    for (li, (v, _, range)) in layout.levels.iter().enumerate() {
        for (fi, loss) in losses.iter().enumerate() {
            let action = loss.optimal_action(*v);
            let mut acc = 0.0;
            for j in range.clone() {
                acc += layout.cond_weights[j] * loss.eval_extended(layout.p_star[j], action);
            }
            post[li * n_losses + fi] = acc;
        }
    }
    let mins = competitors.fold(
        &layout.ids,
        || vec![f64::INFINITY; n_levels * n_losses],
        |mins: &mut Vec<f64>, values, _| {
            for (li, (_, _, range)) in layout.levels.iter().enumerate() {
                for (fi, loss) in losses.iter().enumerate() {
                    let mut acc = 0.0;
                    for j in range.clone() {
                        acc += layout.cond_weights[j]
                            * loss.eval_extended(layout.p_star[j], values[j]);
                    }
                    let slot = &mut mins[li * n_losses + fi];
                    if acc < *slot {
                        *slot = acc;
                    }
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y < *x {
                    *x = y;
                }
            }
            a
        },
    )?;
    let mut regret = 0.0;
    for (li, (_, mass, _)) in layout.levels.iter().enumerate() {
        let mut worst = f64::NEG_INFINITY;
        for fi in 0..n_losses {
            let gap = post[li * n_losses + fi] - mins[li * n_losses + fi];
            if gap > worst {
                worst = gap;
            }
        }
        regret += mass * worst;
    }
    Ok(regret)
}

/// Loss outcome-indistinguishability violation of a fixed hypothesis:
/// `|E[u(x, p, y*)] - E[u(x, p, y~)]|` where
/// `u = loss(y, k(v)) - loss(y, c(x))`, `y* ~ Ber(p*(x))`, and
/// `y~ ~ Ber(p(x))`.
pub fn loss_oi_violation(
    dist: &DiscreteJoint,
    pred: &Predictor,
    loss: &LossSpec,
    c: &Hypothesis,
) -> Result<f64> {
    let mut diff = 0.0;
    for p in dist.points() {
        if p.weight <= 0.0 {
            continue;
        }
        let v = pred
            .value(&p.id)
            .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
        let action = loss.optimal_action(v);
        let cx = c
            .value(&p.id)
            .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
        let u_star = loss.eval_extended(p.p_star, action) - loss.eval_extended(p.p_star, cx);
        let u_tilde = loss.eval_extended(v, action) - loss.eval_extended(v, cx);
        diff += p.weight * (u_star - u_tilde);
    }
    Ok(diff.abs())
}

/// [`loss_oi_violation`] for a linear combination (materialized over the
/// class).
pub fn loss_oi_violation_lin(
    dist: &DiscreteJoint,
    pred: &Predictor,
    loss: &LossSpec,
    lin: &LinCombination,
    class: &HypothesisClass,
) -> Result<f64> {
    let h = lin.materialize(class, "lin")?;
    loss_oi_violation(dist, pred, loss, &h)
}

/// Largest loss-OI violation over a streamed competitor set, with the
/// attaining weights.
#[derive(Debug, Clone, Serialize)]
pub struct MaxLossOi {
    pub value: f64,
    /// Member weights of the attaining combination (unit weight on a single
    /// member for raw members).
    pub witness: BTreeMap<String, f64>,
}

/// Stream `max_c loss_oi_violation` over a competitor set using the
/// discrete-derivative form
/// `E[u(y*)] - E[u(y~)] = sum_x w(x) (p*(x) - p(x)) (dl(k(v)) - dl(c(x)))`,
/// which agrees with the blend form exactly (an algebraic identity). Linear
/// discrete derivatives take an analytic fast path.
pub fn max_loss_oi_violation(
    dist: &DiscreteJoint,
    pred: &Predictor,
    loss: &LossSpec,
    competitors: &CompetitorSet<'_>,
) -> Result<MaxLossOi> {
    let target = Target::Predictor(pred);
    let layout = level_layout(dist, &target)?;
    let n = layout.ids.len();
    // Residual weights r_j = w_j (p*_j - p~_j) and the constant term
    // sum_j r_j * dl(k(v_j)).
    let mut residual = vec![0.0f64; n];
    let mut k_term = 0.0;
    for (v, _, range) in &layout.levels {
        let action = loss.optimal_action(*v);
        let dk = loss.partial(action);
        for j in range.clone() {
            residual[j] = layout.abs_weights[j] * (layout.p_star[j] - v);
            k_term += residual[j] * dk;
        }
    }
    let linear = loss.linear_partial();
    let residual_total: f64 = residual.iter().sum();

    #[derive(Clone)]
    struct Best {
        value: f64,
        weights: Vec<f64>,
    }
    let names: Vec<String> = competitors
        .class()
        .members()
        .iter()
        .map(|m| m.name().to_string())
        .collect();
    let best = competitors.fold(
        &layout.ids,
        || Best {
            value: f64::NEG_INFINITY,
            weights: Vec::new(),
        },
        |best: &mut Best, values, weights| {
            let c_term = match linear {
                Some((a, b)) => {
                    let dot: f64 = residual
                        .iter()
                        .zip(values)
                        .map(|(r, t)| r * t)
                        .sum();
                    a * residual_total + b * dot
                }
                None => residual
                    .iter()
                    .zip(values)
                    .map(|(r, t)| r * loss.partial(*t))
                    .sum(),
            };
            let violation = (k_term - c_term).abs();
            if violation > best.value {
                best.value = violation;
                best.weights = weights.to_vec();
            }
        },
        |a, b| {
            // Keep the earlier branch on exact ties so the merged result is
            // the first maximizer in enumeration order.
            if b.value > a.value {
                b
            } else {
                a
            }
        },
    )?;
    let witness: BTreeMap<String, f64> = best
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, w)| (names[i].clone(), *w))
        .collect();
    Ok(MaxLossOi {
        value: best.value,
        witness,
    })
}

/// Swap loss OI: the adversary picks a (loss, member) pair per level set;
/// `E_v[ max_{l, c} |E[u_{l,c}(x, v, y*) - u_{l,c}(x, v, y~) | v]| ]`.
pub fn swap_loss_oi_violation(
    dist: &DiscreteJoint,
    pred: &Predictor,
    family: &LossFamily,
    class: &HypothesisClass,
) -> Result<f64> {
    let target = Target::Predictor(pred);
    let layout = level_layout(dist, &target)?;
    let members = class.members();
    if members.is_empty() {
        return Err(Error::EmptyClass);
    }
    // Member values aligned to the layout.
    let mut member_values = Vec::with_capacity(members.len());
    for m in members {
        let vals: Result<Vec<f64>> = layout
            .ids
            .iter()
            .map(|id| {
                m.value(id)
                    .ok_or_else(|| Error::MissingPoint(id.to_string()))
            })
            .collect();
        member_values.push(vals?);
    }
    let mut total = 0.0;
    for (v, mass, range) in &layout.levels {
        let mut worst = 0.0f64;
        for loss in family.losses() {
            let action = loss.optimal_action(*v);
            let dk = loss.partial(action);
            for vals in &member_values {
                let mut diff = 0.0;
                for j in range.clone() {
                    diff += layout.cond_weights[j]
                        * (layout.p_star[j] - v)
                        * (dk - loss.partial(vals[j]));
                }
                worst = worst.max(diff.abs());
            }
        }
        total += mass * worst;
    }
    Ok(total)
}

/// Conditional means of a hypothesis on one level set, overall and per
/// label value.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalMeans {
    /// `E[h(x) | v]`.
    pub mu: f64,
    /// `E[h(x) | v, y=0]`; `None` when `Pr[y=0 | v] = 0` (degenerate label).
    pub mu_y0: Option<f64>,
    /// `E[h(x) | v, y=1]`; `None` when `Pr[y=1 | v] = 0`.
    pub mu_y1: Option<f64>,
    /// `(Pr[y=0 | v], Pr[y=1 | v])`.
    pub label_probs: (f64, f64),
}

/// Exact conditional means `mu(h:v)` and `mu(h:v,y)` on the level set of
/// `v`. Degenerate labels (zero conditional probability) yield `None`
/// rather than an error.
pub fn conditional_means(
    dist: &DiscreteJoint,
    pred: &Predictor,
    h: &Hypothesis,
    v: f64,
) -> Result<ConditionalMeans> {
    let level = crate::distributions::level_set(pred, dist, v)?;
    let mut mu = 0.0;
    let mut p1 = 0.0;
    let mut hy1 = 0.0;
    let mut hy0 = 0.0;
    for (id, cw) in &level.conditional_weights {
        let hv = h
            .value(id)
            .ok_or_else(|| Error::MissingPoint(id.clone()))?;
        let p = dist
            .get(id)
            .expect("level-set ids come from the distribution")
            .p_star;
        mu += cw * hv;
        p1 += cw * p;
        hy1 += cw * p * hv;
        hy0 += cw * (1.0 - p) * hv;
    }
    let p0 = 1.0 - p1;
    Ok(ConditionalMeans {
        mu,
        mu_y0: (p0 > 0.0).then_some(hy0 / p0),
        mu_y1: (p1 > 0.0).then_some(hy1 / p1),
        label_probs: (p0, p1),
    })
}

/// The witness-corrected hypothesis `h'(x) = v(x) + corr_v * c_v(x)` built
/// from an audit report: on each level set, move the prediction along the
/// witness by its signed correlation. Beating the original predictor under
/// squared error by at least `E_v[corr_v^2]` certifies the audit's
/// violations are real.
pub fn witness_correction(
    dist: &DiscreteJoint,
    pred: &Predictor,
    report: &AuditReport,
    class: &HypothesisClass,
) -> Result<Hypothesis> {
    let mut table = BTreeMap::new();
    for p in dist.points() {
        if p.weight <= 0.0 {
            continue;
        }
        let v = pred
            .value(&p.id)
            .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
        let level = report
            .level_sets
            .iter()
            .find(|l| l.v == v)
            .ok_or(Error::EmptyLevelSet(v))?;
        let witness = class
            .get(&level.witness)
            .ok_or_else(|| Error::UnknownMember(level.witness.clone()))?;
        let c = witness
            .value(&p.id)
            .ok_or_else(|| Error::MissingPoint(p.id.clone()))?;
        table.insert(p.id.clone(), v + level.witness_correlation * c);
    }
    Hypothesis::new("witness-corrected", table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Point;

    /// Two-feature instance: x uniform on {-1,+1}^2,
    /// p*(x) = (4 + 3 x2 - x1 x2) / 8, predictor (4 + 3 x2) / 8.
    /// Known values: calibration 0, multiaccuracy 0, mce = smce = 1/8.
    fn two_feature_instance() -> (DiscreteJoint, Predictor, HypothesisClass) {
        let xs = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)];
        let mut points = Vec::new();
        let mut pred = BTreeMap::new();
        for (i, (x1, x2)) in xs.iter().enumerate() {
            let id = format!("x{i}");
            points.push(Point {
                id: id.clone(),
                weight: 0.25,
                p_star: (4.0 + 3.0 * x2 - x1 * x2) / 8.0,
                features: Some(vec![*x1, *x2]),
            });
            pred.insert(id, (4.0 + 3.0 * x2) / 8.0);
        }
        let dist = DiscreteJoint::new(points).unwrap();
        let predictor = Predictor::new(pred).unwrap();
        let ids: Vec<String> = dist.points().iter().map(|p| p.id.clone()).collect();
        let mk = |name: &str, f: &dyn Fn(f64, f64) -> f64| {
            Hypothesis::new(
                name,
                ids.iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), f(xs[i].0, xs[i].1)))
                    .collect::<BTreeMap<_, _>>(),
            )
            .unwrap()
        };
        let class = HypothesisClass::closure_completed(
            vec![mk("x1", &|a, _| a), mk("x2", &|_, b| b)],
            true,
        )
        .unwrap();
        (dist, predictor, class)
    }

    #[test]
    fn audit_reports_frozen_metrics() {
        let (dist, pred, class) = two_feature_instance();
        let report = audit(&dist, &pred, &class).unwrap();
        assert!(
            report.calibration_error.abs() <= 1e-15,
            "predictor is perfectly calibrated, got {}",
            report.calibration_error
        );
        assert!(
            report.multiaccuracy_error.abs() <= 1e-15,
            "residual is orthogonal to every member, got {}",
            report.multiaccuracy_error
        );
        assert!(
            (report.mce - 0.125).abs() <= 1e-15,
            "x1 correlates 1/8 on each level, got {}",
            report.mce
        );
        assert!(
            (report.smce - 0.125).abs() <= 1e-15,
            "same witness on both levels, got {}",
            report.smce
        );
        assert_eq!(report.level_sets.len(), 2);
        assert!(report.level_sets[0].v < report.level_sets[1].v, "ascending");
        for l in &report.level_sets {
            assert!(
                (l.alpha_v - 0.125).abs() <= 1e-15,
                "per-level violation 1/8, got {}",
                l.alpha_v
            );
            assert!(
                l.witness == "-x1" || l.witness == "x1",
                "witness is the x1 direction, got {}",
                l.witness
            );
        }
        // smce = sum of mass * alpha_v.
        let sum: f64 = report
            .level_sets
            .iter()
            .map(|l| l.mass * l.alpha_v)
            .sum();
        assert!((report.smce - sum).abs() <= 1e-12);
    }

    #[test]
    fn audit_of_truth_is_perfect() {
        let (dist, _, class) = two_feature_instance();
        let truth = Predictor::new(
            dist.points()
                .iter()
                .map(|p| (p.id.clone(), p.p_star))
                .collect(),
        )
        .unwrap();
        let report = audit(&dist, &truth, &class).unwrap();
        assert_eq!(report.smce, 0.0, "residuals vanish conditionally");
        assert_eq!(report.mce, 0.0);
    }

    #[test]
    fn bad_intervals_match_markov() {
        let (dist, pred, class) = two_feature_instance();
        let bad = bad_intervals(&dist, &pred, &class, 0.1).unwrap();
        let x1 = &bad.per_hypothesis["x1"];
        assert_eq!(x1.values.len(), 2, "both levels violate at 1/8 >= 0.1");
        assert!((x1.mass - 1.0).abs() <= 1e-15);
        assert_eq!(bad.global.values.len(), 2);
        // Threshold above the violation: empty.
        let none = bad_intervals(&dist, &pred, &class, 0.2).unwrap();
        assert!(none.global.values.is_empty());
        assert_eq!(none.global.mass, 0.0);
        // Markov: mass(global) <= smce / beta.
        let report = audit(&dist, &pred, &class).unwrap();
        assert!(bad.global.mass <= report.smce / 0.1 + 1e-9);
    }

    #[test]
    fn swap_agnostic_regret_frozen_value() {
        let (dist, pred, class) = two_feature_instance();
        let comp = CompetitorSet::lin_grid(&class, 2.0, 0.125);
        let loss = crate::losses::squared();
        let regret =
            swap_agnostic_regret(&dist, Target::Predictor(&pred), &loss, &comp).unwrap();
        assert!(
            (regret - 0.015625).abs() <= 1e-12,
            "per-level restrictions of the label mean lie on the grid; regret 1/64, got {regret}"
        );
    }

    #[test]
    fn truth_has_nonpositive_swap_regret() {
        let (dist, _, class) = two_feature_instance();
        let truth = Predictor::new(
            dist.points()
                .iter()
                .map(|p| (p.id.clone(), p.p_star))
                .collect(),
        )
        .unwrap();
        let comp = CompetitorSet::lin_grid(&class, 1.0, 0.25);
        let loss = crate::losses::squared();
        let regret =
            swap_agnostic_regret(&dist, Target::Predictor(&truth), &loss, &comp).unwrap();
        assert!(
            regret <= 1e-12,
            "the label mean is conditionally optimal for squared loss, got {regret}"
        );
    }

    #[test]
    fn omniprediction_regret_zero_on_grid_optimum() {
        let (dist, pred, class) = two_feature_instance();
        let comp = CompetitorSet::lin_grid(&class, 1.0, 0.125);
        let loss = crate::losses::squared();
        let regret = omniprediction_regret(&dist, &pred, &loss, &comp).unwrap();
        assert!(
            regret.abs() <= 1e-12,
            "the predictor itself is the grid minimizer (values 1/8 and 7/8 are \
             expressible), got {regret}"
        );
    }

    #[test]
    fn swap_omni_matches_swap_agnostic_for_singleton_family() {
        let (dist, pred, class) = two_feature_instance();
        let comp = CompetitorSet::lin_grid(&class, 2.0, 0.125);
        let loss = crate::losses::squared();
        let family = LossFamily::new(vec![crate::losses::squared()]).unwrap();
        let a = swap_agnostic_regret(&dist, Target::Predictor(&pred), &loss, &comp).unwrap();
        let b = swap_omni_regret(&dist, &pred, &family, &comp).unwrap();
        // For squared loss, k(v) = v, so the post-processed predictor is the
        // predictor itself and the two notions coincide.
        assert!(
            (a - b).abs() <= 1e-12,
            "singleton family swap omni {b} != swap agnostic {a}"
        );
    }

    #[test]
    fn loss_oi_forms_agree_and_glm_vanishes() {
        let (dist, pred, class) = two_feature_instance();
        let glm_sq = crate::losses::glm(crate::losses::GlmLink::Square, 10.0).unwrap();
        // Blend form at each raw member.
        for m in class.members() {
            let v = loss_oi_violation(&dist, &pred, &glm_sq, m).unwrap();
            assert!(
                v <= 1e-12,
                "GLM losses cannot distinguish truth from this predictor; member {} gave {v}",
                m.name()
            );
        }
        // Streamed max over the full grid agrees.
        let comp = CompetitorSet::lin_grid(&class, 2.0, 0.125);
        let max = max_loss_oi_violation(&dist, &pred, &glm_sq, &comp).unwrap();
        assert!(max.value <= 1e-12, "grid max {}", max.value);
    }

    #[test]
    fn fourth_power_loss_oi_detects_the_gap() {
        let (dist, pred, class) = two_feature_instance();
        // Squared loss has an affine discrete derivative, so (like the GLM
        // losses) it cannot distinguish this predictor from the truth; the
        // fourth-power loss has a cubic one and can.
        let loss = crate::losses::p_power(4).unwrap();
        let comp = CompetitorSet::lin_grid(&class, 2.0, 0.125);
        let max = max_loss_oi_violation(&dist, &pred, &loss, &comp).unwrap();
        // The combination (x1 + x2)/2 yields |sum w (p*-p~) dl4(c)| = 3/8.
        assert!(
            max.value >= 0.375 - 1e-9,
            "fourth-power loss separates at >= 3/8, got {}",
            max.value
        );
        // Discrete-derivative form vs blend form on the witness.
        let lin = LinCombination::new(max.witness.clone(), 2.0).unwrap();
        let blend = loss_oi_violation_lin(&dist, &pred, &loss, &lin, &class).unwrap();
        assert!(
            (max.value - blend).abs() <= 1e-12,
            "forms disagree: streamed {} vs blend {}",
            max.value,
            blend
        );
    }

    #[test]
    fn swap_loss_oi_dominates_fixed_pairs() {
        let (dist, pred, class) = two_feature_instance();
        let family =
            LossFamily::new(vec![crate::losses::squared(), crate::losses::half_squared()])
                .unwrap();
        let swap = swap_loss_oi_violation(&dist, &pred, &family, &class).unwrap();
        for loss in family.losses() {
            for m in class.members() {
                let fixed = loss_oi_violation(&dist, &pred, loss, m).unwrap();
                assert!(
                    swap >= fixed - 1e-12,
                    "swap {swap} must dominate fixed pair ({}, {}) = {fixed}",
                    loss.name(),
                    m.name()
                );
            }
        }
    }

    #[test]
    fn conditional_means_frozen_example() {
        let (dist, pred, class) = two_feature_instance();
        let h = class.get("x1").unwrap();
        let means = conditional_means(&dist, &pred, h, 0.125).unwrap();
        assert!(means.mu.abs() <= 1e-15, "E[x1 | v] = 0, got {}", means.mu);
        assert!(
            (means.label_probs.1 - 0.125).abs() <= 1e-15,
            "Pr[y=1 | v] = 1/8, got {}",
            means.label_probs.1
        );
        assert!(
            (means.mu_y1.unwrap() - 1.0).abs() <= 1e-12,
            "only the x1=+1 point carries label mass, got {:?}",
            means.mu_y1
        );
    }

    #[test]
    fn conditional_means_flags_degenerate_labels() {
        let dist = DiscreteJoint::new(vec![Point {
            id: "a".into(),
            weight: 1.0,
            p_star: 1.0,
            features: None,
        }])
        .unwrap();
        let pred = Predictor::constant(&dist, 1.0).unwrap();
        let h = Hypothesis::constant("1", ["a"], 1.0).unwrap();
        let means = conditional_means(&dist, &pred, &h, 1.0).unwrap();
        assert_eq!(means.mu_y0, None, "label 0 has zero probability");
        assert_eq!(means.mu_y1, Some(1.0));
    }

    #[test]
    fn witness_correction_beats_predictor() {
        let (dist, pred, class) = two_feature_instance();
        let report = audit(&dist, &pred, &class).unwrap();
        let h = witness_correction(&dist, &pred, &report, &class).unwrap();
        let before = dist.squared_error(|id| pred.value(id)).unwrap();
        let after = dist.squared_error(|id| h.value(id)).unwrap();
        let gain = before - after;
        let expected: f64 = report
            .level_sets
            .iter()
            .map(|l| l.mass * l.witness_correlation * l.witness_correlation)
            .sum();
        assert!(
            gain >= expected - 1e-12,
            "squared-error gain {gain} must be at least E_v[corr^2] = {expected}"
        );
        assert!(gain >= report.smce * report.smce - 1e-12);
    }

    #[test]
    fn digests_are_stable_and_distinct() {
        let (dist, pred, class) = two_feature_instance();
        let d1 = predictor_digest(&pred);
        let d2 = predictor_digest(&pred);
        assert_eq!(d1, d2, "digest is deterministic");
        let other = Predictor::constant(&dist, 0.5).unwrap();
        assert_ne!(d1, predictor_digest(&other));
        assert_eq!(class_digest(&class), class_digest(&class));
    }
}
