//! Hypothesis classes over finite point sets, linear combinations with an
//! ℓ1 budget, sign/constant closure completion, exhaustive weak-agnostic
//! learning, and lazily streamed ℓ1-ball weight grids.
//!
//! All audits in this crate compete against either raw class members or
//! linear combinations of them. Grids over the ℓ1 ball are counted in closed
//! form before enumeration and streamed without materialization, so very
//! large competitor sets (millions of combinations) stay cheap in memory.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of enumerated grid combinations.
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

/// Default weight-grid step for competitor sets.
pub const DEFAULT_GRID_STEP: f64 = 0.125;

/// Tolerance for ℓ1-budget and pointwise-equality checks.
pub const CLASS_TOLERANCE: f64 = 1e-12;

/// A named real-valued function on a finite point set, stored as a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    name: String,
    table: BTreeMap<String, f64>,
}

impl Hypothesis {
    /// Validate and build a hypothesis from its table.
    pub fn new(name: impl Into<String>, table: BTreeMap<String, f64>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidClass("hypothesis name is empty".into()));
        }
        if table.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((id, v)) = table.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidClass(format!(
                "hypothesis `{name}` has non-finite value {v} at point `{id}`"
            )));
        }
        Ok(Hypothesis { name, table })
    }

    /// Constant hypothesis over the given point ids.
    pub fn constant<'a>(
        name: impl Into<String>,
        ids: impl IntoIterator<Item = &'a str>,
        v: f64,
    ) -> Result<Self> {
        Hypothesis::new(
            name,
            ids.into_iter().map(|id| (id.to_string(), v)).collect(),
        )
    }

    /// The hypothesis name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// The value at a point, if defined.
    pub fn value(&self, id: &str) -> Option<f64> {
        self.table.get(id).copied()
    }

    /// The full table.
    pub fn table(&self) -> &BTreeMap<String, f64> {
        &self.table
    }

    /// Pointwise negation (with `-0.0` normalised to `0.0`).
    pub fn negated(&self, name: impl Into<String>) -> Self {
        Hypothesis {
            name: name.into(),
            table: self
                .table
                .iter()
                .map(|(id, v)| (id.clone(), if *v == 0.0 { 0.0 } else { -v }))
                .collect(),
        }
    }

    /// Largest absolute value in the table.
    pub fn sup_norm(&self) -> f64 {
        self.table.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Canonical value key over a fixed id order (for pointwise set
    /// membership; `-0.0` normalised).
    fn value_key(&self, ids: &[&str]) -> Option<Vec<u64>> {
        ids.iter()
            .map(|id| {
                self.table
                    .get(*id)
                    .map(|v| if *v == 0.0 { 0.0f64 } else { *v }.to_bits())
            })
            .collect()
    }
}

/// A finite, named collection of hypotheses over a common point set.
#[derive(Debug, Clone)]
pub struct HypothesisClass {
    members: Vec<Hypothesis>,
    index: BTreeMap<String, usize>,
    bounded: bool,
}

impl HypothesisClass {
    /// Validate and build a class. Members must be nonempty, uniquely named,
    /// and share one point domain.
    pub fn new(members: Vec<Hypothesis>, bounded: bool) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        let domain: BTreeSet<&String> = members[0].table.keys().collect();
        let mut index = BTreeMap::new();
        for (i, m) in members.iter().enumerate() {
            if index.insert(m.name.clone(), i).is_some() {
                return Err(Error::InvalidClass(format!(
                    "duplicate member name `{}`",
                    m.name
                )));
            }
            let d: BTreeSet<&String> = m.table.keys().collect();
            if d != domain {
                return Err(Error::InvalidClass(format!(
                    "member `{}` is defined on a different point set than `{}`",
                    m.name, members[0].name
                )));
            }
        }
        Ok(HypothesisClass {
            members,
            index,
            bounded,
        })
    }

    /// Build a class and complete it under constants and negation: the
    /// constants 0, 1, -1 and the pointwise negation of every member are
    /// added unless already present pointwise (names `0`, `1`, `-1`, and
    /// `-{name}`).
    pub fn closure_completed(members: Vec<Hypothesis>, bounded: bool) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        let ids: Vec<String> = members[0].table.keys().cloned().collect();
        let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let mut all = members;
        let mut present: BTreeSet<Vec<u64>> = BTreeSet::new();
        for m in &all {
            present.insert(m.value_key(&id_refs).ok_or_else(|| {
                Error::InvalidClass(format!(
                    "member `{}` is defined on a different point set than `{}`",
                    m.name, all[0].name
                ))
            })?);
        }
        let push_unique = |all: &mut Vec<Hypothesis>,
                               present: &mut BTreeSet<Vec<u64>>,
                               h: Hypothesis|
         -> Result<()> {
            let key = h.value_key(&id_refs).expect("constructed on the domain");
            if present.contains(&key) {
                return Ok(());
            }
            if all.iter().any(|m| m.name == h.name) {
                return Err(Error::InvalidClass(format!(
                    "closure completion needs the name `{}`, but it is taken by a \
                     member with different values",
                    h.name
                )));
            }
            present.insert(key);
            all.push(h);
            Ok(())
        };
        for (name, v) in [("0", 0.0), ("1", 1.0), ("-1", -1.0)] {
            let h = Hypothesis::constant(name, id_refs.iter().copied(), v)?;
            push_unique(&mut all, &mut present, h)?;
        }
        let snapshot = all.clone();
        for m in &snapshot {
            let neg = m.negated(format!("-{}", m.name));
            push_unique(&mut all, &mut present, neg)?;
        }
        HypothesisClass::new(all, bounded)
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    /// Look up a member by name.
    pub fn get(&self, name: &str) -> Option<&Hypothesis> {
        self.index.get(name).map(|&i| &self.members[i])
    }

    /// Whether members are asserted to take values in `[-1, 1]`.
    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    /// The common point ids (from the first member's table).
    pub fn point_ids(&self) -> Vec<&str> {
        self.members[0].table.keys().map(|s| s.as_str()).collect()
    }
}

/// Structural validation report for a class over a distribution's support.
/// Valid (all lists empty) means: every member is defined on every
/// positive-weight point, the constants 0 and 1 are present pointwise, every
/// member has a pointwise negation, and — when the class is flagged bounded —
/// all values lie in `[-1, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub missing_points: Vec<(String, String)>,
    pub missing_constants: Vec<String>,
    pub missing_negations: Vec<String>,
    pub bound_violations: Vec<BoundViolation>,
}

/// A member value outside `[-1, 1]` in a class flagged bounded.
#[derive(Debug, Clone, Serialize)]
pub struct BoundViolation {
    pub member: String,
    pub point: String,
    pub value: f64,
}

impl ClassReport {
    /// True when every structural check passed.
    pub fn is_valid(&self) -> bool {
        self.missing_points.is_empty()
            && self.missing_constants.is_empty()
            && self.missing_negations.is_empty()
            && self.bound_violations.is_empty()
    }
}

/// Validate a class against a distribution's support (see [`ClassReport`]).
pub fn validate_class(
    class: &HypothesisClass,
    dist: &crate::distributions::DiscreteJoint,
) -> ClassReport {
    let support: Vec<&str> = dist
        .points()
        .iter()
        .filter(|p| p.weight > 0.0)
        .map(|p| p.id.as_str())
        .collect();
    let mut report = ClassReport {
        missing_points: Vec::new(),
        missing_constants: Vec::new(),
        missing_negations: Vec::new(),
        bound_violations: Vec::new(),
    };
    for m in class.members() {
        for id in &support {
            match m.value(id) {
                None => report
                    .missing_points
                    .push((m.name().to_string(), id.to_string())),
                Some(v) => {
                    if class.is_bounded() && v.abs() > 1.0 + CLASS_TOLERANCE {
                        report.bound_violations.push(BoundViolation {
                            member: m.name().to_string(),
                            point: id.to_string(),
                            value: v,
                        });
                    }
                }
            }
        }
    }
    // Pointwise presence of the constants 0 and 1 over the support.
    for (label, target) in [("0", 0.0f64), ("1", 1.0f64)] {
        let found = class.members().iter().any(|m| {
            support
                .iter()
                .all(|id| m.value(id).is_some_and(|v| (v - target).abs() <= CLASS_TOLERANCE))
        });
        if !found {
            report.missing_constants.push(label.to_string());
        }
    }
    // Pointwise negation closure over the support.
    for m in class.members() {
        let has_negation = class.members().iter().any(|n| {
            support.iter().all(|id| {
                match (m.value(id), n.value(id)) {
                    (Some(a), Some(b)) => (a + b).abs() <= CLASS_TOLERANCE,
                    _ => false,
                }
            })
        });
        if !has_negation {
            report.missing_negations.push(m.name().to_string());
        }
    }
    report
}

/// A linear combination of class members with an ℓ1 budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinCombination {
    weights: BTreeMap<String, f64>,
    budget: f64,
}

impl LinCombination {
    /// Validate `sum |w| <= budget` (within [`CLASS_TOLERANCE`]) and build.
    pub fn new(weights: BTreeMap<String, f64>, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "combination budget {budget} must be positive and finite"
            )));
        }
        let mut norm = 0.0;
        for (name, w) in &weights {
            if !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "weight on `{name}` is not finite"
                )));
            }
            norm += w.abs();
        }
        if norm > budget + CLASS_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "weights have l1 norm {norm}, above the budget {budget}"
            )));
        }
        Ok(LinCombination { weights, budget })
    }

    /// The member weights.
    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    /// The ℓ1 budget.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Actual ℓ1 norm of the weights.
    pub fn l1_norm(&self) -> f64 {
        self.weights.values().map(|w| w.abs()).sum()
    }

    /// Evaluate the combination into a named table hypothesis.
    pub fn materialize(&self, class: &HypothesisClass, name: impl Into<String>) -> Result<Hypothesis> {
        let ids = class.point_ids();
        let mut table = BTreeMap::new();
        for id in ids {
            table.insert(id.to_string(), eval_lin(self, class, id)?);
        }
        Hypothesis::new(name, table)
    }
}

/// Evaluate a linear combination at one point.
pub fn eval_lin(lin: &LinCombination, class: &HypothesisClass, id: &str) -> Result<f64> {
    let mut acc = 0.0;
    for (name, w) in lin.weights() {
        let member = class
            .get(name)
            .ok_or_else(|| Error::UnknownMember(name.clone()))?;
        let v = member
            .value(id)
            .ok_or_else(|| Error::MissingPoint(id.to_string()))?;
        acc += w * v;
    }
    Ok(acc)
}

/// Exhaustive weak agnostic learner: the member maximizing
/// `sum_x weight(x) * c(x) * z(x)`, ties broken toward the lexicographically
/// smallest member name. Returns the member and its correlation.
///
/// `residuals` rows are `(point id, weight, z)` with nonnegative weights
/// summing to 1 (within 1e-9) and `|z| <= 1`.
pub fn weak_agnostic_learn(
    class: &HypothesisClass,
    residuals: &[(String, f64, f64)],
) -> Result<(Hypothesis, f64)> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for (id, w, z) in residuals {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "residual weight {w} at `{id}` must be nonnegative"
            )));
        }
        if !(z.is_finite() && z.abs() <= 1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "residual {z} at `{id}` outside [-1, 1]"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "residual weights sum to {total}, expected 1"
        )));
    }
    let mut best: Option<(f64, &Hypothesis)> = None;
    for m in class.members() {
        let mut corr = 0.0;
        for (id, w, z) in residuals {
            let v = m
                .value(id)
                .ok_or_else(|| Error::MissingPoint(id.clone()))?;
            corr += w * v * z;
        }
        let better = match best {
            None => true,
            Some((b, bm)) => corr > b || (corr == b && m.name() < bm.name()),
        };
        if better {
            best = Some((corr, m));
        }
    }
    let (corr, member) = best.ok_or(Error::EmptyClass)?;
    Ok((member.clone(), corr))
}

impl HypothesisClass {
    /// Parse a class from its JSON file format. The optional
    /// `closure_completed` key (default false) asks the parser to add the
    /// missing constants and negations after loading.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ClassFile =
            serde_json::from_str(s).map_err(|e| Error::parse("class JSON", e))?;
        let members = file
            .members
            .into_iter()
            .map(|m| Hypothesis::new(m.name, m.table))
            .collect::<Result<Vec<_>>>()?;
        if file.closure_completed {
            HypothesisClass::closure_completed(members, file.bounded)
        } else {
            HypothesisClass::new(members, file.bounded)
        }
    }

    /// Serialize to the class JSON file format (deterministic).
    pub fn to_json_string(&self) -> String {
        let file = ClassFileOut {
            members: self
                .members
                .iter()
                .map(|m| MemberDto {
                    name: m.name().to_string(),
                    table: m.table().clone(),
                })
                .collect(),
            bounded: self.bounded,
        };
        crate::jsonio::to_json_string(&file)
    }
}

#[derive(Deserialize)]
struct ClassFile {
    members: Vec<MemberDto>,
    bounded: bool,
    #[serde(default)]
    closure_completed: bool,
}

#[derive(Serialize)]
struct ClassFileOut {
    members: Vec<MemberDto>,
    bounded: bool,
}

#[derive(Serialize, Deserialize)]
struct MemberDto {
    name: String,
    table: BTreeMap<String, f64>,
}

/// The composed class `{x -> partial_l(c(x)) : l in family, c in class}`,
/// deduplicated pointwise and closure-completed (constants 0/1/-1 and
/// negations restored). The bounded flag is set only when every composed
/// value lies in `[-1, 1]`.
///
/// For matching-loss families (label difference exactly `-t`) the result is
/// pointwise equal to a negation-closed input class — composition collapses
/// back to the class itself.
pub fn compose_partial_class(
    family: &crate::losses::LossFamily,
    class: &HypothesisClass,
) -> Result<HypothesisClass> {
    let ids: Vec<String> = class.point_ids().iter().map(|s| s.to_string()).collect();
    let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
    let mut members: Vec<Hypothesis> = Vec::new();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut bounded = true;
    for loss in family.losses() {
        for c in class.members() {
            let table: BTreeMap<String, f64> = ids
                .iter()
                .map(|id| {
                    let v = loss.partial(c.value(id).expect("members share the class domain"));
                    (id.clone(), v)
                })
                .collect();
            let h = Hypothesis::new(format!("d[{}]({})", loss.name(), c.name()), table)?;
            let key = h.value_key(&id_refs).expect("constructed on the domain");
            if seen.insert(key) {
                bounded = bounded && h.sup_norm() <= 1.0 + CLASS_TOLERANCE;
                members.push(h);
            }
        }
    }
    HypothesisClass::closure_completed(members, bounded)
}

/// Lattice radius: the number of grid steps that fit in the budget.
fn lattice_radius(budget: f64, step: f64) -> Result<i64> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} must be positive"
        )));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid budget {budget} must be positive"
        )));
    }
    Ok((budget / step + 1e-9).floor() as i64)
}

/// Number of integer points with ℓ1 norm at most `r` in `d` dimensions:
/// `sum_k 2^k C(d, k) C(r, k)` (choose the nonzero coordinates, their signs,
/// and a composition of the radius), saturating at `u128::MAX`.
fn l1_lattice_count(d: u64, r: u64) -> u128 {
    let mut total: u128 = 0;
    let kmax = d.min(r);
    for k in 0..=kmax {
        // term = 2^k * C(d, k) * C(r, k)
        let mut term: u128 = 1u128 << k.min(127);
        for j in 0..k {
            term = term
                .saturating_mul((d - j) as u128)
                .checked_div((j + 1) as u128)
                .unwrap_or(u128::MAX);
        }
        for j in 0..k {
            term = term
                .saturating_mul((r - j) as u128)
                .checked_div((j + 1) as u128)
                .unwrap_or(u128::MAX);
        }
        total = total.saturating_add(term);
    }
    total
}

/// Number of combinations [`lin_grid`] would enumerate for a class of
/// `members` hypotheses: the ℓ1 lattice of radius `budget` at the given
/// step, plus the single-member `±budget` vertices when those are off the
/// lattice.
pub fn lin_grid_size(members: usize, budget: f64, step: f64) -> Result<u128> {
    let r = lattice_radius(budget, step)?;
    let lattice = l1_lattice_count(members as u64, r as u64);
    let vertices_on_lattice = (r as f64 * step - budget).abs() <= 1e-9;
    let extra = if vertices_on_lattice {
        0
    } else {
        2 * members as u128
    };
    Ok(lattice.saturating_add(extra))
}

/// All ℓ1-budgeted weight grids over the class members: every weight vector
/// with entries in `step * Z` and ℓ1 norm at most `budget`, plus the
/// single-member `±budget` vertices and the zero vector.
///
/// Fails with [`Error::GridTooLarge`] when the enumeration would exceed
/// [`DEFAULT_GRID_CAP`]; see [`lin_grid_with_cap`] to override.
pub fn lin_grid(class: &HypothesisClass, budget: f64, step: f64) -> Result<Vec<LinCombination>> {
    lin_grid_with_cap(class, budget, step, DEFAULT_GRID_CAP)
}

/// [`lin_grid`] with an explicit enumeration cap.
pub fn lin_grid_with_cap(
    class: &HypothesisClass,
    budget: f64,
    step: f64,
    cap: u64,
) -> Result<Vec<LinCombination>> {
    let count = lin_grid_size(class.members().len(), budget, step)?;
    if count > cap as u128 {
        return Err(Error::GridTooLarge {
            combinations: count,
            cap,
        });
    }
    let names: Vec<&str> = class.members().iter().map(|m| m.name()).collect();
    let d = names.len();
    let r = lattice_radius(budget, step)?;
    let mut out = Vec::with_capacity(count as usize);
    let mut coeffs = vec![0i64; d];
    enumerate_lattice(&mut coeffs, 0, r, &mut |coeffs| {
        let weights: BTreeMap<String, f64> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, k)| **k != 0)
            .map(|(i, k)| (names[i].to_string(), *k as f64 * step))
            .collect();
        out.push(LinCombination { weights, budget });
    });
    if (r as f64 * step - budget).abs() > 1e-9 {
        for name in &names {
            for sign in [1.0, -1.0] {
                let weights: BTreeMap<String, f64> =
                    [(name.to_string(), sign * budget)].into_iter().collect();
                out.push(LinCombination { weights, budget });
            }
        }
    }
    Ok(out)
}

fn enumerate_lattice(
    coeffs: &mut Vec<i64>,
    coord: usize,
    remaining: i64,
    emit: &mut impl FnMut(&[i64]),
) {
    if coord == coeffs.len() {
        emit(coeffs);
        return;
    }
    for k in -remaining..=remaining {
        coeffs[coord] = k;
        enumerate_lattice(coeffs, coord + 1, remaining - k.abs(), emit);
    }
    coeffs[coord] = 0;
}

/// Dense member-value matrix over a fixed point order, the common currency
/// of the streamed grid scans.
#[derive(Debug, Clone)]
pub(crate) struct MemberMatrix {
    pub names: Vec<String>,
    /// `columns[m][j]` = value of member `m` at point `j`.
    pub columns: Vec<Vec<f64>>,
    pub points: usize,
}

pub(crate) fn member_matrix(class: &HypothesisClass, ids: &[&str]) -> Result<MemberMatrix> {
    let mut columns = Vec::with_capacity(class.members().len());
    for m in class.members() {
        let mut col = Vec::with_capacity(ids.len());
        for id in ids {
            col.push(
                m.value(id)
                    .ok_or_else(|| Error::MissingPoint(id.to_string()))?,
            );
        }
        columns.push(col);
    }
    Ok(MemberMatrix {
        names: class.members().iter().map(|m| m.name().to_string()).collect(),
        columns,
        points: ids.len(),
    })
}

/// A set of competitors for regret computations: optionally the raw class
/// members, optionally an ℓ1 weight grid (streamed, never materialized),
/// plus any explicit extra combinations (e.g. audit-witness-derived ones).
#[derive(Debug, Clone)]
pub struct CompetitorSet<'a> {
    class: &'a HypothesisClass,
    include_members: bool,
    grid: Option<GridSpec>,
    extras: Vec<LinCombination>,
}

/// Grid parameters for a [`CompetitorSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub budget: f64,
    pub step: f64,
    pub cap: u64,
}

impl GridSpec {
    pub fn new(budget: f64, step: f64) -> Self {
        GridSpec {
            budget,
            step,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

impl<'a> CompetitorSet<'a> {
    /// Compete against the raw class members only.
    pub fn class_members(class: &'a HypothesisClass) -> Self {
        CompetitorSet {
            class,
            include_members: true,
            grid: None,
            extras: Vec::new(),
        }
    }

    /// Compete against the ℓ1 weight grid of the class.
    pub fn lin_grid(class: &'a HypothesisClass, budget: f64, step: f64) -> Self {
        CompetitorSet {
            class,
            include_members: false,
            grid: Some(GridSpec::new(budget, step)),
            extras: Vec::new(),
        }
    }

    /// Also include the raw members.
    pub fn with_members(mut self) -> Self {
        self.include_members = true;
        self
    }

    /// Override the grid enumeration cap.
    pub fn with_cap(mut self, cap: u64) -> Self {
        if let Some(g) = &mut self.grid {
            g.cap = cap;
        }
        self
    }

    /// Add explicit combinations to the set.
    pub fn with_extras(mut self, extras: Vec<LinCombination>) -> Self {
        self.extras.extend(extras);
        self
    }

    /// The underlying class.
    pub fn class(&self) -> &'a HypothesisClass {
        self.class
    }

    /// The grid spec, if any.
    pub fn grid_spec(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    /// Number of competitors this set streams (members + grid + extras).
    pub fn size(&self) -> Result<u128> {
        let mut n = self.extras.len() as u128;
        if self.include_members {
            n += self.class.members().len() as u128;
        }
        if let Some(g) = &self.grid {
            n = n.saturating_add(lin_grid_size(
                self.class.members().len(),
                g.budget,
                g.step,
            )?);
        }
        Ok(n)
    }

    /// Stream every competitor's value vector over `ids` through `leaf`,
    /// merging per-thread states with `merge`. Deterministic: grid branches
    /// are collected in coordinate order before merging, and `leaf` receives
    /// `(state, values, weights)` with `weights` aligned to the class member
    /// order.
    pub(crate) fn fold<T, FI, FL, FM>(
        &self,
        ids: &[&str],
        init: FI,
        leaf: FL,
        merge: FM,
    ) -> Result<T>
    where
        T: Send,
        FI: Fn() -> T + Send + Sync,
        FL: Fn(&mut T, &[f64], &[f64]) + Send + Sync,
        FM: Fn(T, T) -> T,
    {
        if !self.include_members && self.grid.is_none() && self.extras.is_empty() {
            return Err(Error::EmptyCompetitors);
        }
        let matrix = member_matrix(self.class, ids)?;
        let d = matrix.columns.len();
        let mut state = init();

        if self.include_members {
            let mut weights = vec![0.0; d];
            for (m, col) in matrix.columns.iter().enumerate() {
                weights[m] = 1.0;
                leaf(&mut state, col, &weights);
                weights[m] = 0.0;
            }
        }

        for lin in &self.extras {
            let mut weights = vec![0.0; d];
            for (name, w) in lin.weights() {
                let idx = matrix
                    .names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::UnknownMember(name.clone()))?;
                weights[idx] = *w;
            }
            let values: Vec<f64> = (0..matrix.points)
                .map(|j| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(m, w)| w * matrix.columns[m][j])
                        .sum()
                })
                .collect();
            leaf(&mut state, &values, &weights);
        }

        if let Some(g) = &self.grid {
            let count = lin_grid_size(d, g.budget, g.step)?;
            if count > g.cap as u128 {
                return Err(Error::GridTooLarge {
                    combinations: count,
                    cap: g.cap,
                });
            }
            let r = lattice_radius(g.budget, g.step)?;
            // Parallelize over the first coordinate; collect branch states in
            // coordinate order, then merge sequentially (deterministic).
            let branch_states: Vec<T> = (-r..=r)
                .into_par_iter()
                .map(|k0| {
                    let mut local = init();
                    let mut weights = vec![0.0; d];
                    let mut scratch: Vec<Vec<f64>> =
                        (0..d).map(|_| vec![0.0; matrix.points]).collect();
                    let parent = vec![0.0; matrix.points];
                    if d == 0 {
                        return local;
                    }
                    weights[0] = k0 as f64 * g.step;
                    let (mine, rest) = scratch.split_first_mut().expect("d > 0");
                    for j in 0..matrix.points {
                        mine[j] = parent[j] + weights[0] * matrix.columns[0][j];
                    }
                    descend(
                        &matrix,
                        1,
                        r - k0.abs(),
                        g.step,
                        mine,
                        rest,
                        &mut weights,
                        &mut local,
                        &leaf,
                    );
                    local
                })
                .collect();
            for branch in branch_states {
                state = merge(state, branch);
            }
            // Off-lattice single-member vertices at ±budget.
            if (r as f64 * g.step - g.budget).abs() > 1e-9 {
                let mut weights = vec![0.0; d];
                for (m, col) in matrix.columns.iter().enumerate() {
                    for sign in [1.0f64, -1.0] {
                        weights[m] = sign * g.budget;
                        let values: Vec<f64> = col.iter().map(|v| sign * g.budget * v).collect();
                        leaf(&mut state, &values, &weights);
                        weights[m] = 0.0;
                    }
                }
            }
        }

        Ok(state)
    }
}

/// Depth-first enumeration of the remaining coordinates, refreshing the
/// value vector from the parent at each assignment (error stays bounded by
/// the recursion depth, not the enumeration size).
#[allow(clippy::too_many_arguments)]
fn descend<T, FL>(
    matrix: &MemberMatrix,
    coord: usize,
    remaining: i64,
    step: f64,
    parent: &[f64],
    scratch: &mut [Vec<f64>],
    weights: &mut [f64],
    state: &mut T,
    leaf: &FL,
) where
    FL: Fn(&mut T, &[f64], &[f64]),
{
    if coord == matrix.columns.len() {
        leaf(state, parent, weights);
        return;
    }
    let (mine, rest) = scratch.split_first_mut().expect("scratch depth matches");
    let col = &matrix.columns[coord];
    for k in -remaining..=remaining {
        let w = k as f64 * step;
        weights[coord] = w;
        if k == 0 {
            mine.copy_from_slice(parent);
        } else {
            for j in 0..parent.len() {
                mine[j] = parent[j] + w * col[j];
            }
        }
        descend(
            matrix,
            coord + 1,
            remaining - k.abs(),
            step,
            mine,
            rest,
            weights,
            state,
            leaf,
        );
    }
    weights[coord] = 0.0;
}
