//! Canonical counterexample instances and the separation verification suite.
//!
//! Two hand-constructed instances pin down how the audit metrics relate:
//!
//! * the **parity instance** is perfectly swap-multicalibrated (sMCE = 0)
//!   yet suffers a fourth-power loss-OI violation of 4/9 — decision/outcome
//!   indistinguishability is strictly stronger than swap omniprediction;
//! * the **matching-loss instance** has zero calibration error, zero
//!   multiaccuracy error, and zero loss-OI violation for every matching
//!   (GLM-style) loss, yet swap squared regret 1/64 — loss-OI for a family
//!   does not imply swap omniprediction.
//!
//! [`verify_separations`] recomputes every constant and returns a
//! [`SeparationReport`]; [`hierarchy_checks`] verifies the dominance
//! ordering between the four audit quantities on any instance.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::audit;
use crate::distributions::{DiscreteJoint, Point, Predictor};
use crate::error::Result;
use crate::hypotheses::{
    compose_partial_class, CompetitorSet, Hypothesis, HypothesisClass, LinCombination,
};
use crate::losses::{glm, half_squared, logistic, p_power, squared, GlmLink, LossFamily};

/// Direction of a verified inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// `value <= bound` (within tolerance).
    #[serde(rename = "<=")]
    AtMost,
    /// `value >= bound` (within tolerance).
    #[serde(rename = ">=")]
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        })
    }
}

/// One verified inequality: `value` must satisfy `relation bound` within
/// `tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    /// What is being checked, human-readable and stable across runs.
    pub name: String,
    /// Claim direction.
    pub relation: Relation,
    /// Claimed bound (may itself be a computed quantity for dominance rows).
    pub bound: f64,
    /// Computed value under test.
    pub value: f64,
    /// Slack allowed when comparing `value` against `bound`.
    pub tolerance: f64,
    /// Whether the claim held.
    pub pass: bool,
}

impl CheckRecord {
    /// Claim `value <= bound` within `tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            relation: Relation::AtMost,
            bound,
            value,
            tolerance,
            pass: value <= bound + tolerance,
        }
    }

    /// Claim `value >= bound` within `tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            relation: Relation::AtLeast,
            bound,
            value,
            tolerance,
            pass: value >= bound - tolerance,
        }
    }
}

/// Outcome of the separation suite: one record per verified inequality.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub checks: Vec<CheckRecord>,
    /// True when every check passed.
    pub all_pass: bool,
}

impl SeparationReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        SeparationReport { checks, all_pass }
    }
}

/// Fixed-width table of a report, one line per check, for terminal output.
pub fn human_table(report: &SeparationReport) -> String {
    let width = report
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&format!(
            "{}  {:<width$}  {:>13.6e} {} {:>13.6e} (tol {:.0e})\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.bound,
            c.tolerance,
        ));
    }
    out.push_str(&format!(
        "{} of {} checks passed\n",
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    ));
    out
}

fn sign_char(x: f64) -> char {
    if x > 0.0 {
        'p'
    } else {
        'm'
    }
}

/// The parity instance: uniform marginal on `{-1, +1}^3`, label mean
/// `(1 + x1 x2 x3) / 2`, the constant-1/2 predictor, and the closure
/// completion of `{1, x1, x2, x3}`.
///
/// The predictor is perfectly swap-multicalibrated (the parity of three
/// coordinates is uncorrelated with every degree-≤1 member), yet no
/// decision-rule blend can hide the parity from a fourth-power loss audit.
pub fn build_parity_instance() -> (DiscreteJoint, Predictor, HypothesisClass) {
    let signs = [-1.0, 1.0];
    let mut points = Vec::with_capacity(8);
    let mut coords: [BTreeMap<String, f64>; 3] = [BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
    for &a in &signs {
        for &b in &signs {
            for &c in &signs {
                let id = format!("{}{}{}", sign_char(a), sign_char(b), sign_char(c));
                points.push(Point {
                    id: id.clone(),
                    weight: 0.125,
                    p_star: (1.0 + a * b * c) / 2.0,
                    features: Some(vec![a, b, c]),
                });
                coords[0].insert(id.clone(), a);
                coords[1].insert(id.clone(), b);
                coords[2].insert(id, c);
            }
        }
    }
    let dist = DiscreteJoint::new(points).expect("eight uniform points");
    let pred = Predictor::constant(&dist, 0.5).expect("constant half");
    let ids: Vec<&str> = dist.points().iter().map(|p| p.id.as_str()).collect();
    let [x1, x2, x3] = coords;
    let class = HypothesisClass::closure_completed(
        vec![
            Hypothesis::constant("1", ids, 1.0).expect("constant one"),
            Hypothesis::new("x1", x1).expect("coordinate"),
            Hypothesis::new("x2", x2).expect("coordinate"),
            Hypothesis::new("x3", x3).expect("coordinate"),
        ],
        true,
    )
    .expect("bounded coordinate class");
    (dist, pred, class)
}

/// The matching-loss instance: uniform marginal on `{-1, +1}^2`, label mean
/// `(4 + 3 x2 - x1 x2) / 8`, predictor `(4 + 3 x2) / 8`, and the closure
/// completion of `{x1, x2}`.
///
/// The predictor is calibrated and multiaccurate, and every matching loss's
/// label-difference audit is blind to the missing `x1 x2 / 8` term — but a
/// swap squared-loss audit sees regret 1/64.
pub fn build_glm_instance() -> (DiscreteJoint, Predictor, HypothesisClass) {
    let signs = [-1.0, 1.0];
    let mut points = Vec::with_capacity(4);
    let mut x1t = BTreeMap::new();
    let mut x2t = BTreeMap::new();
    let mut values = BTreeMap::new();
    for &a in &signs {
        for &b in &signs {
            let id = format!("{}{}", sign_char(a), sign_char(b));
            points.push(Point {
                id: id.clone(),
                weight: 0.25,
                p_star: (4.0 + 3.0 * b - a * b) / 8.0,
                features: Some(vec![a, b]),
            });
            values.insert(id.clone(), (4.0 + 3.0 * b) / 8.0);
            x1t.insert(id.clone(), a);
            x2t.insert(id, b);
        }
    }
    let dist = DiscreteJoint::new(points).expect("four uniform points");
    let pred = Predictor::new(values).expect("dyadic predictions");
    let class = HypothesisClass::closure_completed(
        vec![
            Hypothesis::new("x1", x1t).expect("coordinate"),
            Hypothesis::new("x2", x2t).expect("coordinate"),
        ],
        true,
    )
    .expect("bounded coordinate class");
    (dist, pred, class)
}

/// The probe family of matching losses: square and logistic links truncated
/// to `[-10, 10]` (both mean maps cover `[0, 1]`).
pub fn probe_glm_family() -> LossFamily {
    LossFamily::new(vec![
        glm(GlmLink::Square, 10.0).expect("square link"),
        glm(GlmLink::Logistic, 10.0).expect("logistic link"),
    ])
    .expect("two probe losses")
}

/// Loss family used for dominance spot-checks: half-squared, fourth power,
/// and truncated logistic.
pub fn hierarchy_family() -> LossFamily {
    LossFamily::new(vec![
        half_squared(),
        p_power(4).expect("even exponent"),
        logistic(10.0).expect("positive truncation"),
    ])
    .expect("three losses")
}

/// The four audit quantities whose dominance ordering [`hierarchy_checks`]
/// verifies, all against raw class members.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HierarchyQuantities {
    /// Per-level max over (loss, member) of the conditional label-difference
    /// correlation gap.
    pub swap_loss_oi: f64,
    /// Largest single (loss, member) loss-OI violation.
    pub max_pair_loss_oi: f64,
    /// Swap omniprediction regret for the family.
    pub swap_omni_regret: f64,
    /// Largest per-loss omniprediction regret.
    pub omniprediction_regret: f64,
}

/// Compute the four ordered audit quantities for one instance.
pub fn hierarchy_quantities(
    dist: &DiscreteJoint,
    pred: &Predictor,
    class: &HypothesisClass,
    family: &LossFamily,
) -> Result<HierarchyQuantities> {
    let members = CompetitorSet::class_members(class);
    let swap_loss_oi = audit::swap_loss_oi_violation(dist, pred, family, class)?;
    let mut max_pair_loss_oi = f64::NEG_INFINITY;
    for loss in family.losses() {
        for c in class.members() {
            max_pair_loss_oi = max_pair_loss_oi.max(audit::loss_oi_violation(dist, pred, loss, c)?);
        }
    }
    let swap_omni_regret = audit::swap_omni_regret(dist, pred, family, &members)?;
    let mut omniprediction_regret = f64::NEG_INFINITY;
    for loss in family.losses() {
        omniprediction_regret =
            omniprediction_regret.max(audit::omniprediction_regret(dist, pred, loss, &members)?);
    }
    Ok(HierarchyQuantities {
        swap_loss_oi,
        max_pair_loss_oi,
        swap_omni_regret,
        omniprediction_regret,
    })
}

/// Dominance rows between the four audit quantities on one instance:
/// swap loss-OI dominates both the largest fixed-pair loss-OI and swap
/// omniprediction regret, and each of those dominates omniprediction regret.
pub fn hierarchy_checks(
    label: &str,
    dist: &DiscreteJoint,
    pred: &Predictor,
    class: &HypothesisClass,
    family: &LossFamily,
) -> Result<Vec<CheckRecord>> {
    let q = hierarchy_quantities(dist, pred, class, family)?;
    Ok(vec![
        CheckRecord::at_most(
            format!("{label}: largest fixed-pair loss-OI within swap loss-OI"),
            q.max_pair_loss_oi,
            q.swap_loss_oi,
            1e-9,
        ),
        CheckRecord::at_most(
            format!("{label}: swap omniprediction regret within swap loss-OI"),
            q.swap_omni_regret,
            q.swap_loss_oi,
            1e-9,
        ),
        CheckRecord::at_most(
            format!("{label}: omniprediction regret within swap omniprediction regret"),
            q.omniprediction_regret,
            q.swap_omni_regret,
            1e-9,
        ),
        CheckRecord::at_most(
            format!("{label}: omniprediction regret within largest fixed-pair loss-OI"),
            q.omniprediction_regret,
            q.max_pair_loss_oi,
            1e-9,
        ),
    ])
}

/// Hierarchy dominance over a fleet of seeded random instances, aggregated
/// into one worst-slack row per inequality (slack = dominant − dominated;
/// the ordering holds when every slack is ≥ −1e-9).
pub fn hierarchy_spot_checks(base_seed: u64, count: usize) -> Result<Vec<CheckRecord>> {
    let family = hierarchy_family();
    let mut worst = [f64::INFINITY; 4];
    for i in 0..count {
        let inst = crate::synth::random_instance(base_seed.wrapping_add(i as u64));
        let q = hierarchy_quantities(&inst.dist, &inst.pred, &inst.class, &family)?;
        let slacks = [
            q.swap_loss_oi - q.max_pair_loss_oi,
            q.swap_loss_oi - q.swap_omni_regret,
            q.swap_omni_regret - q.omniprediction_regret,
            q.max_pair_loss_oi - q.omniprediction_regret,
        ];
        for (w, s) in worst.iter_mut().zip(slacks) {
            *w = w.min(s);
        }
    }
    let names = [
        "largest fixed-pair loss-OI within swap loss-OI",
        "swap omniprediction regret within swap loss-OI",
        "omniprediction regret within swap omniprediction regret",
        "omniprediction regret within largest fixed-pair loss-OI",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, slack)| {
            CheckRecord::at_least(
                format!("random[n={count}, seed={base_seed}]: {name}, worst slack"),
                slack,
                0.0,
                1e-9,
            )
        })
        .collect())
}

/// Weight grids used by the suite.
const PARITY_GRID_STEP: f64 = 1.0 / 3.0;
const GLM_GRID_STEP: f64 = 0.125;

/// Run the full separation suite with the default spot-check fleet
/// (100 instances from base seed 0).
pub fn verify_separations() -> Result<SeparationReport> {
    verify_separations_seeded(0, 100)
}

/// Run the full separation suite; `base_seed`/`count` steer the random
/// hierarchy spot-checks appended after the two canonical instances.
pub fn verify_separations_seeded(base_seed: u64, count: usize) -> Result<SeparationReport> {
    let mut checks = Vec::new();

    // --- Parity instance: swap-multicalibrated but loss-OI-violating. ---
    let (dist, pred, class) = build_parity_instance();
    let report = audit::audit(&dist, &pred, &class)?;
    checks.push(CheckRecord::at_most(
        "parity: swap multicalibration error (smce)",
        report.smce,
        0.0,
        0.0,
    ));
    let pair_family =
        LossFamily::new(vec![half_squared(), p_power(4).expect("even exponent")])
            .expect("two losses");
    let grid = CompetitorSet::lin_grid(&class, 1.0, PARITY_GRID_STEP);
    checks.push(CheckRecord::at_most(
        "parity: swap omniprediction regret (half-squared & fourth power, budget-1 grid, step 1/3)",
        audit::swap_omni_regret(&dist, &pred, &pair_family, &grid)?,
        1e-9,
        0.0,
    ));
    let fourth = p_power(4).expect("even exponent");
    let grid_max = audit::max_loss_oi_violation(&dist, &pred, &fourth, &grid)?;
    checks.push(CheckRecord::at_least(
        "parity: largest fourth-power loss-OI over the budget-1 grid (step 1/3)",
        grid_max.value,
        4.0 / 9.0,
        1e-9,
    ));
    let witness = LinCombination::new(
        [
            ("x1".to_string(), 1.0 / 3.0),
            ("x2".to_string(), 1.0 / 3.0),
            ("x3".to_string(), 1.0 / 3.0),
        ]
        .into_iter()
        .collect(),
        1.0,
    )?;
    let at_witness = audit::loss_oi_violation_lin(&dist, &pred, &fourth, &witness, &class)?;
    checks.push(CheckRecord::at_least(
        "parity: fourth-power loss-OI at the symmetric witness (1/3,1/3,1/3)",
        at_witness,
        4.0 / 9.0,
        1e-9,
    ));
    checks.push(CheckRecord::at_most(
        "parity: grid maximum attained at the symmetric witness",
        grid_max.value - at_witness,
        0.0,
        1e-9,
    ));
    // Refine on the four spanning members: signed weights already cover the
    // negations, and constants net onto the `1` axis, so the net coefficient
    // lattice at step 1/24 is identical while the enumeration stays small.
    let spanning = HypothesisClass::new(
        ["1", "x1", "x2", "x3"]
            .iter()
            .map(|n| class.get(n).expect("spanning member").clone())
            .collect(),
        true,
    )?;
    let refined = audit::max_loss_oi_violation(
        &dist,
        &pred,
        &fourth,
        &CompetitorSet::lin_grid(&spanning, 1.0, 1.0 / 24.0),
    )?;
    checks.push(CheckRecord::at_most(
        "parity: refinement at step 1/24 finds nothing larger",
        refined.value - grid_max.value,
        0.0,
        1e-9,
    ));

    // --- Matching-loss instance: loss-OI-blind but swap-regretful. ---
    let (dist, pred, class) = build_glm_instance();
    let report = audit::audit(&dist, &pred, &class)?;
    checks.push(CheckRecord::at_most(
        "matching: calibration error",
        report.calibration_error,
        0.0,
        1e-12,
    ));
    checks.push(CheckRecord::at_most(
        "matching: multiaccuracy error",
        report.multiaccuracy_error,
        0.0,
        1e-12,
    ));
    checks.push(CheckRecord::at_least(
        "matching: multicalibration error (mce)",
        report.mce,
        0.125,
        1e-12,
    ));
    checks.push(CheckRecord::at_most(
        "matching: omniprediction regret (squared, budget-1 grid, step 1/8)",
        audit::omniprediction_regret(
            &dist,
            &pred,
            &squared(),
            &CompetitorSet::lin_grid(&class, 1.0, GLM_GRID_STEP),
        )?,
        1e-9,
        0.0,
    ));
    let wide_grid = CompetitorSet::lin_grid(&class, 2.0, GLM_GRID_STEP);
    for loss in probe_glm_family().losses() {
        checks.push(CheckRecord::at_most(
            format!(
                "matching: largest {} loss-OI over the budget-2 grid (step 1/8)",
                loss.name()
            ),
            audit::max_loss_oi_violation(&dist, &pred, loss, &wide_grid)?.value,
            1e-9,
            0.0,
        ));
    }
    let swap_regret = audit::swap_agnostic_regret(&dist, (&pred).into(), &squared(), &wide_grid)?;
    checks.push(CheckRecord::at_least(
        "matching: swap squared regret (budget-2 grid, step 1/8) at least 1/64",
        swap_regret,
        0.015625,
        1e-12,
    ));
    checks.push(CheckRecord::at_most(
        "matching: swap squared regret (budget-2 grid, step 1/8) at most 1/64",
        swap_regret,
        0.015625,
        1e-12,
    ));

    // --- Matching-loss composition collapses to the class itself. ---
    let composed = compose_partial_class(&probe_glm_family(), &class)?;
    let ids: Vec<&str> = dist.points().iter().map(|p| p.id.as_str()).collect();
    let class_set = value_set(&class, &ids);
    let composed_set = value_set(&composed, &ids);
    let mismatch = class_set.symmetric_difference(&composed_set).count();
    checks.push(CheckRecord::at_most(
        "matching: composed label-difference class equals the base class pointwise",
        mismatch as f64,
        0.0,
        0.0,
    ));
    let composed_smce = audit::audit(&dist, &pred, &composed)?.smce;
    checks.push(CheckRecord::at_most(
        "matching: audits agree between composed and base class (smce)",
        (composed_smce - report.smce).abs(),
        0.0,
        0.0,
    ));

    // --- Dominance ordering on both instances, then the random fleet. ---
    let family = hierarchy_family();
    let (dist, pred, class) = build_parity_instance();
    checks.extend(hierarchy_checks("parity", &dist, &pred, &class, &family)?);
    let (dist, pred, class) = build_glm_instance();
    checks.extend(hierarchy_checks("matching", &dist, &pred, &class, &family)?);
    checks.extend(hierarchy_spot_checks(base_seed, count)?);

    Ok(SeparationReport::new(checks))
}

/// Distinct value vectors of a class over the given ids (pointwise content).
fn value_set(class: &HypothesisClass, ids: &[&str]) -> std::collections::BTreeSet<Vec<u64>> {
    class
        .members()
        .iter()
        .map(|m| {
            ids.iter()
                .map(|id| {
                    let v = m.value(id).expect("member covers the support");
                    (if v == 0.0 { 0.0f64 } else { v }).to_bits()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_instance_shape() {
        let (dist, pred, class) = build_parity_instance();
        assert_eq!(dist.points().len(), 8, "all sign patterns of three coordinates");
        for p in dist.points() {
            assert_eq!(p.weight, 0.125, "uniform marginal");
        }
        let ppp = dist.points().iter().find(|p| p.id == "ppp").unwrap();
        assert_eq!(ppp.p_star, 1.0, "label mean 1 at (+1,+1,+1)");
        let ppm = dist.points().iter().find(|p| p.id == "ppm").unwrap();
        assert_eq!(ppm.p_star, 0.0, "label mean 0 at (+1,+1,-1)");
        assert!(pred.values().values().all(|&v| v == 0.5), "constant half");
        assert_eq!(
            class.members().len(),
            9,
            "{{1, x1, x2, x3}} plus 0, -1, and the coordinate negations"
        );
    }

    #[test]
    fn matching_instance_shape() {
        let (dist, pred, class) = build_glm_instance();
        assert_eq!(dist.points().len(), 4);
        let expect = [
            ("mm", 0.0, 0.125),
            ("pm", 0.25, 0.125),
            ("mp", 1.0, 0.875),
            ("pp", 0.75, 0.875),
        ];
        for (id, p_star, v) in expect {
            let p = dist.points().iter().find(|p| p.id == id).unwrap();
            assert_eq!(p.p_star, p_star, "label mean at {id}");
            assert_eq!(pred.value(id), Some(v), "prediction at {id}");
        }
        assert_eq!(class.members().len(), 7, "{{x1, x2}} plus 0, 1, -1, -x1, -x2");
    }

    #[test]
    fn full_suite_passes() {
        // Trim the random fleet; the acceptance suite runs the full hundred.
        let report = verify_separations_seeded(7, 10).expect("suite runs");
        assert!(report.all_pass, "failing rows:\n{}", human_table(&report));

        let row = |needle: &str| {
            report
                .checks
                .iter()
                .find(|c| c.name.contains(needle))
                .unwrap_or_else(|| panic!("row `{needle}` missing"))
        };
        assert_eq!(
            row("parity: swap multicalibration").value,
            0.0,
            "parity sMCE is exactly zero"
        );
        assert!(
            (row("symmetric witness").value - 4.0 / 9.0).abs() <= 1e-9,
            "witness violation is 4/9, got {}",
            row("symmetric witness").value
        );
        assert!(
            (row("at least 1/64").value - 0.015625).abs() <= 1e-12,
            "swap squared regret is exactly 1/64, got {}",
            row("at least 1/64").value
        );
        assert_eq!(row("multicalibration error (mce)").value, 0.125);
        assert_eq!(row("equals the base class pointwise").value, 0.0);
    }

    #[test]
    fn human_table_lists_every_check() {
        let report = SeparationReport::new(vec![
            CheckRecord::at_most("a", 0.0, 1.0, 0.0),
            CheckRecord::at_least("b", 0.0, 1.0, 0.0),
        ]);
        assert!(!report.all_pass, "second check fails");
        let table = human_table(&report);
        assert_eq!(table.lines().count(), 3, "two rows plus a summary");
        assert!(table.contains("PASS  a"), "table:\n{table}");
        assert!(table.contains("FAIL  b"), "table:\n{table}");
        assert!(table.contains("1 of 2 checks passed"));
    }

    #[test]
    fn hierarchy_holds_on_a_small_fleet() {
        let rows = hierarchy_spot_checks(11, 8).expect("spot checks run");
        assert_eq!(rows.len(), 4, "one aggregate row per inequality");
        for row in rows {
            assert!(row.pass, "{}: worst slack {}", row.name, row.value);
        }
    }
}
