//! Define a loss from raw curves, vet it with the niceness checker, and
//! group it into a family.
//!
//! A loss enters the post-processing and learning pipelines as two label
//! curves `t -> loss(0, t)` and `t -> loss(1, t)` on an action interval.
//! `check_nice` probes the three conditions those pipelines lean on:
//! bounded discrete derivative, 1-Lipschitz label curves, and no gain from
//! leaving the interval.
//!
//! ```bash
//! cargo run --example custom_losses
//! ```

use std::sync::Arc;

use swapcal::losses::{half_squared, LossFamily, LossSpec, NicenessViolation};

fn main() -> swapcal::Result<()> {
    // An asymmetric piecewise-linear cost: under-prediction is twice as
    // expensive as over-prediction. Slopes stay within 1, so B = 1 holds.
    // The curves are taken as given on all of R, so they clamp their input:
    // leaving the interval must never decrease the loss, and the checker
    // probes exactly that.
    let pinball = LossSpec::custom(
        "pinball(1/3)",
        (0.0, 1.0),
        1.0,
        true,
        Arc::new(|t: f64| t.clamp(0.0, 1.0) / 3.0),
        Arc::new(|t: f64| 2.0 * (1.0 - t.clamp(0.0, 1.0)) / 3.0),
        None,
    )?;
    let report = pinball.check_nice(1.0, 1e-3);
    println!(
        "{}: checked {} grid points, nice = {}",
        pinball.name(),
        report.checked_points,
        report.is_nice()
    );
    for i in 0..=4u32 {
        let p = f64::from(i) / 4.0;
        println!("  p = {p:.2} -> act {:.4}", pinball.optimal_action(p));
    }

    // A steep loss fails the check and reports where.
    let steep = LossSpec::custom(
        "steep",
        (0.0, 1.0),
        5.0,
        true,
        Arc::new(|t: f64| 5.0 * t),
        Arc::new(|t: f64| 5.0 * (1.0 - t)),
        None,
    )?;
    let report = steep.check_nice(5.0, 1e-2);
    println!();
    println!(
        "{}: nice = {} ({} violations)",
        steep.name(),
        report.is_nice(),
        report.violations.len()
    );
    if let Some(NicenessViolation::LabelLipschitz { y, t0, t1, slope }) =
        report.violations.first()
    {
        println!("  first: label-{y} curve has slope {slope:.2} on [{t0:.3}, {t1:.3}]");
    }

    // Families share the largest member bound; learning budgets scale on it.
    let family = LossFamily::new(vec![half_squared(), pinball])?;
    println!();
    println!(
        "family of {} losses, shared bound B = {}",
        family.losses().len(),
        family.bound()
    );
    Ok(())
}
