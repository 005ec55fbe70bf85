//! Coarsen a predictor onto wider value lattices and watch how far the
//! swap-calibration error can drift.
//!
//! Bucketing merges level sets, so per-level violations can add up — but
//! never beyond `2*sqrt(mce/delta) + delta`, and no prediction moves by more
//! than the bucket width.
//!
//! ```bash
//! cargo run --example coarsen_predictions
//! ```

use swapcal::audit::audit;
use swapcal::boost::bucketize;
use swapcal::synth::random_instance;

fn main() -> swapcal::Result<()> {
    let inst = random_instance(21);
    let base = audit(&inst.dist, &inst.pred, &inst.class)?;
    println!(
        "original predictor: {} level sets, mce = {:.5}, smce = {:.5}",
        base.level_sets.len(),
        base.mce,
        base.smce
    );
    println!();
    println!(
        "{:>8}  {:>7}  {:>10}  {:>10}  {:>10}",
        "delta", "levels", "smce", "bound", "max move"
    );
    for k in [2u32, 4, 8, 16] {
        let delta = 1.0 / f64::from(k);
        let coarse = bucketize(&inst.pred, delta)?;
        let report = audit(&inst.dist, &coarse, &inst.class)?;
        let bound = 2.0 * (base.mce / delta).sqrt() + delta;
        let max_move = inst
            .dist
            .points()
            .iter()
            .map(|p| {
                (coarse.value(&p.id).expect("bucketized")
                    - inst.pred.value(&p.id).expect("predicted"))
                .abs()
            })
            .fold(0.0f64, f64::max);
        println!(
            "{:>8.4}  {:>7}  {:>10.5}  {:>10.5}  {:>10.5}",
            delta,
            report.level_sets.len(),
            report.smce,
            bound,
            max_move
        );
    }
    println!();
    println!("Every row keeps smce within its bound and max move within delta.");
    Ok(())
}
