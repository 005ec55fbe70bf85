//! Boost a swap-multicalibrated predictor from the constant 1/2, watching
//! the squared-error potential fall at every accepted update.
//!
//! ```bash
//! cargo run --example boost_from_scratch
//! ```

use swapcal::audit::audit;
use swapcal::boost::{mcboost, BoostConfig};
use swapcal::synth::random_instance;

fn main() -> swapcal::Result<()> {
    let inst = random_instance(4);
    let before = audit(&inst.dist, &inst.pred, &inst.class)?;
    println!(
        "instance: {} points, {} class members, seeded predictor smce = {:.4}",
        inst.dist.points().len(),
        inst.class.members().len(),
        before.smce
    );

    let config = BoostConfig::new(0.05)?;
    let (boosted, trace) = mcboost(&inst.dist, &inst.class, &config)?;

    println!();
    println!(
        "{:>4}  {:>6}  {:>10}  {:>8}  {:>10}  witness",
        "it", "v", "violation", "step", "potential"
    );
    for rec in &trace.iterations {
        println!(
            "{:>4}  {:>6.3}  {:>10.6}  {:>8.4}  {:>10.6}  {}",
            rec.iteration, rec.v, rec.violation, rec.step, rec.potential_after, rec.witness
        );
    }

    let after = audit(&inst.dist, &boosted, &inst.class)?;
    println!();
    println!(
        "converged in {} updates; audited smce {:.6} (target alpha = {})",
        trace.iterations.len(),
        after.smce,
        config.alpha
    );
    println!(
        "predictions moved onto the 1/{} lattice:",
        (1.0 / boosted.grid_step()).round()
    );
    for (id, v) in boosted.values() {
        println!("  {id}: {v:.4}");
    }
    Ok(())
}
