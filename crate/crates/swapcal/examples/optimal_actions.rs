//! Tabulate optimal actions `argmin_t E_{y~p}[loss(y, t)]` for the built-in
//! losses across a sweep of label means.
//!
//! Squared-style losses act at the mean itself; the truncated logistic acts
//! at the log-odds until the truncation clamps it; the even-power loss pulls
//! toward 1/2.
//!
//! ```bash
//! cargo run --example optimal_actions
//! ```

use swapcal::losses::{half_squared, logistic, p_power, squared};

fn main() -> swapcal::Result<()> {
    let losses = [
        squared(),
        half_squared(),
        p_power(4)?,
        logistic(2.0)?,
        logistic(10.0)?,
    ];

    print!("{:>6}", "p");
    for loss in &losses {
        print!("  {:>14}", loss.name());
    }
    println!();
    for i in 0..=10u32 {
        let p = f64::from(i) / 10.0;
        print!("{p:>6.2}");
        for loss in &losses {
            print!("  {:>14.6}", loss.optimal_action(p));
        }
        println!();
    }

    println!();
    let tight = logistic(2.0)?;
    println!(
        "logistic(2) clamps once |log-odds| exceeds 2: at p = 0.9 the raw \
         log-odds is {:.4}, the action is {:.4}.",
        (0.9f64 / 0.1).ln(),
        tight.optimal_action(0.9)
    );
    let quartic = p_power(4)?;
    println!(
        "p_power(4) shrinks toward 1/2: at p = 0.9 it plays {:.4} instead of 0.9.",
        quartic.optimal_action(0.9)
    );
    Ok(())
}
