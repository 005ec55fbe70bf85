//! Export the bundled instances as JSON files for the command-line tool.
//!
//! Writes distribution, predictor, and hypothesis-class files for the
//! two-bit matching instance and a seeded random instance, then prints
//! ready-to-run `swapcal` invocations against them.
//!
//! ```bash
//! cargo run --example export_instance_files -- [output-dir]
//! ```

use std::fs;
use std::path::PathBuf;

use swapcal::separations::build_glm_instance;
use swapcal::synth::random_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("target/instance-files"), PathBuf::from);
    fs::create_dir_all(&dir)?;

    let (dist, pred, class) = build_glm_instance();
    fs::write(dir.join("matching.dist.json"), dist.to_json_string())?;
    fs::write(dir.join("matching.pred.json"), pred.to_json_string())?;
    fs::write(dir.join("matching.class.json"), class.to_json_string())?;

    let inst = random_instance(0);
    fs::write(dir.join("seeded.dist.json"), inst.dist.to_json_string())?;
    fs::write(dir.join("seeded.pred.json"), inst.pred.to_json_string())?;
    fs::write(dir.join("seeded.class.json"), inst.class.to_json_string())?;

    let d = dir.display();
    println!("wrote six files under {d}");
    println!();
    println!("try them:");
    println!(
        "  cargo run -- audit --dist {d}/matching.dist.json \
         --pred {d}/matching.pred.json --class {d}/matching.class.json"
    );
    println!(
        "  cargo run -- boost --dist {d}/seeded.dist.json \
         --class {d}/seeded.class.json --alpha 0.05 --out {d}/boosted.json"
    );
    println!(
        "  cargo run -- boost --dist {d}/seeded.dist.json \
         --class {d}/seeded.class.json --alpha 0.1 --loss half_squared"
    );
    println!(
        "  cargo run -- postprocess --pred {d}/matching.pred.json \
         --loss squared --loss logistic:4 --delta 0.25"
    );
    Ok(())
}
