//! Simulate a dataset from each model and write it as CSV, in the layout the
//! `semiboot fit` and `semiboot bootstrap` commands read.
//!
//! cargo run --example generate_data -- [output-dir] [n] [seed]

use std::fs::File;
use std::path::PathBuf;

use semiboot::models::io::write_dataset;
use semiboot::models::{generate_data, ModelConfig, ModelKind};

fn main() -> semiboot::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let n: usize = args.next().map_or(200, |s| s.parse().expect("n must be an integer"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(&dir)?;

    for kind in [ModelKind::CoxRc, ModelKind::CoxCs, ModelKind::PartlyLinear] {
        let cfg = ModelConfig::new(kind);
        let data = generate_data(&cfg, n, seed)?;
        let path = dir.join(format!("{kind}.csv"));
        write_dataset(&data, File::create(&path)?)?;
        println!("wrote {} rows of {kind} data (theta0 = {:?}) to {}", data.len(), cfg.theta0, path.display());
    }
    println!("\ntry: semiboot bootstrap --model cox-rc --data {}/cox-rc.csv -B 500", dir.display());
    Ok(())
}
