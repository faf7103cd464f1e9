//! Writes a demo cohort drawn from the simulation design, together with its
//! true propensity scores.
//!
//! cargo run -p adjna --example make_demo -- data 300 17

use std::io::Write;
use std::path::PathBuf;

use adjna::io::{format_number, write_cohort};
use adjna::simulation::{sample_cohort, DgpConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adjna::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let n: usize = args.next().map_or(Ok(300), |s| s.parse()).expect("sample size");
    let seed: u64 = args.next().map_or(Ok(17), |s| s.parse()).expect("seed");
    let config = DgpConfig::default().with_n(n);
    let sample = sample_cohort(&config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    std::fs::create_dir_all(&dir)?;
    write_cohort(&sample.cohort, std::fs::File::create(dir.join("demo.csv"))?)?;
    let mut scores = std::fs::File::create(dir.join("demo_scores.csv"))?;
    writeln!(scores, "score")?;
    for e in &sample.true_scores {
        writeln!(scores, "{}", format_number(*e))?;
    }
    println!("wrote {} subjects to {}", n, dir.display());
    Ok(())
}
