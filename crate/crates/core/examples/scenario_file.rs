//! Running a scenario from text, as the binary does, and printing its report.

use tsallis_robust::scenario::{parse_config_str, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config_str(
        "mode = max-principle\n\
         gamma = 1.0\n\
         q = 2.0\n\
         N = 5\n\
         x = 1.0\n",
    )?;
    let out = std::env::temp_dir().join("tsallis-robust-example");
    let report = run(&cfg, &out)?;
    print!("{}", report.checks.to_csv());
    println!("wrote {:?} into {}", report.files, out.display());
    Ok(())
}
