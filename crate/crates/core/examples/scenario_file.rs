//! Running a configured scenario in-process and writing its output files.

use micromaser::config::{validate_config, CANONICAL_CONFIG};
use micromaser::runner::{run_scenario, write_outputs, Subcommand};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = validate_config(CANONICAL_CONFIG)?;
    let out = run_scenario(Subcommand::Diffuse, &cfg)?;
    for key in ["d_fit", "d_eigen", "rms_log_residual"] {
        println!("{key} = {}", out.summary_value(key).unwrap_or("?"));
    }
    let dir = std::env::temp_dir().join("micromaser-diffuse");
    write_outputs(&dir, &cfg, &out)?;
    println!("wrote {}", dir.display());
    Ok(())
}
