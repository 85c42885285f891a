//! Probe readout with a finite number of atoms per interrogation time.

use micromaser::fit::fit_offset_exponential_weighted;
use micromaser::fock::FockCutoff;
use micromaser::mcwf::trajectory_rng;
use micromaser::mme::{matched_alpha, MicromaserParams};
use micromaser::protocol::{default_fit_start, run_protocol, sample_detections, ProbeConfig};
use micromaser::runner::time_grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(80)?;
    let probe = ProbeConfig::new(params.g_tau, time_grid(160.0, 1.0), matched_alpha(&params, cutoff)?)?;
    let series = run_protocol(&params, &probe, cutoff)?;
    let start = default_fit_start(&params, cutoff)?;

    for atoms in [1_000, 10_000, 100_000] {
        let det = sample_detections(&series, atoms, &mut trajectory_rng(5, 0))?;
        let late: Vec<_> = det.iter().filter(|s| s.t >= start).collect();
        let t: Vec<f64> = late.iter().map(|s| s.t).collect();
        let y: Vec<f64> = late.iter().map(|s| s.excited_fraction).collect();
        let sig: Vec<f64> = late.iter().map(|s| s.std_err).collect();
        let fit = fit_offset_exponential_weighted(&t, &y, Some(&sig), None)?;
        println!("{atoms:>7} atoms per point: D/gamma = {:.5}", fit.d);
    }
    Ok(())
}
