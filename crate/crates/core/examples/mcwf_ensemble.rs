//! Quantum trajectory ensemble against the master equation.

use micromaser::fock::{coherent_state, FockCutoff};
use micromaser::mcwf::{run_ensemble, TrajectoryConfig};
use micromaser::mme::{evolve_sampled, matched_alpha, EvolveOptions, MicromaserParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(48)?;
    let initial = coherent_state(matched_alpha(&params, cutoff)?, cutoff)?;
    let times = vec![0.0, 1.0, 2.0, 4.0];
    let cfg = TrajectoryConfig {
        master_seed: 1,
        n_trajectories: 400,
        dt: 1e-3,
        t_end: 4.0,
        sample_times: times.clone(),
    };
    let est = run_ensemble(&initial, &params, &cfg)?;
    let reference = evolve_sampled(&initial.to_density(), &params, &times, EvolveOptions::default())?;
    let stats = reference.record.photon_stats.unwrap_or_default();

    println!("{:>6} {:>18} {:>10}", "gamma t", "<n> trajectories", "<n> mme");
    for (i, t) in times.iter().enumerate() {
        println!(
            "{t:>6.1} {:>10.4} ± {:<6.4} {:>10.4}",
            est.mean_photon[i],
            est.mean_photon_se[i],
            stats[i].mean()
        );
    }
    Ok(())
}
