//! Steady-state photon statistics next to a Poisson distribution of equal mean.

use micromaser::fock::{FockCutoff, PhotonStatistics};
use micromaser::mme::{pump_excited_prob, steady_state, MicromaserParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(64)?;
    let ss = steady_state(&params, cutoff)?;
    let mean = ss.mean();
    let var = ss.expectation(|n| (n as f64 - mean).powi(2));
    let poisson = PhotonStatistics::poisson(mean, cutoff);

    println!("<n> = {mean:.4}, Fano factor = {:.4}", var / mean);
    println!("pump atoms leave excited with p = {:.4}", pump_excited_prob(&ss, params.g_tau));
    println!("{:>3} {:>10} {:>10}", "n", "p_ss", "poisson");
    for n in 0..=20 {
        println!("{n:>3} {:>10.6} {:>10.6}", ss.probabilities()[n], poisson.probabilities()[n]);
    }
    Ok(())
}
