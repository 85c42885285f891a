//! Field amplitude decay of a coherent start, fitted and from the coherence band.

use micromaser::fock::{coherent_state, FockCutoff};
use micromaser::mme::{eigen_decay_rate, fit_field_decay, matched_alpha, EvolveOptions, MicromaserParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(64)?;
    let alpha = matched_alpha(&params, cutoff)?;
    let eig = eigen_decay_rate(&params, cutoff)?;
    let initial = coherent_state(alpha, cutoff)?.to_density();
    let fit = fit_field_decay(&initial, &params, eig.rate, EvolveOptions::default())?;

    println!("alpha = {:.4}", alpha.value().re);
    println!("D/gamma fitted = {:.5} over {} points up to gamma t = {:.1}", fit.rate, fit.n_points, fit.window_end);
    println!("D/gamma eigen  = {:.5} (next mode {:.1}x faster)", eig.rate, eig.gap_ratio);
    println!("rms log residual = {:.2e}", fit.rms_log_residual);
    for (t, y) in fit.record.times.iter().zip(&fit.record.re_a).step_by(40) {
        println!("  gamma t = {t:>6.1}  Re<a> = {y:.5}");
    }
    Ok(())
}
