//! Counter-displaced probe readout and the late-time linewidth fit.

use micromaser::fock::{coherent_state, FockCutoff};
use micromaser::mme::{matched_alpha, MicromaserParams};
use micromaser::protocol::{
    default_fit_start, extract_linewidth_late_time, fit_constants, run_protocol, ProbeConfig,
};
use micromaser::runner::time_grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(80)?;
    let alpha = matched_alpha(&params, cutoff)?;
    let probe = ProbeConfig::new(params.g_tau, time_grid(160.0, 0.5), alpha)?;
    let series = run_protocol(&params, &probe, cutoff)?;

    let i = series.argmin_p_e();
    println!("minimum p_e = {:.4} at gamma t = {}", series.samples[i].p_e, series.samples[i].t);

    let start = default_fit_start(&params, cutoff)?;
    let fit = extract_linewidth_late_time(&series, start)?;
    let initial = coherent_state(alpha, cutoff)?.to_density();
    let closed = fit_constants(&params, &probe, &initial, cutoff)?;
    println!("fit from gamma t = {start:.1}: D/gamma = {:.5}", fit.d);
    println!("K = {:.4} (closed form {:.4})", fit.k, closed.k);
    println!("C = {:.5} (closed form {:.5})", fit.c, closed.p_inf);
    Ok(())
}
