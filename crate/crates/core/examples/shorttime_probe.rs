//! Weak probe readout before the minimum, with the small-angle validity check.

use micromaser::fock::FockCutoff;
use micromaser::mme::{eigen_decay_rate, matched_alpha, MicromaserParams};
use micromaser::protocol::{extract_linewidth_shorttime, run_protocol, ProbeConfig};
use micromaser::runner::time_grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MicromaserParams::canonical();
    let cutoff = FockCutoff::new(80)?;
    let alpha = matched_alpha(&params, cutoff)?;
    let d = eigen_decay_rate(&params, cutoff)?.rate;

    for g_tau_p in [0.05, 0.1, 0.3] {
        let probe = ProbeConfig::new(g_tau_p, time_grid(3.0 / d, 0.5), alpha)?;
        let series = run_protocol(&params, &probe, cutoff)?;
        let st = extract_linewidth_shorttime(&series, &probe)?;
        let flagged = st.validity.iter().filter(|v| !v.valid).count();
        println!(
            "g tau_p = {g_tau_p:<4}  D/gamma = {:.5} (band {d:.5})  flagged {flagged}/{}",
            st.fit.d,
            st.validity.len()
        );
    }
    Ok(())
}
