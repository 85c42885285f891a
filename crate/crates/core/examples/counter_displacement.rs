//! Shifting a coherent state back to the vacuum and out again.

use micromaser::fock::{
    apply_displacement, coherent_state, field_amplitude, mean_photon, ComplexAmplitude, FockCutoff,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cutoff = FockCutoff::new(64)?;
    let alpha = ComplexAmplitude::new(2.5, 1.0);
    let rho = coherent_state(alpha, cutoff)?.to_density();
    println!("start:   <a> = {:.6}, <n> = {:.6}", field_amplitude(&rho), mean_photon(&rho));

    let centred = apply_displacement(&rho, -alpha)?;
    println!("shifted: <a> = {:.2e}, p_0 = {:.12}", field_amplitude(&centred).norm(), centred.rho()[(0, 0)].re);

    let back = apply_displacement(&centred, alpha)?;
    println!("restored with max element error {:.2e}", (back.rho() - rho.rho()).camax());
    Ok(())
}
