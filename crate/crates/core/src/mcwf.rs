//! Monte Carlo wave-function trajectories of the micromaser.
//!
//! Pump atoms arrive as a Poisson process of rate r. Each one applies a
//! Jaynes–Cummings kick and is measured on exit. Between arrivals the field
//! is damped by a thermal bath via first-order quantum jumps; the no-jump
//! evolution is diagonal in the Fock basis and is applied exactly. The ensemble
//! average reproduces the master equation in [`crate::mme`].
//!
//! Trajectory `i` draws from ChaCha8 stream `i` seeded by the master seed, and
//! results are reduced in trajectory order, so estimates are bitwise
//! reproducible for any number of worker threads.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{MaserError, Result};
use crate::fock::{FockCutoff, PureState};
use crate::mme::MicromaserParams;

/// Upper bound on the total jump probability of one damping step.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomOutcome {
    Excited,
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub master_seed: u64,
    pub n_trajectories: usize,
    /// Damping step in γt.
    pub dt: f64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_trajectories < 1 {
            errs.push("n_trajectories must be >= 1".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt must be > 0 (got {})", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            errs.push(format!("t_end must be >= 0 (got {})", self.t_end));
        }
        if self.sample_times.is_empty() {
            errs.push("at least one sample time is required".to_string());
        }
        if self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            errs.push("sample times must be strictly increasing".to_string());
        }
        if self
            .sample_times
            .iter()
            .any(|t| *t < 0.0 || *t > self.t_end)
        {
            errs.push("sample times must lie in [0, t_end]".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(MaserError::InvalidParams(errs.join("; ")))
        }
    }
}

/// Ensemble means and standard errors at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub n_trajectories: usize,
    pub mean_photon: Vec<f64>,
    pub mean_photon_se: Vec<f64>,
    pub re_a: Vec<f64>,
    pub re_a_se: Vec<f64>,
    /// `photon_stats[s][n]`: population of `|n⟩` at sample `s`.
    pub photon_stats: Vec<Vec<f64>>,
    pub photon_stats_se: Vec<Vec<f64>>,
}

fn renormalize(c: &mut [Complex64]) -> Result<()> {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(MaserError::InvalidState("trajectory state collapsed to zero norm".into()));
    }
    let inv = 1.0 / norm;
    c.iter_mut().for_each(|z| *z *= inv);
    Ok(())
}

fn kick_in_place<R: Rng + ?Sized>(
    c: &mut Vec<Complex64>,
    g_tau: f64,
    tail_tol: f64,
    rng: &mut R,
) -> Result<AtomOutcome> {
    let top = c.len() - 1;
    let leak = c[top].norm_sqr() * (g_tau * ((top + 1) as f64).sqrt()).sin().powi(2);
    if leak > tail_tol {
        return Err(MaserError::CutoffTooSmall(format!(
            "pump atom would emit into n_max + 1 with probability {leak:.3e}"
        )));
    }
    // the top level is closed: atoms leave it untouched
    let stay = |n: usize| {
        if n < top {
            (g_tau * ((n + 1) as f64).sqrt()).cos()
        } else {
            1.0
        }
    };
    let p_excited: f64 = c
        .iter()
        .enumerate()
        .map(|(n, z)| z.norm_sqr() * stay(n).powi(2))
        .sum();
    let u: f64 = rng.random();
    if u < p_excited {
        for (n, z) in c.iter_mut().enumerate() {
            *z *= stay(n);
        }
        renormalize(c)?;
        Ok(AtomOutcome::Excited)
    } else {
        for n in (0..top).rev() {
            c[n + 1] = -c[n] * (g_tau * ((n + 1) as f64).sqrt()).sin();
        }
        c[0] = Complex64::new(0.0, 0.0);
        renormalize(c)?;
        Ok(AtomOutcome::Ground)
    }
}

/// Passes one excited pump atom through the cavity and measures it.
pub fn jc_kick<R: Rng + ?Sized>(
    state: &PureState,
    g_tau: f64,
    rng: &mut R,
) -> Result<(PureState, AtomOutcome)> {
    let cutoff = state.cutoff();
    let mut c: Vec<Complex64> = state.amplitudes().iter().copied().collect();
    let outcome = kick_in_place(&mut c, g_tau, cutoff.tail_tolerance(), rng)?;
    Ok((PureState::new(DVector::from_vec(c), cutoff)?, outcome))
}

/// No-jump amplitude factors `exp(−dt/2 [(n̄+1)n + n̄ absorb(n)])`.
fn no_jump_factors(dim: usize, nbar: f64, dt: f64) -> Vec<f64> {
    let top = dim - 1;
    (0..dim)
        .map(|n| {
            let absorb = if n < top { (n + 1) as f64 } else { 0.0 };
            (-0.5 * dt * ((nbar + 1.0) * n as f64 + nbar * absorb)).exp()
        })
        .collect()
}

fn damp_in_place<R: Rng + ?Sized>(
    c: &mut [Complex64],
    nbar: f64,
    dt: f64,
    factors: &[f64],
    rng: &mut R,
) -> Result<()> {
    let top = c.len() - 1;
    let absorb = |n: usize| if n < top { (n + 1) as f64 } else { 0.0 };
    let (mut n_mean, mut aa_dag) = (0.0, 0.0);
    for (n, z) in c.iter().enumerate() {
        let p = z.norm_sqr();
        n_mean += n as f64 * p;
        aa_dag += absorb(n) * p;
    }
    let p_emit = (nbar + 1.0) * n_mean * dt;
    let p_absorb = nbar * aa_dag * dt;
    if p_emit + p_absorb >= MAX_JUMP_PROBABILITY {
        return Err(MaserError::StepTooLarge {
            probability: p_emit + p_absorb,
            bound: MAX_JUMP_PROBABILITY,
        });
    }
    let u: f64 = rng.random();
    if u < p_emit {
        // â
        for n in 0..top {
            c[n] = c[n + 1] * ((n + 1) as f64).sqrt();
        }
        c[top] = Complex64::new(0.0, 0.0);
    } else if u < p_emit + p_absorb {
        // â†
        for n in (0..top).rev() {
            c[n + 1] = c[n] * ((n + 1) as f64).sqrt();
        }
        c[0] = Complex64::new(0.0, 0.0);
    }
    // no-jump evolution over the step, also after a jump
    for (z, f) in c.iter_mut().zip(factors) {
        *z *= f;
    }
    renormalize(c)
}

/// One first-order quantum-jump step of thermal cavity damping.
pub fn damped_step<R: Rng + ?Sized>(
    state: &PureState,
    params: &MicromaserParams,
    dt: f64,
    rng: &mut R,
) -> Result<PureState> {
    let mut c: Vec<Complex64> = state.amplitudes().iter().copied().collect();
    let factors = no_jump_factors(c.len(), params.nbar, dt);
    damp_in_place(&mut c, params.nbar, dt, &factors, rng)?;
    PureState::new(DVector::from_vec(c), state.cutoff())
}

/// Per-trajectory observables at each sample time.
struct TrajectorySamples {
    mean_photon: Vec<f64>,
    re_a: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

fn observe(c: &[Complex64], out: &mut TrajectorySamples) {
    let probs: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    out.mean_photon
        .push(probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum());
    out.re_a.push(
        (0..c.len() - 1)
            .map(|n| ((n + 1) as f64).sqrt() * (c[n].conj() * c[n + 1]).re)
            .sum(),
    );
    out.probs.push(probs);
}

pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn run_trajectory(
    initial: &[Complex64],
    params: &MicromaserParams,
    config: &TrajectoryConfig,
    tail_tol: f64,
    index: u64,
) -> Result<TrajectorySamples> {
    let mut rng = trajectory_rng(config.master_seed, index);
    let arrivals = if params.r_over_gamma > 0.0 {
        Some(Exp::new(params.r_over_gamma).map_err(|e| MaserError::InvalidParams(e.to_string()))?)
    } else {
        None
    };
    let mut c = initial.to_vec();
    let full_step = no_jump_factors(c.len(), params.nbar, config.dt);
    let mut next_arrival = match &arrivals {
        Some(e) => e.sample(&mut rng),
        None => f64::INFINITY,
    };
    let n_s = config.sample_times.len();
    let mut out = TrajectorySamples {
        mean_photon: Vec::with_capacity(n_s),
        re_a: Vec::with_capacity(n_s),
        probs: Vec::with_capacity(n_s),
    };
    let mut t = 0.0;
    for &target in &config.sample_times {
        loop {
            let stop = target.min(next_arrival);
            while t < stop {
                let h = config.dt.min(stop - t);
                if h == config.dt {
                    damp_in_place(&mut c, params.nbar, h, &full_step, &mut rng)?;
                } else {
                    let partial = no_jump_factors(c.len(), params.nbar, h);
                    damp_in_place(&mut c, params.nbar, h, &partial, &mut rng)?;
                }
                t = if stop - t <= config.dt { stop } else { t + h };
            }
            if next_arrival <= target {
                kick_in_place(&mut c, params.g_tau, tail_tol, &mut rng)?;
                next_arrival += arrivals.as_ref().expect("finite arrival").sample(&mut rng);
            } else {
                break;
            }
        }
        observe(&c, &mut out);
    }
    Ok(out)
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, m: usize) -> (f64, f64) {
    let mf = m as f64;
    let mean = values.clone().sum::<f64>() / mf;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
    (mean, (var / mf).sqrt())
}

/// Runs `config.n_trajectories` trajectories from `initial` and averages them.
pub fn run_ensemble(
    initial: &PureState,
    params: &MicromaserParams,
    config: &TrajectoryConfig,
) -> Result<EnsembleEstimate> {
    params.validate()?;
    config.validate()?;
    let cutoff: FockCutoff = initial.cutoff();
    let c0: Vec<Complex64> = initial.amplitudes().iter().copied().collect();
    let runs = (0..config.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&c0, params, config, cutoff.tail_tolerance(), i))
        .collect::<Result<Vec<_>>>()?;

    let m = runs.len();
    let n_s = config.sample_times.len();
    let dim = cutoff.dim();
    let mut est = EnsembleEstimate {
        times: config.sample_times.clone(),
        n_trajectories: m,
        mean_photon: Vec::with_capacity(n_s),
        mean_photon_se: Vec::with_capacity(n_s),
        re_a: Vec::with_capacity(n_s),
        re_a_se: Vec::with_capacity(n_s),
        photon_stats: Vec::with_capacity(n_s),
        photon_stats_se: Vec::with_capacity(n_s),
    };
    for s in 0..n_s {
        let (mn, mn_se) = mean_and_se(runs.iter().map(|r| r.mean_photon[s]), m);
        let (ra, ra_se) = mean_and_se(runs.iter().map(|r| r.re_a[s]), m);
        est.mean_photon.push(mn);
        est.mean_photon_se.push(mn_se);
        est.re_a.push(ra);
        est.re_a_se.push(ra_se);
        let (p, p_se): (Vec<f64>, Vec<f64>) = (0..dim)
            .map(|n| mean_and_se(runs.iter().map(|r| r.probs[s][n]), m))
            .unzip();
        est.photon_stats.push(p);
        est.photon_stats_se.push(p_se);
    }
    log::info!("mcwf: {m} trajectories, {n_s} samples");
    Ok(est)
}
