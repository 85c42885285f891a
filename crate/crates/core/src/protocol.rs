//! Linewidth measurement by counter-displacement and probe atoms.
//!
//! At each interrogation time the pump is stopped, the field is shifted back
//! by the counter-field `D̂(−α)`, and a single excited probe atom with phase
//! `gτ_p` is sent through. Two estimators turn the probe statistics into the
//! phase diffusion rate:
//!
//! * late time: `p̃_e(t) = K e^{−Dt} + p̃_e(∞)` once the higher coherences are gone;
//! * short time: for small `gτ_p`, `p̃_g ≈ (gτ_p)² (⟨Ñ⟩ + 1)` with
//!   `⟨Ñ⟩(t) = 2|α|² (1 − e^{−Dt})`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{MaserError, Result};
use crate::fit::{fit_offset_exponential, fit_saturating_exponential, DecayFit};
use crate::fock::{
    coherent_state, field_amplitude, mean_photon, photon_statistics, ComplexAmplitude,
    Displacement, FieldState, FockCutoff, PhotonStatistics,
};
use crate::mme::{
    eigen_decay_rate, jc_excited_probability, pump_excited_prob, steady_state, EvolveOptions,
    MicromaserParams, MmePropagator,
};

/// Largest allowed `2 gτ_p √(n_eff + 1)` for the small-angle estimator.
pub const VALIDITY_THRESHOLD: f64 = 0.5;
/// Quantile of `p̃_n` that defines the effective top occupation.
pub const VALIDITY_QUANTILE: f64 = 0.9999;
/// Late-time fits start at this multiple of the eigenvalue estimate of 1/D.
pub const FIT_START_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub g_tau_p: f64,
    pub interrogation_times: Vec<f64>,
    /// Amplitude of the matched initial coherent state.
    pub alpha: ComplexAmplitude,
    /// Counter-displacement; `None` means `−α`.
    pub beta: Option<ComplexAmplitude>,
}

impl ProbeConfig {
    pub fn new(g_tau_p: f64, interrogation_times: Vec<f64>, alpha: ComplexAmplitude) -> Result<Self> {
        let c = ProbeConfig {
            g_tau_p,
            interrogation_times,
            alpha,
            beta: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.g_tau_p > 0.0 && self.g_tau_p.is_finite()) {
            errs.push(format!("g_tau_p must be > 0 (got {})", self.g_tau_p));
        }
        if self.interrogation_times.is_empty() {
            errs.push("at least one interrogation time is required".into());
        }
        if self.interrogation_times.iter().any(|t| !(*t >= 0.0)) {
            errs.push("interrogation times must be ≥ 0".into());
        }
        if self.interrogation_times.windows(2).any(|w| w[1] <= w[0]) {
            errs.push("interrogation times must be strictly increasing".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(MaserError::InvalidParams(errs.join("; ")))
        }
    }

    pub fn counter_field(&self) -> ComplexAmplitude {
        self.beta.unwrap_or(-self.alpha)
    }
}

/// Probe readout at one interrogation time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSample {
    pub t: f64,
    /// Probe atom leaves excited.
    pub p_e: f64,
    pub p_g: f64,
    /// Mean photon number of the back-shifted field.
    pub mean_n: f64,
    /// Back-shifted photon statistics.
    pub p_tilde: PhotonStatistics,
    /// Photon statistics of the unshifted field.
    pub p_field: PhotonStatistics,
    /// Pump-atom excited probability on the unshifted field.
    pub pump_p_e: f64,
    /// `Re⟨â⟩` of the unshifted field.
    pub re_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSeries {
    pub g_tau_p: f64,
    pub alpha: ComplexAmplitude,
    pub samples: Vec<ProtocolSample>,
}

impl ProtocolSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.p_e).collect()
    }

    pub fn p_g(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.p_g).collect()
    }

    pub fn mean_n(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mean_n).collect()
    }

    /// Index of the smallest probe excited probability.
    pub fn argmin_p_e(&self) -> usize {
        self.samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.p_e.total_cmp(&b.1.p_e))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Same field evolution, read out with a different probe phase.
    pub fn with_probe_phase(&self, g_tau_p: f64) -> ProtocolSeries {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let p_e = probe_excited_prob(&s.p_tilde, g_tau_p);
                ProtocolSample {
                    p_e,
                    p_g: 1.0 - p_e,
                    ..s.clone()
                }
            })
            .collect();
        ProtocolSeries {
            g_tau_p,
            alpha: self.alpha,
            samples,
        }
    }
}

/// Probability that an excited probe atom with phase `gτ_p` leaves excited.
pub fn probe_excited_prob(p_tilde: &PhotonStatistics, g_tau_p: f64) -> f64 {
    jc_excited_probability(p_tilde, g_tau_p)
}

/// Evolves the matched coherent state and runs the probe readout at every
/// interrogation time.
pub fn run_protocol(
    params: &MicromaserParams,
    probe: &ProbeConfig,
    cutoff: FockCutoff,
) -> Result<ProtocolSeries> {
    params.validate()?;
    probe.validate()?;
    let initial = coherent_state(probe.alpha, cutoff)?.to_density();
    let counter = Displacement::new(probe.counter_field(), cutoff)?;
    let mut prop = MmePropagator::new(&initial, params, EvolveOptions::full_band())?;
    let mut samples = Vec::with_capacity(probe.interrogation_times.len());
    for &t in &probe.interrogation_times {
        prop.advance(t - prop.time())?;
        prop.check_health()?;
        let field = prop.state();
        samples.push(readout(&field, &counter, params, probe.g_tau_p, t)?);
    }
    log::info!(
        "protocol: {} interrogation times up to γt = {:.1}",
        samples.len(),
        prop.time()
    );
    Ok(ProtocolSeries {
        g_tau_p: probe.g_tau_p,
        alpha: probe.alpha,
        samples,
    })
}

fn readout(
    field: &FieldState,
    counter: &Displacement,
    params: &MicromaserParams,
    g_tau_p: f64,
    t: f64,
) -> Result<ProtocolSample> {
    let shifted = counter.apply(field)?;
    let p_tilde = photon_statistics(&shifted)?;
    let p_field = photon_statistics(field)?;
    let p_e = probe_excited_prob(&p_tilde, g_tau_p);
    Ok(ProtocolSample {
        t,
        p_e,
        p_g: 1.0 - p_e,
        mean_n: mean_photon(&shifted),
        pump_p_e: pump_excited_prob(&p_field, params.g_tau),
        re_a: field_amplitude(field).re,
        p_tilde,
        p_field,
    })
}

/// Closed-form constants of the late-time law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConstants {
    /// Amplitude `K` of the decaying term.
    pub k: f64,
    /// Asymptotic probe excited probability.
    pub p_inf: f64,
}

/// `K` from the initial first coherences and `p̃_e(∞)` from the steady state.
pub fn fit_constants(
    params: &MicromaserParams,
    probe: &ProbeConfig,
    initial: &FieldState,
    cutoff: FockCutoff,
) -> Result<FitConstants> {
    initial.validate()?;
    let beta = probe.counter_field();
    let d_back = Displacement::new(beta, cutoff)?;
    let d_fwd = Displacement::new(-beta, cutoff)?;
    let (db, df) = (d_back.matrix(), d_fwd.matrix());
    let ss = steady_state(params, cutoff)?;
    let rho = initial.rho();
    let dim = cutoff.dim();
    let weight: Vec<f64> = (0..dim)
        .map(|n| (probe.g_tau_p * ((n + 1) as f64).sqrt()).cos().powi(2))
        .collect();
    let mut k = 0.0;
    let mut p_inf = 0.0;
    for (n, w) in weight.iter().enumerate() {
        let mut coh = num_complex::Complex64::new(0.0, 0.0);
        for i in 0..dim - 1 {
            coh += rho[(i, i + 1)] * db[(n, i)] * df[(i + 1, n)];
        }
        k += 2.0 * coh.re * w;
        let diag: f64 = (0..dim)
            .map(|i| ss.probabilities()[i] * db[(n, i)].norm_sqr())
            .sum();
        p_inf += diag * w;
    }
    Ok(FitConstants { k, p_inf })
}

/// `1.5 / D` with `D` from the slowest coherence eigenvalue.
pub fn default_fit_start(params: &MicromaserParams, cutoff: FockCutoff) -> Result<f64> {
    Ok(FIT_START_FACTOR / eigen_decay_rate(params, cutoff)?.rate)
}

/// Fits `K e^{−Dt} + C` to the probe excited probability for `t ≥ fit_start`.
pub fn extract_linewidth_late_time(series: &ProtocolSeries, fit_start: f64) -> Result<DecayFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = series
        .samples
        .iter()
        .filter(|s| s.t >= fit_start)
        .map(|s| (s.t, s.p_e))
        .unzip();
    if t.len() < 4 {
        return Err(MaserError::FitFailure(format!(
            "only {} samples at or after γt = {fit_start}",
            t.len()
        )));
    }
    fit_offset_exponential(&t, &y, None)
}

/// Small-angle ground-state probability `(gτ_p)² (⟨Ñ⟩ + 1)`.
pub fn shorttime_ground_prob(mean_n: f64, g_tau_p: f64) -> f64 {
    g_tau_p * g_tau_p * (mean_n + 1.0)
}

/// `2|α|² (1 − e^{−Dt})`, the back-shifted mean photon number under pure
/// phase diffusion with frozen statistics.
pub fn backshifted_mean_photon(alpha: ComplexAmplitude, d: f64, t: f64) -> f64 {
    2.0 * alpha.norm_sqr() * (1.0 - (-d * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    /// Occupation below which 99.99 % of `p̃_n` lies.
    pub n_eff: usize,
    /// `2 gτ_p √(n_eff + 1)`.
    pub max_rabi_phase: f64,
    pub valid: bool,
}

/// Checks that every appreciably occupied level has a small probe Rabi phase.
pub fn shorttime_validity(p_tilde: &PhotonStatistics, g_tau_p: f64) -> ValidityReport {
    let n_eff = p_tilde.quantile(VALIDITY_QUANTILE);
    let phase = 2.0 * g_tau_p * ((n_eff + 1) as f64).sqrt();
    ValidityReport {
        n_eff,
        max_rabi_phase: phase,
        valid: phase < VALIDITY_THRESHOLD,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortTimeFit {
    pub fit: DecayFit,
    /// `⟨Ñ⟩` recovered from each `p̃_g` sample.
    pub mean_n_estimates: Vec<f64>,
    pub validity: Vec<ValidityReport>,
}

impl ShortTimeFit {
    pub fn all_valid(&self) -> bool {
        self.validity.iter().all(|v| v.valid)
    }

    /// Turns any flagged sample into a [`MaserError::ValidityViolated`].
    pub fn require_valid(self) -> Result<Self> {
        match self.validity.iter().position(|v| !v.valid) {
            None => Ok(self),
            Some(i) => Err(MaserError::ValidityViolated(format!(
                "sample {i}: 2gτ_p√(n_eff+1) = {:.3} ≥ {VALIDITY_THRESHOLD}",
                self.validity[i].max_rabi_phase
            ))),
        }
    }
}

/// Inverts the small-angle law to `⟨Ñ⟩(t)` and fits `2|α|²(1 − e^{−Dt})`.
///
/// Validity violations are reported per sample, not raised.
pub fn extract_linewidth_shorttime(series: &ProtocolSeries, probe: &ProbeConfig) -> Result<ShortTimeFit> {
    let x = probe.g_tau_p;
    if (series.g_tau_p - x).abs() > 1e-15 {
        return Err(MaserError::InvalidParams(format!(
            "series was read out with gτ_p = {}, probe says {x}",
            series.g_tau_p
        )));
    }
    let times = series.times();
    let estimates: Vec<f64> = series.samples.iter().map(|s| s.p_g / (x * x) - 1.0).collect();
    let validity = series
        .samples
        .iter()
        .map(|s| shorttime_validity(&s.p_tilde, x))
        .collect();
    let fit = fit_saturating_exponential(&times, &estimates, 2.0 * probe.alpha.norm_sqr())?;
    Ok(ShortTimeFit {
        fit,
        mean_n_estimates: estimates,
        validity,
    })
}

/// Finite-count probe readout at one interrogation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSample {
    pub t: f64,
    pub excited_fraction: f64,
    /// Binomial standard error of the fraction (floored at one count).
    pub std_err: f64,
}

/// Simulates `atoms_per_point` probe atoms per interrogation time.
pub fn sample_detections<R: Rng + ?Sized>(
    series: &ProtocolSeries,
    atoms_per_point: u64,
    rng: &mut R,
) -> Result<Vec<DetectionSample>> {
    if atoms_per_point == 0 {
        return Err(MaserError::InvalidParams("atoms_per_point must be > 0".into()));
    }
    let n = atoms_per_point as f64;
    series
        .samples
        .iter()
        .map(|s| {
            let dist = Binomial::new(atoms_per_point, s.p_e.clamp(0.0, 1.0))
                .map_err(|e| MaserError::InvalidParams(e.to_string()))?;
            let k = dist.sample(rng) as f64;
            let f = k / n;
            let var = (f * (1.0 - f)).max(1.0 / n) / n;
            Ok(DetectionSample {
                t: s.t,
                excited_fraction: f,
                std_err: var.sqrt(),
            })
        })
        .collect()
}
