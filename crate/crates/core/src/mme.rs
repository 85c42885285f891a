//! Micromaser master equation.
//!
//! The equation couples `ρ_{n,m}` only to `ρ_{n±1,m±1}`, so each offset
//! `k = m − n` is an independent tridiagonal linear system. Everything here
//! works band by band and reconstructs the density matrix on demand.
//!
//! Rates are in units of the cavity linewidth γ and times are `γt`.
//!
//! Truncation closure: the top level `n_max` behaves as if pump atoms leave it
//! unchanged and thermal absorption out of it is blocked. Below the top level
//! the generator matches [`coefficients`] exactly; at the top the closure keeps
//! the population band trace-preserving.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{MaserError, Result};
use crate::fock::{
    coherent_state, field_amplitude, photon_statistics, ComplexAmplitude, FieldState, FockCutoff,
    PhotonStatistics, TRACE_TOL,
};

/// Dimensionless micromaser parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicromaserParams {
    /// Pump interaction phase gτ.
    pub g_tau: f64,
    /// Coupling in units of the cavity linewidth, g/γ.
    pub g_over_gamma: f64,
    /// Pump rate r/γ.
    pub r_over_gamma: f64,
    /// Mean thermal photon number n̄_b.
    pub nbar: f64,
}

impl MicromaserParams {
    pub fn new(g_tau: f64, g_over_gamma: f64, r_over_gamma: f64, nbar: f64) -> Result<Self> {
        let p = MicromaserParams {
            g_tau,
            g_over_gamma,
            r_over_gamma,
            nbar,
        };
        p.validate()?;
        Ok(p)
    }

    /// Near-threshold operating point: gτ = 0.494, g/γ = 12.3, r/γ = 10, n̄_b = 0.03.
    pub fn canonical() -> Self {
        MicromaserParams {
            g_tau: 0.494,
            g_over_gamma: 12.3,
            r_over_gamma: 10.0,
            nbar: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.g_tau > 0.0 && self.g_tau.is_finite()) {
            errs.push(format!("g_tau must be > 0 (got {})", self.g_tau));
        }
        if !(self.g_over_gamma > 0.0 && self.g_over_gamma.is_finite()) {
            errs.push(format!("g_over_gamma must be > 0 (got {})", self.g_over_gamma));
        }
        if !(self.r_over_gamma >= 0.0 && self.r_over_gamma.is_finite()) {
            errs.push(format!("r_over_gamma must be ≥ 0 (got {})", self.r_over_gamma));
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            errs.push(format!("nbar must be ≥ 0 (got {})", self.nbar));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(MaserError::InvalidParams(errs.join("; ")))
        }
    }

    /// Atom transit time in units of 1/γ, τγ = gτ / (g/γ).
    pub fn transit_time(&self) -> f64 {
        self.g_tau / self.g_over_gamma
    }
}

/// `(A_{n,m}, B_{n,m}, C_{n,m})` in units of γ, for the untruncated equation.
pub fn coefficients(params: &MicromaserParams, n: usize, m: usize) -> (f64, f64, f64) {
    let (nf, mf) = (n as f64, m as f64);
    let gt = params.g_tau;
    let r = params.r_over_gamma;
    let nb = params.nbar;
    let a = r * (gt * nf.sqrt()).sin() * (gt * mf.sqrt()).sin() + nb * (nf * mf).sqrt();
    let b = -r * (1.0 - (gt * (nf + 1.0).sqrt()).cos() * (gt * (mf + 1.0).sqrt()).cos())
        - 0.5 * (nb + 1.0) * (nf + mf)
        - 0.5 * nb * (nf + mf + 2.0);
    let c = (nb + 1.0) * ((nf + 1.0) * (mf + 1.0)).sqrt();
    (a, b, c)
}

/// Diagonal coefficient with the top-level closure applied.
fn closed_diagonal(params: &MicromaserParams, n: usize, m: usize, n_max: usize) -> f64 {
    let gt = params.g_tau;
    let nb = params.nbar;
    let stay = |j: usize| {
        if j < n_max {
            (gt * ((j + 1) as f64).sqrt()).cos()
        } else {
            1.0
        }
    };
    let absorb = |j: usize| if j < n_max { (j + 1) as f64 } else { 0.0 };
    -params.r_over_gamma * (1.0 - stay(n) * stay(m))
        - 0.5 * (nb + 1.0) * (n + m) as f64
        - 0.5 * nb * (absorb(n) + absorb(m))
}

/// Tridiagonal generator for the band `(ρ_{n,n+k})_n`.
///
/// `d/dt x_n = sub[n] x_{n−1} + diag[n] x_n + sup[n] x_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandGenerator {
    k: usize,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl BandGenerator {
    pub fn offset(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// `out = G x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let l = self.len();
        for n in 0..l {
            let mut acc = self.diag[n] * x[n];
            if n > 0 {
                acc += self.sub[n] * x[n - 1];
            }
            if n + 1 < l {
                acc += self.sup[n] * x[n + 1];
            }
            out[n] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let l = self.len();
        let mut g = DMatrix::zeros(l, l);
        for n in 0..l {
            g[(n, n)] = self.diag[n];
            if n > 0 {
                g[(n, n - 1)] = self.sub[n];
            }
            if n + 1 < l {
                g[(n, n + 1)] = self.sup[n];
            }
        }
        g
    }

    /// Column sums of the dense generator; zero for the population band.
    pub fn column_sums(&self) -> Vec<f64> {
        let l = self.len();
        (0..l)
            .map(|j| {
                let mut s = self.diag[j];
                if j + 1 < l {
                    s += self.sub[j + 1];
                }
                if j > 0 {
                    s += self.sup[j - 1];
                }
                s
            })
            .collect()
    }

    /// Eigenvalues of the dense generator.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.to_dense().complex_eigenvalues().iter().copied().collect()
    }
}

pub fn build_band_generator(
    params: &MicromaserParams,
    k: usize,
    cutoff: FockCutoff,
) -> Result<BandGenerator> {
    let n_max = cutoff.n_max();
    if k > n_max {
        return Err(MaserError::InvalidParams(format!(
            "band offset {k} exceeds n_max = {n_max}"
        )));
    }
    let l = n_max + 1 - k;
    let mut sub = vec![0.0; l];
    let mut diag = vec![0.0; l];
    let mut sup = vec![0.0; l];
    for n in 0..l {
        let m = n + k;
        let (a, _, c) = coefficients(params, n, m);
        diag[n] = closed_diagonal(params, n, m, n_max);
        if n > 0 {
            sub[n] = a;
        }
        if n + 1 < l {
            sup[n] = c;
        }
    }
    Ok(BandGenerator { k, sub, diag, sup })
}

/// Time integrator used per band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta with a fixed step in γt.
    Rk4 { step: f64 },
    /// Dense matrix exponential per band; exact jumps between samples.
    Exponential,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4 { step: 1e-3 }
    }
}

/// Which coherence bands are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSelection {
    /// Offsets `0..=k_max`; higher coherences are dropped (set to zero).
    UpTo(usize),
    Full,
}

impl Default for BandSelection {
    fn default() -> Self {
        BandSelection::UpTo(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    pub integrator: Integrator,
    pub bands: BandSelection,
}

impl EvolveOptions {
    pub fn full_band() -> Self {
        EvolveOptions {
            integrator: Integrator::Exponential,
            bands: BandSelection::Full,
        }
    }
}

/// Relative local-error bound for the RK4 step-doubling check.
const RK4_LOCAL_TOL: f64 = 1e-9;

struct BandState {
    gen: BandGenerator,
    x: Vec<Complex64>,
    propagator: Option<(f64, DMatrix<f64>)>,
}

impl BandState {
    fn rk4_step(&self, x: &[Complex64], h: f64, out: &mut [Complex64], scratch: &mut [Vec<Complex64>; 5]) {
        let l = x.len();
        let [k1, k2, k3, k4, tmp] = scratch;
        self.gen.apply(x, k1);
        for i in 0..l {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.gen.apply(tmp, k2);
        for i in 0..l {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.gen.apply(tmp, k3);
        for i in 0..l {
            tmp[i] = x[i] + h * k3[i];
        }
        self.gen.apply(tmp, k4);
        for i in 0..l {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn advance(&mut self, dt: f64, integrator: Integrator) -> Result<()> {
        if dt <= 0.0 {
            return Ok(());
        }
        match integrator {
            Integrator::Exponential => {
                let reuse = matches!(&self.propagator, Some((h, _)) if *h == dt);
                if !reuse {
                    let e = (self.gen.to_dense() * dt).exp();
                    self.propagator = Some((dt, e));
                }
                let e = &self.propagator.as_ref().expect("set above").1;
                let l = self.x.len();
                let mut out = vec![Complex64::new(0.0, 0.0); l];
                for i in 0..l {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..l {
                        acc += e[(i, j)] * self.x[j];
                    }
                    out[i] = acc;
                }
                self.x = out;
            }
            Integrator::Rk4 { step } => {
                if !(step > 0.0) {
                    return Err(MaserError::StepSizeFailure(format!("step {step} must be > 0")));
                }
                let n_steps = (dt / step).ceil().max(1.0) as usize;
                let h = dt / n_steps as f64;
                let l = self.x.len();
                let zero = Complex64::new(0.0, 0.0);
                let mut scratch: [Vec<Complex64>; 5] = std::array::from_fn(|_| vec![zero; l]);
                let mut next = vec![zero; l];

                // step doubling on the first step of each interval
                let mut half = vec![zero; l];
                let mut two_half = vec![zero; l];
                self.rk4_step(&self.x, h, &mut next, &mut scratch);
                self.rk4_step(&self.x, 0.5 * h, &mut half, &mut scratch);
                self.rk4_step(&half, 0.5 * h, &mut two_half, &mut scratch);
                let scale = self.x.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
                let err = next
                    .iter()
                    .zip(&two_half)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    / 15.0;
                if err > RK4_LOCAL_TOL * scale {
                    return Err(MaserError::StepSizeFailure(format!(
                        "band k = {}: local error estimate {err:.3e} exceeds {:.1e} at step {h:e}",
                        self.gen.offset(),
                        RK4_LOCAL_TOL * scale
                    )));
                }
                std::mem::swap(&mut self.x, &mut next);
                for _ in 1..n_steps {
                    self.rk4_step(&self.x, h, &mut next, &mut scratch);
                    std::mem::swap(&mut self.x, &mut next);
                }
            }
        }
        Ok(())
    }
}

/// Band-by-band propagator of the master equation.
pub struct MmePropagator {
    cutoff: FockCutoff,
    options: EvolveOptions,
    bands: Vec<BandState>,
    time: f64,
}

impl MmePropagator {
    pub fn new(initial: &FieldState, params: &MicromaserParams, options: EvolveOptions) -> Result<Self> {
        params.validate()?;
        initial.validate()?;
        let cutoff = initial.cutoff();
        let k_top = match options.bands {
            BandSelection::Full => cutoff.n_max(),
            BandSelection::UpTo(k) => k.min(cutoff.n_max()),
        };
        let bands = (0..=k_top)
            .map(|k| {
                Ok(BandState {
                    gen: build_band_generator(params, k, cutoff)?,
                    x: initial.band(k),
                    propagator: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MmePropagator {
            cutoff,
            options,
            bands,
            time: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Advances every band by `dt`; bands run concurrently.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if dt < 0.0 {
            return Err(MaserError::InvalidParams(format!("negative time step {dt}")));
        }
        let integrator = self.options.integrator;
        self.bands
            .par_iter_mut()
            .map(|b| b.advance(dt, integrator))
            .collect::<Result<Vec<()>>>()?;
        self.time += dt;
        Ok(())
    }

    pub fn populations(&self) -> Vec<f64> {
        self.bands[0].x.iter().map(|z| z.re).collect()
    }

    /// `Re⟨â⟩` from the first coherence band alone.
    pub fn re_field_amplitude(&self) -> f64 {
        match self.bands.get(1) {
            None => 0.0,
            // ⟨â⟩ = Σ √(n+1) ρ_{n+1,n} = Σ √(n+1) conj(ρ_{n,n+1})
            Some(b) => b
                .x
                .iter()
                .enumerate()
                .map(|(n, z)| ((n + 1) as f64).sqrt() * z.re)
                .sum(),
        }
    }

    /// Reconstructs the density matrix from the propagated bands.
    pub fn state(&self) -> FieldState {
        let dim = self.cutoff.dim();
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for b in &self.bands {
            let k = b.gen.offset();
            for (n, z) in b.x.iter().enumerate() {
                if k == 0 {
                    rho[(n, n)] = Complex64::new(z.re, 0.0);
                } else {
                    rho[(n, n + k)] = *z;
                    rho[(n + k, n)] = z.conj();
                }
            }
        }
        FieldState::from_parts_unchecked(rho, self.cutoff)
    }

    /// Fails if trace drifted or population reached the top level.
    pub fn check_health(&self) -> Result<()> {
        let p = self.populations();
        let tr: f64 = p.iter().sum();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(MaserError::StepSizeFailure(format!(
                "trace drifted to {tr} at γt = {}",
                self.time
            )));
        }
        self.cutoff
            .check_tail(&p, &format!("evolved state at γt = {:.3}", self.time))
    }
}

/// Sampled output of a diffusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRecord {
    pub times: Vec<f64>,
    pub re_a: Vec<f64>,
    pub photon_stats: Option<Vec<PhotonStatistics>>,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub record: DiffusionRecord,
    pub final_state: FieldState,
}

/// Evolves `state` to `γt = t_end`, sampling `n_samples` equally spaced times
/// (including both endpoints).
pub fn evolve(
    state: &FieldState,
    params: &MicromaserParams,
    t_end: f64,
    n_samples: usize,
    options: EvolveOptions,
) -> Result<Evolution> {
    if t_end < 0.0 || !t_end.is_finite() {
        return Err(MaserError::InvalidParams(format!("t_end = {t_end} must be ≥ 0")));
    }
    let times: Vec<f64> = if t_end == 0.0 || n_samples < 2 {
        vec![0.0]
    } else {
        (0..n_samples)
            .map(|i| t_end * i as f64 / (n_samples - 1) as f64)
            .collect()
    };
    evolve_sampled(state, params, &times, options)
}

/// Evolves and samples at the given strictly increasing times starting at 0.
pub fn evolve_sampled(
    state: &FieldState,
    params: &MicromaserParams,
    times: &[f64],
    options: EvolveOptions,
) -> Result<Evolution> {
    if times.first() != Some(&0.0) {
        return Err(MaserError::InvalidParams("sample times must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MaserError::InvalidParams("sample times must be strictly increasing".into()));
    }
    if times.len() == 1 {
        let stats = photon_statistics(state)?;
        return Ok(Evolution {
            record: DiffusionRecord {
                times: times.to_vec(),
                re_a: vec![field_amplitude(state).re],
                photon_stats: Some(vec![stats]),
            },
            final_state: state.clone(),
        });
    }
    let mut prop = MmePropagator::new(state, params, options)?;
    let mut re_a = Vec::with_capacity(times.len());
    let mut stats = Vec::with_capacity(times.len());
    let mut last = 0.0;
    for &t in times {
        prop.advance(t - last)?;
        last = t;
        prop.check_health()?;
        re_a.push(prop.re_field_amplitude());
        stats.push(PhotonStatistics::new(prop.populations())?);
    }
    log::debug!("evolved to γt = {last} over {} samples", times.len());
    Ok(Evolution {
        record: DiffusionRecord {
            times: times.to_vec(),
            re_a,
            photon_stats: Some(stats),
        },
        final_state: prop.state(),
    })
}

/// Relative singular-value threshold below which a direction counts as null.
const NULL_TOL: f64 = 1e-10;

/// Stationary photon statistics: the normalised null vector of the population band.
pub fn steady_state(params: &MicromaserParams, cutoff: FockCutoff) -> Result<PhotonStatistics> {
    params.validate()?;
    let g = build_band_generator(params, 0, cutoff)?.to_dense();
    let svd = g.svd(false, true);
    let sv = &svd.singular_values;
    let scale = sv.max();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (i0, i1) = (order[0], order[1]);
    if sv[i0] > NULL_TOL * scale {
        return Err(MaserError::DegenerateNullspace(format!(
            "smallest singular value {:.3e} is not null (scale {scale:.3e})",
            sv[i0]
        )));
    }
    if sv[i1] <= NULL_TOL * scale {
        return Err(MaserError::DegenerateNullspace(format!(
            "null space is at least two-dimensional (σ₂ = {:.3e})",
            sv[i1]
        )));
    }
    let v_t = svd.v_t.expect("requested V^T");
    let v: Vec<f64> = v_t.row(i0).iter().copied().collect();
    let sum: f64 = v.iter().sum();
    let p: Vec<f64> = v.iter().map(|x| (x / sum).max(0.0)).collect();
    let s: f64 = p.iter().sum();
    let p: Vec<f64> = p.into_iter().map(|x| x / s).collect();
    cutoff.check_tail(&p, "steady state")?;
    PhotonStatistics::new(p)
}

/// Real positive α whose coherent state has the steady-state mean photon number.
pub fn matched_alpha(params: &MicromaserParams, cutoff: FockCutoff) -> Result<ComplexAmplitude> {
    let p = steady_state(params, cutoff)?;
    Ok(alpha_for_statistics(&p))
}

pub fn alpha_for_statistics(p: &PhotonStatistics) -> ComplexAmplitude {
    ComplexAmplitude::real(p.mean().max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMethod {
    /// Exponential fit of the simulated `Re⟨â⟩(t)`.
    Fit,
    /// Slowest eigenvalue of the first coherence band.
    Eigen,
}

/// Eigenvalues of band `k`, ordered from slowest to fastest decay.
pub fn band_spectrum(params: &MicromaserParams, k: usize, cutoff: FockCutoff) -> Result<Vec<Complex64>> {
    let mut ev = build_band_generator(params, k, cutoff)?.eigenvalues();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(ev)
}

/// Slowest coherence decay rate of the `k = 1` band, plus the gap to the next mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRate {
    pub rate: f64,
    /// Second-slowest rate divided by the slowest one.
    pub gap_ratio: f64,
}

pub fn eigen_decay_rate(params: &MicromaserParams, cutoff: FockCutoff) -> Result<EigenRate> {
    params.validate()?;
    let ev = band_spectrum(params, 1, cutoff)?;
    let rate = -ev[0].re;
    if !(rate > 0.0) {
        return Err(MaserError::FitFailure(format!(
            "slowest coherence eigenvalue {} is not decaying",
            ev[0]
        )));
    }
    let gap_ratio = ev.get(1).map(|z| -z.re / rate).unwrap_or(f64::INFINITY);
    Ok(EigenRate { rate, gap_ratio })
}

/// Result of fitting `Re⟨â⟩(t) = Re⟨â⟩(0) e^{−Dt}`.
#[derive(Debug, Clone)]
pub struct FieldDecayFit {
    pub rate: f64,
    /// RMS of `ln(Re⟨â⟩(t)/Re⟨â⟩(0)) + Dt` over the window.
    pub rms_log_residual: f64,
    /// Last γt used in the fit.
    pub window_end: f64,
    pub n_points: usize,
    pub record: DiffusionRecord,
}

/// Signal level (relative to `t = 0`) that ends the fit window.
pub const FIT_WINDOW_FLOOR: f64 = 1e-3;
/// Sample spacing in γt for the field-decay fit.
pub const FIT_SAMPLE_SPACING: f64 = 0.25;

/// Evolves `initial` and fits a single exponential to `Re⟨â⟩(t)`.
///
/// The window starts at 0 and ends where the signal first falls below
/// [`FIT_WINDOW_FLOOR`] of its initial value. `rate_guess` sets the horizon.
pub fn fit_field_decay(
    initial: &FieldState,
    params: &MicromaserParams,
    rate_guess: f64,
    options: EvolveOptions,
) -> Result<FieldDecayFit> {
    let y0 = field_amplitude(initial).re;
    if y0.abs() < 1e-12 {
        return Err(MaserError::FitFailure("initial Re⟨â⟩ vanishes".into()));
    }
    if !(rate_guess > 0.0) {
        return Err(MaserError::FitFailure(format!("rate guess {rate_guess} must be > 0")));
    }
    let horizon = 1.3 * (1.0 / FIT_WINDOW_FLOOR).ln() / rate_guess;
    let n = (horizon / FIT_SAMPLE_SPACING).ceil() as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * FIT_SAMPLE_SPACING).collect();
    let ev = evolve_sampled(initial, params, &times, options)?;
    let rec = ev.record;
    let end = rec
        .re_a
        .iter()
        .position(|y| y.abs() < FIT_WINDOW_FLOOR * y0.abs() || y.signum() != y0.signum())
        .ok_or_else(|| {
            MaserError::FitFailure(format!(
                "Re⟨â⟩ did not fall below {FIT_WINDOW_FLOOR} of its initial value by γt = {horizon:.1}"
            ))
        })?;
    if end < 3 {
        return Err(MaserError::FitFailure("fit window has fewer than 3 points".into()));
    }
    let ts = &rec.times[..end];
    let logs: Vec<f64> = rec.re_a[..end].iter().map(|y| (y / y0).ln()).collect();
    // least squares through the origin: ln(y/y0) = −D t
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let sty: f64 = ts.iter().zip(&logs).map(|(t, l)| t * l).sum();
    let rate = -sty / stt;
    let rms = (ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| (l + rate * t).powi(2))
        .sum::<f64>()
        / end as f64)
        .sqrt();
    if !(rate > 0.0) {
        return Err(MaserError::FitFailure(format!("fitted rate {rate} is not positive")));
    }
    Ok(FieldDecayFit {
        rate,
        rms_log_residual: rms,
        window_end: ts[end - 1],
        n_points: end,
        record: rec,
    })
}

/// Phase diffusion rate D/γ.
pub fn coherence_decay_rate(
    params: &MicromaserParams,
    cutoff: FockCutoff,
    method: DecayMethod,
) -> Result<f64> {
    let eig = eigen_decay_rate(params, cutoff)?;
    match method {
        DecayMethod::Eigen => Ok(eig.rate),
        DecayMethod::Fit => {
            let alpha = matched_alpha(params, cutoff)?;
            let initial = coherent_state(alpha, cutoff)?.to_density();
            Ok(fit_field_decay(&initial, params, eig.rate, EvolveOptions::default())?.rate)
        }
    }
}

/// `Σ_n p_n cos²(φ √(n+1))`: probability an excited atom leaves still excited.
pub fn jc_excited_probability(p: &PhotonStatistics, phase: f64) -> f64 {
    p.expectation(|n| (phase * ((n + 1) as f64).sqrt()).cos().powi(2))
}

/// Excited-state exit probability of a pump atom.
pub fn pump_excited_prob(p: &PhotonStatistics, g_tau: f64) -> f64 {
    jc_excited_probability(p, g_tau)
}
