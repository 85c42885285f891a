//! Truncated Fock-space representation of the cavity field.
//!
//! All states live on the basis `|0⟩ … |n_max⟩`. Truncation is never silent:
//! every constructor that could push probability past `n_max` measures the
//! lost tail and fails with [`MaserError::CutoffTooSmall`] when it exceeds the
//! cutoff's tail tolerance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{MaserError, Result};

/// Default bound on the probability allowed to sit at (or leak past) `n_max`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
/// Default basis size for the canonical micromaser parameters (|α|² ≈ 9.4).
pub const DEFAULT_N_MAX: usize = 64;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
/// Diagonal entries in `[-CLAMP_TOL, 0)` are floating-point noise.
pub const CLAMP_TOL: f64 = 1e-12;
/// Diagonal entries below `-NEGATIVE_DIAGONAL_TOL` mean the state is broken.
pub const NEGATIVE_DIAGONAL_TOL: f64 = 1e-9;

/// Highest retained Fock occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockCutoff {
    n_max: usize,
    tail_tolerance: f64,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(MaserError::InvalidParams("n_max must be >= 1".into()));
        }
        Ok(FockCutoff {
            n_max,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Basis dimension, `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Fails if the population of the top retained level exceeds the tolerance.
    pub fn check_tail(&self, probabilities: &[f64], what: &str) -> Result<()> {
        let top = probabilities.last().copied().unwrap_or(0.0);
        if top > self.tail_tolerance {
            return Err(MaserError::CutoffTooSmall(format!(
                "{what}: population {top:.3e} at n_max = {} exceeds tolerance {:.1e}",
                self.n_max, self.tail_tolerance
            )));
        }
        Ok(())
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        FockCutoff {
            n_max: DEFAULT_N_MAX,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

/// A complex field amplitude such as α or the counter-field −α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexAmplitude(pub Complex64);

impl ComplexAmplitude {
    pub fn new(re: f64, im: f64) -> Self {
        ComplexAmplitude(Complex64::new(re, im))
    }

    pub fn real(re: f64) -> Self {
        ComplexAmplitude(Complex64::new(re, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }
}

impl std::ops::Neg for ComplexAmplitude {
    type Output = ComplexAmplitude;
    fn neg(self) -> Self {
        ComplexAmplitude(-self.0)
    }
}

/// Photon-number distribution `p_n` over the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStatistics(Vec<f64>);

impl PhotonStatistics {
    /// Wraps a probability vector, rejecting negative or non-normalised input.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(MaserError::InvalidState("empty photon statistics".into()));
        }
        if let Some((n, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -NEGATIVE_DIAGONAL_TOL)
        {
            return Err(MaserError::InvalidState(format!("p_{n} = {v:e}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(MaserError::InvalidState(format!(
                "photon statistics sum to {sum}"
            )));
        }
        Ok(PhotonStatistics(p.into_iter().map(|v| v.max(0.0)).collect()))
    }

    /// Poisson distribution of the given mean, truncated and renormalised.
    pub fn poisson(mean: f64, cutoff: FockCutoff) -> Self {
        let mut p = poisson_pmf(mean, cutoff.n_max());
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        PhotonStatistics(p)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Smallest occupation `n` whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> usize {
        let mut acc = 0.0;
        for (n, p) in self.0.iter().enumerate() {
            acc += p;
            if acc >= q {
                return n;
            }
        }
        self.0.len() - 1
    }

    /// Largest occupation with probability above `threshold`.
    pub fn support_max(&self, threshold: f64) -> usize {
        self.0.iter().rposition(|p| *p > threshold).unwrap_or(0)
    }

    pub fn max_abs_diff(&self, other: &PhotonStatistics) -> f64 {
        let n = self.len().max(other.len());
        (0..n)
            .map(|i| {
                let a = self.0.get(i).copied().unwrap_or(0.0);
                let b = other.0.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_n p_n w(n)` for a per-level weight.
    pub fn expectation(&self, w: impl Fn(usize) -> f64) -> f64 {
        self.0.iter().enumerate().map(|(n, p)| p * w(n)).sum()
    }
}

/// Untruncated Poisson pmf for `n = 0..=n_max`, evaluated in log space.
pub fn poisson_pmf(mean: f64, n_max: usize) -> Vec<f64> {
    if mean == 0.0 {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        return p;
    }
    let ln_mean = mean.ln();
    let mut lp = -mean;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(lp.exp());
    for n in 1..=n_max {
        lp += ln_mean - (n as f64).ln();
        out.push(lp.exp());
    }
    out
}

/// Poisson probability mass strictly above `n_max`.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut lp = -mean;
    for n in 1..=n_max {
        lp += ln_mean - (n as f64).ln();
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        lp += ln_mean - (n as f64).ln();
        let term = lp.exp();
        tail += term;
        if (n as f64) > mean && term < 1e-18 * tail.max(1e-300) {
            break;
        }
        if n > n_max + 100_000 {
            break;
        }
        n += 1;
    }
    tail
}

/// Pure field state: amplitude vector over the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
    cutoff: FockCutoff,
}

impl PureState {
    /// Builds a state from raw amplitudes; the vector must already be normalised.
    pub fn new(amplitudes: DVector<Complex64>, cutoff: FockCutoff) -> Result<Self> {
        if amplitudes.len() != cutoff.dim() {
            return Err(MaserError::InvalidState(format!(
                "amplitude vector has length {}, basis has {}",
                amplitudes.len(),
                cutoff.dim()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(MaserError::InvalidState(format!("norm² = {norm}")));
        }
        Ok(PureState { amplitudes, cutoff })
    }

    /// Builds a state from amplitudes of arbitrary nonzero norm.
    pub fn normalized(mut amplitudes: DVector<Complex64>, cutoff: FockCutoff) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(MaserError::InvalidState("zero-norm amplitude vector".into()));
        }
        amplitudes.unscale_mut(norm);
        PureState::new(amplitudes, cutoff)
    }

    pub fn fock(n: usize, cutoff: FockCutoff) -> Result<Self> {
        if n > cutoff.n_max() {
            return Err(MaserError::CutoffTooSmall(format!(
                "Fock state |{n}⟩ beyond n_max = {}",
                cutoff.n_max()
            )));
        }
        let mut c = DVector::zeros(cutoff.dim());
        c[n] = Complex64::new(1.0, 0.0);
        Ok(PureState {
            amplitudes: c,
            cutoff,
        })
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        PureState::fock(0, cutoff).expect("vacuum fits every cutoff")
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn photon_probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn mean_photon(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }

    /// `⟨â⟩ = Σ_n √(n+1) c_n* c_{n+1}`.
    pub fn field_amplitude(&self) -> Complex64 {
        let c = &self.amplitudes;
        (0..c.len() - 1)
            .map(|n| ((n + 1) as f64).sqrt() * c[n].conj() * c[n + 1])
            .sum()
    }

    pub fn to_density(&self) -> FieldState {
        let rho = &self.amplitudes * self.amplitudes.adjoint();
        FieldState {
            rho,
            cutoff: self.cutoff,
        }
    }
}

/// Density matrix `ρ_{n,m}` of the cavity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    rho: DMatrix<Complex64>,
    cutoff: FockCutoff,
}

impl FieldState {
    /// Validates Hermiticity, trace, and diagonal sign before accepting `rho`.
    pub fn new(rho: DMatrix<Complex64>, cutoff: FockCutoff) -> Result<Self> {
        let s = FieldState { rho, cutoff };
        s.validate()?;
        Ok(s)
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_parts_unchecked(rho: DMatrix<Complex64>, cutoff: FockCutoff) -> Self {
        FieldState { rho, cutoff }
    }

    pub fn fock(n: usize, cutoff: FockCutoff) -> Result<Self> {
        Ok(PureState::fock(n, cutoff)?.to_density())
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        PureState::vacuum(cutoff).to_density()
    }

    /// Diagonal (fully dephased) state with the given photon statistics.
    pub fn diagonal(p: &PhotonStatistics, cutoff: FockCutoff) -> Result<Self> {
        if p.len() != cutoff.dim() {
            return Err(MaserError::InvalidState(format!(
                "statistics length {} does not match basis dimension {}",
                p.len(),
                cutoff.dim()
            )));
        }
        let mut rho = DMatrix::zeros(cutoff.dim(), cutoff.dim());
        for (n, v) in p.probabilities().iter().enumerate() {
            rho[(n, n)] = Complex64::new(*v, 0.0);
        }
        Ok(FieldState { rho, cutoff })
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace_defect(&self) -> f64 {
        (self.trace() - Complex64::new(1.0, 0.0)).norm()
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.rho[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// The `k`-th superdiagonal `(ρ_{n,n+k})_n`.
    pub fn band(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim().saturating_sub(k))
            .map(|n| self.rho[(n, n + k)])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.nrows() != self.cutoff.dim() || self.rho.ncols() != self.cutoff.dim() {
            return Err(MaserError::InvalidState(format!(
                "density matrix is {}x{}, basis has {}",
                self.rho.nrows(),
                self.rho.ncols(),
                self.cutoff.dim()
            )));
        }
        let h = self.hermiticity_defect();
        if h > HERMITICITY_TOL {
            return Err(MaserError::InvalidState(format!(
                "hermiticity defect {h:e}"
            )));
        }
        let t = self.trace_defect();
        if t > TRACE_TOL {
            return Err(MaserError::InvalidState(format!("trace defect {t:e}")));
        }
        for n in 0..self.dim() {
            let d = self.rho[(n, n)];
            if d.re < -NEGATIVE_DIAGONAL_TOL || d.im.abs() > HERMITICITY_TOL {
                return Err(MaserError::InvalidState(format!("ρ_{{{n},{n}}} = {d}")));
            }
        }
        Ok(())
    }
}

/// Coherent state `|α⟩`, truncated at the cutoff and renormalised.
pub fn coherent_state(alpha: ComplexAmplitude, cutoff: FockCutoff) -> Result<PureState> {
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, cutoff.n_max());
    if tail > cutoff.tail_tolerance() {
        return Err(MaserError::CutoffTooSmall(format!(
            "coherent state |α|² = {mean:.4}: Poisson tail {tail:.3e} beyond n_max = {}",
            cutoff.n_max()
        )));
    }
    let a = alpha.value();
    let mut c = DVector::zeros(cutoff.dim());
    c[0] = Complex64::new((-mean / 2.0).exp(), 0.0);
    for n in 1..cutoff.dim() {
        c[n] = c[n - 1] * a / (n as f64).sqrt();
    }
    PureState::normalized(c, cutoff)
}

/// Matrix elements `⟨m|D̂(β)|n⟩` on the truncated basis.
///
/// Elements are those of the untruncated operator, from the closed form
/// `⟨n+k|D̂(β)|n⟩ = √(n!/(n+k)!) β^k e^{−|β|²/2} L_n^{(k)}(|β|²)` with the
/// Laguerre polynomials built by their (stable) recurrence in degree.
/// Columns whose displaced support reaches past the cutoff are therefore not
/// unitary; it is the caller's job to keep states inside.
pub fn displacement_matrix(beta: ComplexAmplitude, cutoff: FockCutoff) -> Result<DMatrix<Complex64>> {
    let dim = cutoff.dim();
    if beta.is_zero() {
        return Ok(DMatrix::identity(dim, dim));
    }
    let x = beta.norm_sqr();
    let tail = poisson_tail(x, cutoff.n_max());
    if tail > cutoff.tail_tolerance() {
        return Err(MaserError::CutoffTooSmall(format!(
            "displacement |β|² = {x:.4} does not fit below n_max = {} (vacuum column tail {tail:.3e})",
            cutoff.n_max()
        )));
    }
    let phase = beta.value() / x.sqrt();
    let mut ln_fact = vec![0.0; dim];
    for n in 1..dim {
        ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
    }
    let mut d = DMatrix::<Complex64>::zeros(dim, dim);
    let mut below = Complex64::new(1.0, 0.0);
    let above_step = -phase.conj();
    let mut above = Complex64::new(1.0, 0.0);
    for k in 0..dim {
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, 1.0);
        for n in 0..dim - k {
            if n > 0 {
                // L_n = ((2n − 1 + k − x) L_{n−1} − (n − 1 + k) L_{n−2}) / n
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0 + kf - x) * cur - (nf - 1.0 + kf) * prev) / nf;
                prev = cur;
                cur = next;
            }
            let mag = (0.5 * (ln_fact[n] - ln_fact[n + k]) + 0.5 * kf * x.ln() - 0.5 * x).exp() * cur;
            if !mag.is_finite() {
                return Err(MaserError::InvalidParams(format!(
                    "displacement element ({}, {n}) overflows for |β|² = {x:.1}",
                    n + k
                )));
            }
            d[(n + k, n)] = below * mag;
            d[(n, n + k)] = above * mag;
        }
        below *= phase;
        above *= above_step;
    }
    Ok(d)
}

/// A displacement operator prepared once and applied to many states.
#[derive(Debug, Clone)]
pub struct Displacement {
    beta: ComplexAmplitude,
    matrix: DMatrix<Complex64>,
    cutoff: FockCutoff,
}

impl Displacement {
    pub fn new(beta: ComplexAmplitude, cutoff: FockCutoff) -> Result<Self> {
        Ok(Displacement {
            beta,
            matrix: displacement_matrix(beta, cutoff)?,
            cutoff,
        })
    }

    pub fn beta(&self) -> ComplexAmplitude {
        self.beta
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `D̂(β) ρ D̂(β)†`, failing if the displaced state leaks past the cutoff.
    pub fn apply(&self, state: &FieldState) -> Result<FieldState> {
        if state.cutoff().dim() != self.cutoff.dim() {
            return Err(MaserError::InvalidState(
                "state and displacement use different cutoffs".into(),
            ));
        }
        state.validate()?;
        let d = &self.matrix;
        let mut out = d * state.rho() * d.adjoint();
        // exact Hermitian part; the product is Hermitian up to rounding
        let adj = out.adjoint();
        out += adj;
        out.unscale_mut(2.0);
        for n in 0..out.nrows() {
            out[(n, n)].im = 0.0;
        }
        let displaced = FieldState::from_parts_unchecked(out, self.cutoff);
        let defect = displaced.trace_defect();
        if defect > TRACE_TOL {
            return Err(MaserError::CutoffTooSmall(format!(
                "displaced state lost {defect:.3e} of its trace past n_max = {}",
                self.cutoff.n_max()
            )));
        }
        let diag: Vec<f64> = (0..displaced.dim()).map(|n| displaced.rho[(n, n)].re).collect();
        self.cutoff.check_tail(&diag, "displaced state")?;
        Ok(displaced)
    }
}

/// `D̂(β) ρ D̂(−β)`.
pub fn apply_displacement(state: &FieldState, beta: ComplexAmplitude) -> Result<FieldState> {
    if beta.is_zero() {
        state.validate()?;
        return Ok(state.clone());
    }
    Displacement::new(beta, state.cutoff())?.apply(state)
}

/// Diagonal of the density matrix as a probability vector.
pub fn photon_statistics(state: &FieldState) -> Result<PhotonStatistics> {
    let mut p = Vec::with_capacity(state.dim());
    for n in 0..state.dim() {
        let v = state.rho()[(n, n)].re;
        if v < -NEGATIVE_DIAGONAL_TOL {
            return Err(MaserError::InvalidState(format!(
                "negative population p_{n} = {v:e}"
            )));
        }
        if v < -CLAMP_TOL {
            log::debug!("clamping p_{n} = {v:e} to zero");
        }
        p.push(v.max(0.0));
    }
    PhotonStatistics::new(p)
}

/// Field expectation `⟨â⟩ = Tr[â ρ] = Σ_n √(n+1) ρ_{n+1,n}`.
///
/// Its real part equals `½ Σ_n √(n+1) ρ_{n,n+1} + c.c.`.
pub fn field_amplitude(state: &FieldState) -> Complex64 {
    let rho = state.rho();
    (0..state.dim() - 1)
        .map(|n| ((n + 1) as f64).sqrt() * rho[(n + 1, n)])
        .sum()
}

/// `⟨N̂⟩ = Σ_n n ρ_{n,n}`.
pub fn mean_photon(state: &FieldState) -> f64 {
    (0..state.dim())
        .map(|n| n as f64 * state.rho()[(n, n)].re)
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cutoff(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn cutoff_rejects_zero() {
        assert!(FockCutoff::new(0).is_err());
    }

    #[test]
    fn vacuum_coherent_state() {
        let s = coherent_state(ComplexAmplitude::real(0.0), cutoff(8)).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes().iter().skip(1).all(|c| c.norm() == 0.0));
    }

    #[test]
    fn coherent_vacuum_probability() {
        let s = coherent_state(ComplexAmplitude::real(1.0), cutoff(32)).unwrap();
        // e^{-1}
        assert_abs_diff_eq!(s.amplitudes()[0].norm_sqr(), 0.36787944117144233, epsilon = 1e-12);
    }

    #[test]
    fn coherent_mean_matches_alpha_squared() {
        let s = coherent_state(ComplexAmplitude::real(3.0654), cutoff(64)).unwrap();
        assert_abs_diff_eq!(s.mean_photon(), 3.0654f64 * 3.0654, epsilon = 1e-8);
    }

    #[test]
    fn coherent_state_too_large_for_cutoff() {
        let err = coherent_state(ComplexAmplitude::real(3.0654), cutoff(16)).unwrap_err();
        assert_eq!(err.category(), "cutoff-too-small");
    }

    #[test]
    fn zero_displacement_is_identity() {
        let d = displacement_matrix(ComplexAmplitude::real(0.0), cutoff(10)).unwrap();
        assert_eq!(d, DMatrix::identity(11, 11));
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let beta = ComplexAmplitude::new(0.8, -0.5);
        let c = cutoff(40);
        let d = displacement_matrix(beta, c).unwrap();
        let coh = coherent_state(beta, c).unwrap();
        for n in 0..=20 {
            assert!((d[(n, 0)] - coh.amplitudes()[n]).norm() < 1e-8);
        }
    }

    #[test]
    fn negative_displacement_is_adjoint() {
        let beta = ComplexAmplitude::new(1.1, 0.4);
        let c = cutoff(40);
        let d = displacement_matrix(beta, c).unwrap();
        let dm = displacement_matrix(-beta, c).unwrap();
        let diff = (&dm - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn displacement_inner_block_unitary() {
        let c = cutoff(64);
        let d = displacement_matrix(ComplexAmplitude::real(1.0), c).unwrap();
        let u = d.adjoint() * &d;
        for i in 0..=32 {
            for j in 0..=32 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((u[(i, j)] - Complex64::new(e, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn counter_field_returns_vacuum() {
        let alpha = ComplexAmplitude::real(3.0654);
        let c = cutoff(64);
        let rho = coherent_state(alpha, c).unwrap().to_density();
        let back = apply_displacement(&rho, -alpha).unwrap();
        let p = photon_statistics(&back).unwrap();
        assert!(p.probabilities()[0] > 1.0 - 1e-6);
    }

    #[test]
    fn zero_displacement_leaves_state() {
        let c = cutoff(12);
        let rho = coherent_state(ComplexAmplitude::real(1.0), c).unwrap().to_density();
        assert_eq!(apply_displacement(&rho, ComplexAmplitude::real(0.0)).unwrap(), rho);
    }

    #[test]
    fn small_state_matches_triple_product() {
        // 3x3 toy state embedded in a cutoff that leaves room for the small shift
        let c = cutoff(24);
        let mut rho = DMatrix::<Complex64>::zeros(25, 25);
        rho[(0, 0)] = Complex64::new(0.5, 0.0);
        rho[(1, 1)] = Complex64::new(0.3, 0.0);
        rho[(2, 2)] = Complex64::new(0.2, 0.0);
        rho[(0, 1)] = Complex64::new(0.1, 0.05);
        rho[(1, 0)] = Complex64::new(0.1, -0.05);
        rho[(1, 2)] = Complex64::new(-0.04, 0.02);
        rho[(2, 1)] = Complex64::new(-0.04, -0.02);
        let state = FieldState::new(rho.clone(), c).unwrap();
        let beta = ComplexAmplitude::new(0.3, 0.2);
        let d = displacement_matrix(beta, c).unwrap();
        let dm = displacement_matrix(-beta, c).unwrap();
        let shifted = apply_displacement(&state, beta).unwrap();
        for n in 0..25 {
            for m in 0..25 {
                let mut brute = Complex64::new(0.0, 0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        brute += d[(n, i)] * rho[(i, j)] * dm[(j, m)];
                    }
                }
                assert!((shifted.rho()[(n, m)] - brute).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn photon_statistics_of_simple_states() {
        let c = cutoff(6);
        let p = photon_statistics(&FieldState::vacuum(c)).unwrap();
        assert_eq!(p.probabilities()[0], 1.0);

        let mix = PhotonStatistics::new(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let s = FieldState::diagonal(&mix, c).unwrap();
        assert_eq!(photon_statistics(&s).unwrap(), mix);
    }

    #[test]
    fn photon_statistics_rejects_negative_population() {
        let c = cutoff(2);
        let mut rho = DMatrix::<Complex64>::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(1.0 + 1e-6, 0.0);
        rho[(1, 1)] = Complex64::new(-1e-6, 0.0);
        let s = FieldState::from_parts_unchecked(rho, c);
        assert!(matches!(photon_statistics(&s), Err(MaserError::InvalidState(_))));
    }

    #[test]
    fn photon_statistics_clamps_noise() {
        let c = cutoff(2);
        let mut rho = DMatrix::<Complex64>::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(1.0 + 1e-13, 0.0);
        rho[(1, 1)] = Complex64::new(-1e-13, 0.0);
        let s = FieldState::new(rho, c).unwrap();
        assert_eq!(photon_statistics(&s).unwrap().probabilities()[1], 0.0);
    }

    #[test]
    fn field_amplitude_cases() {
        let c = cutoff(40);
        assert_eq!(field_amplitude(&FieldState::vacuum(c)), Complex64::new(0.0, 0.0));
        assert_eq!(field_amplitude(&FieldState::fock(5, c).unwrap()).norm(), 0.0);
        let rho = coherent_state(ComplexAmplitude::real(2.0), c).unwrap().to_density();
        assert_abs_diff_eq!(field_amplitude(&rho).re, 2.0, epsilon = 1e-9);
        let z = ComplexAmplitude::new(1.0, 0.7);
        let rho = coherent_state(z, c).unwrap().to_density();
        assert!((field_amplitude(&rho) - z.value()).norm() < 1e-9);
    }

    #[test]
    fn mean_photon_cases() {
        let c = cutoff(64);
        assert_eq!(mean_photon(&FieldState::vacuum(c)), 0.0);
        assert_eq!(mean_photon(&FieldState::fock(5, c).unwrap()), 5.0);
        let rho = coherent_state(ComplexAmplitude::real(3.0654), c).unwrap().to_density();
        assert_abs_diff_eq!(mean_photon(&rho), 9.39667716, epsilon = 1e-6);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let c = cutoff(2);
        let mut rho = DMatrix::<Complex64>::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        rho[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(FieldState::new(rho.clone(), c).is_err());
        rho[(0, 1)] = Complex64::new(0.0, 0.0);
        rho[(0, 0)] = Complex64::new(0.9, 0.0);
        assert!(FieldState::new(rho, c).is_err());
    }
}
