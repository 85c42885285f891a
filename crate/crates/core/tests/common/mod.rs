#![allow(dead_code)]

use micromaser::mme::MicromaserParams;

/// Steady state from the balance between neighbouring levels,
/// `p_n (n̄+1) n = p_{n−1} [r sin²(gτ√n) + n̄ n]`.
pub fn detailed_balance(params: &MicromaserParams, n_max: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for n in 1..=n_max {
        let nf = n as f64;
        let up = params.r_over_gamma * (params.g_tau * nf.sqrt()).sin().powi(2) + params.nbar * nf;
        let down = (params.nbar + 1.0) * nf;
        p.push(p[n - 1] * up / down);
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
