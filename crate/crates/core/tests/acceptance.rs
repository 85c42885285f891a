//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use micromaser::fock::{coherent_state, ComplexAmplitude, FockCutoff};
use micromaser::mcwf::{run_ensemble, TrajectoryConfig};
use micromaser::mme::{
    coherence_decay_rate, eigen_decay_rate, evolve_sampled, fit_field_decay, matched_alpha,
    pump_excited_prob, steady_state, DecayMethod, EvolveOptions, MicromaserParams, MmePropagator,
};
use micromaser::protocol::{
    backshifted_mean_photon, extract_linewidth_late_time, extract_linewidth_shorttime,
    fit_constants, run_protocol, shorttime_ground_prob, shorttime_validity, ProbeConfig,
    ProtocolSeries, FIT_START_FACTOR,
};
use micromaser::runner::time_grid;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

/// Cutoff for decay-rate runs.
const N_MAX: usize = 64;
/// Cutoff for runs that displace the late, phase-diffused field.
const N_MAX_PROTOCOL: usize = 80;
const SPACING: f64 = 0.5;

struct Check {
    what: String,
    ok: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
    /// Context printed under the checks; does not affect the verdict.
    notes: Vec<String>,
}

impl Criterion {
    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push(Check { what: what.into(), ok });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn cutoff(n: usize) -> FockCutoff {
    FockCutoff::new(n).unwrap()
}

/// Results shared between criteria.
struct Context {
    params: MicromaserParams,
    alpha: ComplexAmplitude,
    d_eigen: f64,
    d_fit: f64,
    /// Protocol run with the probe phase equal to the pump phase.
    protocol: ProtocolSeries,
    protocol_secs: f64,
}

fn criterion_1(ctx: &mut Option<Context>) -> Criterion {
    let mut c = Criterion::default();
    let params = MicromaserParams::canonical();
    let start = Instant::now();
    let cut = cutoff(N_MAX);
    let alpha = matched_alpha(&params, cut).unwrap();
    let eig = eigen_decay_rate(&params, cut).unwrap();
    let initial = coherent_state(alpha, cut).unwrap().to_density();
    let fit = fit_field_decay(&initial, &params, eig.rate, EvolveOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.check(
        (fit.rate / 0.049 - 1.0).abs() <= 0.10,
        format!("D/γ = {:.5} (target 0.049 ± 10%)", fit.rate),
    );
    c.check(
        fit.rms_log_residual < 0.01,
        format!(
            "RMS log-residual {:.2e} over γt ∈ [0, {:.1}] (< 1%)",
            fit.rms_log_residual, fit.window_end
        ),
    );
    c.check(secs < 60.0, format!("runtime {secs:.2} s at n_max = {N_MAX} (< 60 s)"));

    let start = Instant::now();
    let probe = ProbeConfig::new(
        params.g_tau,
        time_grid(8.0 / eig.rate, SPACING),
        alpha,
    )
    .unwrap();
    let protocol = run_protocol(&params, &probe, cutoff(N_MAX_PROTOCOL)).unwrap();
    *ctx = Some(Context {
        params,
        alpha,
        d_eigen: eig.rate,
        d_fit: fit.rate,
        protocol,
        protocol_secs: start.elapsed().as_secs_f64(),
    });
    c
}

fn criterion_2(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let s = &ctx.protocol;
    let i_min = s.argmin_p_e();
    let last = s.samples.len() - 1;
    c.check(
        i_min > 0 && i_min < last,
        format!(
            "interior minimum p̃_e = {:.4} at γt = {:.1}",
            s.samples[i_min].p_e, s.samples[i_min].t
        ),
    );
    let fit_start = FIT_START_FACTOR / ctx.d_eigen;
    let tail_monotone = s
        .samples
        .windows(2)
        .filter(|w| w[0].t >= fit_start)
        .all(|w| w[1].p_e >= w[0].p_e);
    let fit = extract_linewidth_late_time(s, fit_start).unwrap();
    c.check(
        tail_monotone && fit.rms_residual < 1e-3,
        format!(
            "monotone exponential approach after γt = {fit_start:.1}, RMS residual {:.1e}",
            fit.rms_residual
        ),
    );
    c.check(
        (fit.d / 0.047 - 1.0).abs() <= 0.10,
        format!("D/γ = {:.5} (target 0.047 ± 10%)", fit.d),
    );
    c.check(
        (fit.k + 0.283).abs() <= 0.02,
        format!("K = {:.4} (target −0.283 ± 0.02)", fit.k),
    );
    c.check(
        (fit.c - 0.551).abs() <= 0.01,
        format!("asymptote = {:.4} (target 0.551 ± 0.01)", fit.c),
    );
    let secs = ctx.protocol_secs + start.elapsed().as_secs_f64();
    c.check(secs < 300.0, format!("runtime {secs:.2} s at n_max = {N_MAX_PROTOCOL} (< 5 min)"));
    c
}

fn criterion_3(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();
    let cut = cutoff(N_MAX_PROTOCOL);
    let fit = extract_linewidth_late_time(&ctx.protocol, FIT_START_FACTOR / ctx.d_eigen).unwrap();
    let probe = ProbeConfig::new(ctx.params.g_tau, vec![0.0], ctx.alpha).unwrap();
    let initial = coherent_state(ctx.alpha, cut).unwrap().to_density();
    let closed = fit_constants(&ctx.params, &probe, &initial, cut).unwrap();
    let dk = fit.k / closed.k - 1.0;
    let dc = fit.c / closed.p_inf - 1.0;
    c.check(
        dk.abs() < 0.05,
        format!("K closed form {:.4} vs fit {:.4} ({:+.2}%)", closed.k, fit.k, 100.0 * dk),
    );
    c.check(
        dc.abs() < 0.05,
        format!(
            "asymptote closed form {:.5} vs fit {:.5} ({:+.3}%)",
            closed.p_inf,
            fit.c,
            100.0 * dc
        ),
    );
    c
}

fn criterion_4(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();
    let horizon = 3.0 / ctx.d_fit;
    let mut worst = (0.0f64, 0.0);
    for s in ctx.protocol.samples.iter().filter(|s| s.t > 0.0 && s.t <= horizon) {
        let law = backshifted_mean_photon(ctx.alpha, ctx.d_fit, s.t);
        let dev = s.mean_n / law - 1.0;
        if dev.abs() > worst.0.abs() {
            worst = (dev, s.t);
        }
    }
    c.check(
        worst.0.abs() < 0.05,
        format!(
            "⟨Ñ⟩ vs 2|α|²(1 − e^(−Dt)) worst {:+.2}% at γt = {:.1} over (0, {horizon:.1}]",
            100.0 * worst.0,
            worst.1
        ),
    );

    let times: Vec<f64> = time_grid(horizon, SPACING);
    let probe = ProbeConfig::new(0.1, times, ctx.alpha).unwrap();
    let series = window(&ctx.protocol, horizon).with_probe_phase(0.1);
    let st = extract_linewidth_shorttime(&series, &probe).unwrap();
    let early = series.samples.iter().filter(|s| s.t < 1.0 / ctx.d_fit).count();
    let dev = st.fit.d / ctx.d_fit - 1.0;
    c.check(
        dev.abs() <= 0.10 && early > 0,
        format!(
            "short-time D/γ = {:.5} at gτ_p = 0.1 vs {:.5} ({:+.1}%, {early} samples before 1/D)",
            st.fit.d,
            ctx.d_fit,
            100.0 * dev
        ),
    );
    let late = extract_linewidth_late_time(&ctx.protocol, FIT_START_FACTOR / ctx.d_eigen).unwrap();
    c.note(format!(
        "short-time vs late-time D: {:+.1}% (15% expected agreement)",
        100.0 * (st.fit.d / late.d - 1.0)
    ));
    for f in [0.25, 0.5, 1.0] {
        let sub = window(&series, f / ctx.d_fit);
        let probe = ProbeConfig::new(0.1, sub.times(), ctx.alpha).unwrap();
        if let Ok(w) = extract_linewidth_shorttime(&sub, &probe) {
            c.note(format!(
                "short-time fit over γt ≤ {f}/D: D/γ = {:.5} ({:+.1}%)",
                w.fit.d,
                100.0 * (w.fit.d / ctx.d_fit - 1.0)
            ));
        }
    }
    let amp = 2.0 * ctx.alpha.norm_sqr();
    c.check(
        (amp / 18.79 - 1.0).abs() < 0.02,
        format!("fitted asymptote 2|α|² = {amp:.3} (18.79 ± 2%)"),
    );
    c
}

/// Samples of `s` with `t ≤ horizon`.
fn window(s: &ProtocolSeries, horizon: f64) -> ProtocolSeries {
    ProtocolSeries {
        samples: s.samples.iter().filter(|x| x.t <= horizon).cloned().collect(),
        ..s.clone()
    }
}

fn criterion_5(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();
    let series = window(&ctx.protocol, 3.0 / ctx.d_fit);
    for x in [0.05, 0.1, 0.15] {
        let s = series.with_probe_phase(x);
        let worst = s
            .samples
            .iter()
            .map(|p| (shorttime_ground_prob(p.mean_n, x) / p.p_g - 1.0).abs())
            .fold(0.0, f64::max);
        c.check(
            worst < 0.05,
            format!("gτ_p = {x}: small-angle law deviates by up to {:.1}%", 100.0 * worst),
        );
    }
    let flagged = |x: f64| {
        series
            .samples
            .iter()
            .filter(|p| !shorttime_validity(&p.p_tilde, x).valid)
            .count()
    };
    let n = series.samples.len();
    for x in [0.1, 0.15] {
        c.note(format!("checker flags gτ_p = {x} at {}/{n} samples", flagged(x)));
    }
    c.check(
        flagged(0.3) == n,
        format!("checker rejects gτ_p = 0.3 at {}/{n} samples", flagged(0.3)),
    );
    c
}

fn criterion_6(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();

    // null space against the detailed-balance recursion over random parameters
    let mut runner = TestRunner::new(Config {
        cases: 32,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let n_max = 100;
    let outcome = runner.run(
        &(0.1f64..1.6, 1.0f64..25.0, 0.0f64..0.5),
        |(g_tau, r, nbar)| {
            let p = MicromaserParams::new(g_tau, 12.3, r, nbar).unwrap();
            let ss = match steady_state(&p, cutoff(n_max)) {
                Ok(s) => s,
                Err(_) => return Err(TestCaseError::reject("tail above cutoff")),
            };
            let err = common::max_abs_diff(ss.probabilities(), &common::detailed_balance(&p, n_max));
            worst.set(worst.get().max(err));
            prop_assert!(err < 1e-10, "{err:e} at {:?}", (g_tau, r, nbar));
            Ok(())
        },
    );
    c.check(
        outcome.is_ok(),
        format!(
            "steady state vs detailed balance: worst {:.1e} over 32 random cases (< 1e-10)",
            worst.get()
        ),
    );

    let rel = ctx.d_fit / ctx.d_eigen - 1.0;
    c.check(
        rel.abs() < 0.02,
        format!("fitted D {:.5} vs eigenvalue D {:.5} ({:+.2}%)", ctx.d_fit, ctx.d_eigen, 100.0 * rel),
    );

    let decay = MicromaserParams::new(0.494, 12.3, 0.0, 0.0).unwrap();
    let cut = cutoff(N_MAX);
    let initial = coherent_state(ComplexAmplitude::real(3.0654), cut).unwrap().to_density();
    let d_pure = fit_field_decay(&initial, &decay, 0.5, EvolveOptions::default()).unwrap().rate;
    let d_pure_eig = coherence_decay_rate(&decay, cut, DecayMethod::Eigen).unwrap();
    c.check(
        (d_pure / 0.5 - 1.0).abs() < 0.005 && (d_pure_eig / 0.5 - 1.0).abs() < 0.005,
        format!("pure decay D/γ = {d_pure:.6} (fit), {d_pure_eig:.6} (eigen), target 0.5 ± 0.5%"),
    );

    // trajectories against the master equation
    let start = Instant::now();
    let t_end = 20.0;
    let pure = coherent_state(ctx.alpha, cut).unwrap();
    let est = run_ensemble(
        &pure,
        &ctx.params,
        &TrajectoryConfig {
            master_seed: 2024,
            n_trajectories: 2000,
            dt: 1e-3,
            t_end,
            sample_times: vec![0.0, t_end],
        },
    )
    .unwrap();
    let reference = evolve_sampled(&pure.to_density(), &ctx.params, &[0.0, t_end], EvolveOptions::default())
        .unwrap();
    let p_ref = reference.record.photon_stats.unwrap()[1].clone();
    let (p, se) = (&est.photon_stats[1], &est.photon_stats_se[1]);
    let levels: Vec<usize> = (0..p.len()).filter(|&n| p_ref.probabilities()[n] >= 0.01).collect();
    let z_max = levels
        .iter()
        .map(|&n| (p[n] - p_ref.probabilities()[n]).abs() / se[n])
        .fold(0.0, f64::max);
    let z_mean = (est.mean_photon[1] - p_ref.mean()).abs() / est.mean_photon_se[1];
    c.check(
        z_max < 3.0 && z_mean < 3.0,
        format!(
            "MCWF (M = 2000) vs MME at γt = {t_end}: max {z_max:.2} SE over {} levels, ⟨n⟩ off by {z_mean:.2} SE ({:.1} s)",
            levels.len(),
            start.elapsed().as_secs_f64()
        ),
    );

    let mut prop = MmePropagator::new(&initial_for(ctx), &ctx.params, EvolveOptions::full_band()).unwrap();
    let (mut trace, mut herm) = (0.0f64, 0.0f64);
    for _ in 0..40 {
        prop.advance(5.0).unwrap();
        let s = prop.state();
        trace = trace.max(s.trace_defect());
        herm = herm.max(s.hermiticity_defect());
    }
    for s in &ctx.protocol.samples {
        trace = trace.max((s.p_tilde.probabilities().iter().sum::<f64>() - 1.0).abs());
    }
    c.check(
        trace < 1e-9 && herm < 1e-12,
        format!("trace defect {trace:.1e}, Hermiticity defect {herm:.1e} up to γt = 200"),
    );
    c
}

fn initial_for(ctx: &Context) -> micromaser::fock::FieldState {
    coherent_state(ctx.alpha, cutoff(N_MAX)).unwrap().to_density()
}

fn criterion_7(ctx: &Context) -> Criterion {
    let mut c = Criterion::default();
    let times = time_grid(3.0 / ctx.d_fit, SPACING);
    let ev = evolve_sampled(&initial_for(ctx), &ctx.params, &times, EvolveOptions::default()).unwrap();
    let stats = ev.record.photon_stats.unwrap();
    let drift = stats.iter().map(|s| s.max_abs_diff(&stats[0])).fold(0.0, f64::max);
    let pump: Vec<f64> = stats.iter().map(|s| pump_excited_prob(s, ctx.params.g_tau)).collect();
    let pump_drift = pump.iter().map(|p| (p - pump[0]).abs()).fold(0.0, f64::max);
    c.check(
        drift < 0.02,
        format!("max_n |p_n(t) − p_n(0)| = {drift:.4} over γt ∈ [0, {:.1}] (< 0.02)", times[times.len() - 1]),
    );
    c.check(
        pump_drift < 1e-3,
        format!(
            "pump-atom excited probability drifts by {pump_drift:.2e} from {:.5} (< 1e-3)",
            pump[0]
        ),
    );
    c
}

fn run_cli(cmd: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_maser"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--seed", "7"])
        .env("MASER_LOG", "off")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::default();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.conf");
    std::fs::write(
        &config,
        "mcwf_trajectories = 64\nmcwf_t_end = 2\ndetection_atoms = 500\n",
    )
    .unwrap();
    for cmd in ["mcwf", "probe"] {
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        let ran = run_cli(cmd, &config, &a) && run_cli(cmd, &config, &b);
        let same = ran
            && ["series.csv", "photon_stats.csv", "summary.txt"].iter().all(|f| {
                std::fs::read(a.join(f)).ok() == std::fs::read(b.join(f)).ok()
            });
        c.check(same, format!("`{cmd}` with --seed 7 twice: outputs byte-identical"));
    }
    c
}

fn main() -> ExitCode {
    let mut ctx = None;
    let mut results: Vec<(u8, &str, Criterion)> = Vec::new();
    results.push((1, "field decay rate", criterion_1(&mut ctx)));
    let ctx = ctx.expect("criterion 1 prepares the shared runs");
    results.push((2, "probe protocol late-time fit", criterion_2(&ctx)));
    results.push((3, "closed-form fit constants", criterion_3(&ctx)));
    results.push((4, "back-shifted photon number law", criterion_4(&ctx)));
    results.push((5, "small-angle validity window", criterion_5(&ctx)));
    results.push((6, "oracle equivalences", criterion_6(&ctx)));
    results.push((7, "frozen statistics and pump blindness", criterion_7(&ctx)));
    results.push((8, "determinism", criterion_8()));

    let mut report = String::new();
    let mut failed = 0;
    for (id, name, crit) in &results {
        let verdict = if crit.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!crit.passed());
        let _ = writeln!(report, "{verdict} criterion {id}: {name}");
        for ch in &crit.checks {
            let _ = writeln!(report, "    [{}] {}", if ch.ok { "ok" } else { "x" }, ch.what);
        }
        for n in &crit.notes {
            let _ = writeln!(report, "    [i] {n}");
        }
    }
    print!("{report}");
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
