//! Scenario orchestration and file output for the `maser` binary.
//!
//! Every subcommand computes all of its results first and only then writes
//! `series.csv`, `photon_stats.csv` and `summary.txt`, so a failed run leaves
//! no partial output behind. Numbers are printed with a fixed format, making
//! the files byte-identical across runs with the same configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::config::ScenarioConfig;
use crate::error::{MaserError, Result};
use crate::fit::fit_offset_exponential_weighted;
use crate::fock::{coherent_state, ComplexAmplitude, FockCutoff, PhotonStatistics};
use crate::mcwf::{run_ensemble, trajectory_rng, TrajectoryConfig};
use crate::mme::{
    eigen_decay_rate, evolve_sampled, fit_field_decay, matched_alpha, pump_excited_prob,
    steady_state, EvolveOptions,
};
use crate::protocol::{
    default_fit_start, extract_linewidth_late_time, extract_linewidth_shorttime, fit_constants,
    run_protocol, sample_detections, shorttime_ground_prob, ProbeConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Late-time horizon of the `probe` grid, in units of 1/D.
const PROBE_HORIZON: f64 = 8.0;
/// Horizon of the `diffuse` and `shorttime` grids, in units of 1/D.
const DIFFUSION_HORIZON: f64 = 3.0;
/// Alternative fit starts (in units of 1/D) reported for the late-time fit.
const FIT_START_SCAN: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
/// Relative standard error below which an ensemble sample counts as deterministic.
const RESOLVED_SE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Steady,
    Diffuse,
    Probe,
    Shorttime,
    Mcwf,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Steady,
        Subcommand::Diffuse,
        Subcommand::Probe,
        Subcommand::Shorttime,
        Subcommand::Mcwf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Steady => "steady",
            Subcommand::Diffuse => "diffuse",
            Subcommand::Probe => "probe",
            Subcommand::Shorttime => "shorttime",
            Subcommand::Mcwf => "mcwf",
        }
    }
}

impl FromStr for Subcommand {
    type Err = MaserError;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MaserError::Config(vec![format!("unknown subcommand {s:?}")]))
    }
}

/// A CSV table with a header row of `name [unit]` columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values of the column whose header starts with `name`.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self
            .columns
            .iter()
            .position(|c| c.split(' ').next() == Some(name))?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

/// Everything a subcommand produced, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub subcommand: Subcommand,
    pub series: Table,
    pub photon_stats: Table,
    pub summary: Vec<(String, String)>,
}

impl ScenarioOutput {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn int(n: usize) -> String {
    n.to_string()
}

struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }

    fn num(&mut self, k: &str, v: f64) {
        self.put(k, num(v));
    }
}

/// Times `0, h, 2h, …` up to and including `t_end` (within rounding).
pub fn time_grid(t_end: f64, spacing: f64) -> Vec<f64> {
    let n = (t_end / spacing + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * spacing).collect()
}

fn resolve_alpha(cfg: &ScenarioConfig, cutoff: FockCutoff) -> Result<ComplexAmplitude> {
    match cfg.alpha {
        Some(a) => Ok(ComplexAmplitude::real(a)),
        None => matched_alpha(&cfg.params, cutoff),
    }
}

fn stats_columns(table: &mut Table, dists: &[&[f64]]) {
    let len = dists.iter().map(|d| d.len()).max().unwrap_or(0);
    for n in 0..len {
        let mut row = vec![int(n)];
        row.extend(dists.iter().map(|d| num(d.get(n).copied().unwrap_or(0.0))));
        table.push(row);
    }
}

/// Runs one subcommand and collects its output tables.
pub fn run_scenario(cmd: Subcommand, cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let cutoff = cfg.cutoff()?;
    log::info!("{}: n_max = {}", cmd.name(), cfg.n_max);
    let mut summary = Summary(Vec::new());
    summary.put("version", VERSION);
    summary.put("subcommand", cmd.name());
    summary.put("seed", cfg.seed);
    summary.put("n_max", cfg.n_max);
    let (series, photon_stats) = match cmd {
        Subcommand::Steady => steady(cfg, cutoff, &mut summary)?,
        Subcommand::Diffuse => diffuse(cfg, cutoff, &mut summary)?,
        Subcommand::Probe => probe(cfg, cutoff, &mut summary)?,
        Subcommand::Shorttime => shorttime(cfg, cutoff, &mut summary)?,
        Subcommand::Mcwf => mcwf(cfg, cutoff, &mut summary)?,
    };
    summary.put("defaulted_keys", cfg.defaulted.join(","));
    summary.put("status", "ok");
    Ok(ScenarioOutput {
        subcommand: cmd,
        series,
        photon_stats,
        summary: summary.0,
    })
}

fn steady(cfg: &ScenarioConfig, cutoff: FockCutoff, s: &mut Summary) -> Result<(Table, Table)> {
    let ss = steady_state(&cfg.params, cutoff)?;
    let alpha = resolve_alpha(cfg, cutoff)?;
    let initial = coherent_state(alpha, cutoff)?;
    let p0 = initial.photon_probabilities();
    let mean = ss.mean();
    let var = ss.expectation(|n| (n as f64 - mean).powi(2));
    s.num("alpha", alpha.value().re);
    s.num("mean_n_steady", mean);
    s.num("fano_factor_steady", var / mean);
    s.num("pump_p_e_steady", pump_excited_prob(&ss, cfg.params.g_tau));
    s.num("top_level_population", ss.probabilities()[cfg.n_max]);

    // density matrices of the initial coherent state and the steady state
    let support = ss.support_max(1e-8).max(PhotonStatistics::new(p0.clone())?.support_max(1e-8));
    let rho0 = initial.to_density();
    let mut series = Table::new(&[
        "n [photons]",
        "m [photons]",
        "rho_initial_re [dimensionless]",
        "rho_initial_im [dimensionless]",
        "rho_steady [dimensionless]",
    ]);
    for n in 0..=support {
        for m in 0..=support {
            let z = rho0.rho()[(n, m)];
            let d = if n == m { ss.probabilities()[n] } else { 0.0 };
            series.push(vec![int(n), int(m), num(z.re), num(z.im), num(d)]);
        }
    }
    let mut stats = Table::new(&["n [photons]", "p_steady [probability]", "p_coherent [probability]"]);
    stats_columns(&mut stats, &[ss.probabilities(), &p0]);
    Ok((series, stats))
}

fn diffuse(cfg: &ScenarioConfig, cutoff: FockCutoff, s: &mut Summary) -> Result<(Table, Table)> {
    let eig = eigen_decay_rate(&cfg.params, cutoff)?;
    let alpha = resolve_alpha(cfg, cutoff)?;
    let initial = coherent_state(alpha, cutoff)?.to_density();
    let fit = fit_field_decay(&initial, &cfg.params, eig.rate, EvolveOptions::default())?;
    let t_end = cfg.t_end.unwrap_or(DIFFUSION_HORIZON / eig.rate);
    let times = time_grid(t_end, cfg.sample_spacing);
    let ev = evolve_sampled(&initial, &cfg.params, &times, EvolveOptions::default())?;
    let rec = &ev.record;
    let stats = rec.photon_stats.as_ref().expect("evolution records statistics");
    let p0 = &stats[0];
    let pump0 = pump_excited_prob(p0, cfg.params.g_tau);
    let re_a0 = rec.re_a[0];

    let mut series = Table::new(&[
        "t [1/gamma]",
        "re_a [dimensionless]",
        "re_a_fit [dimensionless]",
        "mean_n [photons]",
        "stats_drift [probability]",
        "pump_p_e [probability]",
    ]);
    let (mut max_drift, mut max_pump) = (0.0f64, 0.0f64);
    for (i, &t) in rec.times.iter().enumerate() {
        let drift = stats[i].max_abs_diff(p0);
        let pump = pump_excited_prob(&stats[i], cfg.params.g_tau);
        max_drift = max_drift.max(drift);
        max_pump = max_pump.max((pump - pump0).abs());
        series.push(vec![
            num(t),
            num(rec.re_a[i]),
            num(re_a0 * (-fit.rate * t).exp()),
            num(stats[i].mean()),
            num(drift),
            num(pump),
        ]);
    }
    s.num("alpha", alpha.value().re);
    s.num("d_fit", fit.rate);
    s.num("d_eigen", eig.rate);
    s.num("d_fit_vs_eigen_rel", fit.rate / eig.rate - 1.0);
    s.num("eigen_gap_ratio", eig.gap_ratio);
    s.num("rms_log_residual", fit.rms_log_residual);
    s.num("fit_window_end", fit.window_end);
    s.put("fit_points", fit.n_points);
    s.num("t_end", t_end);
    s.num("max_stats_drift", max_drift);
    s.num("max_pump_p_e_drift", max_pump);

    let last = stats.last().expect("non-empty grid");
    let ss = steady_state(&cfg.params, cutoff)?;
    let mut table = Table::new(&[
        "n [photons]",
        "p_initial [probability]",
        "p_final [probability]",
        "p_steady [probability]",
    ]);
    stats_columns(&mut table, &[p0.probabilities(), last.probabilities(), ss.probabilities()]);
    Ok((series, table))
}

fn probe(cfg: &ScenarioConfig, cutoff: FockCutoff, s: &mut Summary) -> Result<(Table, Table)> {
    let eig = eigen_decay_rate(&cfg.params, cutoff)?;
    let alpha = resolve_alpha(cfg, cutoff)?;
    let x = cfg.probe_g_tau_p.unwrap_or(cfg.params.g_tau);
    let t_end = cfg.t_end.unwrap_or(PROBE_HORIZON / eig.rate);
    let probe = ProbeConfig::new(x, time_grid(t_end, cfg.sample_spacing), alpha)?;
    let series = run_protocol(&cfg.params, &probe, cutoff)?;
    let fit_start = match cfg.fit_start {
        Some(t) => t,
        None => default_fit_start(&cfg.params, cutoff)?,
    };
    let fit = extract_linewidth_late_time(&series, fit_start)?;
    let initial = coherent_state(alpha, cutoff)?.to_density();
    let closed = fit_constants(&cfg.params, &probe, &initial, cutoff)?;
    let i_min = series.argmin_p_e();

    s.num("alpha", alpha.value().re);
    s.num("g_tau_p", x);
    s.num("d_fit", fit.d);
    s.num("k_fit", fit.k);
    s.num("asymptote_fit", fit.c);
    s.num("rms_residual", fit.rms_residual);
    s.put("fit_points", fit.n_points);
    s.put("fit_iterations", fit.iterations);
    s.num("fit_start", fit_start);
    s.num("t_end", t_end);
    s.num("d_eigen", eig.rate);
    s.num("k_closed_form", closed.k);
    s.num("asymptote_closed_form", closed.p_inf);
    s.num("k_rel_diff", fit.k / closed.k - 1.0);
    s.num("asymptote_rel_diff", fit.c / closed.p_inf - 1.0);
    s.num("t_min", series.samples[i_min].t);
    s.num("p_e_min", series.samples[i_min].p_e);
    for f in FIT_START_SCAN {
        let key = format!("d_fit_start_{f}_over_d");
        match extract_linewidth_late_time(&series, f / eig.rate) {
            Ok(alt) => s.num(&key, alt.d),
            Err(e) => s.put(&key, format!("failed ({})", e.category())),
        }
    }

    let mut columns = vec![
        "t [1/gamma]",
        "p_e [probability]",
        "p_g [probability]",
        "mean_n_shifted [photons]",
        "pump_p_e [probability]",
        "re_a [dimensionless]",
        "p_e_fit [probability]",
    ];
    let detections = if cfg.detection_atoms > 0 {
        columns.extend(["detected_p_e [probability]", "detected_p_e_se [probability]"]);
        let mut rng = trajectory_rng(cfg.seed, 0);
        let d = sample_detections(&series, cfg.detection_atoms, &mut rng)?;
        let (t, y, sig): (Vec<f64>, Vec<f64>, Vec<f64>) = d
            .iter()
            .filter(|x| x.t >= fit_start)
            .fold((vec![], vec![], vec![]), |mut acc, x| {
                acc.0.push(x.t);
                acc.1.push(x.excited_fraction);
                acc.2.push(x.std_err);
                acc
            });
        let wfit = fit_offset_exponential_weighted(&t, &y, Some(&sig), None)?;
        s.put("detection_atoms", cfg.detection_atoms);
        s.num("d_fit_detected", wfit.d);
        s.num("k_fit_detected", wfit.k);
        s.num("asymptote_fit_detected", wfit.c);
        Some(d)
    } else {
        None
    };
    let mut table = Table::new(&columns);
    for (i, x) in series.samples.iter().enumerate() {
        let mut row = vec![
            num(x.t),
            num(x.p_e),
            num(x.p_g),
            num(x.mean_n),
            num(x.pump_p_e),
            num(x.re_a),
            num(fit.eval(x.t)),
        ];
        if let Some(d) = &detections {
            row.extend([num(d[i].excited_fraction), num(d[i].std_err)]);
        }
        table.push(row);
    }

    let first = &series.samples[0];
    let last = series.samples.last().expect("non-empty grid");
    let mut stats = Table::new(&[
        "n [photons]",
        "p_shifted_initial [probability]",
        "p_shifted_final [probability]",
        "p_field_initial [probability]",
        "p_field_final [probability]",
    ]);
    stats_columns(
        &mut stats,
        &[
            first.p_tilde.probabilities(),
            last.p_tilde.probabilities(),
            first.p_field.probabilities(),
            last.p_field.probabilities(),
        ],
    );
    Ok((table, stats))
}

fn shorttime(cfg: &ScenarioConfig, cutoff: FockCutoff, s: &mut Summary) -> Result<(Table, Table)> {
    let eig = eigen_decay_rate(&cfg.params, cutoff)?;
    let alpha = resolve_alpha(cfg, cutoff)?;
    let x = cfg.shorttime_g_tau_p;
    let t_end = cfg.t_end.unwrap_or(DIFFUSION_HORIZON / eig.rate);
    let probe = ProbeConfig::new(x, time_grid(t_end, cfg.sample_spacing), alpha)?;
    let series = run_protocol(&cfg.params, &probe, cutoff)?;
    let st = extract_linewidth_shorttime(&series, &probe)?;
    let flagged = st.validity.iter().filter(|v| !v.valid).count();
    if flagged > 0 {
        log::warn!("shorttime: {flagged} samples outside the small-angle validity window");
    }

    let mut table = Table::new(&[
        "t [1/gamma]",
        "p_g [probability]",
        "mean_n_estimate [photons]",
        "mean_n_shifted [photons]",
        "p_g_small_angle [probability]",
        "small_angle_rel_dev [dimensionless]",
        "mean_n_fit [photons]",
        "rabi_phase_max [rad]",
        "valid [bool]",
    ]);
    let mut max_dev = 0.0f64;
    for (i, x_s) in series.samples.iter().enumerate() {
        let approx = shorttime_ground_prob(x_s.mean_n, x);
        let dev = approx / x_s.p_g - 1.0;
        max_dev = max_dev.max(dev.abs());
        let v = &st.validity[i];
        table.push(vec![
            num(x_s.t),
            num(x_s.p_g),
            num(st.mean_n_estimates[i]),
            num(x_s.mean_n),
            num(approx),
            num(dev),
            num(st.fit.eval(x_s.t)),
            num(v.max_rabi_phase),
            int(v.valid as usize),
        ]);
    }
    s.num("alpha", alpha.value().re);
    s.num("g_tau_p", x);
    s.num("d_fit", st.fit.d);
    s.num("amplitude", 2.0 * alpha.norm_sqr());
    s.num("rms_residual", st.fit.rms_residual);
    s.put("fit_points", st.fit.n_points);
    s.num("d_eigen", eig.rate);
    s.num("d_fit_vs_eigen_rel", st.fit.d / eig.rate - 1.0);
    s.num("t_end", t_end);
    s.num("max_small_angle_rel_dev", max_dev);
    s.put("validity_all_ok", st.all_valid());
    s.put("validity_flagged_samples", flagged);
    s.num(
        "max_rabi_phase",
        st.validity.iter().map(|v| v.max_rabi_phase).fold(0.0, f64::max),
    );

    let last = series.samples.last().expect("non-empty grid");
    let mut stats = Table::new(&[
        "n [photons]",
        "p_shifted_initial [probability]",
        "p_shifted_final [probability]",
    ]);
    stats_columns(
        &mut stats,
        &[series.samples[0].p_tilde.probabilities(), last.p_tilde.probabilities()],
    );
    Ok((table, stats))
}

fn mcwf(cfg: &ScenarioConfig, cutoff: FockCutoff, s: &mut Summary) -> Result<(Table, Table)> {
    let alpha = resolve_alpha(cfg, cutoff)?;
    let initial = coherent_state(alpha, cutoff)?;
    let times = time_grid(cfg.mcwf_t_end, cfg.sample_spacing);
    let tc = TrajectoryConfig {
        master_seed: cfg.seed,
        n_trajectories: cfg.mcwf_trajectories,
        dt: cfg.mcwf_dt,
        t_end: *times.last().expect("non-empty grid"),
        sample_times: times.clone(),
    };
    let est = run_ensemble(&initial, &cfg.params, &tc)?;
    let reference = evolve_sampled(&initial.to_density(), &cfg.params, &times, EvolveOptions::default())?;
    let ref_stats = reference.record.photon_stats.as_ref().expect("evolution records statistics");

    let mut table = Table::new(&[
        "t [1/gamma]",
        "mean_n [photons]",
        "mean_n_se [photons]",
        "re_a [dimensionless]",
        "re_a_se [dimensionless]",
        "mme_mean_n [photons]",
        "mme_re_a [dimensionless]",
    ]);
    let mut max_z = 0.0f64;
    for (i, &t) in times.iter().enumerate() {
        let mme_n = ref_stats[i].mean();
        // deterministic samples (t = 0, no pump) have no spread to compare against
        if est.mean_photon_se[i] > RESOLVED_SE * mme_n.max(1.0) {
            max_z = max_z.max((est.mean_photon[i] - mme_n).abs() / est.mean_photon_se[i]);
        }
        table.push(vec![
            num(t),
            num(est.mean_photon[i]),
            num(est.mean_photon_se[i]),
            num(est.re_a[i]),
            num(est.re_a_se[i]),
            num(mme_n),
            num(reference.record.re_a[i]),
        ]);
    }
    let k = times.len() - 1;
    let (p, p_se, p_ref) = (&est.photon_stats[k], &est.photon_stats_se[k], ref_stats[k].probabilities());
    // levels rarer than one trajectory in M cannot be resolved by the ensemble
    let resolvable: Vec<usize> = (0..p.len())
        .filter(|&n| p_ref[n] * est.n_trajectories as f64 >= 10.0 && p_se[n] > 0.0)
        .collect();
    let max_p_z = resolvable
        .iter()
        .map(|&n| (p[n] - p_ref[n]).abs() / p_se[n])
        .fold(0.0, f64::max);
    s.num("alpha", alpha.value().re);
    s.put("n_trajectories", est.n_trajectories);
    s.num("dt", cfg.mcwf_dt);
    s.num("t_end", tc.t_end);
    s.num("final_mean_n", est.mean_photon[k]);
    s.num("final_mean_n_se", est.mean_photon_se[k]);
    s.num("final_mme_mean_n", ref_stats[k].mean());
    s.num("max_mean_n_z", max_z);
    s.put("final_resolved_levels", resolvable.len());
    s.num("final_max_p_n_z", max_p_z);

    let mut stats = Table::new(&[
        "n [photons]",
        "p_mcwf [probability]",
        "p_mcwf_se [probability]",
        "p_mme [probability]",
    ]);
    stats_columns(&mut stats, &[p, p_se, p_ref]);
    Ok((table, stats))
}

fn metadata(cmd: Subcommand, cfg: &ScenarioConfig) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "# micromaser {VERSION}");
    let _ = writeln!(m, "# subcommand = {}", cmd.name());
    for (k, v) in cfg.entries() {
        let _ = writeln!(m, "# {k} = {v}");
    }
    let _ = writeln!(m, "# defaulted_keys = {}", cfg.defaulted.join(","));
    m
}

fn render_csv(meta: &str, t: &Table) -> String {
    let mut out = String::from(meta);
    out.push_str(&t.columns.join(","));
    out.push('\n');
    for r in &t.rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, cfg: &ScenarioConfig, out: &ScenarioOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = metadata(out.subcommand, cfg);
    fs::write(dir.join("series.csv"), render_csv(&meta, &out.series))?;
    fs::write(dir.join("photon_stats.csv"), render_csv(&meta, &out.photon_stats))?;
    let mut summary = String::new();
    for (k, v) in &out.summary {
        let _ = writeln!(summary, "{k} = {v}");
    }
    fs::write(dir.join("summary.txt"), summary)?;
    log::info!("wrote outputs to {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn grid_includes_end() {
        assert_eq!(time_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(time_grid(0.9, 0.25).len(), 4);
    }

    #[test]
    fn subcommand_names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(c.name().parse::<Subcommand>().unwrap(), c);
        }
        assert!("fig4".parse::<Subcommand>().is_err());
    }

    #[test]
    fn steady_outputs() {
        let cfg = validate_config("n_max = 64\n").unwrap();
        let out = run_scenario(Subcommand::Steady, &cfg).unwrap();
        let mean: f64 = out.summary_value("mean_n_steady").unwrap().parse().unwrap();
        assert!((mean - 9.41).abs() < 0.01, "{mean}");
        assert_eq!(out.photon_stats.rows.len(), 65);
    }

    #[test]
    fn mcwf_outputs_are_reproducible() {
        let cfg = validate_config("mcwf_trajectories = 8\nmcwf_t_end = 0.5\nn_max = 40\n").unwrap();
        let a = run_scenario(Subcommand::Mcwf, &cfg).unwrap();
        let b = run_scenario(Subcommand::Mcwf, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series.rows.len(), 2);
    }
}
