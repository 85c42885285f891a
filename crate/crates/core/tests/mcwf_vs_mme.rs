use micromaser::fock::{coherent_state, ComplexAmplitude, FockCutoff, PureState};
use micromaser::mcwf::{run_ensemble, EnsembleEstimate, TrajectoryConfig};
use micromaser::mme::{evolve_sampled, EvolveOptions, MicromaserParams};

fn ensemble(initial: &PureState, m: usize, dt: f64, t_end: f64, seed: u64) -> EnsembleEstimate {
    run_ensemble(
        initial,
        &MicromaserParams::canonical(),
        &TrajectoryConfig {
            master_seed: seed,
            n_trajectories: m,
            dt,
            t_end,
            sample_times: vec![0.0, t_end],
        },
    )
    .unwrap()
}

fn mme_mean_photon(initial: &PureState, t_end: f64) -> (f64, Vec<f64>) {
    let ev = evolve_sampled(
        &initial.to_density(),
        &MicromaserParams::canonical(),
        &[0.0, t_end],
        EvolveOptions::default(),
    )
    .unwrap();
    let p = ev.record.photon_stats.unwrap().pop().unwrap();
    (p.mean(), p.probabilities().to_vec())
}

#[test]
fn standard_error_shrinks_as_inverse_root_m() {
    let cutoff = FockCutoff::new(48).unwrap();
    let initial = coherent_state(ComplexAmplitude::real(3.0654), cutoff).unwrap();
    let small = ensemble(&initial, 250, 1e-3, 2.0, 11);
    let large = ensemble(&initial, 1000, 1e-3, 2.0, 12);
    let ratio = small.mean_photon_se[1] / large.mean_photon_se[1];
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "SE ratio {ratio}");
}

#[test]
fn step_refinement_stays_on_master_equation() {
    let cutoff = FockCutoff::new(48).unwrap();
    let initial = coherent_state(ComplexAmplitude::real(3.0654), cutoff).unwrap();
    let (want, _) = mme_mean_photon(&initial, 3.0);
    for (i, dt) in [4e-3, 2e-3, 1e-3].into_iter().enumerate() {
        let est = ensemble(&initial, 800, dt, 3.0, 100 + i as u64);
        let z = (est.mean_photon[1] - want).abs() / est.mean_photon_se[1];
        assert!(z < 3.0, "dt = {dt}: ⟨n⟩ {} vs {want} ({z:.2} SE)", est.mean_photon[1]);
    }
}

#[test]
fn fock_start_matches_master_equation_statistics() {
    let cutoff = FockCutoff::new(48).unwrap();
    let initial = PureState::fock(3, cutoff).unwrap();
    let (_, p_ref) = mme_mean_photon(&initial, 5.0);
    let est = ensemble(&initial, 1000, 1e-3, 5.0, 5);
    for (n, want) in p_ref.iter().enumerate().filter(|(_, p)| **p >= 0.01) {
        let z = (est.photon_stats[1][n] - want).abs() / est.photon_stats_se[1][n];
        assert!(z < 3.5, "p_{n}: {} vs {want} ({z:.2} SE)", est.photon_stats[1][n]);
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let cutoff = FockCutoff::new(32).unwrap();
    let initial = coherent_state(ComplexAmplitude::real(2.0), cutoff).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble(&initial, 64, 1e-3, 1.0, 9))
    };
    assert_eq!(run(1), run(3));
}
