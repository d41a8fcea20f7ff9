use brach_core::lattice::*;
use brach_core::ode::OdeConfig;
use brach_core::oracles::three_qubit_optimal;
use brach_core::propagator::{basis_state, fidelity, norm, propagate_schrodinger, propagate_schrodinger_with, transfer_fidelity};
use brach_core::qbe::crosscheck;
use brach_core::reduced::Protocol;
use brach_core::shooting::*;
use brach_core::trajectories::{time_trajectory, trajectory_instance, TrajectorySpec};
use brach_core::warmstart::*;

fn sweep(max: usize) -> Vec<(LatticeSpec, ShootingResult)> {
    let tpl = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
    let mut lib = GuessLibrary::new();
    let cfg = ShootingConfig::default();
    (2..=max)
        .map(|n| {
            let spec = tpl.resized(n).unwrap();
            let r = warm_solve(&spec, &lib, &cfg).unwrap_or_else(|e| panic!("N = {}: {}", n, e));
            lib.insert(SolutionRecord::from_result(&spec, &r));
            (spec, r)
        })
        .collect()
}

fn check_invariants(p: &Protocol) {
    let d = &p.diagnostics;
    assert!(d["constraint_drift"] <= 1e-6, "{:?}", d);
    assert!(d["lax_drift"] <= 1e-8, "{:?}", d);
    assert!(d["chirality"] <= 1e-10, "{:?}", d);
    assert!((d["trace_norm_ratio"] - 2.0).abs() < 1e-12);
    let f = transfer_fidelity(p).unwrap();
    assert!(f >= 1.0 - 1e-6, "fidelity {}", f);
}

#[test]
fn quadratic_sweep_to_twelve() {
    let results = sweep(12);
    let mut prev = 0.0;
    for (spec, r) in &results {
        let n = spec.n_sites();
        assert!(r.converged);
        assert!(r.j0_tau > prev, "N = {} not increasing", n);
        prev = r.j0_tau;
        if n > 2 + HISTORY {
            assert!(r.iterations <= 50, "N = {} took {} iterations", n, r.iterations);
        }
        check_invariants(&r.protocol);

        let mut y = vec![0.0];
        y.extend_from_slice(&r.unknowns.y_tail);
        let back = resample(&resample(&y[1..], GRID_SIZE).unwrap(), n - 1).unwrap();
        let err = y[1..].iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "N = {} resampling error {}", n, err);

        if n <= 6 {
            let q = crosscheck(&r.protocol).unwrap();
            assert!(q.coupling_deviation < 1e-6, "N = {}: {:?}", n, q);
            assert!(q.spectrum_drift < 1e-9, "N = {}: {:?}", n, q);
            assert!(q.chirality < 1e-10);
            assert_eq!(q.rank, 2);
            assert!(q.initial_support < 1e-9 && q.final_support < 1e-6, "N = {}: {:?}", n, q);
        }
    }
}

#[test]
fn many_paths_carry_current_midway() {
    let spec = LatticeSpec::all_to_all(10, WeightProfile::quadratic()).unwrap();
    let r = sweep(10).pop().unwrap().1;
    let mid = r.protocol.n_nodes() / 2;
    let a = &r.protocol.alpha_series[mid];
    let psi_q: Vec<C64> = a.x.iter().map(|x| C64::new(2f64.sqrt() * x, 0.0)).collect();
    let currents = probability_currents(&psi_q, &r.protocol.couplings[mid]);
    assert_eq!(currents.len(), spec.n_sites() - 1);
    assert!(currents.iter().filter(|c| c.abs() > 1e-3).count() > 2, "{:?}", currents);
}

#[test]
fn propagation_checks() {
    let spec = LatticeSpec::all_to_all(5, WeightProfile::quadratic()).unwrap();
    let r = solve_best(&spec, &seed_guesses(&spec), &ShootingConfig::default()).unwrap();
    let p = &r.protocol;
    let psi0 = basis_state(5, 0);
    let end = propagate_schrodinger(p, &psi0).unwrap();
    assert!((norm(&end) - 1.0).abs() < 1e-8 * r.j0_tau);
    let tight = propagate_schrodinger_with(p, &psi0, &OdeConfig::with_tolerance(5e-12)).unwrap();
    assert!((fidelity(&end, 4) - fidelity(&tight, 4)).abs() < 1e-8);
    let back = propagate_schrodinger(&p.time_reversed(), &end).unwrap();
    let err = back.iter().zip(&psi0).map(|(a, b)| cabs(*a - *b)).fold(0.0, f64::max);
    assert!(err < 1e-7, "{}", err);
}

#[test]
fn three_qubit_continuation_in_g() {
    let specs: Vec<LatticeSpec> = [2.5, 3.0, 4.0, 6.0, 8.0]
        .iter()
        .map(|&g| LatticeSpec::all_to_all(3, WeightProfile::PerDistance { values: vec![1.0, g] }).unwrap())
        .collect();
    let cfg = ShootingConfig::default();
    let seed = solve_best(&specs[0], &seed_guesses(&specs[0]), &cfg).unwrap();
    let path = continuation_sweep(&specs[1..], &seed, &cfg).unwrap();
    for (spec, r) in specs[1..].iter().zip(path) {
        let r = r.unwrap();
        let g = spec.weight(0, 2).unwrap();
        assert!((r.j0_tau - three_qubit_optimal(g).unwrap().tau).abs() < 1e-6, "g = {}", g);
    }
}

#[test]
fn masked_chain_agrees_with_full_matrix_flow() {
    let traj = TrajectorySpec::new(vec![1, 2, 4, 5]).unwrap();
    let spec = trajectory_instance(&traj, &WeightProfile::quadratic()).unwrap();
    let r = solve_best(&spec, &seed_guesses(&spec), &ShootingConfig::default()).unwrap();
    check_invariants(&r.protocol);
    let q = crosscheck(&r.protocol).unwrap();
    assert!(q.coupling_deviation < 1e-6, "{:?}", q);
    assert!(q.spectrum_drift < 1e-9);
    assert_eq!(q.rank, 2);
}

#[test]
fn trajectory_times_respect_hop_speed_limit_and_mirror() {
    let w = WeightProfile::quadratic();
    let cfg = ShootingConfig::default();
    for sites in [vec![1, 2, 4], vec![1, 2, 3, 5], vec![1, 3, 5]] {
        let t = TrajectorySpec::new(sites).unwrap();
        let a = time_trajectory(&t, &w, &cfg);
        let b = time_trajectory(&t.mirrored(), &w, &cfg);
        assert!(a.converged && b.converged);
        assert!((a.j0_tau - b.j0_tau).abs() < 0.01);
        let pmax = *t.hops().iter().max().unwrap() as f64;
        assert!(a.j0_tau >= std::f64::consts::FRAC_PI_2 * pmax);
    }
}
