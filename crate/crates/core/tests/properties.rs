//! Cross-module invariants, mostly property-based.

mod common;

use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;

use perqwalk::dynamics::{assemble_hamiltonian, ensemble_average, EnsembleOptions, HamiltonianSpec, StateVector};
use perqwalk::graph::Graph;
use perqwalk::multiparticle::{evolve_two_particle, InteractionSpec, Statistics, TwoParticleState};
use perqwalk::noise::{
    mean_domain_length, sample_domains, sample_trajectory, source_rng, stream_rng, NoiseSpec,
    NoiseTarget,
};

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..=20).prop_flat_map(|n| {
        let max_edges = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), max_edges).prop_map(move |mask| {
            let mut edges = Vec::new();
            let mut idx = 0;
            for j in 0..n {
                for k in j + 1..n {
                    if mask[idx] {
                        edges.push((j, k));
                    }
                    idx += 1;
                }
            }
            Graph::new(n, edges).expect("valid random graph")
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Laplacian structure over 200 random graphs with n <= 20
    #[test]
    fn laplacian_symmetric_with_zero_row_sums(graph in arb_graph()) {
        let l = graph.laplacian();
        let n = graph.node_count();
        for j in 0..n {
            let mut row = 0.0;
            for k in 0..n {
                prop_assert_eq!(l[[j, k]], l[[k, j]]);
                row += l[[j, k]];
            }
            prop_assert!(row.abs() == 0.0, "row {} sums to {}", j, row);
            prop_assert_eq!(l[[j, j]], -(graph.degree(j) as f64));
        }
        // the all-ones vector is in the kernel
        for j in 0..n {
            let image: f64 = (0..n).map(|k| l[[j, k]]).sum();
            prop_assert!(image.abs() < 1e-15);
        }
    }

    #[test]
    fn domains_always_contiguous(n_edges in 1usize..40, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0, 0);
        let part = sample_domains(n_edges, p, &mut rng).unwrap();
        prop_assert_eq!(part.n_edges(), n_edges);
        prop_assert!(part.domain_count() >= 1 && part.domain_count() <= n_edges);
        // block contiguity is enforced by construction; verify directly
        let mut seen_last = 0usize;
        for (i, &d) in part.assignment().iter().enumerate() {
            if i == 0 {
                prop_assert_eq!(d, 0);
            } else {
                prop_assert!(d == seen_last || d == seen_last + 1);
            }
            seen_last = d;
        }
        prop_assert_eq!(part.block_lengths().iter().sum::<usize>(), n_edges);
    }

    #[test]
    fn gaussian_packets_are_normalized(n in 3usize..200, delta in 0.3f64..30.0, p0 in -3.2f64..3.2) {
        let psi = perqwalk::dynamics::gaussian_packet(n, delta, p0).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn assembled_hamiltonians_are_symmetric_for_random_snapshots() {
    // 1000 random sign snapshots across mixed graphs and noise targets
    let cases = [
        (Graph::line(7, true).unwrap(), NoiseTarget::Tunneling),
        (Graph::line(6, false).unwrap(), NoiseTarget::Both),
        (Graph::complete(6).unwrap(), NoiseTarget::Tunneling),
        (Graph::star(8).unwrap(), NoiseTarget::OnSite),
    ];
    let mut checked = 0;
    for (graph, target) in cases {
        let noise = NoiseSpec::new(0.8, 1.0, 0).unwrap().with_target(target);
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        let n_sources = spec.n_sources();
        for trial in 0..250u64 {
            let mut rng = stream_rng(trial, trial, 1);
            let signs: Vec<i8> = (0..n_sources)
                .map(|_| if rand::Rng::random::<bool>(&mut rng) { 1 } else { -1 })
                .collect();
            let h = assemble_hamiltonian(&spec, &signs).unwrap();
            let n = h.nrows();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(h[[i, j]], h[[j, i]]);
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn empirical_autocorrelation_tracks_exponential() {
    // 20k trajectories per rate; 10 time points within 3 standard errors
    let samples = 20_000u64;
    for (case, gamma) in [(0u64, 0.1f64), (1, 1.0), (2, 10.0)] {
        let horizon = 2.0 / gamma;
        let points: Vec<f64> = (1..=10).map(|i| horizon * i as f64 / 10.0).collect();
        let mut sums = vec![0.0; points.len()];
        let mut sqs = vec![0.0; points.len()];
        for m in 0..samples {
            let mut rng = source_rng(1000 + case, m, 0);
            let traj = sample_trajectory(gamma, horizon, &mut rng).unwrap();
            let x0 = traj.value_at(0.0).unwrap() as f64;
            for (i, &t) in points.iter().enumerate() {
                let c = x0 * traj.value_at(t).unwrap() as f64;
                sums[i] += c;
                sqs[i] += c * c;
            }
        }
        for (i, &t) in points.iter().enumerate() {
            let mean = sums[i] / samples as f64;
            let var = (sqs[i] / samples as f64 - mean * mean).max(0.0);
            let se = (var / (samples as f64 - 1.0)).sqrt();
            let expect = (-2.0 * gamma * t).exp();
            assert!(
                (mean - expect).abs() <= 3.0 * se.max(1e-12),
                "gamma={gamma} t={t}: C={mean:.4} vs {expect:.4} (3se={:.4})",
                3.0 * se
            );
        }
    }
}

#[test]
fn mean_block_length_converges_to_formula() {
    let samples = 50_000u64;
    for (case, (p, n_edges)) in [(0u64, (0.3f64, 6usize)), (1, (0.7, 10))] {
        let mut acc = 0.0;
        for m in 0..samples {
            let mut rng = stream_rng(2000 + case, m, 0);
            let part = sample_domains(n_edges, p, &mut rng).unwrap();
            acc += n_edges as f64 / part.domain_count() as f64;
        }
        let mean = acc / samples as f64;
        let expect = mean_domain_length(p, n_edges);
        assert!(
            (mean - expect).abs() < 0.02,
            "p={p} n={n_edges}: {mean} vs {expect}"
        );
    }
}

#[test]
fn noiseless_ensemble_reproduces_bessel_on_the_line() {
    // nu = 0 with any trajectory count equals the closed form on interior
    // sites before the front reaches the boundary
    let n = 101;
    let graph = Graph::line(n, true).unwrap();
    let spec = HamiltonianSpec::new(graph, NoiseSpec::noiseless()).unwrap();
    let psi0 = StateVector::localized(n, n / 2).unwrap();
    let times = [2.0, 6.0];
    let ens = ensemble_average(&spec, 3, &psi0, &times, &EnsembleOptions::default()).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let exact = perqwalk::observables::bessel_distribution(n, n / 2, t, 1.0).unwrap();
        let worst = ens.mean_distribution[i]
            .iter()
            .zip(exact.probabilities.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            ;
        assert!(worst < 1e-8, "t={t}: {worst:.2e}");
    }
}

#[test]
fn shared_noise_marginals_match_single_particle_runs() {
    // a non-interacting distinguishable pair under shared noise factorizes,
    // so each marginal equals the corresponding single-particle evolution
    let n = 9;
    let graph = Graph::line(n, false).unwrap();
    let noise = NoiseSpec::new(1.0, 0.8, 77).unwrap();
    let spec = HamiltonianSpec::new(graph, noise).unwrap();
    let horizon = 4.0;
    let trajs: Vec<_> = (0..spec.n_sources())
        .map(|s| sample_trajectory(0.8, horizon, &mut source_rng(77, 3, s)).unwrap())
        .collect();
    let a = StateVector::localized(n, 2).unwrap();
    let b = StateVector::localized(n, 6).unwrap();
    let pair = TwoParticleState::product(&a, &b, Statistics::Distinguishable).unwrap();
    let times = [1.5, 4.0];
    let joint = evolve_two_particle(&spec, &trajs, &InteractionSpec::none(), &pair, &times).unwrap();
    let ea = perqwalk::dynamics::evolve_trajectory(&spec, &trajs, &a, &times).unwrap();
    let eb = perqwalk::dynamics::evolve_trajectory(&spec, &trajs, &b, &times).unwrap();
    for (i, state) in joint.iter().enumerate() {
        let ma = state.marginal(0);
        let mb = state.marginal(1);
        let pa = ea[i].probabilities();
        let pb = eb[i].probabilities();
        for k in 0..n {
            assert!((ma[k] - pa[k]).abs() < 1e-10);
            assert!((mb[k] - pb[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn exchange_sectors_survive_noisy_evolution() {
    let n = 8;
    let graph = Graph::line(n, false).unwrap();
    for (seed, stats) in [(5u64, Statistics::Bosonic), (6, Statistics::Fermionic)] {
        let noise = NoiseSpec::new(1.0, 1.5, seed).unwrap();
        let spec = HamiltonianSpec::new(graph.clone(), noise).unwrap();
        let horizon = 3.0;
        let trajs: Vec<_> = (0..spec.n_sources())
            .map(|s| sample_trajectory(1.5, horizon, &mut source_rng(seed, 0, s)).unwrap())
            .collect();
        let pair = TwoParticleState::localized_pair(n, 3, 4, stats).unwrap();
        let states = evolve_two_particle(
            &spec,
            &trajs,
            &InteractionSpec::on_site(1.0),
            &pair,
            &[horizon],
        )
        .unwrap();
        assert!(states[0].symmetry_leakage() < 1e-10);
    }
}

#[test]
fn state_vector_probabilities_are_a_distribution() {
    let mut amps = Array1::<Complex64>::default(5);
    amps[0] = Complex64::new(0.6, 0.0);
    amps[1] = Complex64::new(0.0, 0.8);
    let psi = StateVector::new(amps).unwrap();
    let p = psi.probabilities();
    assert!((p.sum() - 1.0).abs() < 1e-12);
    assert!((p[0] - 0.36).abs() < 1e-12);
    assert!((p[1] - 0.64).abs() < 1e-12);
}
