use perqwalk::dynamics::{ensemble_average, EnsembleOptions, HamiltonianSpec, StateVector};
use perqwalk::graph::Graph;
use perqwalk::noise::NoiseSpec;
use perqwalk::search::{run_noisy_search, uniform_grid, SearchProblem};

fn main() {
    // ring spread probe
    let n = 401;
    let graph = Graph::line(n, true).unwrap();
    let noise = NoiseSpec::new(1.0, 1.0, 42).unwrap();
    let spec = HamiltonianSpec::new(graph, noise).unwrap();
    let psi0 = StateVector::localized(n, n / 2).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
    let m = 16;
    let t0 = std::time::Instant::now();
    let ens = ensemble_average(&spec, m, &psi0, &grid, &EnsembleOptions::default()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "ring n={n} gamma=1 t=50 M={m}: {:.2}s ({:.3}s/traj)  sigma2(50)={:.2}",
        dt, dt / m as f64, ens.variance.last().unwrap()
    );

    // complete-graph search probe at N=128
    let nn = 128;
    let graph = Graph::complete(nn).unwrap();
    let noise = NoiseSpec::new(1.0, 0.01, 7).unwrap();
    let problem = SearchProblem::new(graph, 0, 1.0 / nn as f64, noise).unwrap();
    let grid = uniform_grid(2.2 * perqwalk::search::optimal_time(nn), 220);
    let m = 8;
    let t0 = std::time::Instant::now();
    let res = run_noisy_search(&problem, m, &grid).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "complete N={nn} gamma=0.01 M={m}: {:.2}s ({:.3}s/traj)  p_succ={:.3} t_opt={:.2}",
        dt, dt / m as f64, res.p_succ, res.t_opt
    );
}
