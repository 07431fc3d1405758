//! Experiment dispatch: translate a validated configuration into library
//! calls and emit the data files. Outputs are deterministic for a fixed
//! config; thread count never changes the numbers.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind, InteractionKind, SweepConfig};
use super::emit::{write_csv, write_json, write_manifest, Cell};
use crate::dynamics::{
    ensemble_average, gaussian_packet, EnsembleOptions, EnsembleResult, HamiltonianSpec,
    StateVector,
};
use crate::multiparticle::{evolve_two_particle, TwoParticleState};
use crate::noise::{sample_trajectory, source_rng};
use crate::observables::{classify_regime, mean_displacement, PositionDistribution};
use crate::search::{
    optimal_time, run_noisy_search, scaling_exponent, uniform_grid, SearchProblem, SearchResult,
};
use crate::{Error, Result};

/// Files written by a run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn resolved_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serialization")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Execute a single-point experiment (`perqwalk run`).
pub fn run(config: &ExperimentConfig, base_dir: &Path) -> Result<RunReport> {
    config.validate(false)?;
    let out = if config.output_dir.is_absolute() {
        config.output_dir.clone()
    } else {
        base_dir.join(&config.output_dir)
    };
    ensure_dir(&out)?;
    let mut files = run_in_dir(config, base_dir, &out)?;
    files.push(write_manifest(
        &out,
        "run",
        resolved_json(config),
        &[("kind", config.kind.name().into())],
    )?);
    Ok(RunReport {
        output_dir: out,
        files,
    })
}

fn run_in_dir(config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    match config.kind {
        ExperimentKind::LineSpread => run_spread(config, base_dir, out, false),
        ExperimentKind::Wavepacket => run_spread(config, base_dir, out, true),
        ExperimentKind::Search => run_search(config, base_dir, out),
        ExperimentKind::TwoParticle => run_two_particle(config, base_dir, out),
        ExperimentKind::NoiseCheck => run_noise_check(config, base_dir, out),
        ExperimentKind::ScalingSweep => Err(Error::Config(
            "kind `scaling-sweep` must be executed with `perqwalk sweep`".into(),
        )),
    }
}

fn spread_ensemble(
    config: &ExperimentConfig,
    base_dir: &Path,
    wavepacket: bool,
) -> Result<(EnsembleResult, usize)> {
    let graph = config
        .graph
        .as_ref()
        .expect("validated")
        .build(base_dir)?;
    let n = graph.node_count();
    let noise = config
        .noise
        .clone()
        .unwrap_or_default()
        .to_spec(config.seed)?;
    let spec = HamiltonianSpec::new(graph, noise)?;
    let psi0 = if wavepacket {
        let wp = config.wavepacket.as_ref().expect("validated");
        gaussian_packet(n, wp.delta, wp.p0)?
    } else {
        StateVector::localized(n, n / 2)?
    };
    let grid = config.time.as_ref().expect("validated").grid();
    let ens = ensemble_average(
        &spec,
        config.trajectories,
        &psi0,
        &grid,
        &EnsembleOptions::default(),
    )?;
    Ok((ens, n))
}

fn emit_variance_files(
    out: &Path,
    ens: &EnsembleResult,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = out.join("variance.csv");
    write_csv(
        &path,
        "spread-variance/1",
        &["t", "sigma2_mean", "sigma2_stderr"],
        ens.sample_times.iter().enumerate().map(|(i, &t)| {
            vec![
                Cell::from(t),
                Cell::from(ens.variance[i]),
                Cell::from(ens.variance_stderr[i]),
            ]
        }),
    )?;
    files.push(path);

    let last = ens.sample_times.len() - 1;
    let path = out.join("snapshot_final.csv");
    write_csv(
        &path,
        "position-distribution/1",
        &["k", "p_k"],
        ens.mean_distribution[last]
            .iter()
            .enumerate()
            .map(|(k, &p)| vec![Cell::from(k), Cell::from(p)]),
    )?;
    files.push(path);
    Ok(())
}

fn run_spread(
    config: &ExperimentConfig,
    base_dir: &Path,
    out: &Path,
    wavepacket: bool,
) -> Result<Vec<PathBuf>> {
    let (ens, n) = spread_ensemble(config, base_dir, wavepacket)?;
    let mut files = Vec::new();
    emit_variance_files(out, &ens, &mut files)?;

    if wavepacket {
        let path = out.join("centroid.csv");
        write_csv(
            &path,
            "spread-centroid/1",
            &["t", "centroid_mean"],
            ens.sample_times.iter().enumerate().map(|(i, &t)| {
                let dist = PositionDistribution {
                    probabilities: ens.mean_distribution[i].clone(),
                    time: t,
                };
                vec![Cell::from(t), Cell::from(mean_displacement(&dist, ens.origin))]
            }),
        )?;
        files.push(path);
    }

    let fit = classify_regime(&ens.sample_times, &ens.variance);
    let summary = match fit {
        Ok(fit) => json!({
            "n": n,
            "trajectories": ens.trajectories,
            "exponent": fit.exponent,
            "exponent_stderr": fit.exponent_stderr,
            "regime": fit.regime.label(),
            "final_variance": ens.variance.last(),
        }),
        Err(_) => json!({
            "n": n,
            "trajectories": ens.trajectories,
            "regime": "undetermined",
            "final_variance": ens.variance.last(),
        }),
    };
    let path = out.join("summary.json");
    write_json(&path, &summary)?;
    files.push(path);
    Ok(files)
}

fn search_problem(
    config: &ExperimentConfig,
    base_dir: &Path,
    n_override: Option<usize>,
    nu_override: Option<f64>,
    gamma_override: Option<f64>,
) -> Result<(SearchProblem, Vec<f64>)> {
    let mut graph_cfg = config.graph.clone().expect("validated");
    if let Some(n) = n_override {
        graph_cfg.n = Some(n);
    }
    let graph = graph_cfg.build(base_dir)?;
    let n = graph.node_count();
    let search_cfg = config.search.clone().unwrap_or_default();
    let (target, coupling) = search_cfg.resolve(graph_cfg.kind, n)?;
    let mut noise = config
        .noise
        .clone()
        .unwrap_or_default()
        .to_spec(config.seed)?;
    if let Some(nu) = nu_override {
        noise.nu = nu;
    }
    if let Some(gamma) = gamma_override {
        noise.gamma = gamma;
    }
    noise.validate(1.0)?;
    let grid = match &config.time {
        Some(time) => time.grid(),
        None => uniform_grid(3.0 * optimal_time(n), search_cfg.grid_points),
    };
    Ok((SearchProblem::new(graph, target, coupling, noise)?, grid))
}

fn search_summary(problem: &SearchProblem, result: &SearchResult, seed: u64) -> serde_json::Value {
    json!({
        "N": problem.graph.node_count(),
        "nu": problem.noise.nu,
        "gamma": problem.noise.gamma,
        "J": problem.coupling,
        "t_opt": result.t_opt,
        "p_succ": result.p_succ,
        "p_succ_stderr": result.p_succ_stderr,
        "T_avg": result.t_avg,
        "M": result.trajectories,
        "seed": seed,
    })
}

fn run_search(config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let search_cfg = config.search.clone().unwrap_or_default();
    let (problem, grid) = search_problem(config, base_dir, None, None, None)?;
    let mut files = Vec::new();

    let (problem, result) = if search_cfg.coupling_sweep {
        // 10 log-spaced couplings spanning a factor of 8 around the default
        let j_default = problem.coupling;
        let factors: Vec<f64> = (0..10)
            .map(|i| 8f64.powf(-1.0 + 2.0 * i as f64 / 9.0))
            .collect();
        let mut rows = Vec::new();
        let mut best: Option<(SearchProblem, SearchResult)> = None;
        for f in factors {
            let j = j_default * f;
            let candidate = SearchProblem::new(
                problem.graph.clone(),
                problem.target,
                j,
                problem.noise.clone(),
            )?;
            let res = run_noisy_search(&candidate, config.trajectories, &grid)?;
            rows.push(vec![
                Cell::from(j),
                Cell::from(res.p_succ),
                Cell::from(res.t_opt),
                Cell::from(res.t_avg),
            ]);
            let better = best
                .as_ref()
                .map(|(_, b)| res.p_succ > b.p_succ)
                .unwrap_or(true);
            if better {
                best = Some((candidate, res));
            }
        }
        let path = out.join("coupling_sweep.csv");
        write_csv(
            &path,
            "search-coupling-sweep/1",
            &["J", "p_succ", "t_opt", "T_avg"],
            rows,
        )?;
        files.push(path);
        best.expect("at least one coupling")
    } else {
        let result = run_noisy_search(&problem, config.trajectories, &grid)?;
        (problem, result)
    };

    let path = out.join("search_curve.csv");
    write_csv(
        &path,
        "search-curve/1",
        &["t", "p_w_mean", "p_w_stderr"],
        result.t_grid.iter().enumerate().map(|(i, &t)| {
            vec![
                Cell::from(t),
                Cell::from(result.p_w[i]),
                Cell::from(result.p_w_stderr[i]),
            ]
        }),
    )?;
    files.push(path);

    let path = out.join("summary.json");
    write_json(&path, &search_summary(&problem, &result, config.seed))?;
    files.push(path);
    Ok(files)
}

fn run_two_particle(config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let graph = config
        .graph
        .as_ref()
        .expect("validated")
        .build(base_dir)?;
    let n = graph.node_count();
    let tp = config.two_particle.clone().expect("validated");
    let noise = config
        .noise
        .clone()
        .unwrap_or_default()
        .to_spec(config.seed)?;
    let spec = HamiltonianSpec::new(graph, noise)?;
    let interaction = tp.interaction_spec();
    let [j, k] = tp.start.unwrap_or([n / 2, n / 2]);
    let psi0 = TwoParticleState::localized_pair(n, j, k, tp.statistics)?;
    let grid = config.time.as_ref().expect("validated").grid();
    let m = if spec.noise.is_noiseless() {
        1
    } else {
        config.trajectories
    };
    let n_samples = grid.len();
    let horizon = *grid.last().unwrap();

    // ensemble averaging over shared-noise realizations, reduced in
    // trajectory order for bitwise reproducibility
    let mut joint_sum: Vec<Array2<f64>> = vec![Array2::zeros((n, n)); n_samples];
    let mut diag_sum = vec![0.0; n_samples];
    let run_one = |mi: usize| -> Result<Vec<Array2<f64>>> {
        let trajs: Vec<_> = (0..spec.n_sources())
            .map(|s| {
                sample_trajectory(
                    spec.noise.gamma,
                    horizon,
                    &mut source_rng(spec.noise.seed, mi as u64, s),
                )
            })
            .collect::<Result<_>>()?;
        let states = evolve_two_particle(&spec, &trajs, &interaction, &psi0, &grid)?;
        Ok(states.iter().map(|s| s.joint_distribution()).collect())
    };
    let mut start = 0usize;
    while start < m {
        let end = (start + 16).min(m);
        let batch: Vec<Result<Vec<Array2<f64>>>> =
            (start..end).into_par_iter().map(run_one).collect();
        for item in batch {
            let dists = item?;
            for (i, d) in dists.into_iter().enumerate() {
                for q in 0..n {
                    diag_sum[i] += d[[q, q]];
                }
                joint_sum[i] += &d;
            }
        }
        start = end;
    }
    let scale = 1.0 / m as f64;

    let mut files = Vec::new();
    let last = n_samples - 1;
    let path = out.join("joint_final.csv");
    write_csv(
        &path,
        "two-particle-joint/1",
        &["j", "k", "p_jk"],
        (0..n).flat_map(|jj| {
            let row = &joint_sum[last];
            (0..n)
                .map(|kk| {
                    vec![
                        Cell::from(jj),
                        Cell::from(kk),
                        Cell::from(row[[jj, kk]] * scale),
                    ]
                })
                .collect::<Vec<_>>()
        }),
    )?;
    files.push(path);

    for (which, name) in [(0usize, "marginal_first.csv"), (1, "marginal_second.csv")] {
        let mut marg = vec![0.0; n];
        for jj in 0..n {
            for kk in 0..n {
                let p = joint_sum[last][[jj, kk]] * scale;
                marg[if which == 0 { jj } else { kk }] += p;
            }
        }
        let path = out.join(name);
        write_csv(
            &path,
            "two-particle-marginal/1",
            &["k", "p_k"],
            marg.iter()
                .enumerate()
                .map(|(kk, &p)| vec![Cell::from(kk), Cell::from(p)]),
        )?;
        files.push(path);
    }

    let path = out.join("diag_mass.csv");
    write_csv(
        &path,
        "two-particle-diag/1",
        &["t", "diag_mass_mean"],
        grid.iter()
            .enumerate()
            .map(|(i, &t)| vec![Cell::from(t), Cell::from(diag_sum[i] * scale)]),
    )?;
    files.push(path);

    let path = out.join("summary.json");
    write_json(
        &path,
        &json!({
            "n": n,
            "statistics": tp.statistics,
            "interaction": interaction_label(tp.interaction),
            "strength": tp.strength,
            "start": [j, k],
            "trajectories": m,
            "final_diag_mass": diag_sum[last] * scale,
        }),
    )?;
    files.push(path);
    Ok(files)
}

fn run_noise_check(config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let noise = config.noise.clone().unwrap_or_default();
    let time = config.time.as_ref().expect("validated");
    let gamma = noise.gamma;
    let horizon = time.t_max;
    let m = config.trajectories;
    let seed = config.seed;
    let grid = time.grid();

    // sample in fixed-size batches, reduce in trajectory order
    let mut corr_sum = vec![0.0; grid.len()];
    let mut corr_sq = vec![0.0; grid.len()];
    let mut count_sum = 0.0;
    let mut count_sq = 0.0;
    let run_one = |mi: usize| -> Result<(Vec<f64>, f64)> {
        let traj = sample_trajectory(gamma, horizon, &mut source_rng(seed, mi as u64, 0))?;
        let x0 = traj.value_at(0.0)? as f64;
        let corr: Vec<f64> = grid
            .iter()
            .map(|&t| Ok(x0 * traj.value_at(t)? as f64))
            .collect::<Result<_>>()?;
        Ok((corr, traj.switch_count() as f64))
    };
    let mut start = 0usize;
    while start < m {
        let end = (start + 1024).min(m);
        let batch: Vec<Result<(Vec<f64>, f64)>> =
            (start..end).into_par_iter().map(run_one).collect();
        for item in batch {
            let (corr, count) = item?;
            for (i, c) in corr.iter().enumerate() {
                corr_sum[i] += c;
                corr_sq[i] += c * c;
            }
            count_sum += count;
            count_sq += count * count;
        }
        start = end;
    }
    let mf = m as f64;

    let mut files = Vec::new();
    let path = out.join("autocorr.csv");
    write_csv(
        &path,
        "rtn-autocorrelation/1",
        &["t", "autocorr_mean", "autocorr_stderr", "exact"],
        grid.iter().enumerate().map(|(i, &t)| {
            let mean = corr_sum[i] / mf;
            let var = (corr_sq[i] / mf - mean * mean).max(0.0);
            let se = if m > 1 { (var / (mf - 1.0)).sqrt() } else { 0.0 };
            vec![
                Cell::from(t),
                Cell::from(mean),
                Cell::from(se),
                Cell::from((-2.0 * gamma * t).exp()),
            ]
        }),
    )?;
    files.push(path);

    let mean_count = count_sum / mf;
    let var_count = (count_sq / mf - mean_count * mean_count).max(0.0);
    let path = out.join("switch_stats.json");
    write_json(
        &path,
        &json!({
            "trajectories": m,
            "gamma": gamma,
            "horizon": horizon,
            "mean_switches": mean_count,
            "expected_mean": gamma * horizon,
            "variance_switches": var_count,
            "expected_variance": gamma * horizon,
        }),
    )?;
    files.push(path);

    // optional domain histogram against the closed-form P_M
    if noise.p > 0.0 {
        if let Some(graph_cfg) = &config.graph {
            let graph = graph_cfg.build(base_dir)?;
            let n_edges = graph.edge_count();
            let mut hist = vec![0usize; n_edges];
            for mi in 0..m {
                let mut rng = crate::noise::stream_rng(seed, mi as u64, 0);
                let part = crate::noise::sample_domains(n_edges, noise.p, &mut rng)?;
                hist[part.domain_count() - 1] += 1;
            }
            let path = out.join("domains.csv");
            write_csv(
                &path,
                "domain-counts/1",
                &["m", "p_m_empirical", "p_m_expected"],
                (1..=n_edges).map(|dm| {
                    vec![
                        Cell::from(dm),
                        Cell::from(hist[dm - 1] as f64 / mf),
                        Cell::from(domain_count_probability(n_edges, dm, noise.p)),
                    ]
                }),
            )?;
            files.push(path);
        }
    }
    Ok(files)
}

/// `P_M = C(N-1, M-1) (1-p)^(M-1) p^(N-M)` for `M` domains over `N` edges.
pub fn domain_count_probability(n_edges: usize, m_domains: usize, p: f64) -> f64 {
    if m_domains < 1 || m_domains > n_edges {
        return 0.0;
    }
    let n = n_edges - 1;
    let k = m_domains - 1;
    let mut binom = 1.0f64;
    for i in 0..k {
        binom *= (n - i) as f64 / (i + 1) as f64;
    }
    binom * (1.0 - p).powi(k as i32) * p.powi((n - k) as i32)
}

/// Execute a sweep (`perqwalk sweep`): the Cartesian product of the grid
/// axes, one subdirectory per point, plus a combined table and, for search
/// sweeps over `n`, the running-time scaling fit.
pub fn sweep(config: &ExperimentConfig, base_dir: &Path) -> Result<RunReport> {
    config.validate(true)?;
    let out = if config.output_dir.is_absolute() {
        config.output_dir.clone()
    } else {
        base_dir.join(&config.output_dir)
    };
    ensure_dir(&out)?;
    let sweep_cfg = config.sweep.clone().unwrap_or_default();
    let base_noise = config.noise.clone().unwrap_or_default();
    let axes = SweepAxes::new(&sweep_cfg, &base_noise, config);
    let mut files = Vec::new();

    let search_like = matches!(
        config.kind,
        ExperimentKind::Search | ExperimentKind::ScalingSweep
    );
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    // per (nu, gamma): the (N, T_avg) points for the scaling fit
    let mut fit_points: Vec<((f64, f64), Vec<(f64, f64)>)> = Vec::new();

    for &nu in &axes.nu {
        for &gamma in &axes.gamma {
            for &n in &axes.n {
                let sub = out.join(format!("n{n}_nu{nu}_gamma{gamma}"));
                ensure_dir(&sub)?;
                if search_like {
                    let (problem, grid) =
                        search_problem(config, base_dir, Some(n), Some(nu), Some(gamma))?;
                    let result = run_noisy_search(&problem, config.trajectories, &grid)?;
                    let path = sub.join("search_curve.csv");
                    write_csv(
                        &path,
                        "search-curve/1",
                        &["t", "p_w_mean", "p_w_stderr"],
                        result.t_grid.iter().enumerate().map(|(i, &t)| {
                            vec![
                                Cell::from(t),
                                Cell::from(result.p_w[i]),
                                Cell::from(result.p_w_stderr[i]),
                            ]
                        }),
                    )?;
                    files.push(path);
                    let path = sub.join("summary.json");
                    write_json(&path, &search_summary(&problem, &result, config.seed))?;
                    files.push(path);
                    rows.push(vec![
                        Cell::from(n),
                        Cell::from(nu),
                        Cell::from(gamma),
                        Cell::from(problem.coupling),
                        Cell::from(result.t_opt),
                        Cell::from(result.p_succ),
                        Cell::from(result.p_succ_stderr),
                        Cell::from(result.t_avg),
                    ]);
                    let idx = match fit_points.iter().position(|(key, _)| *key == (nu, gamma)) {
                        Some(i) => i,
                        None => {
                            fit_points.push(((nu, gamma), Vec::new()));
                            fit_points.len() - 1
                        }
                    };
                    fit_points[idx].1.push((n as f64, result.t_avg));
                } else {
                    let mut point = config.clone();
                    point.kind = ExperimentKind::LineSpread;
                    point.sweep = None;
                    if let Some(g) = &mut point.graph {
                        g.n = Some(n);
                    }
                    let mut noise = base_noise.clone();
                    noise.nu = nu;
                    noise.gamma = gamma;
                    point.noise = Some(noise);
                    point.validate(false)?;
                    let (ens, _) = spread_ensemble(&point, base_dir, false)?;
                    let mut sub_files = Vec::new();
                    emit_variance_files(&sub, &ens, &mut sub_files)?;
                    files.extend(sub_files);
                    let fit = classify_regime(&ens.sample_times, &ens.variance)?;
                    rows.push(vec![
                        Cell::from(n),
                        Cell::from(nu),
                        Cell::from(gamma),
                        Cell::from(fit.exponent),
                        Cell::from(fit.exponent_stderr),
                        Cell::Text(fit.regime.label().into()),
                        Cell::Float(*ens.variance.last().unwrap()),
                    ]);
                }
            }
        }
    }

    let columns: &[&str] = if search_like {
        &["n", "nu", "gamma", "J", "t_opt", "p_succ", "p_succ_stderr", "T_avg"]
    } else {
        &["n", "nu", "gamma", "exponent", "exponent_stderr", "regime", "final_variance"]
    };
    let path = out.join("sweep_summary.csv");
    write_csv(&path, "sweep-summary/1", columns, rows)?;
    files.push(path);

    if search_like && axes.n.len() >= 3 {
        let fits: Vec<serde_json::Value> = fit_points
            .iter()
            .map(|((nu, gamma), points)| {
                let sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
                let times: Vec<f64> = points.iter().map(|p| p.1).collect();
                let (slope, stderr) = scaling_exponent(&sizes, &times)?;
                Ok(json!({
                    "nu": nu,
                    "gamma": gamma,
                    "slope": slope,
                    "slope_stderr": stderr,
                    "sizes": sizes,
                    "t_avg": times,
                }))
            })
            .collect::<Result<_>>()?;
        let path = out.join("scaling.json");
        write_json(&path, &serde_json::Value::Array(fits))?;
        files.push(path);
    }

    files.push(write_manifest(
        &out,
        "sweep",
        resolved_json(config),
        &[("kind", config.kind.name().into())],
    )?);
    Ok(RunReport {
        output_dir: out,
        files,
    })
}

struct SweepAxes {
    n: Vec<usize>,
    nu: Vec<f64>,
    gamma: Vec<f64>,
}

impl SweepAxes {
    fn new(sweep: &SweepConfig, noise: &super::config::NoiseConfig, config: &ExperimentConfig) -> Self {
        let n = if sweep.n.is_empty() {
            vec![config
                .graph
                .as_ref()
                .and_then(|g| g.n)
                .unwrap_or(0)]
        } else {
            sweep.n.clone()
        };
        let nu = if sweep.nu.is_empty() {
            vec![noise.nu]
        } else {
            sweep.nu.clone()
        };
        let gamma = if sweep.gamma.is_empty() {
            vec![noise.gamma]
        } else {
            sweep.gamma.clone()
        };
        SweepAxes { n, nu, gamma }
    }
}

/// Interaction preset names used in summaries.
pub fn interaction_label(kind: InteractionKind) -> &'static str {
    match kind {
        InteractionKind::None => "none",
        InteractionKind::OnSite => "on-site",
        InteractionKind::NearestNeighbor => "nearest-neighbor",
    }
}

/// Thread-count resolution: environment beats config; 0 keeps the rayon
/// default (one worker per core).
pub fn resolve_threads(config_threads: usize) -> usize {
    std::env::var("PERQWALK_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(config_threads)
}
