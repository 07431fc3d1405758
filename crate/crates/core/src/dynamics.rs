//! Noisy walk dynamics: Hamiltonian assembly, exact event-driven propagation
//! of single trajectories, and Monte Carlo ensemble averaging.
//!
//! The generator is
//! `H(t) = sum_j (J0 d_j + nu X_j(t)) |j><j| - sum_(j,k) (J0 + nu X_jk(t)) |j><k|`
//! over the graph's edges, optionally minus the search oracle `|w><w|`.
//! All quantities are expressed in units of `J0`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::graph::Graph;
use crate::noise::{
    sample_domains, sample_trajectory, source_rng, stream_rng, NoiseSpec, RtnTrajectory,
    DOMAIN_SLOT,
};
use crate::observables::signed_displacement;
use crate::operator::{edge_source_count, NoisyOperator};
use crate::propagator::{evolve_sampled, merge_events};
use crate::{Error, Result};

pub use crate::propagator::Method;

/// The walk generator: graph, base coupling, noise environment, and an
/// optional rank-one search oracle.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub graph: Graph,
    pub j0: f64,
    pub noise: NoiseSpec,
    /// Target node of the `-|w><w|` oracle term, when searching.
    pub oracle: Option<usize>,
}

impl HamiltonianSpec {
    /// Spec with the conventional `J0 = 1`.
    pub fn new(graph: Graph, noise: NoiseSpec) -> Result<Self> {
        Self::with_coupling(graph, 1.0, noise)
    }

    /// Spec with an explicit base coupling (used by search, where `J0 = J`).
    pub fn with_coupling(graph: Graph, j0: f64, noise: NoiseSpec) -> Result<Self> {
        if !(j0 > 0.0) || !j0.is_finite() {
            return Err(Error::InvalidParam {
                name: "j0",
                msg: format!("must be positive and finite, got {j0}"),
            });
        }
        noise.validate(j0)?;
        Ok(Self {
            graph,
            j0,
            noise,
            oracle: None,
        })
    }

    pub fn with_oracle(mut self, target: usize) -> Result<Self> {
        if target >= self.graph.node_count() {
            return Err(Error::NodeOutOfRange {
                node: target,
                n: self.graph.node_count(),
            });
        }
        self.oracle = Some(target);
        Ok(self)
    }

    /// Number of independent noise sources in the default (domain-free)
    /// layout: one per edge and/or one per node, zero when `nu = 0`.
    pub fn n_sources(&self) -> usize {
        if self.noise.is_noiseless() {
            return 0;
        }
        let nodes = if self.noise.target.affects_nodes() {
            self.graph.node_count()
        } else {
            0
        };
        edge_source_count(self) + nodes
    }

    /// Identity edge-to-source mapping for the domain-free layout.
    fn default_edge_mapping(&self) -> Vec<usize> {
        if self.noise.is_noiseless() || !self.noise.target.affects_edges() {
            vec![0; 0]
        } else {
            (0..self.graph.edge_count()).collect()
        }
    }

    pub(crate) fn operator(
        &self,
        edge_to_source: &[usize],
        n_sources: usize,
        signs: &[i8],
    ) -> Result<NoisyOperator> {
        NoisyOperator::new(self, edge_to_source, n_sources, signs)
    }
}

/// Assemble the dense Hamiltonian for a frozen snapshot of source values
/// (one `+/-1` per source in the default layout: edges first, then nodes).
pub fn assemble_hamiltonian(spec: &HamiltonianSpec, source_values: &[i8]) -> Result<Array2<f64>> {
    let expected = spec.n_sources();
    if source_values.len() != expected {
        return Err(Error::SourceCountMismatch {
            expected,
            got: source_values.len(),
        });
    }
    if source_values.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidParam {
            name: "source_values",
            msg: "entries must be +1 or -1".into(),
        });
    }
    let mapping = spec.default_edge_mapping();
    let n_edge_sources = mapping.len();
    debug_assert!(n_edge_sources == 0 || n_edge_sources == spec.graph.edge_count());
    Ok(spec
        .operator(&mapping, expected, source_values)?
        .snapshot())
}

/// Normalized complex amplitudes over the graph's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Array1<Complex64>,
}

const NORM_TOL: f64 = 1e-8;

impl StateVector {
    /// Wrap amplitudes, rejecting vectors whose norm deviates from 1 by more
    /// than `1e-8`.
    pub fn new(amps: Array1<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedState { norm });
        }
        Ok(Self { amps })
    }

    /// Walker localized on one site.
    pub fn localized(n: usize, site: usize) -> Result<Self> {
        if site >= n {
            return Err(Error::NodeOutOfRange { node: site, n });
        }
        let mut amps = Array1::default(n);
        amps[site] = Complex64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// Uniform superposition `|s>` over all nodes.
    pub fn uniform(n: usize) -> Self {
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        Self {
            amps: Array1::from_elem(n, a),
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Array1<f64> {
        self.amps.mapv(|a| a.norm_sqr())
    }

    pub(crate) fn from_raw(amps: Vec<Complex64>) -> Self {
        Self {
            amps: Array1::from_vec(amps),
        }
    }
}

/// Gaussian wavepacket `exp(-(j - n/2)^2 / (2 delta^2)) exp(-i p0 j)`,
/// renormalized numerically. Its centroid moves with group velocity
/// `-2 J0 sin(p0)` on the line.
pub fn gaussian_packet(n: usize, delta: f64, p0: f64) -> Result<StateVector> {
    if n < 3 {
        return Err(Error::GraphTooSmall { min: 3, got: n });
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParam {
            name: "delta",
            msg: format!("must be positive, got {delta}"),
        });
    }
    let center = n as f64 / 2.0;
    let mut amps: Vec<Complex64> = (0..n)
        .map(|j| {
            let x = j as f64 - center;
            let mag = (-x * x / (2.0 * delta * delta)).exp();
            mag * Complex64::from_polar(1.0, -p0 * j as f64)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    Ok(StateVector::from_raw(amps))
}

fn validate_sample_times(sample_times: &[f64]) -> Result<()> {
    let ok = !sample_times.is_empty()
        && sample_times.iter().all(|t| t.is_finite() && *t >= 0.0)
        && sample_times.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::BadSampleTimes)
    }
}

/// Propagate one noise realization, returning the state at each sample time.
///
/// `trajectories` supplies one realization per source in the default layout
/// (edge sources in edge order, then node sources). Propagation is exact on
/// each inter-switch interval; sample times are hit by splitting the
/// enclosing interval, never by interpolation.
pub fn evolve_trajectory(
    spec: &HamiltonianSpec,
    trajectories: &[RtnTrajectory],
    psi0: &StateVector,
    sample_times: &[f64],
) -> Result<Vec<StateVector>> {
    evolve_trajectory_with(spec, trajectories, psi0, sample_times, Method::Auto)
}

/// [`evolve_trajectory`] with an explicit stepper choice.
pub fn evolve_trajectory_with(
    spec: &HamiltonianSpec,
    trajectories: &[RtnTrajectory],
    psi0: &StateVector,
    sample_times: &[f64],
    method: Method,
) -> Result<Vec<StateVector>> {
    let n = spec.graph.node_count();
    if psi0.len() != n {
        return Err(Error::InvalidParam {
            name: "psi0",
            msg: format!("expected {n} amplitudes, got {}", psi0.len()),
        });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::UnnormalizedState { norm });
    }
    validate_sample_times(sample_times)?;
    let expected = spec.n_sources();
    if trajectories.len() != expected {
        return Err(Error::SourceCountMismatch {
            expected,
            got: trajectories.len(),
        });
    }
    let t_end = *sample_times.last().unwrap();
    for traj in trajectories {
        if traj.horizon() < t_end {
            return Err(Error::TimeOutOfRange {
                t: t_end,
                horizon: traj.horizon(),
            });
        }
    }

    let signs: Vec<i8> = trajectories.iter().map(|t| t.initial_sign()).collect();
    let mapping = spec.default_edge_mapping();
    let mut op = spec.operator(&mapping, expected, &signs)?;
    let events = merge_events(trajectories);
    let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut out = Vec::with_capacity(sample_times.len());
    evolve_sampled(
        &mut op,
        &events,
        sample_times,
        &mut psi,
        method,
        &mut |_, state| out.push(StateVector::from_raw(state.to_vec())),
    )?;
    Ok(out)
}

/// Knobs for [`ensemble_average`].
#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    /// Also accumulate the averaged density matrix at every sample time
    /// (costs `O(n^2)` memory per sample time).
    pub accumulate_rho: bool,
    /// Origin for displacement moments; defaults to `n / 2`.
    pub origin: Option<usize>,
    /// Node whose occupation is tracked as the target probability; defaults
    /// to the spec's oracle target.
    pub target: Option<usize>,
    pub method: Method,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            accumulate_rho: false,
            origin: None,
            target: None,
            method: Method::Auto,
        }
    }
}

/// Monte Carlo averages over noise (and domain) realizations.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub sample_times: Vec<f64>,
    /// Ensemble-averaged position distribution at each sample time.
    pub mean_distribution: Vec<Array1<f64>>,
    /// Variance of the averaged state's position, displacement taken from
    /// the run origin with ring unwrapping.
    pub variance: Vec<f64>,
    pub variance_stderr: Vec<f64>,
    /// Averaged occupation of the target node, when one is set.
    pub target_prob: Option<Vec<f64>>,
    pub target_prob_stderr: Option<Vec<f64>>,
    /// Averaged density matrix per sample time, when requested.
    pub rho: Option<Vec<Array2<Complex64>>>,
    pub trajectories: usize,
    pub origin: usize,
}

/// Per-trajectory observable track, accumulated in trajectory order.
struct TrajTrack {
    dist: Vec<Array1<f64>>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    pw: Vec<f64>,
    rho: Option<Vec<Array2<Complex64>>>,
}

/// Trajectories per parallel batch; fixed so that the reduction order (and
/// hence every last bit of the output) is independent of thread count.
const BATCH: usize = 32;

/// Average observables over `m_trajectories` noise realizations.
///
/// Per-trajectory RNG streams are derived from `(noise.seed, trajectory,
/// source)`, domains are redrawn per trajectory when `correlation_p > 0`,
/// and partial results are reduced in trajectory order: the output is
/// bitwise reproducible for a fixed spec regardless of parallelism.
pub fn ensemble_average(
    spec: &HamiltonianSpec,
    m_trajectories: usize,
    psi0: &StateVector,
    sample_times: &[f64],
    options: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if m_trajectories < 1 {
        return Err(Error::InvalidParam {
            name: "m_trajectories",
            msg: "need at least one trajectory".into(),
        });
    }
    let n = spec.graph.node_count();
    if psi0.len() != n {
        return Err(Error::InvalidParam {
            name: "psi0",
            msg: format!("expected {n} amplitudes, got {}", psi0.len()),
        });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::UnnormalizedState { norm });
    }
    validate_sample_times(sample_times)?;
    let use_domains = spec.noise.correlation_p > 0.0
        && !spec.noise.is_noiseless()
        && spec.noise.target.affects_edges();
    if use_domains && !spec.graph.is_chain_like() {
        return Err(Error::InvalidParam {
            name: "correlation_p",
            msg: "spatial correlation domains are only defined on line/ring graphs".into(),
        });
    }
    let origin = options.origin.unwrap_or(n / 2);
    if origin >= n {
        return Err(Error::NodeOutOfRange { node: origin, n });
    }
    let target = options.target.or(spec.oracle);
    if let Some(w) = target {
        if w >= n {
            return Err(Error::NodeOutOfRange { node: w, n });
        }
    }

    let horizon = *sample_times.last().unwrap();
    let n_samples = sample_times.len();
    let displacement: Vec<f64> = (0..n).map(|k| signed_displacement(n, origin, k)).collect();

    let run_one = |m: usize| -> Result<TrajTrack> {
        let mut track = TrajTrack {
            dist: Vec::with_capacity(n_samples),
            m1: Vec::with_capacity(n_samples),
            m2: Vec::with_capacity(n_samples),
            pw: Vec::with_capacity(n_samples),
            rho: options.accumulate_rho.then(Vec::new),
        };
        let record = |track: &mut TrajTrack, state: &[Complex64]| {
            let mut dist = Array1::zeros(n);
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for (k, a) in state.iter().enumerate() {
                let p = a.norm_sqr();
                dist[k] = p;
                let d = displacement[k];
                m1 += d * p;
                m2 += d * d * p;
            }
            track.pw.push(target.map_or(0.0, |w| dist[w]));
            track.dist.push(dist);
            track.m1.push(m1);
            track.m2.push(m2);
            if let Some(rhos) = &mut track.rho {
                let mut outer = Array2::default((n, n));
                for (i, ai) in state.iter().enumerate() {
                    for (j, aj) in state.iter().enumerate() {
                        outer[[i, j]] = ai * aj.conj();
                    }
                }
                rhos.push(outer);
            }
        };

        if spec.noise.is_noiseless() {
            let mut op = spec.operator(&[], 0, &[])?;
            let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
            evolve_sampled(
                &mut op,
                &[],
                sample_times,
                &mut psi,
                options.method,
                &mut |_, state| record(&mut track, state),
            )?;
            return Ok(track);
        }

        let seed = spec.noise.seed;
        let n_edges = spec.graph.edge_count();
        let edge_noise = spec.noise.target.affects_edges();
        let (edge_mapping, n_edge_sources) = if !edge_noise {
            (Vec::new(), 0)
        } else if use_domains {
            let mut rng = stream_rng(seed, m as u64, DOMAIN_SLOT);
            let partition = sample_domains(n_edges, spec.noise.correlation_p, &mut rng)?;
            let m_domains = partition.domain_count();
            (partition.assignment().to_vec(), m_domains)
        } else {
            ((0..n_edges).collect(), n_edges)
        };
        let n_node_sources = if spec.noise.target.affects_nodes() { n } else { 0 };
        let n_sources = n_edge_sources + n_node_sources;

        let trajectories: Vec<RtnTrajectory> = (0..n_sources)
            .map(|s| {
                sample_trajectory(spec.noise.gamma, horizon, &mut source_rng(seed, m as u64, s))
            })
            .collect::<Result<_>>()?;
        let signs: Vec<i8> = trajectories.iter().map(|t| t.initial_sign()).collect();
        let mut op = spec.operator(&edge_mapping, n_sources, &signs)?;
        let events = merge_events(&trajectories);
        let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
        evolve_sampled(
            &mut op,
            &events,
            sample_times,
            &mut psi,
            options.method,
            &mut |_, state| record(&mut track, state),
        )?;
        Ok(track)
    };

    // accumulators
    let mut dist_sum: Vec<Array1<f64>> = vec![Array1::zeros(n); n_samples];
    let mut s_m1 = vec![0.0; n_samples];
    let mut s_m2 = vec![0.0; n_samples];
    let mut s_m1m1 = vec![0.0; n_samples];
    let mut s_m2m2 = vec![0.0; n_samples];
    let mut s_m1m2 = vec![0.0; n_samples];
    let mut s_pw = vec![0.0; n_samples];
    let mut s_pwpw = vec![0.0; n_samples];
    let mut rho_sum: Option<Vec<Array2<Complex64>>> = options
        .accumulate_rho
        .then(|| vec![Array2::default((n, n)); n_samples]);

    let mut start = 0usize;
    while start < m_trajectories {
        let end = (start + BATCH).min(m_trajectories);
        let tracks: Vec<Result<TrajTrack>> = (start..end).into_par_iter().map(run_one).collect();
        for track in tracks {
            let track = track?;
            for i in 0..n_samples {
                dist_sum[i] += &track.dist[i];
                s_m1[i] += track.m1[i];
                s_m2[i] += track.m2[i];
                s_m1m1[i] += track.m1[i] * track.m1[i];
                s_m2m2[i] += track.m2[i] * track.m2[i];
                s_m1m2[i] += track.m1[i] * track.m2[i];
                s_pw[i] += track.pw[i];
                s_pwpw[i] += track.pw[i] * track.pw[i];
            }
            if let (Some(acc), Some(rhos)) = (&mut rho_sum, &track.rho) {
                for (a, r) in acc.iter_mut().zip(rhos) {
                    *a += r;
                }
            }
        }
        start = end;
    }

    let m = m_trajectories as f64;
    let mut mean_distribution = Vec::with_capacity(n_samples);
    for d in dist_sum {
        mean_distribution.push(d / m);
    }
    let mut variance = Vec::with_capacity(n_samples);
    let mut variance_stderr = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mu1 = s_m1[i] / m;
        let mu2 = s_m2[i] / m;
        variance.push(mu2 - mu1 * mu1);
        if m_trajectories > 1 {
            let var_m1 = (s_m1m1[i] / m - mu1 * mu1).max(0.0);
            let var_m2 = (s_m2m2[i] / m - mu2 * mu2).max(0.0);
            let cov = s_m1m2[i] / m - mu1 * mu2;
            // delta method for V = mu2 - mu1^2
            let v = (var_m2 + 4.0 * mu1 * mu1 * var_m1 - 4.0 * mu1 * cov).max(0.0);
            variance_stderr.push((v / (m - 1.0)).sqrt());
        } else {
            variance_stderr.push(0.0);
        }
    }
    let (target_prob, target_prob_stderr) = if target.is_some() {
        let mut mean = Vec::with_capacity(n_samples);
        let mut se = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let mu = s_pw[i] / m;
            mean.push(mu);
            if m_trajectories > 1 {
                let var = (s_pwpw[i] / m - mu * mu).max(0.0);
                se.push((var / (m - 1.0)).sqrt());
            } else {
                se.push(0.0);
            }
        }
        (Some(mean), Some(se))
    } else {
        (None, None)
    };
    let rho = rho_sum.map(|acc| {
        acc.into_iter()
            .map(|r| r.mapv(|v| v / m))
            .collect::<Vec<_>>()
    });

    Ok(EnsembleResult {
        sample_times: sample_times.to_vec(),
        mean_distribution,
        variance,
        variance_stderr,
        target_prob,
        target_prob_stderr,
        rho,
        trajectories: m_trajectories,
        origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseTarget;

    #[test]
    fn assemble_reduces_to_laplacian_when_noiseless() {
        let graph = Graph::line(6, true).unwrap();
        let spec = HamiltonianSpec::new(graph.clone(), NoiseSpec::noiseless()).unwrap();
        let h = assemble_hamiltonian(&spec, &[]).unwrap();
        let want = graph.laplacian().mapv(|v| -v);
        assert_eq!(h, want);
    }

    #[test]
    fn assemble_ring_half_strength() {
        // ring n=3, nu=0.5, all edge values +1: off-diagonals -1.5, diagonal 2
        let graph = Graph::line(3, true).unwrap();
        let noise = NoiseSpec::new(0.5, 1.0, 0).unwrap();
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        let h = assemble_hamiltonian(&spec, &[1, 1, 1]).unwrap();
        for j in 0..3 {
            assert_eq!(h[[j, j]], 2.0);
            for k in 0..3 {
                if j != k {
                    assert_eq!(h[[j, k]], -1.5);
                }
            }
        }
    }

    #[test]
    fn assemble_rejects_bad_values() {
        let graph = Graph::line(3, false).unwrap();
        let noise = NoiseSpec::new(1.0, 1.0, 0).unwrap();
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        assert!(matches!(
            assemble_hamiltonian(&spec, &[1]),
            Err(Error::SourceCountMismatch { expected: 2, got: 1 })
        ));
        assert!(assemble_hamiltonian(&spec, &[1, 0]).is_err());
    }

    #[test]
    fn oracle_shifts_one_diagonal_entry() {
        let graph = Graph::complete(4).unwrap();
        let spec = HamiltonianSpec::new(graph.clone(), NoiseSpec::noiseless())
            .unwrap()
            .with_oracle(2)
            .unwrap();
        let h = assemble_hamiltonian(&spec, &[]).unwrap();
        let base = graph.laplacian().mapv(|v| -v);
        assert_eq!(h[[2, 2]], base[[2, 2]] - 1.0);
        assert_eq!(h[[0, 0]], base[[0, 0]]);
    }

    #[test]
    fn evolve_at_time_zero_is_identity() {
        let graph = Graph::line(5, true).unwrap();
        let spec = HamiltonianSpec::new(graph, NoiseSpec::noiseless()).unwrap();
        let psi0 = gaussian_packet(5, 1.0, 0.3).unwrap();
        let out = evolve_trajectory(&spec, &[], &psi0, &[0.0]).unwrap();
        for (a, b) in out[0].amplitudes().iter().zip(psi0.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn evolve_validates_inputs() {
        let graph = Graph::line(4, false).unwrap();
        let noise = NoiseSpec::new(1.0, 1.0, 3).unwrap();
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        let psi0 = StateVector::localized(4, 1).unwrap();
        // wrong source count
        assert!(matches!(
            evolve_trajectory(&spec, &[], &psi0, &[1.0]),
            Err(Error::SourceCountMismatch { expected: 3, .. })
        ));
        // unnormalized state
        let bad = Array1::from_vec(vec![Complex64::new(0.6, 0.0); 4]);
        assert!(StateVector::new(bad).is_err());
        // sample beyond horizon
        let trajs: Vec<RtnTrajectory> = (0..3)
            .map(|s| sample_trajectory(1.0, 2.0, &mut source_rng(3, 0, s)).unwrap())
            .collect();
        assert!(matches!(
            evolve_trajectory(&spec, &trajs, &psi0, &[3.0]),
            Err(Error::TimeOutOfRange { .. })
        ));
        // unsorted samples
        assert!(matches!(
            evolve_trajectory(&spec, &trajs, &psi0, &[1.0, 0.5]),
            Err(Error::BadSampleTimes)
        ));
    }

    #[test]
    fn gaussian_packet_shape() {
        let psi = gaussian_packet(64, 4.0, 0.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let a = psi.amplitudes();
        for j in 0..64 {
            assert!(a[j].im.abs() < 1e-15, "p0=0 must be real");
        }
        // symmetric about n/2 = 32
        for k in 1..30 {
            assert!((a[32 - k].re - a[32 + k].re).abs() < 1e-12);
        }
        assert!(gaussian_packet(2, 1.0, 0.0).is_err());
        assert!(gaussian_packet(8, 0.0, 0.0).is_err());
    }

    #[test]
    fn ensemble_noiseless_matches_single_evolution() {
        let graph = Graph::line(9, true).unwrap();
        let spec = HamiltonianSpec::new(graph, NoiseSpec::noiseless()).unwrap();
        let psi0 = StateVector::localized(9, 4).unwrap();
        let times = [0.5, 1.0, 2.0];
        let single = evolve_trajectory(&spec, &[], &psi0, &times).unwrap();
        let ens = ensemble_average(&spec, 3, &psi0, &times, &EnsembleOptions::default()).unwrap();
        for (i, state) in single.iter().enumerate() {
            let p = state.probabilities();
            for k in 0..9 {
                assert!((ens.mean_distribution[i][k] - p[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ensemble_distributions_normalized_and_reproducible() {
        let graph = Graph::line(11, true).unwrap();
        let noise = NoiseSpec::new(1.0, 1.0, 99).unwrap();
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        let psi0 = StateVector::localized(11, 5).unwrap();
        let times = [1.0, 3.0];
        let opts = EnsembleOptions {
            accumulate_rho: true,
            ..Default::default()
        };
        let a = ensemble_average(&spec, 20, &psi0, &times, &opts).unwrap();
        let b = ensemble_average(&spec, 20, &psi0, &times, &opts).unwrap();
        for i in 0..times.len() {
            let total: f64 = a.mean_distribution[i].sum();
            assert!((total - 1.0).abs() < 1e-8);
            assert!(a.mean_distribution[i].iter().all(|&p| p >= 0.0));
            assert_eq!(a.mean_distribution[i], b.mean_distribution[i]);
            assert_eq!(a.variance[i].to_bits(), b.variance[i].to_bits());
            // density matrix: hermitian, unit trace, near-positive
            let rho = &a.rho.as_ref().unwrap()[i];
            assert!(crate::linalg::hermiticity_error(rho) < 1e-12);
            assert!((crate::linalg::trace(rho).re - 1.0).abs() < 1e-8);
            assert!(crate::linalg::hermitian_min_eigenvalue(rho) > -1e-6);
        }
    }

    #[test]
    fn ensemble_rejects_domains_off_chain() {
        let graph = Graph::complete(5).unwrap();
        let noise = NoiseSpec::new(1.0, 1.0, 1)
            .unwrap()
            .with_correlation(0.5)
            .unwrap();
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        let psi0 = StateVector::uniform(5);
        let err = ensemble_average(&spec, 2, &psi0, &[1.0], &EnsembleOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn onsite_noise_sources_counted() {
        let graph = Graph::line(4, false).unwrap();
        let noise = NoiseSpec::new(0.5, 1.0, 0)
            .unwrap()
            .with_target(NoiseTarget::Both);
        let spec = HamiltonianSpec::new(graph, noise).unwrap();
        assert_eq!(spec.n_sources(), 3 + 4);
        let only_sites = NoiseSpec::new(0.5, 1.0, 0)
            .unwrap()
            .with_target(NoiseTarget::OnSite);
        let spec = HamiltonianSpec::new(Graph::line(4, false).unwrap(), only_sites).unwrap();
        assert_eq!(spec.n_sources(), 4);
    }
}
