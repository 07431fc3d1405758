//! Random telegraph noise: dichotomic sources flipping at Poisson rate
//! `gamma`, spatial correlation domains over chain edges, and the noise
//! specification consumed by the dynamics engine.
//!
//! Every random draw comes from a counter-based stream addressed by
//! `(master seed, trajectory index, source slot)`, so ensembles are
//! reproducible independently of execution order and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One realization of a telegraph source over `[0, horizon]`.
///
/// The value starts at `initial_sign` and flips at each switch time; switch
/// times are strictly increasing within `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RtnTrajectory {
    initial_sign: i8,
    switch_times: Vec<f64>,
    horizon: f64,
}

impl RtnTrajectory {
    /// Build from explicit switch times (mostly useful in tests).
    pub fn new(initial_sign: i8, switch_times: Vec<f64>, horizon: f64) -> Result<Self> {
        if initial_sign != 1 && initial_sign != -1 {
            return Err(Error::InvalidParam {
                name: "initial_sign",
                msg: format!("must be +1 or -1, got {initial_sign}"),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParam {
                name: "horizon",
                msg: format!("must be positive and finite, got {horizon}"),
            });
        }
        let ordered = switch_times.windows(2).all(|w| w[0] < w[1]);
        let in_range = switch_times
            .iter()
            .all(|&t| t > 0.0 && t <= horizon && t.is_finite());
        if !ordered || !in_range {
            return Err(Error::InvalidParam {
                name: "switch_times",
                msg: "must be strictly increasing within (0, horizon]".into(),
            });
        }
        Ok(Self {
            initial_sign,
            switch_times,
            horizon,
        })
    }

    /// A constant trajectory with no switches.
    pub fn constant(sign: i8, horizon: f64) -> Result<Self> {
        Self::new(sign, Vec::new(), horizon)
    }

    pub fn initial_sign(&self) -> i8 {
        self.initial_sign
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn switch_count(&self) -> usize {
        self.switch_times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Source value at time `t`: `initial_sign * (-1)^(#switches <= t)`.
    pub fn value_at(&self, t: f64) -> Result<i8> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let flips = self.switch_times.partition_point(|&s| s <= t);
        Ok(if flips % 2 == 0 {
            self.initial_sign
        } else {
            -self.initial_sign
        })
    }
}

/// Sample an RTN trajectory: stationary `±1` start, switch times a Poisson
/// process of rate `gamma` drawn by exponential inter-arrival times.
pub fn sample_trajectory(gamma: f64, horizon: f64, rng: &mut impl Rng) -> Result<RtnTrajectory> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParam {
            name: "gamma",
            msg: format!("must be non-negative and finite, got {gamma}"),
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParam {
            name: "horizon",
            msg: format!("must be positive and finite, got {horizon}"),
        });
    }
    let initial_sign = if rng.random::<bool>() { 1 } else { -1 };
    let mut switch_times = Vec::new();
    if gamma > 0.0 {
        let mut t = 0.0;
        loop {
            // u in (0, 1]; -ln(u)/gamma is Exp(gamma)
            let u = 1.0 - rng.random::<f64>();
            t += -u.ln() / gamma;
            if t > horizon {
                break;
            }
            switch_times.push(t);
        }
    }
    RtnTrajectory::new(initial_sign, switch_times, horizon)
}

/// Partition of a chain's edge sequence into contiguous synchronized blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainPartition {
    assignment: Vec<usize>,
    domains: usize,
}

impl DomainPartition {
    /// Build from per-edge domain indices; blocks must be contiguous and
    /// numbered consecutively from 0.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidParam {
                name: "assignment",
                msg: "needs at least one edge".into(),
            });
        }
        let mut current = 0usize;
        for (i, &d) in assignment.iter().enumerate() {
            let ok = if i == 0 {
                d == 0
            } else {
                d == current || d == current + 1
            };
            if !ok {
                return Err(Error::InvalidParam {
                    name: "assignment",
                    msg: format!("domain indices must form contiguous blocks, bad entry at edge {i}"),
                });
            }
            current = d;
        }
        Ok(Self {
            domains: current + 1,
            assignment,
        })
    }

    /// Single domain covering all edges.
    pub fn uniform(n_edges: usize) -> Result<Self> {
        Self::new(vec![0; n_edges])
    }

    pub fn n_edges(&self) -> usize {
        self.assignment.len()
    }

    /// Number of domains `M`.
    pub fn domain_count(&self) -> usize {
        self.domains
    }

    /// Domain index governing each edge, in edge-sequence order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Lengths of the contiguous blocks.
    pub fn block_lengths(&self) -> Vec<usize> {
        let mut lengths = vec![0usize; self.domains];
        for &d in &self.assignment {
            lengths[d] += 1;
        }
        lengths
    }
}

/// Draw a domain partition: each of the `n_edges - 1` neighbor boundaries is
/// merged independently with probability `p`.
pub fn sample_domains(n_edges: usize, p: f64, rng: &mut impl Rng) -> Result<DomainPartition> {
    if n_edges < 1 {
        return Err(Error::InvalidParam {
            name: "n_edges",
            msg: "needs at least one edge".into(),
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam {
            name: "p",
            msg: format!("must be in [0, 1], got {p}"),
        });
    }
    let mut assignment = Vec::with_capacity(n_edges);
    let mut current = 0usize;
    assignment.push(0);
    for _ in 1..n_edges {
        if !(rng.random::<f64>() < p) {
            current += 1;
        }
        assignment.push(current);
    }
    DomainPartition::new(assignment)
}

/// Expected domain length `sum_{k=0}^{n-1} p^k` (equals `(p^n - 1)/(p - 1)`
/// away from `p = 1`, and `n` there).
pub fn mean_domain_length(p: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    let mut term = 1.0;
    for _ in 0..n {
        acc += term;
        term *= p;
    }
    acc
}

/// Which couplings the noise acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTarget {
    /// Edge (tunneling) amplitudes fluctuate; this is percolation proper.
    Tunneling,
    /// On-site energies fluctuate.
    OnSite,
    /// Both edges and on-site energies fluctuate, independently.
    Both,
}

impl NoiseTarget {
    pub fn affects_edges(self) -> bool {
        matches!(self, NoiseTarget::Tunneling | NoiseTarget::Both)
    }

    pub fn affects_nodes(self) -> bool {
        matches!(self, NoiseTarget::OnSite | NoiseTarget::Both)
    }
}

/// Full description of a noise environment.
///
/// `nu` is the strength in units of the base coupling, `gamma` the switching
/// (percolation) rate, `correlation_p` the neighbor-edge merge probability
/// for spatial domains (chain topologies only), and `seed` the master seed
/// for all derived streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub nu: f64,
    pub gamma: f64,
    pub correlation_p: f64,
    pub target: NoiseTarget,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(nu: f64, gamma: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            nu,
            gamma,
            correlation_p: 0.0,
            target: NoiseTarget::Tunneling,
            seed,
        };
        spec.validate(1.0)?;
        Ok(spec)
    }

    /// A strength-zero spec; the dynamics engine skips sampling entirely.
    pub fn noiseless() -> Self {
        Self {
            nu: 0.0,
            gamma: 1.0,
            correlation_p: 0.0,
            target: NoiseTarget::Tunneling,
            seed: 0,
        }
    }

    pub fn with_correlation(mut self, p: f64) -> Result<Self> {
        self.correlation_p = p;
        self.validate(1.0)?;
        Ok(self)
    }

    pub fn with_target(mut self, target: NoiseTarget) -> Self {
        self.target = target;
        self
    }

    /// Check parameter ranges against the base coupling `j0`
    /// (`0 <= nu <= j0`, `gamma > 0` unless `nu = 0`, `p` a probability).
    pub fn validate(&self, j0: f64) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu <= j0) {
            return Err(Error::InvalidParam {
                name: "nu",
                msg: format!("must satisfy 0 <= nu <= {j0}, got {}", self.nu),
            });
        }
        if self.nu > 0.0 && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParam {
                name: "gamma",
                msg: format!("must be positive and finite, got {}", self.gamma),
            });
        }
        if !(0.0..=1.0).contains(&self.correlation_p) {
            return Err(Error::InvalidParam {
                name: "correlation_p",
                msg: format!("must be in [0, 1], got {}", self.correlation_p),
            });
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.nu == 0.0
    }
}

/// Stream slot reserved for the domain-partition draw of a trajectory.
pub(crate) const DOMAIN_SLOT: u64 = 0;

/// RNG for one `(trajectory, slot)` address. Slot 0 draws the domain
/// partition; source `s` uses slot `s + 1`.
pub fn stream_rng(seed: u64, trajectory: u64, slot: u64) -> ChaCha8Rng {
    debug_assert!(slot < 1 << 24);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trajectory << 24) | slot);
    rng
}

/// RNG for noise source `s` of one trajectory.
pub fn source_rng(seed: u64, trajectory: u64, source: usize) -> ChaCha8Rng {
    stream_rng(seed, trajectory, source as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_never_switches() {
        let mut rng = stream_rng(1, 0, 1);
        let traj = sample_trajectory(0.0, 10.0, &mut rng).unwrap();
        assert_eq!(traj.switch_count(), 0);
        assert_eq!(traj.value_at(0.0).unwrap(), traj.value_at(10.0).unwrap());
    }

    #[test]
    fn value_at_follows_flips() {
        let traj = RtnTrajectory::new(1, vec![1.0, 2.0], 5.0).unwrap();
        assert_eq!(traj.value_at(0.0).unwrap(), 1);
        assert_eq!(traj.value_at(1.5).unwrap(), -1);
        assert_eq!(traj.value_at(2.5).unwrap(), 1);
        // boundary: a switch at exactly t counts
        assert_eq!(traj.value_at(1.0).unwrap(), -1);
        assert!(traj.value_at(5.1).is_err());
        assert!(traj.value_at(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = stream_rng(1, 0, 1);
        assert!(sample_trajectory(-1.0, 1.0, &mut rng).is_err());
        assert!(sample_trajectory(1.0, 0.0, &mut rng).is_err());
        assert!(RtnTrajectory::new(2, vec![], 1.0).is_err());
        assert!(RtnTrajectory::new(1, vec![0.5, 0.5], 1.0).is_err());
        assert!(RtnTrajectory::new(1, vec![1.5], 1.0).is_err());
    }

    #[test]
    fn poisson_switch_count_mean() {
        // gamma=1, horizon=10: mean count 10 within 3 sigma for 10^4 samples.
        let samples = 10_000;
        let mut total = 0usize;
        for m in 0..samples {
            let mut rng = source_rng(7, m, 0);
            total += sample_trajectory(1.0, 10.0, &mut rng).unwrap().switch_count();
        }
        let mean = total as f64 / samples as f64;
        let tol = 3.0 * (10.0 / samples as f64).sqrt();
        assert!((mean - 10.0).abs() < tol, "mean {mean} vs 10 +/- {tol}");
    }

    #[test]
    fn poisson_switch_count_variance() {
        // gamma=0.5, horizon=4: variance equals the mean (2) for a Poisson
        // count; tolerance is 3 standard errors of the sample variance.
        let samples = 100_000;
        let counts: Vec<f64> = (0..samples)
            .map(|m| {
                let mut rng = source_rng(11, m, 0);
                sample_trajectory(0.5, 4.0, &mut rng).unwrap().switch_count() as f64
            })
            .collect();
        let n = samples as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = counts.iter().map(|c| (c - mean).powi(4)).sum::<f64>() / n;
        let se_var = ((m4 - var * var) / n).sqrt();
        assert!(
            (var - 2.0).abs() < 3.0 * se_var,
            "variance {var} vs 2 +/- {}",
            3.0 * se_var
        );
    }

    #[test]
    fn stationary_autocorrelation() {
        // <X(1)X(0)> = e^{-2 gamma} at gamma = 0.5.
        let samples = 100_000;
        let mut acc = 0.0;
        for m in 0..samples {
            let mut rng = source_rng(3, m, 0);
            let traj = sample_trajectory(0.5, 2.0, &mut rng).unwrap();
            acc += (traj.value_at(0.0).unwrap() as f64) * (traj.value_at(1.0).unwrap() as f64);
        }
        let c = acc / samples as f64;
        let expect = (-1.0f64).exp();
        assert!((c - expect).abs() < 0.02, "C(1) = {c} vs {expect}");
    }

    #[test]
    fn trajectories_are_reproducible() {
        let a = sample_trajectory(2.0, 8.0, &mut source_rng(42, 5, 3)).unwrap();
        let b = sample_trajectory(2.0, 8.0, &mut source_rng(42, 5, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample_trajectory(2.0, 8.0, &mut source_rng(42, 5, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn domain_endpoints() {
        let mut rng = stream_rng(1, 0, DOMAIN_SLOT);
        let all_separate = sample_domains(6, 0.0, &mut rng).unwrap();
        assert_eq!(all_separate.domain_count(), 6);
        let merged = sample_domains(6, 1.0, &mut rng).unwrap();
        assert_eq!(merged.domain_count(), 1);
    }

    #[test]
    fn domain_distribution_matches_formula() {
        // P_M = C(3, M-1) (1-p)^{M-1} p^{4-M} at p = 1/2, four edges:
        // {1/8, 3/8, 3/8, 1/8}.
        let samples = 100_000usize;
        let mut hist = [0usize; 4];
        for m in 0..samples {
            let mut rng = stream_rng(19, m as u64, DOMAIN_SLOT);
            let part = sample_domains(4, 0.5, &mut rng).unwrap();
            hist[part.domain_count() - 1] += 1;
        }
        let expected = [0.125, 0.375, 0.375, 0.125];
        let chi2: f64 = hist
            .iter()
            .zip(expected)
            .map(|(&o, p)| {
                let e = p * samples as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 1% critical value of chi-square with 3 dof
        assert!(chi2 < 11.345, "chi2 = {chi2}");
    }

    #[test]
    fn mean_domain_length_values() {
        assert_eq!(mean_domain_length(0.0, 9), 1.0);
        assert_eq!(mean_domain_length(1.0, 7), 7.0);
        assert!((mean_domain_length(0.5, 4) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn empirical_block_length_matches_mean_domain_length() {
        // mean over realizations of (n_edges / M) converges to L-bar
        let samples = 200_000;
        let (p, n_edges) = (0.5, 4);
        let mut acc = 0.0;
        for m in 0..samples {
            let mut rng = stream_rng(23, m, DOMAIN_SLOT);
            let part = sample_domains(n_edges, p, &mut rng).unwrap();
            acc += n_edges as f64 / part.domain_count() as f64;
        }
        let mean = acc / samples as f64;
        let expect = mean_domain_length(p, n_edges);
        assert!((mean - expect).abs() < 0.01, "{mean} vs {expect}");
    }

    #[test]
    fn partition_validation() {
        assert!(DomainPartition::new(vec![0, 0, 1, 1, 2]).is_ok());
        assert!(DomainPartition::new(vec![0, 2]).is_err());
        assert!(DomainPartition::new(vec![1, 1]).is_err());
        assert!(DomainPartition::new(vec![]).is_err());
        let part = DomainPartition::new(vec![0, 0, 1]).unwrap();
        assert_eq!(part.block_lengths(), vec![2, 1]);
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new(0.5, 1.0, 0).is_ok());
        assert!(NoiseSpec::new(-0.1, 1.0, 0).is_err());
        assert!(NoiseSpec::new(1.1, 1.0, 0).is_err());
        assert!(NoiseSpec::new(0.5, 0.0, 0).is_err());
        assert!(NoiseSpec::new(0.5, 1.0, 0).unwrap().with_correlation(1.5).is_err());
        // gamma is irrelevant when nu = 0
        assert!(NoiseSpec::noiseless().validate(1.0).is_ok());
    }
}
