//! Two walkers on one noisy lattice: the generator is the Kronecker sum of
//! the single-particle noisy Hamiltonian with itself (both factors see the
//! same noise realization) plus a distance-dependent interaction, with
//! bosonic or fermionic exchange symmetry where requested.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::HamiltonianSpec;
use crate::noise::RtnTrajectory;
use crate::operator::TwoParticleOperator;
use crate::propagator::{evolve_sampled, merge_events, Method};
use crate::{Error, Result};

/// Exchange statistics of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Bosonic,
    Fermionic,
    Distinguishable,
}

/// Interaction energy as a function of the inter-particle distance
/// `d = |j - k|`; finite support only.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    values: BTreeMap<usize, f64>,
}

impl InteractionSpec {
    pub fn none() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    /// Contact interaction `u` at distance 0.
    pub fn on_site(u: f64) -> Self {
        Self::none().with_value(0, u)
    }

    /// Interaction `v` between adjacent sites.
    pub fn nearest_neighbor(v: f64) -> Self {
        Self::none().with_value(1, v)
    }

    pub fn with_value(mut self, distance: usize, energy: f64) -> Self {
        if energy != 0.0 {
            self.values.insert(distance, energy);
        }
        self
    }

    pub fn energy_at(&self, distance: usize) -> f64 {
        self.values.get(&distance).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }
}

/// Amplitudes over ordered site pairs `(j, k)`, flattened as `j * n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleState {
    amps: Array1<Complex64>,
    n: usize,
    statistics: Statistics,
}

const NORM_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;

impl TwoParticleState {
    /// Wrap pair amplitudes; the norm must be 1 within `1e-8` and the
    /// amplitudes must already respect the exchange sector.
    pub fn new(n: usize, amps: Array1<Complex64>, statistics: Statistics) -> Result<Self> {
        if amps.len() != n * n {
            return Err(Error::InvalidParam {
                name: "amps",
                msg: format!("expected {} amplitudes, got {}", n * n, amps.len()),
            });
        }
        let state = Self { amps, n, statistics };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedState { norm });
        }
        let leak = state.symmetry_leakage();
        if leak > SYMMETRY_TOL {
            return Err(Error::InvalidParam {
                name: "amps",
                msg: format!("exchange-sector leakage {leak:.2e} exceeds {SYMMETRY_TOL:.0e}"),
            });
        }
        Ok(state)
    }

    /// Product state `|a> (x) |b>` projected onto the requested sector.
    pub fn product(
        a: &crate::dynamics::StateVector,
        b: &crate::dynamics::StateVector,
        statistics: Statistics,
    ) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidParam {
                name: "product state",
                msg: "factors must have equal length".into(),
            });
        }
        let n = a.len();
        let mut amps = Array1::default(n * n);
        for (j, aj) in a.amplitudes().iter().enumerate() {
            for (k, bk) in b.amplitudes().iter().enumerate() {
                amps[j * n + k] = aj * bk;
            }
        }
        symmetrize(&Self {
            amps,
            n,
            statistics,
        })
    }

    /// Both walkers localized, at `j` and `k`.
    pub fn localized_pair(n: usize, j: usize, k: usize, statistics: Statistics) -> Result<Self> {
        let a = crate::dynamics::StateVector::localized(n, j)?;
        let b = crate::dynamics::StateVector::localized(n, k)?;
        Self::product(&a, &b, statistics)
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, j: usize, k: usize) -> Complex64 {
        self.amps[j * self.n + k]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Joint probability `p(j, k) = |amp(j,k)|^2` as an `n x n` matrix.
    pub fn joint_distribution(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.n, self.n));
        for j in 0..self.n {
            for k in 0..self.n {
                p[[j, k]] = self.amps[j * self.n + k].norm_sqr();
            }
        }
        p
    }

    /// Marginal of the first (`0`) or second (`1`) tensor factor.
    pub fn marginal(&self, which: usize) -> Array1<f64> {
        let mut p = Array1::zeros(self.n);
        for j in 0..self.n {
            for k in 0..self.n {
                let q = self.amps[j * self.n + k].norm_sqr();
                p[if which == 0 { j } else { k }] += q;
            }
        }
        p
    }

    /// Probability mass on co-located pairs, `sum_j p(j, j)`.
    pub fn diagonal_mass(&self) -> f64 {
        (0..self.n)
            .map(|j| self.amps[j * self.n + j].norm_sqr())
            .sum()
    }

    /// Norm of the component outside the state's exchange sector.
    pub fn symmetry_leakage(&self) -> f64 {
        let sign = match self.statistics {
            Statistics::Bosonic => 1.0,
            Statistics::Fermionic => -1.0,
            Statistics::Distinguishable => return 0.0,
        };
        let mut leak = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                let residual = self.amps[j * self.n + k] - sign * self.amps[k * self.n + j];
                leak += 0.5 * residual.norm_sqr() * 0.5;
            }
        }
        leak.sqrt()
    }

    fn from_raw(n: usize, amps: Vec<Complex64>, statistics: Statistics) -> Self {
        Self {
            amps: Array1::from_vec(amps),
            n,
            statistics,
        }
    }
}

/// Project onto the state's exchange sector and renormalize. Fermionic
/// projection of a symmetric state fails with a zero-norm error.
pub fn symmetrize(state: &TwoParticleState) -> Result<TwoParticleState> {
    let n = state.n;
    let sign = match state.statistics {
        Statistics::Bosonic => 1.0,
        Statistics::Fermionic => -1.0,
        Statistics::Distinguishable => return Ok(state.clone()),
    };
    let mut amps = Array1::default(n * n);
    for j in 0..n {
        for k in 0..n {
            amps[j * n + k] =
                0.5 * (state.amps[j * n + k] + sign * state.amps[k * n + j]);
        }
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::ZeroNormProjection(match state.statistics {
            Statistics::Fermionic => "fermionic",
            _ => "bosonic",
        }));
    }
    for a in amps.iter_mut() {
        *a /= norm;
    }
    Ok(TwoParticleState {
        amps,
        n,
        statistics: state.statistics,
    })
}

/// Dense `n^2 x n^2` pair Hamiltonian for a frozen noise snapshot:
/// Kronecker sum of the single-particle matrix with itself plus the diagonal
/// interaction `U(|j - k|)`.
pub fn two_particle_hamiltonian(
    spec: &HamiltonianSpec,
    source_values: &[i8],
    interaction: &InteractionSpec,
) -> Result<Array2<f64>> {
    let op = build_operator(spec, source_values, interaction)?;
    Ok(op.snapshot())
}

fn build_operator(
    spec: &HamiltonianSpec,
    source_values: &[i8],
    interaction: &InteractionSpec,
) -> Result<TwoParticleOperator> {
    let expected = spec.n_sources();
    if source_values.len() != expected {
        return Err(Error::SourceCountMismatch {
            expected,
            got: source_values.len(),
        });
    }
    let mapping: Vec<usize> = if expected == 0 || !spec.noise.target.affects_edges() {
        Vec::new()
    } else {
        (0..spec.graph.edge_count()).collect()
    };
    let single = spec.operator(&mapping, expected, source_values)?;
    Ok(TwoParticleOperator::new(single, &|d| {
        interaction.energy_at(d)
    }))
}

/// Propagate a pair through one shared noise realization, exactly between
/// switches, returning states at the sample times. Exchange symmetry is
/// preserved because the generator commutes with the swap.
pub fn evolve_two_particle(
    spec: &HamiltonianSpec,
    trajectories: &[RtnTrajectory],
    interaction: &InteractionSpec,
    psi0: &TwoParticleState,
    sample_times: &[f64],
) -> Result<Vec<TwoParticleState>> {
    let n = spec.graph.node_count();
    if psi0.sites() != n {
        return Err(Error::InvalidParam {
            name: "psi0",
            msg: format!("state is over {} sites, graph has {n}", psi0.sites()),
        });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::UnnormalizedState { norm });
    }
    let leak = psi0.symmetry_leakage();
    if leak > SYMMETRY_TOL {
        return Err(Error::InvalidParam {
            name: "psi0",
            msg: format!("exchange-sector leakage {leak:.2e}"),
        });
    }
    let ok = !sample_times.is_empty()
        && sample_times.iter().all(|t| t.is_finite() && *t >= 0.0)
        && sample_times.windows(2).all(|w| w[0] <= w[1]);
    if !ok {
        return Err(Error::BadSampleTimes);
    }
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
    let mut op = build_operator(spec, &signs, interaction)?;
    let events = merge_events(trajectories);
    let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut out = Vec::with_capacity(sample_times.len());
    evolve_sampled(
        &mut op,
        &events,
        sample_times,
        &mut psi,
        Method::Auto,
        &mut |_, state| {
            out.push(TwoParticleState::from_raw(
                n,
                state.to_vec(),
                psi0.statistics(),
            ))
        },
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_trajectory, StateVector};
    use crate::graph::Graph;
    use crate::noise::{sample_trajectory, source_rng, NoiseSpec};

    fn line_spec(n: usize, nu: f64, seed: u64) -> HamiltonianSpec {
        let graph = Graph::line(n, false).unwrap();
        let noise = if nu == 0.0 {
            NoiseSpec::noiseless()
        } else {
            NoiseSpec::new(nu, 1.0, seed).unwrap()
        };
        HamiltonianSpec::new(graph, noise).unwrap()
    }

    #[test]
    fn symmetrization_basics() {
        let a = StateVector::localized(4, 0).unwrap();
        let b = StateVector::localized(4, 1).unwrap();
        let boson = TwoParticleState::product(&a, &b, Statistics::Bosonic).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        assert!((boson.amplitude(0, 1).re - inv).abs() < 1e-15);
        assert!((boson.amplitude(1, 0).re - inv).abs() < 1e-15);

        let fermion = TwoParticleState::product(&a, &b, Statistics::Fermionic).unwrap();
        assert!((fermion.amplitude(0, 1).re - inv).abs() < 1e-15);
        assert!((fermion.amplitude(1, 0).re + inv).abs() < 1e-15);

        // Pauli exclusion: same-site fermions have no antisymmetric part
        let err = TwoParticleState::product(&a, &a, Statistics::Fermionic);
        assert!(matches!(err, Err(Error::ZeroNormProjection("fermionic"))));
    }

    #[test]
    fn kronecker_sum_spectrum_without_interaction() {
        let spec = line_spec(3, 0.0, 0);
        let h2 = two_particle_hamiltonian(&spec, &[], &InteractionSpec::none()).unwrap();
        let h1 = crate::dynamics::assemble_hamiltonian(&spec, &[]).unwrap();
        let e1 = crate::linalg::eigh(&h1).values;
        let mut pair_sums: Vec<f64> = e1
            .iter()
            .flat_map(|a| e1.iter().map(move |b| a + b))
            .collect();
        pair_sums.sort_by(f64::total_cmp);
        let e2 = crate::linalg::eigh(&h2).values;
        for (a, b) in e2.iter().zip(&pair_sums) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn onsite_interaction_shifts_colocated_pairs() {
        let spec = line_spec(2, 0.0, 0);
        let u = 2.5;
        let with_u = two_particle_hamiltonian(&spec, &[], &InteractionSpec::on_site(u)).unwrap();
        let without = two_particle_hamiltonian(&spec, &[], &InteractionSpec::none()).unwrap();
        for idx in 0..4 {
            for jdx in 0..4 {
                let want = if idx == jdx && (idx == 0 || idx == 3) {
                    u
                } else {
                    0.0
                };
                assert!((with_u[[idx, jdx]] - without[[idx, jdx]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn noninteracting_distinguishable_pair_factorizes() {
        let n = 8;
        let spec = line_spec(n, 1.0, 17);
        let horizon = 4.0;
        let trajs: Vec<RtnTrajectory> = (0..spec.n_sources())
            .map(|s| sample_trajectory(1.0, horizon, &mut source_rng(17, 0, s)).unwrap())
            .collect();
        let a = StateVector::localized(n, 3).unwrap();
        let b = StateVector::localized(n, 4).unwrap();
        let pair = TwoParticleState::product(&a, &b, Statistics::Distinguishable).unwrap();
        let times = [1.0, 2.5, 4.0];
        let joint = evolve_two_particle(&spec, &trajs, &InteractionSpec::none(), &pair, &times)
            .unwrap();
        let ea = evolve_trajectory(&spec, &trajs, &a, &times).unwrap();
        let eb = evolve_trajectory(&spec, &trajs, &b, &times).unwrap();
        for (i, state) in joint.iter().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    let want = ea[i].amplitudes()[j] * eb[i].amplitudes()[k];
                    let got = state.amplitude(j, k);
                    assert!((got - want).norm() < 1e-10, "t index {i} ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn fermionic_diagonal_stays_empty_and_sector_is_preserved() {
        let n = 6;
        let spec = line_spec(n, 1.0, 23);
        let horizon = 5.0;
        let trajs: Vec<RtnTrajectory> = (0..spec.n_sources())
            .map(|s| sample_trajectory(1.0, horizon, &mut source_rng(23, 0, s)).unwrap())
            .collect();
        let pair = TwoParticleState::localized_pair(n, 2, 3, Statistics::Fermionic).unwrap();
        let times = [1.0, 3.0, 5.0];
        let states = evolve_two_particle(
            &spec,
            &trajs,
            &InteractionSpec::nearest_neighbor(1.5),
            &pair,
            &times,
        )
        .unwrap();
        for state in &states {
            for j in 0..n {
                assert!(state.amplitude(j, j).norm() < 1e-10);
            }
            assert!(state.symmetry_leakage() < 1e-10);
            assert!((state.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn bound_pair_spreads_under_fast_percolation() {
        // strong on-site attraction keeps a bosonic pair co-located in the
        // noiseless walk; fast full percolation breaks that localization
        let n = 10;
        let u = 12.0;
        let interaction = InteractionSpec::on_site(u);
        let pair = TwoParticleState::localized_pair(n, 5, 5, Statistics::Bosonic).unwrap();
        let times = [3.0];

        let quiet = line_spec(n, 0.0, 0);
        let calm = evolve_two_particle(&quiet, &[], &interaction, &pair, &times).unwrap();

        let noisy_spec = {
            let graph = Graph::line(n, false).unwrap();
            let noise = NoiseSpec::new(1.0, 10.0, 31).unwrap();
            HamiltonianSpec::new(graph, noise).unwrap()
        };
        let trajs: Vec<RtnTrajectory> = (0..noisy_spec.n_sources())
            .map(|s| sample_trajectory(10.0, 3.0, &mut source_rng(31, 0, s)).unwrap())
            .collect();
        let stirred = evolve_two_particle(&noisy_spec, &trajs, &interaction, &pair, &times).unwrap();

        let calm_mass = calm[0].diagonal_mass();
        let stirred_mass = stirred[0].diagonal_mass();
        assert!(
            calm_mass > 0.9,
            "interaction should bind the noiseless pair, diag mass {calm_mass}"
        );
        assert!(
            stirred_mass < calm_mass,
            "fast percolation should unbind: {stirred_mass} vs {calm_mass}"
        );
    }

    #[test]
    fn interaction_lookup() {
        let u = InteractionSpec::on_site(2.0).with_value(3, -1.0);
        assert_eq!(u.energy_at(0), 2.0);
        assert_eq!(u.energy_at(1), 0.0);
        assert_eq!(u.energy_at(3), -1.0);
        assert!(InteractionSpec::none().is_zero());
    }
}
