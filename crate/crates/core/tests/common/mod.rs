//! Shared test oracles, deliberately independent of the library's
//! propagation path: fine time steps with the Hamiltonian frozen at each
//! sub-interval midpoint, and the matrix exponential applied by plain Taylor
//! iteration. Assembly goes through the public snapshot API only.

use ndarray::Array2;
use num_complex::Complex64;

use perqwalk::dynamics::{assemble_hamiltonian, HamiltonianSpec, StateVector};
use perqwalk::noise::RtnTrajectory;

/// `psi <- exp(-i h dt) psi` by Taylor series, run to machine convergence.
pub fn taylor_exp_apply(h: &Array2<f64>, dt: f64, psi: &mut Vec<Complex64>) {
    let n = psi.len();
    let mut term = psi.clone();
    let mut next = vec![Complex64::default(); n];
    let mut out = psi.clone();
    let mut k = 1usize;
    loop {
        // next <- (-i dt / k) H term
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for j in 0..n {
                acc += h[[i, j]] * term[j];
            }
            *slot = acc * Complex64::new(0.0, -dt / k as f64);
        }
        let mag: f64 = next.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for (o, t) in out.iter_mut().zip(&next) {
            *o += t;
        }
        std::mem::swap(&mut term, &mut next);
        k += 1;
        if mag < 1e-18 || k > 80 {
            break;
        }
    }
    *psi = out;
}

/// How the fine-step grid treats noise switches.
#[derive(Clone, Copy, PartialEq)]
pub enum OracleGrid {
    /// Strictly uniform steps; a switch inside a step is misplaced by up to
    /// `dt / 2`, an `O(nu * dt)` error per event.
    Uniform,
    /// Uniform steps additionally split at every switch time, so each
    /// sub-interval has a constant Hamiltonian and the product is exact up
    /// to Taylor round-off.
    SplitAtSwitches,
}

/// Brute-force propagation with the Hamiltonian frozen at each sub-interval
/// midpoint, assembled per snapshot from the trajectories' values.
pub fn fine_step_evolve(
    spec: &HamiltonianSpec,
    trajectories: &[RtnTrajectory],
    psi0: &StateVector,
    t_end: f64,
    dt: f64,
    grid: OracleGrid,
) -> Vec<Complex64> {
    let mut boundaries: Vec<f64> = Vec::new();
    let steps = (t_end / dt).round() as usize;
    for s in 0..=steps {
        boundaries.push(t_end * s as f64 / steps as f64);
    }
    if grid == OracleGrid::SplitAtSwitches {
        for traj in trajectories {
            for &s in traj.switch_times() {
                if s < t_end {
                    boundaries.push(s);
                }
            }
        }
        boundaries.sort_by(f64::total_cmp);
        boundaries.dedup();
    }

    let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut cached: Option<(Vec<i8>, Array2<f64>)> = None;
    for w in boundaries.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let t_mid = 0.5 * (a + b);
        let values: Vec<i8> = trajectories
            .iter()
            .map(|traj| traj.value_at(t_mid).expect("midpoint within horizon"))
            .collect();
        let rebuild = cached.as_ref().map(|(v, _)| v != &values).unwrap_or(true);
        if rebuild {
            let h = assemble_hamiltonian(spec, &values).expect("assemble");
            cached = Some((values, h));
        }
        let (_, h) = cached.as_ref().unwrap();
        taylor_exp_apply(h, b - a, &mut psi);
    }
    psi
}

/// Max absolute difference between two complex vectors.
pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Euclidean distance between two complex vectors.
pub fn l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
