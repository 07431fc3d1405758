//! Exact piecewise-constant propagation.
//!
//! Telegraph noise makes the Hamiltonian constant between switch events, so
//! the propagator over one interval is a plain matrix exponential. Two
//! interchangeable steppers compute `exp(-i H dt) psi` to round-off:
//!
//! - an eigendecomposition stepper, memoized on the source sign pattern,
//!   which wins for small dimensions and few sources, and
//! - a Chebyshev expansion of the exponential over the operator's spectral
//!   interval, whose cost per step is a handful of sparse matvecs, which
//!   wins for large systems with frequent switches.
//!
//! Both preserve the norm to machine precision; the evolution loop merges
//! switch events with requested sample times and never interpolates.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::bessel::bessel_j_sequence;
use crate::linalg::{self, SymmetricEigen};
use crate::operator::{NoisyOperator, TwoParticleOperator};
use crate::Result;

/// How interval propagators are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Eigendecomposition for small dense problems, Chebyshev otherwise.
    #[default]
    Auto,
    /// Force the eigendecomposition stepper.
    Eigen,
    /// Force the Chebyshev stepper.
    Chebyshev,
}

/// Matrix behaviour the steppers need.
pub(crate) trait Generator {
    fn dim(&self) -> usize;
    fn matvec(&self, x: &[Complex64], y: &mut [Complex64]);
    fn bounds(&self) -> (f64, f64);
    fn snapshot(&self) -> Array2<f64>;
    fn signs(&self) -> &[i8];
    fn flip_sign(&mut self, source: usize);
}

impl Generator for NoisyOperator {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec(x, y)
    }
    fn bounds(&self) -> (f64, f64) {
        self.bounds()
    }
    fn snapshot(&self) -> Array2<f64> {
        self.snapshot()
    }
    fn signs(&self) -> &[i8] {
        self.signs()
    }
    fn flip_sign(&mut self, source: usize) {
        self.flip_sign(source)
    }
}

impl Generator for TwoParticleOperator {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec(x, y)
    }
    fn bounds(&self) -> (f64, f64) {
        self.bounds()
    }
    fn snapshot(&self) -> Array2<f64> {
        self.snapshot()
    }
    fn signs(&self) -> &[i8] {
        self.single.signs()
    }
    fn flip_sign(&mut self, source: usize) {
        self.single.flip_sign(source)
    }
}

/// One noise switch: `source` flips at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Event {
    pub time: f64,
    pub source: usize,
}

/// Merge per-source switch times into one ordered event list; ties resolve
/// by source index so the schedule is reproducible.
pub(crate) fn merge_events(trajectories: &[crate::noise::RtnTrajectory]) -> Vec<Event> {
    let total: usize = trajectories.iter().map(|t| t.switch_count()).sum();
    let mut events = Vec::with_capacity(total);
    for (source, traj) in trajectories.iter().enumerate() {
        for &time in traj.switch_times() {
            events.push(Event { time, source });
        }
    }
    events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time).then(a.source.cmp(&b.source)));
    events
}

enum Stepper {
    Eigen {
        cache: HashMap<Vec<i8>, Rc<SymmetricEigen>>,
        current: Option<Rc<SymmetricEigen>>,
        coeff: Vec<Complex64>,
        modal: Vec<Complex64>,
    },
    Chebyshev {
        center: f64,
        radius: f64,
        prev: Vec<Complex64>,
        cur: Vec<Complex64>,
        next: Vec<Complex64>,
        acc: Vec<Complex64>,
    },
}

impl Stepper {
    fn new(method: Method, op: &dyn Generator) -> Self {
        let dim = op.dim();
        let resolved = match method {
            Method::Eigen => Method::Eigen,
            Method::Chebyshev => Method::Chebyshev,
            Method::Auto => {
                if dim <= 64 && op.signs().len() <= 20 {
                    Method::Eigen
                } else {
                    Method::Chebyshev
                }
            }
        };
        match resolved {
            Method::Eigen => Stepper::Eigen {
                cache: HashMap::new(),
                current: None,
                coeff: vec![Complex64::default(); dim],
                modal: vec![Complex64::default(); dim],
            },
            _ => {
                let (lo, hi) = op.bounds();
                let center = 0.5 * (hi + lo);
                let radius = (0.5 * (hi - lo)).max(1e-12);
                Stepper::Chebyshev {
                    center,
                    radius,
                    prev: vec![Complex64::default(); dim],
                    cur: vec![Complex64::default(); dim],
                    next: vec![Complex64::default(); dim],
                    acc: vec![Complex64::default(); dim],
                }
            }
        }
    }

    /// Invalidate any per-interval state after a source flip.
    fn interval_changed(&mut self) {
        if let Stepper::Eigen { current, .. } = self {
            *current = None;
        }
    }

    fn step(&mut self, op: &dyn Generator, dt: f64, psi: &mut [Complex64]) {
        if dt == 0.0 {
            return;
        }
        match self {
            Stepper::Eigen {
                cache,
                current,
                coeff,
                modal,
            } => {
                let decomp = match current {
                    Some(d) => d.clone(),
                    None => {
                        let key = op.signs().to_vec();
                        let d = cache
                            .entry(key)
                            .or_insert_with(|| Rc::new(linalg::eigh(&op.snapshot())))
                            .clone();
                        *current = Some(d.clone());
                        d
                    }
                };
                linalg::real_mat_t_cvec(&decomp.vectors, psi, coeff);
                for (c, &e) in coeff.iter_mut().zip(&decomp.values) {
                    let ph = Complex64::from_polar(1.0, -e * dt);
                    *c *= ph;
                }
                linalg::real_mat_cvec(&decomp.vectors, coeff, modal);
                psi.copy_from_slice(modal);
            }
            Stepper::Chebyshev {
                center,
                radius,
                prev,
                cur,
                next,
                acc,
            } => {
                let theta = *radius * dt;
                let phase = Complex64::from_polar(1.0, -*center * dt);
                if theta.abs() < 1e-16 {
                    for v in psi.iter_mut() {
                        *v *= phase;
                    }
                    return;
                }
                // exp(-i theta Ht) = sum_k (2 - d_k0) (-i)^k J_k(theta) T_k(Ht)
                let kmax = (theta + 16.0 + 4.0 * theta.sqrt()).ceil() as usize;
                let js = bessel_j_sequence(kmax, theta);
                let mut k_eff = kmax;
                while k_eff > 1 && js[k_eff].abs() < 1e-17 {
                    k_eff -= 1;
                }

                let c = *center;
                let inv_r = 1.0 / *radius;
                // scaled matvec: y = (H - c) x / r
                let apply = |x: &[Complex64], y: &mut [Complex64]| {
                    op.matvec(x, y);
                    for (yi, xi) in y.iter_mut().zip(x) {
                        *yi = (*yi - c * xi) * inv_r;
                    }
                };

                prev.copy_from_slice(psi); // T_0 psi
                apply(psi, cur); // T_1 psi
                for (a, (p, q)) in acc.iter_mut().zip(prev.iter().zip(cur.iter())) {
                    // k=0 weight J_0, k=1 weight 2 (-i) J_1
                    *a = js[0] * *p + Complex64::new(0.0, -2.0 * js[1]) * *q;
                }
                let mut ik = Complex64::new(0.0, -1.0);
                for k in 2..=k_eff {
                    ik *= Complex64::new(0.0, -1.0);
                    apply(cur, next);
                    for (nx, pv) in next.iter_mut().zip(prev.iter()) {
                        *nx = 2.0 * *nx - pv;
                    }
                    let w = 2.0 * js[k] * ik;
                    for (a, nx) in acc.iter_mut().zip(next.iter()) {
                        *a += w * nx;
                    }
                    std::mem::swap(prev, cur);
                    std::mem::swap(cur, next);
                }
                for (p, a) in psi.iter_mut().zip(acc.iter()) {
                    *p = phase * a;
                }
            }
        }
    }
}

/// Drive `psi` through the merged event schedule, invoking `on_sample` with
/// the state at each requested time. Samples landing exactly on a switch are
/// taken with the pre-switch Hamiltonian (the state is continuous there).
pub(crate) fn evolve_sampled(
    op: &mut dyn Generator,
    events: &[Event],
    sample_times: &[f64],
    psi: &mut [Complex64],
    method: Method,
    on_sample: &mut dyn FnMut(usize, &[Complex64]),
) -> Result<()> {
    let mut stepper = Stepper::new(method, op);
    let mut t = 0.0;
    let mut next_event = 0usize;
    for (si, &ts) in sample_times.iter().enumerate() {
        while next_event < events.len() && events[next_event].time < ts {
            let ev = events[next_event];
            stepper.step(op, ev.time - t, psi);
            t = ev.time;
            op.flip_sign(ev.source);
            stepper.interval_changed();
            next_event += 1;
        }
        stepper.step(op, ts - t, psi);
        t = ts;
        on_sample(si, psi);
    }
    Ok(())
}
