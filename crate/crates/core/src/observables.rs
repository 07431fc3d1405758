//! Position-space observables: distributions, spreading variance, the
//! Bessel-function closed form for the noiseless line, and classification of
//! the propagation regime from a variance time series.

use ndarray::Array1;

use crate::bessel::bessel_j_sequence;
use crate::dynamics::StateVector;
use crate::{Error, Result};

/// Snapshot of the walker's position distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionDistribution {
    pub probabilities: Array1<f64>,
    pub time: f64,
}

impl PositionDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.sum()
    }
}

/// Signed displacement of site `k` from `origin`, unwrapped to the shortest
/// arc `(-n/2, n/2]`. On an open line sized so the walker never strays more
/// than `n/2` sites from the origin this equals the plain difference.
pub(crate) fn signed_displacement(n: usize, origin: usize, k: usize) -> f64 {
    let d = (k + n - origin) % n;
    if 2 * d > n {
        d as f64 - n as f64
    } else {
        d as f64
    }
}

/// `p_k = |amplitude_k|^2` of a normalized state.
pub fn position_distribution(state: &StateVector, time: f64) -> Result<PositionDistribution> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::UnnormalizedState { norm });
    }
    Ok(PositionDistribution {
        probabilities: state.probabilities(),
        time,
    })
}

/// Mean displacement `sum_k p_k d_k` from `origin` (shortest signed arc).
pub fn mean_displacement(dist: &PositionDistribution, origin: usize) -> f64 {
    let n = dist.len();
    dist.probabilities
        .iter()
        .enumerate()
        .map(|(k, &p)| signed_displacement(n, origin, k) * p)
        .sum()
}

/// Variance of the position, `sum_k p_k (d_k - <d>)^2`, with displacements
/// `d_k` measured from `origin` along the shortest signed arc.
pub fn variance(dist: &PositionDistribution, origin: usize) -> f64 {
    let n = dist.len();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (k, &p) in dist.probabilities.iter().enumerate() {
        let d = signed_displacement(n, origin, k);
        m1 += d * p;
        m2 += d * d * p;
    }
    m2 - m1 * m1
}

/// Closed-form distribution of the noiseless walker on the line,
/// `p(origin + k, t) = J_|k|(2 J0 t)^2`, laid out on an `n`-site ring.
///
/// Fails when the tail mass that would fall beyond `n/2` sites exceeds
/// `1e-12`, i.e. when boundary effects are no longer negligible.
pub fn bessel_distribution(
    n: usize,
    origin: usize,
    t: f64,
    j0: f64,
) -> Result<PositionDistribution> {
    if origin >= n {
        return Err(Error::NodeOutOfRange { node: origin, n });
    }
    if t < 0.0 || !t.is_finite() || j0 <= 0.0 {
        return Err(Error::InvalidParam {
            name: "t",
            msg: "time must be finite and non-negative, j0 positive".into(),
        });
    }
    let x = 2.0 * j0 * t;
    let kmax = n / 2;
    let js = bessel_j_sequence(kmax, x);
    let mut probs = Array1::zeros(n);
    let mut mass = js[0] * js[0];
    probs[origin] = js[0] * js[0];
    for k in 1..=kmax {
        let p = js[k] * js[k];
        let right = (origin + k) % n;
        let left = (origin + n - k) % n;
        // on an even ring the antipodal site is reached from both sides
        if right == left {
            probs[right] += 2.0 * p;
        } else {
            probs[right] += p;
            probs[left] += p;
        }
        mass += 2.0 * p;
    }
    if 1.0 - mass > 1e-12 {
        return Err(Error::BesselTailTooWide { t });
    }
    Ok(PositionDistribution {
        probabilities: probs,
        time: t,
    })
}

/// Propagation regime labels from the late-time variance growth exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `sigma^2 ~ t^2`, the free quantum walker.
    Ballistic,
    /// `sigma^2 ~ t`, classical-like spreading.
    Diffusive,
    /// bounded variance.
    Localized,
    /// in between the bands above.
    Crossover,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Ballistic => "ballistic",
            Regime::Diffusive => "diffusive",
            Regime::Localized => "localized",
            Regime::Crossover => "crossover",
        }
    }
}

/// Result of the variance power-law fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub regime: Regime,
}

/// Fit `log sigma^2` against `log t` over the final half of the series and
/// classify: ballistic above 1.6, diffusive in [0.7, 1.3], localized below
/// 0.4, crossover otherwise.
pub fn classify_regime(times: &[f64], variances: &[f64]) -> Result<RegimeFit> {
    if times.len() != variances.len() {
        return Err(Error::InvalidParam {
            name: "variances",
            msg: "times and variances must have equal length".into(),
        });
    }
    let start = times.len() / 2;
    let window: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&variances[start..])
        .map(|(&t, &v)| (t, v))
        .collect();
    if window.len() < 5 {
        return Err(Error::FitInsufficientData {
            min: 5,
            got: window.len(),
        });
    }
    if window.iter().any(|&(t, v)| t <= 0.0 || v <= 0.0) {
        return Err(Error::InvalidParam {
            name: "variances",
            msg: "fit window requires positive times and variances".into(),
        });
    }
    let logs: Vec<(f64, f64)> = window.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let (slope, stderr) = least_squares_slope(&logs);
    let regime = if slope > 1.6 {
        Regime::Ballistic
    } else if (0.7..=1.3).contains(&slope) {
        Regime::Diffusive
    } else if slope < 0.4 {
        Regime::Localized
    } else {
        Regime::Crossover
    };
    Ok(RegimeFit {
        exponent: slope,
        exponent_stderr: stderr,
        regime,
    })
}

/// Ordinary least squares slope with its standard error.
pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let dof = (points.len().max(3) - 2) as f64;
    let stderr = (sse / dof / sxx).sqrt();
    (slope, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn displacement_unwraps_shortest_arc() {
        // n = 6, origin 2: displacements of sites 0..6
        let d: Vec<f64> = (0..6).map(|k| signed_displacement(6, 2, k)).collect();
        assert_eq!(d, vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        // odd ring has no antipodal ambiguity
        let d: Vec<f64> = (0..5).map(|k| signed_displacement(5, 0, k)).collect();
        assert_eq!(d, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn distribution_basics() {
        let delta = StateVector::localized(4, 0).unwrap();
        let d = position_distribution(&delta, 0.0).unwrap();
        assert_eq!(d.probabilities[0], 1.0);
        assert_eq!(d.total(), 1.0);

        let uniform = StateVector::uniform(5);
        let d = position_distribution(&uniform, 0.0).unwrap();
        for k in 0..5 {
            assert!((d.probabilities[k] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn variance_hand_cases() {
        let delta = position_distribution(&StateVector::localized(9, 4).unwrap(), 0.0).unwrap();
        assert_eq!(variance(&delta, 4), 0.0);

        // equal mass at displacements +/-1 around the origin
        let mut probs = Array1::zeros(9);
        probs[3] = 0.5;
        probs[5] = 0.5;
        let dist = PositionDistribution {
            probabilities: probs,
            time: 0.0,
        };
        assert!((variance(&dist, 4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_distribution_delta_at_zero_time() {
        let d = bessel_distribution(11, 5, 0.0, 1.0).unwrap();
        assert_eq!(d.probabilities[5], 1.0);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn bessel_distribution_normalized_and_symmetric() {
        let d = bessel_distribution(201, 100, 5.0, 1.0).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-10);
        for k in 1..=100 {
            assert!((d.probabilities[100 - k] - d.probabilities[(100 + k) % 201]).abs() < 1e-15);
        }
    }

    #[test]
    fn bessel_variance_is_ballistic() {
        // brute-force second moment of J_k(2t)^2 equals 2 t^2
        for &t in &[1.0, 5.0, 10.0] {
            let d = bessel_distribution(501, 250, t, 1.0).unwrap();
            let v = variance(&d, 250);
            assert!((v - 2.0 * t * t).abs() < 1e-6, "t={t}: {v}");
        }
    }

    #[test]
    fn bessel_tail_precondition_enforced() {
        // at t = 30 the front is at ~60 sites; an 11-site ring is far too small
        assert!(matches!(
            bessel_distribution(11, 5, 30.0, 1.0),
            Err(Error::BesselTailTooWide { .. })
        ));
    }

    #[test]
    fn regime_classification() {
        let times: Vec<f64> = (1..=40).map(|i| i as f64 * 0.5).collect();
        let quad: Vec<f64> = times.iter().map(|t| t * t).collect();
        let fit = classify_regime(&times, &quad).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert_eq!(fit.regime, Regime::Ballistic);

        let lin: Vec<f64> = times.clone();
        let fit = classify_regime(&times, &lin).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert_eq!(fit.regime, Regime::Diffusive);

        let flat: Vec<f64> = times.iter().map(|_| 3.5).collect();
        let fit = classify_regime(&times, &flat).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
        assert_eq!(fit.regime, Regime::Localized);

        let cross: Vec<f64> = times.iter().map(|t| t.powf(1.45)).collect();
        assert_eq!(classify_regime(&times, &cross).unwrap().regime, Regime::Crossover);
    }

    #[test]
    fn regime_rejects_bad_input() {
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut vars: Vec<f64> = times.iter().map(|t| t * t).collect();
        vars[7] = -1.0;
        assert!(classify_regime(&times, &vars).is_err());
        assert!(classify_regime(&times[..4], &vars[..4]).is_err());
    }
}
