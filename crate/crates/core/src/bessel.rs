//! Bessel functions of the first kind at integer order, `J_0(x) .. J_K(x)`,
//! by downward (Miller) recurrence with sum-rule normalization.
//!
//! This is the standard stable scheme: upward recurrence is unstable for
//! `k > x`, so the sequence is generated downward from a start order safely
//! above both `K` and `x`, then rescaled with `J_0 + 2 sum_{k even} J_k = 1`.

/// Values of `J_k(x)` for `k = 0..=max_order`, `x >= 0`.
pub fn bessel_j_sequence(max_order: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_j_sequence requires x >= 0");
    if x == 0.0 {
        let mut out = vec![0.0; max_order + 1];
        out[0] = 1.0;
        return out;
    }

    // Start high enough that the downward recurrence has converged onto the
    // minimal solution by the time it reaches max_order.
    let top = max_order.max(x.ceil() as usize);
    let start = top + 16 + (4.0 * (top as f64).sqrt()).ceil() as usize;

    let mut out = vec![0.0; max_order + 1];
    let mut jp = 0.0_f64; // J_{k+1}
    let mut jc = 1e-300_f64; // J_k, arbitrary seed
    let mut norm = 0.0_f64; // accumulates J_0 + 2 sum_{k even >= 2} J_k
    for k in (0..=start).rev() {
        let jm = (2.0 * (k + 1) as f64) / x * jc - jp; // J_k from J_{k+1}, J_{k+2}
        jp = jc;
        jc = jm;
        if k <= max_order {
            out[k] = jc;
        }
        if k % 2 == 0 {
            norm += if k == 0 { jc } else { 2.0 * jc };
        }
        // Rescale before overflow; relative values are all that matter.
        if jc.abs() > 1e250 {
            let s = 1e-250;
            jc *= s;
            jp *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}
