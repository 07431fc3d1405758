//! Mutable matrix form of the noisy walk generator.
//!
//! Off the diagonal the entry on edge `(j,k)` is `-(j0 + nu * X_e)` with
//! `X_e` the sign of the governing noise source; the diagonal carries
//! `j0 * d_j` plus optional on-site noise `nu * X_j` and the search oracle
//! `-1` on the target. Each source owns the list of matrix entries it
//! controls, so a telegraph switch is an O(entries) in-place update with
//! values recomputed from their exact base (no incremental drift).
//!
//! Storage is CSR for sparse graphs and a dense row-major matrix for dense
//! ones; both expose the same matvec used by the Chebyshev propagator.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dynamics::HamiltonianSpec;
use crate::{Error, Result};

/// One matrix entry owned by a noise source: `value = base + delta * sign`.
#[derive(Debug, Clone, Copy)]
struct Controlled {
    slot: u32,
    base: f64,
    delta: f64,
}

#[derive(Debug, Clone)]
enum Storage {
    /// Line/ring fast path: `coupling[j]` joins sites `j` and `j+1 mod n`
    /// (zero where the edge is absent; the wrap slot is `n - 1`). `slot`
    /// indexes `coupling`; diagonal slots are offset by `u32::MAX - n`.
    Chain { diag: Vec<f64>, coupling: Vec<f64> },
    /// Compressed sparse rows over off-diagonal entries plus a diagonal
    /// vector. `slot` indexes `values`; diagonal slots are offset by
    /// `u32::MAX - n`.
    Csr {
        row_ptr: Vec<u32>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
        diag: Vec<f64>,
    },
    /// Row-major dense matrix; `slot` is the flat index.
    Dense { data: Vec<f64> },
}

/// Map each edge to its chain slot when the graph is a sub-path of the
/// standard `0 - 1 - ... - (n-1)` ring layout.
fn chain_slots(graph: &crate::graph::Graph) -> Option<Vec<usize>> {
    let n = graph.node_count();
    if n < 3 {
        return None;
    }
    let mut used = vec![false; n];
    let mut slots = Vec::with_capacity(graph.edge_count());
    for &(a, b) in graph.edges() {
        let slot = if b == a + 1 {
            a
        } else if a == 0 && b == n - 1 {
            n - 1
        } else {
            return None;
        };
        if used[slot] {
            return None;
        }
        used[slot] = true;
        slots.push(slot);
    }
    Some(slots)
}

/// The assembled, in-place-updatable Hamiltonian of one noise layout.
#[derive(Debug, Clone)]
pub(crate) struct NoisyOperator {
    n: usize,
    storage: Storage,
    /// Per source: the entries it controls.
    sources: Vec<Vec<Controlled>>,
    signs: Vec<i8>,
    /// Conservative spectral interval valid for every sign pattern.
    lo: f64,
    hi: f64,
}

const DIAG_MARK: u32 = u32::MAX;

impl NoisyOperator {
    /// Build the operator for a spec with `edge_to_source` mapping each edge
    /// (in `graph.edges()` order) to its governing source index. On-site
    /// sources, when enabled, follow the edge sources in node order.
    pub fn new(
        spec: &HamiltonianSpec,
        edge_to_source: &[usize],
        n_sources: usize,
        initial_signs: &[i8],
    ) -> Result<Self> {
        Self::build(spec, edge_to_source, n_sources, initial_signs, true)
    }

    fn build(
        spec: &HamiltonianSpec,
        edge_to_source: &[usize],
        n_sources: usize,
        initial_signs: &[i8],
        allow_chain: bool,
    ) -> Result<Self> {
        let graph = &spec.graph;
        let n = graph.node_count();
        let j0 = spec.j0;
        let nu = spec.noise.nu;
        let edge_noise = spec.noise.target.affects_edges() && nu > 0.0;
        let node_noise = spec.noise.target.affects_nodes() && nu > 0.0;
        if initial_signs.len() != n_sources {
            return Err(Error::SourceCountMismatch {
                expected: n_sources,
                got: initial_signs.len(),
            });
        }
        debug_assert!(!edge_noise || edge_to_source.len() == graph.edge_count());

        let mut diag_base: Vec<f64> = graph.degrees().iter().map(|&d| j0 * d as f64).collect();
        if let Some(w) = spec.oracle {
            diag_base[w] -= 1.0;
        }

        let dense = graph.edge_count() * 8 > n * n;
        let chain = if allow_chain && !dense {
            chain_slots(graph)
        } else {
            None
        };
        let mut sources: Vec<Vec<Controlled>> = vec![Vec::new(); n_sources];

        let storage = if let Some(slots) = chain {
            let mut coupling = vec![0.0; n];
            for (e, &slot) in slots.iter().enumerate() {
                coupling[slot] = -j0;
                if edge_noise {
                    sources[edge_to_source[e]].push(Controlled {
                        slot: slot as u32,
                        base: -j0,
                        delta: -nu,
                    });
                }
            }
            if node_noise {
                let offset = edge_source_count(spec);
                for j in 0..n {
                    sources[offset + j].push(Controlled {
                        slot: DIAG_MARK - j as u32,
                        base: diag_base[j],
                        delta: nu,
                    });
                }
            }
            Storage::Chain {
                diag: diag_base.clone(),
                coupling,
            }
        } else if dense {
            let mut data = vec![0.0; n * n];
            for (i, &v) in diag_base.iter().enumerate() {
                data[i * n + i] = v;
            }
            for (e, &(j, k)) in graph.edges().iter().enumerate() {
                data[j * n + k] = -j0;
                data[k * n + j] = -j0;
                if edge_noise {
                    let src = edge_to_source[e];
                    sources[src].push(Controlled {
                        slot: (j * n + k) as u32,
                        base: -j0,
                        delta: -nu,
                    });
                    sources[src].push(Controlled {
                        slot: (k * n + j) as u32,
                        base: -j0,
                        delta: -nu,
                    });
                }
            }
            if node_noise {
                let offset = edge_source_count(spec);
                for j in 0..n {
                    sources[offset + j].push(Controlled {
                        slot: (j * n + j) as u32,
                        base: diag_base[j],
                        delta: nu,
                    });
                }
            }
            Storage::Dense { data }
        } else {
            // adjacency in CSR, rows sorted by column
            let mut row_cols: Vec<Vec<(u32, usize)>> = vec![Vec::new(); n];
            for (e, &(j, k)) in graph.edges().iter().enumerate() {
                row_cols[j].push((k as u32, e));
                row_cols[k].push((j as u32, e));
            }
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut col_idx = Vec::new();
            let mut values = Vec::new();
            row_ptr.push(0u32);
            for cols in row_cols.iter_mut() {
                cols.sort_unstable();
                for &(c, e) in cols.iter() {
                    let slot = values.len() as u32;
                    col_idx.push(c);
                    values.push(-j0);
                    if edge_noise {
                        sources[edge_to_source[e]].push(Controlled {
                            slot,
                            base: -j0,
                            delta: -nu,
                        });
                    }
                }
                row_ptr.push(values.len() as u32);
            }
            if node_noise {
                let offset = edge_source_count(spec);
                for j in 0..n {
                    sources[offset + j].push(Controlled {
                        slot: DIAG_MARK - j as u32,
                        base: diag_base[j],
                        delta: nu,
                    });
                }
            }
            Storage::Csr {
                row_ptr,
                col_idx,
                values,
                diag: diag_base.clone(),
            }
        };

        // Gershgorin bounds over all sign patterns.
        let degrees = graph.degrees();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let off_max = j0.abs() + if edge_noise { nu } else { 0.0 };
        let diag_pm = if node_noise { nu } else { 0.0 };
        for j in 0..n {
            let radius = degrees[j] as f64 * off_max;
            lo = lo.min(diag_base[j] - diag_pm - radius);
            hi = hi.max(diag_base[j] + diag_pm + radius);
        }
        if !lo.is_finite() || !hi.is_finite() || lo == hi {
            // single-node graph or degenerate; widen to a safe interval
            lo = lo.min(-1.0);
            hi = hi.max(1.0);
        }

        let mut op = Self {
            n,
            storage,
            sources,
            signs: vec![0; n_sources],
            lo,
            hi,
        };
        for (s, &sign) in initial_signs.iter().enumerate() {
            op.set_sign(s, sign);
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Spectral interval containing every eigenvalue of every sign pattern.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Set one source's sign, rewriting the entries it controls.
    pub fn set_sign(&mut self, source: usize, sign: i8) {
        self.signs[source] = sign;
        let s = sign as f64;
        for c in &self.sources[source] {
            let v = c.base + c.delta * s;
            match &mut self.storage {
                Storage::Dense { data } => data[c.slot as usize] = v,
                Storage::Csr { values, diag, .. } => {
                    if c.slot > DIAG_MARK - self.n as u32 {
                        diag[(DIAG_MARK - c.slot) as usize] = v;
                    } else {
                        values[c.slot as usize] = v;
                    }
                }
                Storage::Chain { diag, coupling } => {
                    if c.slot > DIAG_MARK - self.n as u32 {
                        diag[(DIAG_MARK - c.slot) as usize] = v;
                    } else {
                        coupling[c.slot as usize] = v;
                    }
                }
            }
        }
    }

    pub fn flip_sign(&mut self, source: usize) {
        self.set_sign(source, -self.signs[source]);
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        match &self.storage {
            Storage::Chain { diag, coupling } => {
                let n = self.n;
                let wrap = coupling[n - 1];
                y[0] = Complex64::new(
                    diag[0] * x[0].re + coupling[0] * x[1].re + wrap * x[n - 1].re,
                    diag[0] * x[0].im + coupling[0] * x[1].im + wrap * x[n - 1].im,
                );
                for j in 1..n - 1 {
                    let (cl, cr) = (coupling[j - 1], coupling[j]);
                    y[j] = Complex64::new(
                        diag[j] * x[j].re + cr * x[j + 1].re + cl * x[j - 1].re,
                        diag[j] * x[j].im + cr * x[j + 1].im + cl * x[j - 1].im,
                    );
                }
                y[n - 1] = Complex64::new(
                    diag[n - 1] * x[n - 1].re + coupling[n - 2] * x[n - 2].re + wrap * x[0].re,
                    diag[n - 1] * x[n - 1].im + coupling[n - 2] * x[n - 2].im + wrap * x[0].im,
                );
            }
            Storage::Dense { data } => {
                for i in 0..self.n {
                    let row = &data[i * self.n..(i + 1) * self.n];
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (v, xv) in row.iter().zip(x) {
                        re += v * xv.re;
                        im += v * xv.im;
                    }
                    y[i] = Complex64::new(re, im);
                }
            }
            Storage::Csr {
                row_ptr,
                col_idx,
                values,
                diag,
            } => {
                for i in 0..self.n {
                    let lo = row_ptr[i] as usize;
                    let hi = row_ptr[i + 1] as usize;
                    let xi = x[i];
                    let mut re = diag[i] * xi.re;
                    let mut im = diag[i] * xi.im;
                    for (c, v) in col_idx[lo..hi].iter().zip(&values[lo..hi]) {
                        let xv = x[*c as usize];
                        re += v * xv.re;
                        im += v * xv.im;
                    }
                    y[i] = Complex64::new(re, im);
                }
            }
        }
    }

    /// Materialize the current snapshot as a dense matrix.
    pub fn snapshot(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        match &self.storage {
            Storage::Chain { diag, coupling } => {
                for j in 0..self.n {
                    m[[j, j]] = diag[j];
                    let k = (j + 1) % self.n;
                    m[[j, k]] = coupling[j];
                    m[[k, j]] = coupling[j];
                }
            }
            Storage::Dense { data } => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        m[[i, j]] = data[i * self.n + j];
                    }
                }
            }
            Storage::Csr {
                row_ptr,
                col_idx,
                values,
                diag,
            } => {
                for i in 0..self.n {
                    m[[i, i]] = diag[i];
                    for idx in row_ptr[i] as usize..row_ptr[i + 1] as usize {
                        m[[i, col_idx[idx] as usize]] = values[idx];
                    }
                }
            }
        }
        m
    }
}

/// Number of edge-bound sources in the default (domain-free) layout.
pub(crate) fn edge_source_count(spec: &HamiltonianSpec) -> usize {
    if spec.noise.target.affects_edges() {
        spec.graph.edge_count()
    } else {
        0
    }
}

/// Two-particle generator: Kronecker sum of one shared single-particle
/// operator with itself, plus a diagonal pair interaction.
#[derive(Debug, Clone)]
pub(crate) struct TwoParticleOperator {
    pub single: NoisyOperator,
    /// `U(|j-k|)` on the flattened pair index `j * n + k`.
    interaction: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl TwoParticleOperator {
    pub fn new(single: NoisyOperator, interaction_by_distance: &dyn Fn(usize) -> f64) -> Self {
        let n = single.dim();
        let mut interaction = vec![0.0; n * n];
        let mut u_lo = 0.0f64;
        let mut u_hi = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let u = interaction_by_distance(j.abs_diff(k));
                interaction[j * n + k] = u;
                u_lo = u_lo.min(u);
                u_hi = u_hi.max(u);
            }
        }
        let (slo, shi) = single.bounds();
        TwoParticleOperator {
            single,
            interaction,
            lo: 2.0 * slo + u_lo,
            hi: 2.0 * shi + u_hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.single.dim() * self.single.dim()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `y = (H (x) I + I (x) H + U) x` over pair amplitudes `x[(j,k)] = x[j*n+k]`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.single.dim();
        match &self.single.storage {
            Storage::Chain { diag, coupling } => {
                for j in 0..n {
                    let jp = (j + 1) % n;
                    let jm = (j + n - 1) % n;
                    let (cjr, cjl) = (coupling[j], coupling[jm]);
                    for k in 0..n {
                        let idx = j * n + k;
                        let kp = (k + 1) % n;
                        let km = (k + n - 1) % n;
                        let (ckr, ckl) = (coupling[k], coupling[km]);
                        let d = diag[j] + diag[k] + self.interaction[idx];
                        let xi = x[idx];
                        let (a, b, c, e) =
                            (x[jp * n + k], x[jm * n + k], x[j * n + kp], x[j * n + km]);
                        y[idx] = Complex64::new(
                            d * xi.re + cjr * a.re + cjl * b.re + ckr * c.re + ckl * e.re,
                            d * xi.im + cjr * a.im + cjl * b.im + ckr * c.im + ckl * e.im,
                        );
                    }
                }
            }
            Storage::Csr {
                row_ptr,
                col_idx,
                values,
                diag,
            } => {
                for j in 0..n {
                    let (jlo, jhi) = (row_ptr[j] as usize, row_ptr[j + 1] as usize);
                    for k in 0..n {
                        let idx = j * n + k;
                        let d = diag[j] + diag[k] + self.interaction[idx];
                        let xi = x[idx];
                        let mut re = d * xi.re;
                        let mut im = d * xi.im;
                        // hop of the first particle: rows of H at fixed k
                        for (c, v) in col_idx[jlo..jhi].iter().zip(&values[jlo..jhi]) {
                            let xv = x[*c as usize * n + k];
                            re += v * xv.re;
                            im += v * xv.im;
                        }
                        // hop of the second particle
                        let (klo, khi) = (row_ptr[k] as usize, row_ptr[k + 1] as usize);
                        for (c, v) in col_idx[klo..khi].iter().zip(&values[klo..khi]) {
                            let xv = x[j * n + *c as usize];
                            re += v * xv.re;
                            im += v * xv.im;
                        }
                        y[idx] = Complex64::new(re, im);
                    }
                }
            }
            Storage::Dense { data } => {
                for j in 0..n {
                    let hrow_j = &data[j * n..(j + 1) * n];
                    for k in 0..n {
                        let idx = j * n + k;
                        let mut re = self.interaction[idx] * x[idx].re;
                        let mut im = self.interaction[idx] * x[idx].im;
                        for (jp, v) in hrow_j.iter().enumerate() {
                            let xv = x[jp * n + k];
                            re += v * xv.re;
                            im += v * xv.im;
                        }
                        let hrow_k = &data[k * n..(k + 1) * n];
                        for (kp, v) in hrow_k.iter().enumerate() {
                            let xv = x[j * n + kp];
                            re += v * xv.re;
                            im += v * xv.im;
                        }
                        y[idx] = Complex64::new(re, im);
                    }
                }
            }
        }
    }

    /// Dense `n^2 x n^2` snapshot of the current pair Hamiltonian.
    pub fn snapshot(&self) -> Array2<f64> {
        let n = self.single.dim();
        let h1 = self.single.snapshot();
        let dim = n * n;
        let mut m = Array2::zeros((dim, dim));
        for j in 0..n {
            for k in 0..n {
                let row = j * n + k;
                m[[row, row]] += self.interaction[row];
                for jp in 0..n {
                    m[[row, jp * n + k]] += h1[[j, jp]];
                }
                for kp in 0..n {
                    m[[row, j * n + kp]] += h1[[k, kp]];
                }
            }
        }
        m
    }
}
