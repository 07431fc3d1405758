//! C ABI over the walk simulator: opaque handles, integer error codes, and
//! caller-owned output buffers.
//!
//! Conventions:
//! - every fallible call returns `0` on success or a negative [`PqStatus`]
//!   code; `pq_error_message` maps codes to static strings;
//! - handles are created by `pq_*_new`/`pq_*_run` calls and released with
//!   the matching `pq_*_free`; passing a handle to any other allocator's
//!   free is undefined behavior;
//! - output arrays are allocated by the caller at the documented length.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use perqwalk::dynamics::{ensemble_average, EnsembleOptions, EnsembleResult, HamiltonianSpec, StateVector};
use perqwalk::graph::Graph;
use perqwalk::noise::{NoiseSpec, NoiseTarget};
use perqwalk::search::{run_noisy_search, uniform_grid, SearchProblem, SearchResult};
use perqwalk::Error;

/// Status codes returned by every fallible call.
#[repr(i32)]
pub enum PqStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    OutOfRange = -3,
    Io = -4,
    Internal = -5,
    BadUtf8 = -6,
}

fn code_of(err: &Error) -> i32 {
    match err {
        Error::NodeOutOfRange { .. } | Error::TimeOutOfRange { .. } => PqStatus::OutOfRange as i32,
        Error::Io(_) => PqStatus::Io as i32,
        _ => PqStatus::InvalidArgument as i32,
    }
}

/// Opaque graph handle.
pub struct PqGraph(Graph);

/// Opaque ensemble-run handle.
pub struct PqEnsemble(EnsembleResult);

/// Opaque search-run handle.
pub struct PqSearch(SearchResult);

/// Noise environment passed by value across the ABI.
#[repr(C)]
pub struct PqNoiseParams {
    /// Strength in units of the base coupling, in `[0, 1]`.
    pub nu: f64,
    /// Telegraph switching rate, positive when `nu > 0`.
    pub gamma: f64,
    /// Neighbor-edge correlation probability for spatial domains.
    pub correlation_p: f64,
    /// 0 = tunneling, 1 = on-site, 2 = both.
    pub target: i32,
    /// Master seed for all derived streams.
    pub seed: u64,
}

impl PqNoiseParams {
    fn to_spec(&self) -> Result<NoiseSpec, i32> {
        let target = match self.target {
            0 => NoiseTarget::Tunneling,
            1 => NoiseTarget::OnSite,
            2 => NoiseTarget::Both,
            _ => return Err(PqStatus::InvalidArgument as i32),
        };
        let spec = NoiseSpec {
            nu: self.nu,
            gamma: self.gamma,
            correlation_p: self.correlation_p,
            target,
            seed: self.seed,
        };
        spec.validate(1.0).map_err(|e| code_of(&e))?;
        Ok(spec)
    }
}

fn graph_out(result: Result<Graph, Error>, out: *mut *mut PqGraph) -> i32 {
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    match result {
        Ok(g) => {
            unsafe { *out = Box::into_raw(Box::new(PqGraph(g))) };
            PqStatus::Ok as i32
        }
        Err(e) => {
            unsafe { *out = ptr::null_mut() };
            code_of(&e)
        }
    }
}

/// Line graph on `n` nodes, closed into a ring when `periodic`.
#[no_mangle]
pub extern "C" fn pq_graph_line(n: usize, periodic: bool, out: *mut *mut PqGraph) -> i32 {
    graph_out(Graph::line(n, periodic), out)
}

/// Complete graph on `n` nodes.
#[no_mangle]
pub extern "C" fn pq_graph_complete(n: usize, out: *mut *mut PqGraph) -> i32 {
    graph_out(Graph::complete(n), out)
}

/// Star graph on `n` nodes; node 0 is the hub.
#[no_mangle]
pub extern "C" fn pq_graph_star(n: usize, out: *mut *mut PqGraph) -> i32 {
    graph_out(Graph::star(n), out)
}

/// Load the `n=<count>` + `j k` edge-list format from `path`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pq_graph_from_edge_list(
    path: *const c_char,
    out: *mut *mut PqGraph,
) -> i32 {
    if path.is_null() {
        return PqStatus::NullPointer as i32;
    }
    let path = match unsafe { CStr::from_ptr(path) }.to_str() {
        Ok(p) => p,
        Err(_) => return PqStatus::BadUtf8 as i32,
    };
    graph_out(Graph::from_edge_list_path(path), out)
}

/// Release a graph handle; `graph` may be null.
///
/// # Safety
/// `graph` must come from a `pq_graph_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pq_graph_free(graph: *mut PqGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// Number of nodes; 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_graph_node_count(graph: *const PqGraph) -> usize {
    unsafe { graph.as_ref() }.map_or(0, |g| g.0.node_count())
}

/// Number of edges; 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_graph_edge_count(graph: *const PqGraph) -> usize {
    unsafe { graph.as_ref() }.map_or(0, |g| g.0.edge_count())
}

/// Write the `n x n` Laplacian row-major into `out` (length `n * n`).
///
/// # Safety
/// `out` must point to at least `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pq_graph_laplacian(graph: *const PqGraph, out: *mut f64) -> i32 {
    let Some(g) = (unsafe { graph.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    let n = g.0.node_count();
    let l = g.0.laplacian();
    let slice = unsafe { std::slice::from_raw_parts_mut(out, n * n) };
    for i in 0..n {
        for j in 0..n {
            slice[i * n + j] = l[[i, j]];
        }
    }
    PqStatus::Ok as i32
}

/// Ensemble-average a walker released at the chain center: `trajectories`
/// noise realizations, `samples` uniform times on `[0, t_max]`.
///
/// # Safety
/// `graph` and `noise` must be live pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_line_spread_run(
    graph: *const PqGraph,
    noise: *const PqNoiseParams,
    trajectories: usize,
    t_max: f64,
    samples: usize,
    out: *mut *mut PqEnsemble,
) -> i32 {
    let (Some(g), Some(noise)) = (unsafe { graph.as_ref() }, unsafe { noise.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    unsafe { *out = ptr::null_mut() };
    if !(t_max > 0.0) || samples < 2 {
        return PqStatus::InvalidArgument as i32;
    }
    let spec = match noise.to_spec() {
        Ok(s) => s,
        Err(code) => return code,
    };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<EnsembleResult, Error> {
        let n = g.0.node_count();
        let hspec = HamiltonianSpec::new(g.0.clone(), spec)?;
        let psi0 = StateVector::localized(n, n / 2)?;
        let grid = uniform_grid(t_max, samples);
        ensemble_average(&hspec, trajectories.max(1), &psi0, &grid, &EnsembleOptions::default())
    }));
    match result {
        Ok(Ok(ens)) => {
            unsafe { *out = Box::into_raw(Box::new(PqEnsemble(ens))) };
            PqStatus::Ok as i32
        }
        Ok(Err(e)) => code_of(&e),
        Err(_) => PqStatus::Internal as i32,
    }
}

/// Number of sample times in an ensemble result.
///
/// # Safety
/// `ens` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_ensemble_sample_count(ens: *const PqEnsemble) -> usize {
    unsafe { ens.as_ref() }.map_or(0, |e| e.0.sample_times.len())
}

/// Copy the sample times (length `pq_ensemble_sample_count`).
///
/// # Safety
/// `out` must point to enough doubles.
#[no_mangle]
pub unsafe extern "C" fn pq_ensemble_times(ens: *const PqEnsemble, out: *mut f64) -> i32 {
    copy_vec(ens, out, |e| &e.0.sample_times)
}

/// Copy the spreading variance and its standard error (length
/// `pq_ensemble_sample_count` each; either pointer may be null to skip).
///
/// # Safety
/// Non-null pointers must reference enough doubles.
#[no_mangle]
pub unsafe extern "C" fn pq_ensemble_variance(
    ens: *const PqEnsemble,
    mean: *mut f64,
    stderr: *mut f64,
) -> i32 {
    let Some(e) = (unsafe { ens.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if !mean.is_null() {
        unsafe { std::slice::from_raw_parts_mut(mean, e.0.variance.len()) }
            .copy_from_slice(&e.0.variance);
    }
    if !stderr.is_null() {
        unsafe { std::slice::from_raw_parts_mut(stderr, e.0.variance_stderr.len()) }
            .copy_from_slice(&e.0.variance_stderr);
    }
    PqStatus::Ok as i32
}

/// Copy the averaged position distribution at one sample index (length =
/// node count).
///
/// # Safety
/// `out` must point to `node_count` doubles.
#[no_mangle]
pub unsafe extern "C" fn pq_ensemble_distribution(
    ens: *const PqEnsemble,
    sample_index: usize,
    out: *mut f64,
) -> i32 {
    let Some(e) = (unsafe { ens.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    let Some(dist) = e.0.mean_distribution.get(sample_index) else {
        return PqStatus::OutOfRange as i32;
    };
    let slice = unsafe { std::slice::from_raw_parts_mut(out, dist.len()) };
    for (o, v) in slice.iter_mut().zip(dist.iter()) {
        *o = *v;
    }
    PqStatus::Ok as i32
}

/// Release an ensemble handle; `ens` may be null.
///
/// # Safety
/// `ens` must come from `pq_line_spread_run` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pq_ensemble_free(ens: *mut PqEnsemble) {
    if !ens.is_null() {
        drop(unsafe { Box::from_raw(ens) });
    }
}

fn copy_vec<T>(handle: *const T, out: *mut f64, get: impl Fn(&T) -> &Vec<f64>) -> i32 {
    let Some(h) = (unsafe { handle.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    let data = get(h);
    unsafe { std::slice::from_raw_parts_mut(out, data.len()) }.copy_from_slice(data);
    PqStatus::Ok as i32
}

/// Run a (noisy) spatial search from the uniform superposition.
///
/// `t_grid` may be null, in which case the default grid (400 points to
/// `3 (pi/2) sqrt(N)`) is used; a custom grid must be increasing and span at
/// least twice the optimal time.
///
/// # Safety
/// `graph` and `noise` must be live; `t_grid`, when non-null, must hold
/// `grid_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_search_run(
    graph: *const PqGraph,
    target: usize,
    coupling: f64,
    noise: *const PqNoiseParams,
    trajectories: usize,
    t_grid: *const f64,
    grid_len: usize,
    out: *mut *mut PqSearch,
) -> i32 {
    let (Some(g), Some(noise)) = (unsafe { graph.as_ref() }, unsafe { noise.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if out.is_null() {
        return PqStatus::NullPointer as i32;
    }
    unsafe { *out = ptr::null_mut() };
    let spec = match noise.to_spec() {
        Ok(s) => s,
        Err(code) => return code,
    };
    let grid: Vec<f64> = if t_grid.is_null() {
        perqwalk::search::default_grid(g.0.node_count())
    } else {
        unsafe { std::slice::from_raw_parts(t_grid, grid_len) }.to_vec()
    };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<SearchResult, Error> {
        let problem = SearchProblem::new(g.0.clone(), target, coupling, spec)?;
        run_noisy_search(&problem, trajectories.max(1), &grid)
    }));
    match result {
        Ok(Ok(res)) => {
            unsafe { *out = Box::into_raw(Box::new(PqSearch(res))) };
            PqStatus::Ok as i32
        }
        Ok(Err(e)) => code_of(&e),
        Err(_) => PqStatus::Internal as i32,
    }
}

/// Peak averaged success probability.
///
/// # Safety
/// `search` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_search_p_succ(search: *const PqSearch) -> f64 {
    unsafe { search.as_ref() }.map_or(f64::NAN, |s| s.0.p_succ)
}

/// Grid time of the peak.
///
/// # Safety
/// `search` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_search_t_opt(search: *const PqSearch) -> f64 {
    unsafe { search.as_ref() }.map_or(f64::NAN, |s| s.0.t_opt)
}

/// Repeat-until-success running time `t_opt / p_succ`.
///
/// # Safety
/// `search` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_search_t_avg(search: *const PqSearch) -> f64 {
    unsafe { search.as_ref() }.map_or(f64::NAN, |s| s.0.t_avg)
}

/// Number of grid points in the search curve.
///
/// # Safety
/// `search` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pq_search_grid_len(search: *const PqSearch) -> usize {
    unsafe { search.as_ref() }.map_or(0, |s| s.0.t_grid.len())
}

/// Copy the averaged curve; any of the pointers may be null to skip that
/// column. Arrays have length `pq_search_grid_len`.
///
/// # Safety
/// Non-null pointers must reference enough doubles.
#[no_mangle]
pub unsafe extern "C" fn pq_search_curve(
    search: *const PqSearch,
    t: *mut f64,
    p_w: *mut f64,
    p_w_stderr: *mut f64,
) -> i32 {
    let Some(s) = (unsafe { search.as_ref() }) else {
        return PqStatus::NullPointer as i32;
    };
    if !t.is_null() {
        unsafe { std::slice::from_raw_parts_mut(t, s.0.t_grid.len()) }
            .copy_from_slice(&s.0.t_grid);
    }
    if !p_w.is_null() {
        unsafe { std::slice::from_raw_parts_mut(p_w, s.0.p_w.len()) }.copy_from_slice(&s.0.p_w);
    }
    if !p_w_stderr.is_null() {
        unsafe { std::slice::from_raw_parts_mut(p_w_stderr, s.0.p_w_stderr.len()) }
            .copy_from_slice(&s.0.p_w_stderr);
    }
    PqStatus::Ok as i32
}

/// Release a search handle; `search` may be null.
///
/// # Safety
/// `search` must come from `pq_search_run` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pq_search_free(search: *mut PqSearch) {
    if !search.is_null() {
        drop(unsafe { Box::from_raw(search) });
    }
}

/// Closed-form complete-graph success probability at `J = 1/N`.
#[no_mangle]
pub extern "C" fn pq_grover_probability(n: usize, t: f64) -> f64 {
    if n < 2 {
        return f64::NAN;
    }
    perqwalk::search::grover_probability(n, t)
}

/// First Grover peak time `(pi/2) sqrt(N)`.
#[no_mangle]
pub extern "C" fn pq_optimal_time(n: usize) -> f64 {
    perqwalk::search::optimal_time(n)
}

/// Expected correlation-domain length for merge probability `p` over
/// `n_edges` chain edges.
#[no_mangle]
pub extern "C" fn pq_mean_domain_length(p: f64, n_edges: usize) -> f64 {
    if !(0.0..=1.0).contains(&p) || n_edges == 0 {
        return f64::NAN;
    }
    perqwalk::noise::mean_domain_length(p, n_edges)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static message for a status code.
#[no_mangle]
pub extern "C" fn pq_error_message(code: i32) -> *const c_char {
    let msg: &'static str = match code {
        0 => "ok\0",
        -1 => "null pointer\0",
        -2 => "invalid argument\0",
        -3 => "index or time out of range\0",
        -4 => "io error\0",
        -5 => "internal error\0",
        -6 => "invalid utf-8\0",
        _ => "unknown error\0",
    };
    msg.as_ptr() as *const c_char
}
