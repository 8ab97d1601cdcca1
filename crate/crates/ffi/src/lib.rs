//! C ABI for fitting and querying elastic principal trees.
//!
//! Graphs are handed out as opaque `ClintrajGraph` pointers and must be
//! released with [`clintraj_graph_free`]. Every fallible call returns a
//! [`ClintrajStatus`]; the message of the last failure on the calling thread
//! is available from [`clintraj_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};

use clintraj::elpigraph::{
    explained_variance, extend_leaves, grow_tree, prune_tree, DataView, ElasticParams, GrowOptions, PrincipalGraph,
};
use clintraj::treeanalysis::{compute_pseudotime, PseudotimeMetric};
use clintraj::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClintrajStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NotATree = 4,
    Singular = 5,
    Io = 6,
    Panic = 7,
}

/// Elastic energy coefficients. A non-finite `r0` disables trimming.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ClintrajElasticParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub r0: f64,
    pub n_nodes: size_t,
}

/// Opaque principal graph.
pub struct ClintrajGraph(PrincipalGraph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ClintrajStatus {
    match e {
        Error::NotATree(_) => ClintrajStatus::NotATree,
        Error::Singular(_) => ClintrajStatus::Singular,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) => ClintrajStatus::Io,
        _ => ClintrajStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ClintrajStatus>) -> ClintrajStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClintrajStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            ClintrajStatus::Panic
        }
    }
}

fn check<T>(r: clintraj::Result<T>) -> Result<T, ClintrajStatus> {
    r.map_err(|e| {
        let s = status_of(&e);
        set_error(e.to_string());
        s
    })
}

fn null(what: &str) -> ClintrajStatus {
    set_error(format!("{what} is null"));
    ClintrajStatus::NullPointer
}

unsafe fn data_view<'a>(data: *const f64, rows: size_t, dim: size_t) -> Result<DataView<'a>, ClintrajStatus> {
    if data.is_null() {
        return Err(null("data"));
    }
    if rows == 0 || dim == 0 {
        set_error("data must have at least one row and one column".into());
        return Err(ClintrajStatus::InvalidArgument);
    }
    let values = std::slice::from_raw_parts(data, rows * dim);
    Ok(DataView::new(values, dim))
}

unsafe fn graph_ref<'a>(g: *const ClintrajGraph) -> Result<&'a PrincipalGraph, ClintrajStatus> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

fn into_handle(g: PrincipalGraph, out: *mut *mut ClintrajGraph) {
    unsafe { *out = Box::into_raw(Box::new(ClintrajGraph(g))) };
}

/// Default elastic coefficients.
#[no_mangle]
pub extern "C" fn clintraj_default_params() -> ClintrajElasticParams {
    let p = ElasticParams::default();
    ClintrajElasticParams {
        lambda: p.lambda,
        mu: p.mu,
        alpha: p.alpha,
        r0: p.r0,
        n_nodes: p.n_nodes_target,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn clintraj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Grows a principal tree on row-major `data` (`rows` x `dim`), then
/// prunes short leaves and extends the remaining ones.
///
/// # Safety
/// `data` must point to `rows * dim` readable doubles, `params` to a valid
/// struct and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn clintraj_fit_tree(
    data: *const f64,
    rows: size_t,
    dim: size_t,
    params: *const ClintrajElasticParams,
    seed: u64,
    out: *mut *mut ClintrajGraph,
) -> ClintrajStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let view = data_view(data, rows, dim)?;
        let params = ElasticParams {
            lambda: p.lambda,
            mu: p.mu,
            alpha: p.alpha,
            r0: if p.r0.is_finite() { p.r0 } else { f64::INFINITY },
            n_nodes_target: p.n_nodes,
        };
        let opts = GrowOptions {
            seed,
            ..Default::default()
        };
        let grown = check(grow_tree(view, params, opts))?;
        let pruned = check(prune_tree(&grown.graph))?;
        let tree = check(extend_leaves(view, &pruned))?;
        into_handle(tree, out);
        Ok(())
    })
}

/// Releases a graph. Passing NULL is a no-op.
///
/// # Safety
/// `g` must be NULL or a handle returned by this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_free(g: *mut ClintrajGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_n_nodes(g: *const ClintrajGraph) -> size_t {
    g.as_ref().map_or(0, |g| g.0.n_nodes())
}

/// Number of edges, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_n_edges(g: *const ClintrajGraph) -> size_t {
    g.as_ref().map_or(0, |g| g.0.n_edges())
}

/// Embedding dimension, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_dim(g: *const ClintrajGraph) -> size_t {
    g.as_ref().map_or(0, |g| g.0.dim())
}

/// Copies node positions (row-major, `n_nodes * dim`) into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_nodes(g: *const ClintrajGraph, out: *mut f64, len: size_t) -> ClintrajStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let src = g.node_positions();
        if len < src.len() {
            set_error(format!("buffer holds {len} values, {} needed", src.len()));
            return Err(ClintrajStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
        Ok(())
    })
}

/// Copies edges as consecutive node index pairs (`2 * n_edges` values).
///
/// # Safety
/// `out` must point to `len` writable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_edges(g: *const ClintrajGraph, out: *mut size_t, len: size_t) -> ClintrajStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let need = 2 * g.n_edges();
        if len < need {
            set_error(format!("buffer holds {len} values, {need} needed"));
            return Err(ClintrajStatus::BufferTooSmall);
        }
        for (k, e) in g.edges().iter().enumerate() {
            *out.add(2 * k) = e[0];
            *out.add(2 * k + 1) = e[1];
        }
        Ok(())
    })
}

/// Fraction of the total variance of `data` explained by the graph.
///
/// # Safety
/// `data` must point to `rows * dim` readable doubles and `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn clintraj_explained_variance(
    g: *const ClintrajGraph,
    data: *const f64,
    rows: size_t,
    dim: size_t,
    out: *mut f64,
) -> ClintrajStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let view = data_view(data, rows, dim)?;
        *out = check(explained_variance(view, g))?;
        Ok(())
    })
}

/// Pseudotime of every row measured in edge counts from `root`. Writes
/// `rows` values into `pt` and the number of root-to-leaf trajectories
/// into `n_trajectories` when it is not NULL.
///
/// # Safety
/// `data` must point to `rows * dim` readable doubles, `pt` to `rows`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn clintraj_pseudotime(
    g: *const ClintrajGraph,
    data: *const f64,
    rows: size_t,
    dim: size_t,
    root: size_t,
    pt: *mut f64,
    n_trajectories: *mut size_t,
) -> ClintrajStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if pt.is_null() {
            return Err(null("pt"));
        }
        let view = data_view(data, rows, dim)?;
        let a = check(compute_pseudotime(view, g, root, PseudotimeMetric::EdgeCount))?;
        ptr::copy_nonoverlapping(a.pseudotime.as_ptr(), pt, rows);
        if !n_trajectories.is_null() {
            *n_trajectories = a.trajectories.len();
        }
        Ok(())
    })
}

/// Serializes a graph to JSON. Free the string with
/// [`clintraj_string_free`].
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_to_json(g: *const ClintrajGraph, out: *mut *mut c_char) -> ClintrajStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = check(g.to_json())?;
        *out = CString::new(text).map_err(|_| ClintrajStatus::InvalidArgument)?.into_raw();
        Ok(())
    })
}

/// Parses a graph from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable storage for
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn clintraj_graph_from_json(json: *const c_char, out: *mut *mut ClintrajGraph) -> ClintrajStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("json is not valid UTF-8".into());
            ClintrajStatus::InvalidArgument
        })?;
        let g = check(PrincipalGraph::from_json(text))?;
        into_handle(g, out);
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clintraj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
