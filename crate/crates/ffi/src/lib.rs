//! C ABI over the flowcast engine.
//!
//! Graphs and models are opaque handles created by `*_load` and released by `*_free`.
//! Every fallible call returns an [`FcStatus`]; on failure the message is retrievable
//! from [`fc_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use flowcast::checkpoint::Checkpoint;
use flowcast::eval;
use flowcast::geo::{load_street_graph, normalized_adjacency, NormalizedAdjacency, StreetGraph};
use flowcast::models::{RecurrentModel, Sequence};
use flowcast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    HashMismatch = 6,
    Invalid = 7,
    Internal = 8,
}

/// Street graph with its normalized adjacency.
pub struct FcGraph {
    graph: StreetGraph,
    adjacency: NormalizedAdjacency,
}

/// Trained recurrent model loaded from a checkpoint.
pub struct FcModel {
    model: RecurrentModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FcStatus, msg: impl Into<String>) -> FcStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> FcStatus {
    match e.kind() {
        "io" => FcStatus::Io,
        "schema" => FcStatus::Parse,
        "shape" => FcStatus::Shape,
        "hash_mismatch" => FcStatus::HashMismatch,
        _ => FcStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> FcStatus) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(FcStatus::Internal, "panic inside flowcast"),
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, FcStatus> {
    if p.is_null() {
        return Err(fail(FcStatus::NullPointer, "path is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(FcStatus::InvalidUtf8, "path is not valid UTF-8")),
    }
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(FcStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failing call on this thread, or null. Valid until the next failure.
#[no_mangle]
pub extern "C" fn fc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a street graph from `node_id,lat,lon` and `u,v,length_m` CSV files.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_load(nodes: *const c_char, edges: *const c_char, out: *mut *mut FcGraph) -> FcStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let nodes = try_status!(path_arg(nodes));
        let edges = try_status!(path_arg(edges));
        match load_street_graph(&nodes, &edges) {
            Ok(graph) => {
                let adjacency = normalized_adjacency(&graph);
                *out = Box::into_raw(Box::new(FcGraph { graph, adjacency }));
                FcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `graph` must be null or a handle from [`fc_graph_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_free(graph: *mut FcGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_node_count(graph: *const FcGraph, out: *mut usize) -> FcStatus {
    non_null!(graph, out);
    *out = (*graph).graph.node_count();
    FcStatus::Ok
}

/// Id of the node nearest to a WGS84 coordinate by haversine distance.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_nearest_node(graph: *const FcGraph, lat: f64, lon: f64, out: *mut u64) -> FcStatus {
    non_null!(graph, out);
    if !(lat.is_finite() && lon.is_finite()) {
        return fail(FcStatus::Invalid, "coordinate is not finite");
    }
    *out = (*graph).graph.nearest_node(lat, lon);
    FcStatus::Ok
}

/// Entry (i, j) of the row-normalized adjacency, by dense node index.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_adjacency(graph: *const FcGraph, i: usize, j: usize, out: *mut f64) -> FcStatus {
    non_null!(graph, out);
    let a = &(*graph).adjacency;
    if i >= a.size() || j >= a.size() {
        return fail(FcStatus::Shape, format!("index ({i}, {j}) outside a {0}x{0} matrix", a.size()));
    }
    *out = a.get(i, j);
    FcStatus::Ok
}

/// Loads a checkpoint. Graph models need the graph they were trained on; others accept null.
///
/// # Safety
/// `path` must be a NUL-terminated string, `graph` null or a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_load(path: *const c_char, graph: *const FcGraph, out: *mut *mut FcModel) -> FcStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let path = try_status!(path_arg(path));
        let graph = graph.as_ref().map(|g| &g.graph);
        match Checkpoint::load(&path).and_then(|ck| ck.to_model(graph)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(FcModel { model }));
                FcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from [`fc_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_model_free(model: *mut FcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width, hidden size and output width (POI count).
///
/// # Safety
/// `model` must be a live handle; each out pointer must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_sizes(
    model: *const FcModel,
    input: *mut usize,
    hidden: *mut usize,
    output: *mut usize,
) -> FcStatus {
    non_null!(model);
    let m = &(*model).model;
    for (p, v) in [(input, m.input_size), (hidden, m.hidden_size), (output, m.output_size)] {
        if !p.is_null() {
            *p = v;
        }
    }
    FcStatus::Ok
}

/// Runs the model over `steps` scaled input rows and writes `steps × output` scaled predictions.
///
/// `inputs` is row-major `steps × input`. Graph models also take `observations`, row-major
/// `(steps + 1) × hidden` per-node values: row 0 is the initial state and row t + 1 forces
/// the state after step t. Other models ignore `observations`, which may be null.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn fc_model_forward(
    model: *const FcModel,
    steps: usize,
    inputs: *const f64,
    observations: *const f64,
    preds: *mut f64,
) -> FcStatus {
    guard(|| {
        non_null!(model, inputs, preds);
        let m = &(*model).model;
        let graph = m.arch.is_graph();
        if graph && observations.is_null() {
            return fail(FcStatus::NullPointer, "graph models need observations");
        }
        let x = std::slice::from_raw_parts(inputs, steps * m.input_size);
        let mut seq = Sequence {
            inputs: x.chunks(m.input_size.max(1)).take(steps).map(<[f64]>::to_vec).collect(),
            observations: vec![],
        };
        seq.inputs.resize(steps, vec![]);
        if graph {
            let n = m.hidden_size;
            let obs = std::slice::from_raw_parts(observations, (steps + 1) * n);
            seq.observations = obs.chunks(n).map(<[f64]>::to_vec).collect();
        }
        match m.forward(&seq, None) {
            Ok(trace) => {
                ptr::copy_nonoverlapping(trace.preds.as_ptr(), preds, trace.preds.len());
                FcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

unsafe fn metric(
    pred: *const f64,
    target: *const f64,
    len: usize,
    out: *mut f64,
    f: fn(&[f64], &[f64]) -> flowcast::Result<f64>,
) -> FcStatus {
    non_null!(pred, target, out);
    let (p, t) = (std::slice::from_raw_parts(pred, len), std::slice::from_raw_parts(target, len));
    match f(p, t) {
        Ok(v) => {
            *out = v;
            FcStatus::Ok
        }
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

/// Mean absolute error of two `len`-element arrays.
///
/// # Safety
/// Both arrays must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_mae(pred: *const f64, target: *const f64, len: usize, out: *mut f64) -> FcStatus {
    metric(pred, target, len, out, eval::mae)
}

/// Root mean squared error of two `len`-element arrays.
///
/// # Safety
/// Both arrays must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_rmse(pred: *const f64, target: *const f64, len: usize, out: *mut f64) -> FcStatus {
    metric(pred, target, len, out, eval::rmse)
}
