//! C ABI over the wavelet-gp library.
//!
//! Every fallible function returns a [`WggpStatus`]; on failure the message
//! is kept per thread and can be copied out with
//! [`wggp_last_error_message`]. Graphs and fitted models are opaque handles
//! released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use wavelet_gp::density::{DensityConfig, DensityEstimate};
use wavelet_gp::filters::exact_wavelet_matrix;
use wavelet_gp::gp::kernel::{FeatureKernel, WaveletKernel, WaveletOperator};
use wavelet_gp::gp::regress::{OptimizerConfig, WaveletGp};
use wavelet_gp::poly::{apply_polynomial, fit_polynomial, ApproxMode, ProjectionMatrix, CHEBYSHEV_NODES};
use wavelet_gp::{Error, FilterSpec, Graph, MotherWavelet, NormalizedLaplacian, SpectralDecomposition};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WggpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraph = 3,
    TooLarge = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WggpMother {
    MexicanHat = 0,
    Morlet = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WggpMode {
    Exact = 0,
    UniformLs = 1,
    WeightedLs = 2,
    Chebyshev = 3,
}

/// Filter description: optional low-pass `1/(1+αλ)` plus one band per
/// entry of `betas`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WggpFilter {
    pub mother: WggpMother,
    pub has_low_pass: bool,
    pub alpha: f64,
    pub betas: *const f64,
    pub n_betas: usize,
}

pub struct WggpGraph {
    graph: Graph,
    laplacian: Arc<NormalizedLaplacian>,
    decomposition: OnceLock<Arc<SpectralDecomposition>>,
    density: OnceLock<Arc<DensityEstimate>>,
}

pub struct WggpModel {
    model: WaveletGp,
    targets: Vec<f64>,
    objective: f64,
}

struct Failure(WggpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NodeOutOfRange { .. }
            | Error::SelfLoop(_)
            | Error::DuplicateEdge(..)
            | Error::NonPositiveWeight(..)
            | Error::IsolatedNode(_)
            | Error::NotConnected(_) => WggpStatus::InvalidGraph,
            Error::TooLargeForDense { .. } => WggpStatus::TooLarge,
            Error::Underdetermined { .. }
            | Error::RankDeficient
            | Error::NotPositiveDefinite { .. }
            | Error::OptimizationFailed(_) => WggpStatus::Numerical,
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) | Error::InvalidDataset(_) => WggpStatus::Io,
            _ => WggpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: WggpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> WggpStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(fail(WggpStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            WggpStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(WggpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(fail(WggpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| fail(WggpStatus::NullPointer, format!("{what} is null")))
}

fn check_len(expected: usize, got: usize) -> Result<(), Failure> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got }.into())
    }
}

unsafe fn filter_spec(filter: *const WggpFilter) -> Result<FilterSpec, Failure> {
    let f = deref(filter, "filter")?;
    let betas = slice(f.betas, f.n_betas, "filter betas")?;
    let mother = match f.mother {
        WggpMother::MexicanHat => MotherWavelet::MexicanHat,
        WggpMother::Morlet => MotherWavelet::Morlet,
    };
    Ok(FilterSpec::new(
        mother,
        f.has_low_pass.then_some(f.alpha),
        betas.to_vec(),
    )?)
}

impl WggpGraph {
    fn new(graph: Graph) -> Result<Self, Failure> {
        let laplacian = Arc::new(NormalizedLaplacian::new(&graph)?);
        Ok(WggpGraph {
            graph,
            laplacian,
            decomposition: OnceLock::new(),
            density: OnceLock::new(),
        })
    }

    fn decomposition(&self) -> Result<Arc<SpectralDecomposition>, Failure> {
        if let Some(d) = self.decomposition.get() {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(self.laplacian.eigendecompose()?);
        Ok(Arc::clone(self.decomposition.get_or_init(|| d)))
    }

    fn density(&self) -> Result<Arc<DensityEstimate>, Failure> {
        if let Some(d) = self.density.get() {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(DensityEstimate::estimate(&self.laplacian, DensityConfig::default())?);
        Ok(Arc::clone(self.density.get_or_init(|| d)))
    }

    fn projection(&self, mode: ApproxMode, degree: usize) -> Result<ProjectionMatrix, Failure> {
        Ok(match mode {
            ApproxMode::Chebyshev => ProjectionMatrix::chebyshev(degree, CHEBYSHEV_NODES)?,
            ApproxMode::UniformLS => ProjectionMatrix::least_squares(self.density()?.sample_points(), None, degree)?,
            ApproxMode::WeightedLS => {
                let d = self.density()?;
                ProjectionMatrix::least_squares(d.sample_points(), Some(d.weights()), degree)?
            }
        })
    }

    fn operator(&self, mode: WggpMode, degree: usize) -> Result<WaveletOperator, Failure> {
        let approx = match mode {
            WggpMode::Exact => return Ok(WaveletOperator::Exact(self.decomposition()?)),
            WggpMode::UniformLs => ApproxMode::UniformLS,
            WggpMode::WeightedLs => ApproxMode::WeightedLS,
            WggpMode::Chebyshev => ApproxMode::Chebyshev,
        };
        Ok(WaveletOperator::Polynomial {
            laplacian: Arc::clone(&self.laplacian),
            projection: Arc::new(self.projection(approx, degree)?),
        })
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wggp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns its full length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wggp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a graph from parallel edge arrays. `weights` may be null for unit
/// weights.
///
/// # Safety
/// Arrays must hold `n_edges` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_new(
    n_nodes: usize,
    sources: *const usize,
    targets: *const usize,
    weights: *const f64,
    n_edges: usize,
    out: *mut *mut WggpGraph,
) -> WggpStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(WggpStatus::NullPointer, "out is null"));
        }
        let s = slice(sources, n_edges, "sources")?;
        let t = slice(targets, n_edges, "targets")?;
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n_edges, "weights")?)
        };
        let edges: Vec<(usize, usize, f64)> = (0..n_edges).map(|i| (s[i], t[i], w.map_or(1.0, |w| w[i]))).collect();
        let handle = WggpGraph::new(Graph::new(n_nodes, &edges)?)?;
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Reads a whitespace-separated edge list.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_read_edge_list(path: *const c_char, out: *mut *mut WggpGraph) -> WggpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(fail(WggpStatus::NullPointer, "path or out is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(WggpStatus::InvalidArgument, "path is not UTF-8"))?;
        let handle = WggpGraph::new(Graph::read_edge_list(Path::new(path))?)?;
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_free(graph: *mut WggpGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_n_nodes(graph: *const WggpGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.n_nodes())
}

/// Ascending Laplacian eigenvalues; `len` must equal the node count.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_eigenvalues(graph: *const WggpGraph, out: *mut f64, len: usize) -> WggpStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        check_len(g.graph.n_nodes(), len)?;
        let out = slice_mut(out, len, "out")?;
        out.copy_from_slice(g.decomposition()?.eigenvalues().as_slice());
        Ok(())
    })
}

/// Estimated spectral CDF at `samples` points spaced evenly on `[0, 2]`.
///
/// # Safety
/// `points` and `cdf` must each point to `samples` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_density_cdf(
    graph: *const WggpGraph,
    samples: usize,
    probes: usize,
    degree: usize,
    seed: u64,
    points: *mut f64,
    cdf: *mut f64,
) -> WggpStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let config = DensityConfig {
            samples,
            probes,
            degree,
            seed,
        };
        let estimate = DensityEstimate::estimate(&g.laplacian, config)?;
        slice_mut(points, samples, "points")?.copy_from_slice(estimate.sample_points());
        slice_mut(cdf, samples, "cdf")?.copy_from_slice(estimate.cdf_values());
        Ok(())
    })
}

/// Filter response `g(λ)` at each of `n` eigenvalues.
///
/// # Safety
/// `lambdas` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn wggp_filter_evaluate(
    filter: *const WggpFilter,
    lambdas: *const f64,
    out: *mut f64,
    n: usize,
) -> WggpStatus {
    guard(|| {
        let spec = filter_spec(filter)?;
        let lambdas = slice(lambdas, n, "lambdas")?;
        for (o, &l) in slice_mut(out, n, "out")?.iter_mut().zip(lambdas) {
            *o = spec.evaluate(l);
        }
        Ok(())
    })
}

/// Applies the graph wavelet `W` to a node signal. `degree` is ignored in
/// exact mode.
///
/// # Safety
/// `signal` and `out` must hold `n` doubles, `n` being the node count.
#[no_mangle]
pub unsafe extern "C" fn wggp_graph_apply_filter(
    graph: *const WggpGraph,
    filter: *const WggpFilter,
    mode: WggpMode,
    degree: usize,
    signal: *const f64,
    out: *mut f64,
    n: usize,
) -> WggpStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let spec = filter_spec(filter)?;
        check_len(g.graph.n_nodes(), n)?;
        let f = slice(signal, n, "signal")?;
        let result = match g.operator(mode, degree)? {
            WaveletOperator::Exact(dec) => {
                let w = exact_wavelet_matrix(&dec, &spec);
                let m = w.matrix();
                (0..n).map(|i| (0..n).map(|j| m[(i, j)] * f[j]).sum()).collect()
            }
            WaveletOperator::Polynomial { laplacian, projection } => {
                apply_polynomial(&laplacian, fit_polynomial(&spec, &projection).coefficients(), f)?
            }
        };
        slice_mut(out, n, "out")?.copy_from_slice(&result);
        Ok(())
    })
}

/// Fits a GP regression model with identity features by marginal
/// likelihood, starting from `filter` and `noise_variance`.
///
/// # Safety
/// `train` and `y` must hold `n_train` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wggp_model_fit(
    graph: *const WggpGraph,
    filter: *const WggpFilter,
    mode: WggpMode,
    degree: usize,
    noise_variance: f64,
    train: *const usize,
    y: *const f64,
    n_train: usize,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    out: *mut *mut WggpModel,
) -> WggpStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(WggpStatus::NullPointer, "out is null"));
        }
        let g = deref(graph, "graph")?;
        let spec = filter_spec(filter)?;
        let train = slice(train, n_train, "train")?.to_vec();
        let targets = slice(y, n_train, "y")?.to_vec();
        let kernel = WaveletKernel::new(g.operator(mode, degree)?, Box::new(spec), FeatureKernel::Identity)?;
        let config = OptimizerConfig {
            restarts,
            max_iters,
            seed,
            ..Default::default()
        };
        let fit = WaveletGp::new(kernel, noise_variance, train)?.optimize(&targets, &config)?;
        *out = Box::into_raw(Box::new(WggpModel {
            model: fit.model,
            targets,
            objective: fit.objective,
        }));
        Ok(())
    })
}

/// Posterior mean and latent variance at `n_query` nodes. `variance` may be
/// null.
///
/// # Safety
/// `query` and `mean` (and `variance` if non-null) must hold `n_query` elements.
#[no_mangle]
pub unsafe extern "C" fn wggp_model_predict(
    model: *const WggpModel,
    query: *const usize,
    n_query: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> WggpStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let query = slice(query, n_query, "query")?;
        let p = m.model.predict(&m.targets, query)?;
        slice_mut(mean, n_query, "mean")?.copy_from_slice(&p.mean);
        if !variance.is_null() {
            slice_mut(variance, n_query, "variance")?.copy_from_slice(&p.variance);
        }
        Ok(())
    })
}

/// Fitted parameters: filter scales (α first when present, then each β)
/// followed by the noise variance. `written` receives the count; when
/// `capacity` is too small nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `out` must hold `capacity` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wggp_model_params(
    model: *const WggpModel,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> WggpStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if written.is_null() {
            return Err(fail(WggpStatus::NullPointer, "written is null"));
        }
        let params = m.model.params(false);
        *written = params.len();
        if capacity < params.len() {
            return Err(fail(
                WggpStatus::BufferTooSmall,
                format!("{} parameters do not fit in {capacity}", params.len()),
            ));
        }
        slice_mut(out, params.len(), "out")?.copy_from_slice(&params);
        Ok(())
    })
}

/// Log marginal likelihood of the fitted model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wggp_model_log_marginal_likelihood(model: *const WggpModel, out: *mut f64) -> WggpStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if out.is_null() {
            return Err(fail(WggpStatus::NullPointer, "out is null"));
        }
        *out = m.objective;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wggp_model_free(model: *mut WggpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
