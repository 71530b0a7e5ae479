//! C ABI over padamp-core.
//!
//! Every entry point returns a [`PadampStatus`]. On anything other than
//! `PADAMP_STATUS_OK` a message is available from [`padamp_last_error`] on
//! the same thread. Optimizers live behind an opaque handle that must be
//! released with [`padamp_optimizer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use padamp_core::diagnostics::norm_growth_limit;
use padamp_core::geometry::{cosine_similarity, project_tangent};
use padamp_core::harness::{run, ConfigMap};
use padamp_core::optimizers::{EpsMode, TriggerLr};
use padamp_core::types::Beta1Mode;
use padamp_core::{Error, GradientSet, HyperParams, Optimizer, OptimizerKind, ParamGroup, StepOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadampStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidHyperParam = 3,
    ShapeMismatch = 4,
    NonFinite = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

impl From<&Error> for PadampStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidHyperParam { .. } => PadampStatus::InvalidHyperParam,
            Error::EmptyGroups | Error::ZeroDim(_) | Error::ShapeMismatch(_) => {
                PadampStatus::ShapeMismatch
            }
            Error::NonFiniteGradient { .. }
            | Error::NonFiniteParams { .. }
            | Error::NonFiniteLoss { .. } => PadampStatus::NonFinite,
            Error::ZeroTheta | Error::InvalidArgument(_) => PadampStatus::InvalidArgument,
            Error::Config(_) => PadampStatus::Config,
            Error::Csv(_) | Error::Io(_) => PadampStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (PadampStatus, String)>) -> PadampStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PadampStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside padamp");
            PadampStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (PadampStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (PadampStatus, String) {
    (PadampStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (PadampStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PadampStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PadampStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next padamp call on the same thread.
#[no_mangle]
pub extern "C" fn padamp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PadampHyperParams {
    pub eta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub p: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Decay beta1 as `beta1 * lambda^(t-1)` instead of holding it fixed.
    pub beta1_geometric: bool,
}

impl From<HyperParams> for PadampHyperParams {
    fn from(h: HyperParams) -> Self {
        Self {
            eta0: h.eta0,
            beta1: h.beta1,
            beta2: h.beta2,
            lambda: h.lambda,
            delta: h.delta,
            epsilon: h.epsilon,
            p: h.p,
            weight_decay: h.weight_decay,
            momentum: h.momentum,
            beta1_geometric: h.beta1t_mode == Beta1Mode::Geometric,
        }
    }
}

impl From<PadampHyperParams> for HyperParams {
    fn from(h: PadampHyperParams) -> Self {
        Self {
            eta0: h.eta0,
            beta1: h.beta1,
            beta2: h.beta2,
            lambda: h.lambda,
            delta: h.delta,
            epsilon: h.epsilon,
            p: h.p,
            weight_decay: h.weight_decay,
            momentum: h.momentum,
            beta1t_mode: if h.beta1_geometric { Beta1Mode::Geometric } else { Beta1Mode::Constant },
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PadampOptions {
    /// `v^p + eps` rather than `(v + eps)^p`.
    pub eps_outside: bool,
    pub projection: bool,
    /// Scale the trigger threshold by the base rate instead of the scheduled one.
    pub trigger_base_lr: bool,
    pub wd_skip_projected: bool,
}

impl From<StepOptions> for PadampOptions {
    fn from(o: StepOptions) -> Self {
        Self {
            eps_outside: o.eps_mode == EpsMode::Outside,
            projection: o.projection,
            trigger_base_lr: o.trigger_lr == TriggerLr::Base,
            wd_skip_projected: o.wd_skip_projected,
        }
    }
}

impl From<PadampOptions> for StepOptions {
    fn from(o: PadampOptions) -> Self {
        Self {
            eps_mode: if o.eps_outside { EpsMode::Outside } else { EpsMode::Inside },
            trigger_lr: if o.trigger_base_lr { TriggerLr::Base } else { TriggerLr::Scheduled },
            projection: o.projection,
            wd_skip_projected: o.wd_skip_projected,
        }
    }
}

/// Defaults for an optimizer kind ("padamp", "adamp", "padam", "adam",
/// "amsgrad", "sgdm").
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padamp_hyperparams_default(
    kind: *const c_char,
    out: *mut PadampHyperParams,
) -> PadampStatus {
    guard(|| {
        let kind: OptimizerKind = string(kind, "kind")?.parse().map_err(core_err)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = kind.default_hyperparams().into();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn padamp_options_default() -> PadampOptions {
    StepOptions::default().into()
}

/// Opaque optimizer handle.
pub struct PadampOptimizer {
    inner: Optimizer,
    params: Vec<ParamGroup>,
}

/// Creates an optimizer over `n_groups` parameter groups whose sizes are
/// given by `group_sizes`. `opts` may be null for the defaults.
///
/// # Safety
/// `kind` must be a NUL-terminated string, `hp` readable, `opts` null or
/// readable, `group_sizes` valid for `n_groups` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padamp_optimizer_new(
    kind: *const c_char,
    hp: *const PadampHyperParams,
    opts: *const PadampOptions,
    group_sizes: *const usize,
    n_groups: usize,
    out: *mut *mut PadampOptimizer,
) -> PadampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let kind: OptimizerKind = string(kind, "kind")?.parse().map_err(core_err)?;
        if hp.is_null() {
            return Err(null("hp"));
        }
        let hp: HyperParams = (*hp).into();
        let opts: StepOptions = if opts.is_null() { StepOptions::default() } else { (*opts).into() };
        let params = slice(group_sizes, n_groups, "group_sizes")?
            .iter()
            .enumerate()
            .map(|(i, &n)| ParamGroup::new(format!("g{i}"), vec![0.0; n]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let inner = Optimizer::new(kind, hp, opts, &params).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PadampOptimizer { inner, params }));
        Ok(())
    })
}

/// # Safety
/// `opt` must be null or a handle from [`padamp_optimizer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn padamp_optimizer_free(opt: *mut PadampOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Total number of parameters across groups.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn padamp_optimizer_dim(opt: *const PadampOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.params.iter().map(ParamGroup::dim).sum())
}

/// Steps taken so far.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn padamp_optimizer_steps(opt: *const PadampOptimizer) -> u64 {
    opt.as_ref().map_or(0, |o| o.inner.state.t)
}

/// One step. `params` and `grads` hold all groups back to back; `params` is
/// updated in place. If `projected` is non-null it receives one flag per
/// group. On error neither the state nor `params` change.
///
/// # Safety
/// `opt` must be a live handle, `params` valid for `len` reads and writes,
/// `grads` valid for `len` reads and `projected` null or writable for one
/// bool per group.
#[no_mangle]
pub unsafe extern "C" fn padamp_optimizer_step(
    opt: *mut PadampOptimizer,
    params: *mut f64,
    grads: *const f64,
    len: usize,
    eta_t: f64,
    p_now: f64,
    projected: *mut bool,
) -> PadampStatus {
    guard(|| {
        let o = opt.as_mut().ok_or_else(|| null("opt"))?;
        let dim: usize = o.params.iter().map(ParamGroup::dim).sum();
        if len != dim {
            return Err((
                PadampStatus::ShapeMismatch,
                format!("expected {dim} values, got {len}"),
            ));
        }
        if params.is_null() {
            return Err(null("params"));
        }
        let flat = std::slice::from_raw_parts_mut(params, len);
        let grads = slice(grads, len, "grads")?;
        let mut at = 0;
        let mut gs = Vec::with_capacity(o.params.len());
        for g in &mut o.params {
            let n = g.dim();
            g.values.copy_from_slice(&flat[at..at + n]);
            gs.push(grads[at..at + n].to_vec());
            at += n;
        }
        let step = o.inner.step(&o.params, &GradientSet(gs), eta_t, p_now).map_err(core_err)?;
        o.params = step.new_params;
        let mut at = 0;
        for g in &o.params {
            flat[at..at + g.dim()].copy_from_slice(&g.values);
            at += g.dim();
        }
        if !projected.is_null() {
            for (i, r) in step.record.groups.iter().enumerate() {
                *projected.add(i) = r.projected;
            }
        }
        Ok(())
    })
}

/// Cosine similarity of two vectors; 0 when either is zero.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padamp_cosine_similarity(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> PadampStatus {
    guard(|| {
        let (a, b) = (slice(a, len, "a")?, slice(b, len, "b")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = cosine_similarity(a, b);
        Ok(())
    })
}

/// Removes the component of `x` along `theta`, writing `len` values to `out`.
///
/// # Safety
/// `theta` and `x` must be valid for `len` reads, `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn padamp_project_tangent(
    theta: *const f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> PadampStatus {
    guard(|| {
        let (theta, x) = (slice(theta, len, "theta")?, slice(x, len, "x")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let y = project_tangent(theta, x).map_err(core_err)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&y);
        Ok(())
    })
}

/// Limit of the momentum to plain-descent squared-norm growth ratio.
#[no_mangle]
pub extern "C" fn padamp_norm_growth_limit(beta: f64) -> f64 {
    norm_growth_limit(beta)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PadampRunSummary {
    pub steps: u64,
    pub final_loss: f64,
    /// NaN for objectives without a notion of accuracy.
    pub final_accuracy: f64,
    pub min_grad_norm_sq: f64,
    pub diagnostics_pass: bool,
}

/// Trains from key-value config text (the `run` subcommand's format) and
/// fills `out`. Nothing is written to disk.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padamp_run_config(
    config: *const c_char,
    out: *mut PadampRunSummary,
) -> PadampStatus {
    guard(|| {
        let text = string(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut map = ConfigMap::parse(text).map_err(core_err)?;
        map.remove("output.path");
        let cfg = map.resolve().map_err(core_err)?;
        let r = run(&cfg).map_err(core_err)?;
        *out = PadampRunSummary {
            steps: r.records.len() as u64,
            final_loss: r.summary.final_loss,
            final_accuracy: r.summary.final_accuracy.unwrap_or(f64::NAN),
            min_grad_norm_sq: r.summary.min_grad_norm_sq,
            diagnostics_pass: r.report.all_pass(),
        };
        Ok(())
    })
}
