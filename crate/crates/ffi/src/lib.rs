//! C ABI over the `starmec` optimizers.
//!
//! Objects cross the boundary as opaque handles created by `*_new` / solve
//! calls and released with the matching `*_free`. Every fallible call returns
//! a [`StarmecStatus`]; the message of the last failure on the calling thread
//! is available from [`starmec_last_error`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use starmec::baseline::{brute_force_small, BruteGrids};
use starmec::channel::{generate, Geometry, PathLossParams};
use starmec::es::{search_tau0, SolveOptions, SolveReport, Variant};
use starmec::{ChannelSet, Error, Protocol, SystemParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarmecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    Infeasible = 5,
    Unbounded = 6,
    NotConverged = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarmecProtocol {
    Es = 0,
    Ms = 1,
    Ts = 2,
    /// Reflect-only plus transmit-only surface; needs an even element count.
    Conventional = 3,
}

/// System constants in SI units. Every UE gets the same cycles per bit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarmecSystem {
    pub ues: usize,
    pub elements: usize,
    pub bandwidth: f64,
    pub noise_power: f64,
    pub eta: f64,
    pub p_max: f64,
    pub f_max: f64,
    pub kappa: f64,
    pub period: f64,
    pub ap_power: f64,
    pub cycles_per_bit: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

/// Scalar results of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StarmecSummary {
    pub total_bits: f64,
    pub tau0: f64,
    /// Reflection and transmission slots (time switching only, else 0).
    pub tau_r: f64,
    pub tau_t: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
}

/// A system plus one channel realization.
pub struct StarmecInstance {
    params: SystemParams,
    channels: ChannelSet,
}

pub struct StarmecSolution {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> StarmecStatus {
    match e {
        Error::Dimension(_) => StarmecStatus::Dimension,
        Error::Domain(_) => StarmecStatus::Domain,
        Error::Infeasible(_) => StarmecStatus::Infeasible,
        Error::Unbounded(_) => StarmecStatus::Unbounded,
        Error::NotConverged(_) => StarmecStatus::NotConverged,
        Error::Config(_) => StarmecStatus::Config,
        Error::Io(_) | Error::Csv(_) => StarmecStatus::Io,
    }
}

/// Run `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (StarmecStatus, String)>) -> StarmecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            StarmecStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            StarmecStatus::Panic
        }
    }
}

fn lib(e: Error) -> (StarmecStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (StarmecStatus, String) {
    (StarmecStatus::NullPointer, format!("{name} is null"))
}

fn variant(protocol: StarmecProtocol, elements: usize) -> Result<Variant, Error> {
    match protocol {
        StarmecProtocol::Es => Ok(Variant::star(Protocol::Es, elements)),
        StarmecProtocol::Ms => Ok(Variant::star(Protocol::Ms, elements)),
        StarmecProtocol::Ts => Ok(Variant::star(Protocol::Ts, elements)),
        StarmecProtocol::Conventional => Variant::conventional(elements),
    }
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn starmec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn starmec_status_name(status: StarmecStatus) -> *const c_char {
    let s: &'static CStr = match status {
        StarmecStatus::Ok => c"ok",
        StarmecStatus::NullPointer => c"null pointer",
        StarmecStatus::InvalidArgument => c"invalid argument",
        StarmecStatus::Dimension => c"dimension mismatch",
        StarmecStatus::Domain => c"domain error",
        StarmecStatus::Infeasible => c"infeasible",
        StarmecStatus::Unbounded => c"unbounded",
        StarmecStatus::NotConverged => c"not converged",
        StarmecStatus::Config => c"invalid configuration",
        StarmecStatus::Io => c"i/o error",
        StarmecStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Default constants for `ues` UEs and `elements` surface elements.
///
/// # Safety
/// `out` must be null or point to writable memory for one `StarmecSystem`.
#[no_mangle]
pub unsafe extern "C" fn starmec_system_defaults(ues: usize, elements: usize, out: *mut StarmecSystem) -> StarmecStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let p = SystemParams::defaults(elements, ues);
        *out = StarmecSystem {
            ues,
            elements,
            bandwidth: p.bandwidth,
            noise_power: p.noise_power,
            eta: p.eta,
            p_max: p.p_max,
            f_max: p.f_max,
            kappa: p.kappa,
            period: p.period,
            ap_power: p.ap_power,
            cycles_per_bit: p.cycles_per_bit.first().copied().unwrap_or(1000.0),
            epsilon: p.epsilon,
            delta: p.delta,
            max_iterations: p.max_iterations,
        };
        Ok(())
    })
}

/// Draw UE positions and channels for `seed` with the default geometry and
/// path-loss model.
///
/// # Safety
/// `system` must point to a valid `StarmecSystem`; `out` must be writable.
/// Release the handle with [`starmec_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn starmec_instance_new(
    system: *const StarmecSystem,
    seed: u64,
    out: *mut *mut StarmecInstance,
) -> StarmecStatus {
    guard(|| {
        let s = unsafe { system.as_ref() }.ok_or_else(|| null("system"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = SystemParams {
            bandwidth: s.bandwidth,
            noise_power: s.noise_power,
            eta: s.eta,
            p_max: s.p_max,
            f_max: s.f_max,
            kappa: s.kappa,
            period: s.period,
            ap_power: s.ap_power,
            elements: s.elements,
            cycles_per_bit: vec![s.cycles_per_bit; s.ues],
            epsilon: s.epsilon,
            delta: s.delta,
            max_iterations: s.max_iterations,
        };
        params.validate().map_err(lib)?;
        let placement = Geometry::default().place(s.ues, seed);
        let channels = generate(&params, &placement, &PathLossParams { seed, ..Default::default() }).map_err(lib)?;
        *out = Box::into_raw(Box::new(StarmecInstance { params, channels }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from [`starmec_instance_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn starmec_instance_free(inst: *mut StarmecInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Optimize `protocol` with a charging-time grid of spacing `tau0_step`
/// seconds.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable. Release the
/// result with [`starmec_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn starmec_solve(
    inst: *const StarmecInstance,
    protocol: StarmecProtocol,
    tau0_step: f64,
    out: *mut *mut StarmecSolution,
) -> StarmecStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("inst"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        if !(tau0_step > 0.0 && tau0_step < inst.params.period) {
            return Err((StarmecStatus::InvalidArgument, format!("tau0_step {tau0_step} outside (0, period)")));
        }
        let v = variant(protocol, inst.params.elements).map_err(lib)?;
        let report =
            search_tau0(&inst.params, &inst.channels, &v, tau0_step, &SolveOptions::default()).map_err(lib)?;
        *out = Box::into_raw(Box::new(StarmecSolution { report }));
        Ok(())
    })
}

/// Exhaustive grid optimum on instances with at most two UEs and two
/// elements, at default grid resolution.
///
/// # Safety
/// `inst` must be a live instance handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn starmec_brute_force(
    inst: *const StarmecInstance,
    protocol: StarmecProtocol,
    tau0_step: f64,
    value: *mut f64,
) -> StarmecStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("inst"))?;
        let value = unsafe { value.as_mut() }.ok_or_else(|| null("value"))?;
        let protocol = match protocol {
            StarmecProtocol::Es => Protocol::Es,
            StarmecProtocol::Ms => Protocol::Ms,
            StarmecProtocol::Ts => Protocol::Ts,
            StarmecProtocol::Conventional => {
                return Err((StarmecStatus::InvalidArgument, "no oracle for the conventional surface".into()))
            }
        };
        let grids = BruteGrids { tau0_step, ..BruteGrids::default() };
        *value = brute_force_small(&inst.params, &inst.channels, protocol, &grids).map_err(lib)?.value;
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live solution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn starmec_solution_summary(
    sol: *const StarmecSolution,
    out: *mut StarmecSummary,
) -> StarmecStatus {
    guard(|| {
        let r = &unsafe { sol.as_ref() }.ok_or_else(|| null("sol"))?.report;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let ts = r.protocol == Protocol::Ts;
        *out = StarmecSummary {
            total_bits: r.total_bits(),
            tau0: r.alloc.tau0,
            tau_r: if ts { r.alloc.tau_r } else { 0.0 },
            tau_t: if ts { r.alloc.tau_t } else { 0.0 },
            iterations: r.iterations,
            converged: r.converged,
            max_residual: r.report.residuals.max(),
        };
        Ok(())
    })
}

/// Copy the per-UE transmit powers (W) and CPU frequencies (cycles/s) into
/// caller buffers of length `len`, which must equal the UE count. Either
/// buffer may be null.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn starmec_solution_allocation(
    sol: *const StarmecSolution,
    power: *mut f64,
    cpu: *mut f64,
    len: usize,
) -> StarmecStatus {
    guard(|| {
        let r = &unsafe { sol.as_ref() }.ok_or_else(|| null("sol"))?.report;
        if len != r.alloc.power.len() {
            return Err((StarmecStatus::Dimension, format!("buffer length {len}, {} UEs", r.alloc.power.len())));
        }
        for (buf, src) in [(power, &r.alloc.power), (cpu, &r.alloc.cpu)] {
            if !buf.is_null() {
                unsafe { std::slice::from_raw_parts_mut(buf, len) }.copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Objective after every alternation round at the chosen charging time.
/// Writes at most `cap` entries and the full length to `len`; call with a
/// null buffer to query the length.
///
/// # Safety
/// `buf` must be null or hold `cap` writable doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starmec_solution_trace(
    sol: *const StarmecSolution,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> StarmecStatus {
    guard(|| {
        let r = &unsafe { sol.as_ref() }.ok_or_else(|| null("sol"))?.report;
        let len = unsafe { len.as_mut() }.ok_or_else(|| null("len"))?;
        *len = r.trace.len();
        if !buf.is_null() {
            let n = cap.min(r.trace.len());
            unsafe { std::slice::from_raw_parts_mut(buf, n) }.copy_from_slice(&r.trace[..n]);
        }
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from [`starmec_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn starmec_solution_free(sol: *mut StarmecSolution) {
    if !sol.is_null() {
        drop(unsafe { Box::from_raw(sol) });
    }
}
