//! C interface to `markov-sparsify`.
//!
//! Every function returns an [`MsStatus`]; results are written through out
//! pointers. On failure the message is available from
//! [`ms_last_error_message`] on the same thread. Handles are opaque and must be
//! released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markov_sparsify::chain::{
    self, expected_hitting_time_banlast, expected_hitting_time_randm, optimal_history_size,
    ChainLaw, ChainModel, ChainOptions,
};
use markov_sparsify::compressors::{Activation, CompressorConfig, CompressorState};
use markov_sparsify::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    TooLarge = 4,
    NonErgodic = 5,
    OutOfRegime = 6,
    Numerical = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsCompressorKind {
    Identity = 0,
    Rand = 1,
    BanLast = 2,
    Kawasaki = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsActivation {
    Normalize = 0,
    Softmax = 1,
    SimplexProjection = 2,
}

impl From<MsActivation> for Activation {
    fn from(a: MsActivation) -> Self {
        match a {
            MsActivation::Normalize => Activation::Normalize,
            MsActivation::Softmax => Activation::Softmax,
            MsActivation::SimplexProjection => Activation::SimplexProjection,
        }
    }
}

/// Stateful compressor owning its history and random stream.
pub struct MsCompressor {
    state: CompressorState,
}

/// Exact mask-history chain with its cached stationary distribution.
pub struct MsChain {
    chain: ChainModel,
    stationary: Option<chain::StationaryDistribution>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Config { .. } => MsStatus::InvalidArgument,
        Error::InfeasibleBanSet { .. } | Error::InfeasibleSample { .. } | Error::ParameterRegime(_) => {
            MsStatus::Infeasible
        }
        Error::TooLarge { .. } => MsStatus::TooLarge,
        Error::NonErgodic(_) => MsStatus::NonErgodic,
        Error::OutOfRegime(_) => MsStatus::OutOfRegime,
        Error::Numerical(_) | Error::NotMixed(_) | Error::NotConverged { .. } | Error::Diverged { .. } => {
            MsStatus::Numerical
        }
        _ => MsStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MsStatus>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

fn fail(e: Error) -> MsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> MsStatus {
    set_error(format!("null pointer: {what}"));
    MsStatus::NullPointer
}

fn law_of(kind: MsCompressorKind, b: f64, activation: MsActivation) -> Result<ChainLaw, MsStatus> {
    match kind {
        MsCompressorKind::Rand => Ok(ChainLaw::RandM),
        MsCompressorKind::BanLast => Ok(ChainLaw::BanLast),
        MsCompressorKind::Kawasaki => Ok(ChainLaw::Kawasaki {
            b,
            activation: activation.into(),
        }),
        MsCompressorKind::Identity => {
            set_error("identity compressor has no chain".into());
            Err(MsStatus::InvalidArgument)
        }
    }
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Create a compressor. `k`, `b` and `activation` are ignored by kinds that do
/// not use them.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_compressor_new(
    kind: MsCompressorKind,
    d: usize,
    m: usize,
    k: usize,
    b: f64,
    activation: MsActivation,
    seed: u64,
    out: *mut *mut MsCompressor,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = match kind {
            MsCompressorKind::Identity => CompressorConfig::identity(d),
            MsCompressorKind::Rand => CompressorConfig::rand(d, m),
            MsCompressorKind::BanLast => CompressorConfig::banlast(d, m, k),
            MsCompressorKind::Kawasaki => CompressorConfig::kawasaki(d, m, k, b, activation.into()),
        };
        let state = CompressorState::for_run(config, seed).map_err(fail)?;
        *out = Box::into_raw(Box::new(MsCompressor { state }));
        Ok(())
    })
}

/// Compress `len` values from `input` into `output`. `coords_sent` may be null.
///
/// # Safety
/// `handle` must come from `ms_compressor_new`; `input` and `output` must be
/// valid for `len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn ms_compressor_compress(
    handle: *mut MsCompressor,
    input: *const f64,
    len: usize,
    output: *mut f64,
    coords_sent: *mut usize,
) -> MsStatus {
    guard(|| {
        if handle.is_null() || input.is_null() || output.is_null() {
            return Err(null("handle, input or output"));
        }
        let h = &mut *handle;
        let x = std::slice::from_raw_parts(input, len);
        let c = h.state.compress(x).map_err(fail)?;
        std::slice::from_raw_parts_mut(output, len).copy_from_slice(&c.values);
        if !coords_sent.is_null() {
            *coords_sent = c.coords_sent;
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `ms_compressor_new` or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_compressor_free(handle: *mut MsCompressor) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Build the exact chain over `K`-tuples of masks.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_chain_build(
    kind: MsCompressorKind,
    d: usize,
    m: usize,
    k: usize,
    b: f64,
    activation: MsActivation,
    out: *mut *mut MsChain,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let law = law_of(kind, b, activation)?;
        let chain = ChainModel::build(law, d, m, k, ChainOptions::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(MsChain {
            chain,
            stationary: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `ms_chain_build`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_chain_num_states(handle: *const MsChain, out: *mut usize) -> MsStatus {
    guard(|| {
        if handle.is_null() || out.is_null() {
            return Err(null("handle or out"));
        }
        *out = (*handle).chain.num_states();
        Ok(())
    })
}

unsafe fn stationary_of(h: &mut MsChain) -> Result<&chain::StationaryDistribution, MsStatus> {
    if h.stationary.is_none() {
        h.stationary = Some(chain::stationary_distribution(&h.chain).map_err(fail)?);
    }
    Ok(h.stationary.as_ref().unwrap())
}

/// Write the stationary distribution over all `num_states` states (zero
/// outside the recurrent class).
///
/// # Safety
/// `handle` must come from `ms_chain_build`; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_chain_stationary(handle: *mut MsChain, out: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        if handle.is_null() || out.is_null() {
            return Err(null("handle or out"));
        }
        let h = &mut *handle;
        if len != h.chain.num_states() {
            set_error(format!("buffer holds {len} values, chain has {} states", h.chain.num_states()));
            return Err(MsStatus::InvalidArgument);
        }
        let pi = stationary_of(h)?.pi.as_slice();
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(pi);
        Ok(())
    })
}

/// Smallest `t` with `max_s |P^t(s, .) - pi|_inf <= eps * pi_min`.
///
/// # Safety
/// `handle` must come from `ms_chain_build`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_chain_mixing_time(handle: *mut MsChain, eps: f64, out: *mut usize) -> MsStatus {
    guard(|| {
        if handle.is_null() || out.is_null() {
            return Err(null("handle or out"));
        }
        let h = &mut *handle;
        let st = stationary_of(h)?.clone();
        *out = chain::mixing_time_from(&h.chain, &st, eps, chain::DEFAULT_ITERATION_CAP).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `ms_chain_build` or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_chain_free(handle: *mut MsChain) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Expected hitting time of a fixed coordinate under uniform sampling: `alpha = d/m`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_hitting_time_rand(alpha: f64, out: *mut f64) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = expected_hitting_time_randm(alpha).map_err(fail)?;
        Ok(())
    })
}

/// Closed-form BanLast hitting time for history size `k`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_hitting_time_banlast(alpha: f64, k: usize, out: *mut f64) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = expected_hitting_time_banlast(alpha, k).map_err(fail)?;
        Ok(())
    })
}

/// History size minimising the BanLast hitting time, capped at `k_max`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_optimal_history_size(alpha: f64, k_max: usize, out: *mut usize) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = optimal_history_size(alpha, k_max).map_err(fail)?;
        Ok(())
    })
}
