//! C ABI over `mixkit`.
//!
//! Every fallible function returns a [`MixkitStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`mixkit_last_error_message`]. Waveform collections cross the
//! boundary as row-major `rows × len` arrays of `double`; batches and source
//! sets are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use mixkit::metrics::hungarian_assign;
use mixkit::mixit::{self, MixitSearch};
use mixkit::optimizer::{self, AdamConfig, LossConfig};
use mixkit::regularizers;
use mixkit::semantic::Aggregator;
use mixkit::signal;
use mixkit::{MixkitError, MixtureBatch, SourceSet, Waveform};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    NonFinite = 4,
    UndefinedReference = 5,
    DegenerateMixture = 6,
    TooFewSources = 7,
    ExhaustiveInfeasible = 8,
    Divergence = 9,
    Unsupported = 10,
    Io = 11,
    Format = 12,
    Panic = 13,
}

/// Assignment search selector for [`mixkit_mixit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixkitSearch {
    Auto = 0,
    Exhaustive = 1,
    Efficient = 2,
}

impl From<MixkitSearch> for MixitSearch {
    fn from(s: MixkitSearch) -> Self {
        match s {
            MixkitSearch::Auto => MixitSearch::Auto,
            MixkitSearch::Exhaustive => MixitSearch::Exhaustive,
            MixkitSearch::Efficient => MixitSearch::Efficient,
        }
    }
}

/// Composite loss weights and optimizer settings for [`mixkit_optimize`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixkitLossConfig {
    pub snr_max_db: f64,
    pub weight_l1: f64,
    pub weight_l1l2: f64,
    pub weight_cov: f64,
    pub num_sources: usize,
    pub exhaustive_cap: u64,
    pub steps: usize,
    pub step_size: f64,
}

/// A batch of reference mixtures and their sum.
pub struct MixkitBatch(MixtureBatch);

/// A set of estimated sources.
pub struct MixkitSources(SourceSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MixkitError) -> MixkitStatus {
    match e {
        MixkitError::UndefinedReference | MixkitError::NoActiveReferences => MixkitStatus::UndefinedReference,
        MixkitError::DegenerateMixture => MixkitStatus::DegenerateMixture,
        MixkitError::EmptySignal | MixkitError::InvalidArgument(_) | MixkitError::InvalidBand(_) => {
            MixkitStatus::InvalidArgument
        }
        MixkitError::InvalidAssignment(_) | MixkitError::NotSingleSource { .. } => MixkitStatus::InvalidArgument,
        MixkitError::NonFinite { .. } => MixkitStatus::NonFinite,
        MixkitError::LengthMismatch { .. } | MixkitError::SampleRateMismatch { .. } => MixkitStatus::LengthMismatch,
        MixkitError::ExhaustiveInfeasible { .. } => MixkitStatus::ExhaustiveInfeasible,
        MixkitError::TooFewSources { .. } => MixkitStatus::TooFewSources,
        MixkitError::Divergence { .. } => MixkitStatus::Divergence,
        MixkitError::Unsupported(_) => MixkitStatus::Unsupported,
        MixkitError::Io(_) => MixkitStatus::Io,
        MixkitError::Format(_) | MixkitError::VersionMismatch { .. } | MixkitError::HashMismatch { .. } => {
            MixkitStatus::Format
        }
    }
}

enum Failure {
    Null(&'static str),
    Lib(MixkitError),
}

impl From<MixkitError> for Failure {
    fn from(e: MixkitError) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MixkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MixkitStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            MixkitStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MixkitStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

fn rows_of(data: &[f64], rows: usize, len: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|r| data[r * len..(r + 1) * len].to_vec()).collect()
}

fn checked_size(rows: usize, len: usize) -> Result<usize, Failure> {
    rows.checked_mul(len)
        .ok_or_else(|| Failure::Lib(MixkitError::InvalidArgument("array size overflows".into())))
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn mixkit_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message, NUL-terminated and truncated to fit, into
/// `buf`. Returns the number of bytes written excluding the NUL.
///
/// # Safety
/// `buf` must be valid for `buf_len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn mixkit_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    if buf.is_null() || buf_len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let borrowed = e.borrow();
        let bytes = borrowed.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(buf_len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mixkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default loss and optimizer settings.
#[no_mangle]
pub extern "C" fn mixkit_loss_config_default() -> MixkitLossConfig {
    let loss = LossConfig::default();
    let adam = AdamConfig::default();
    MixkitLossConfig {
        snr_max_db: loss.snr_max_db,
        weight_l1: 0.0,
        weight_l1l2: 0.0,
        weight_cov: 0.0,
        num_sources: loss.num_sources,
        exhaustive_cap: loss.exhaustive_cap,
        steps: adam.steps,
        step_size: adam.step_size,
    }
}

/// Builds a batch from `n` reference mixtures of `len` samples each.
///
/// # Safety
/// `refs` must point to `n * len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_batch_new(
    refs: *const f64,
    n: usize,
    len: usize,
    sample_rate: u32,
    out: *mut *mut MixkitBatch,
) -> MixkitStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let data = slice_in(refs, checked_size(n, len)?, "refs")?;
        let waves = rows_of(data, n, len)
            .into_iter()
            .map(|r| Waveform::new(r, sample_rate))
            .collect::<mixkit::Result<Vec<_>>>()?;
        *out = Box::into_raw(Box::new(MixkitBatch(MixtureBatch::from_references(waves)?)));
        Ok(())
    })
}

/// # Safety
/// `batch` must come from [`mixkit_batch_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mixkit_batch_free(batch: *mut MixkitBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Copies the mixture of mixtures into `out`, which must hold `len` doubles.
///
/// # Safety
/// `batch` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mixkit_batch_mom(batch: *const MixkitBatch, out: *mut f64, len: usize) -> MixkitStatus {
    guard(|| {
        let b = &handle(batch, "batch")?.0;
        if len != b.len() {
            return Err(MixkitError::LengthMismatch { expected: b.len(), got: len }.into());
        }
        slice_out(out, len, "out")?.copy_from_slice(b.mom().samples());
        Ok(())
    })
}

/// Builds a source set from `m` rows of `len` samples.
///
/// # Safety
/// `data` must point to `m * len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_sources_new(
    data: *const f64,
    m: usize,
    len: usize,
    sample_rate: u32,
    out: *mut *mut MixkitSources,
) -> MixkitStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let data = slice_in(data, checked_size(m, len)?, "data")?;
        *out = Box::into_raw(Box::new(MixkitSources(SourceSet::new(rows_of(data, m, len), sample_rate)?)));
        Ok(())
    })
}

/// # Safety
/// `sources` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mixkit_sources_free(sources: *mut MixkitSources) {
    if !sources.is_null() {
        drop(Box::from_raw(sources));
    }
}

/// Writes the number of sources and samples per source.
///
/// # Safety
/// `sources` must be a live handle; `m` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_sources_shape(
    sources: *const MixkitSources,
    m: *mut usize,
    len: *mut usize,
) -> MixkitStatus {
    guard(|| {
        let s = &handle(sources, "sources")?.0;
        *out_ref(m, "m")? = s.num_sources();
        *out_ref(len, "len")? = s.len();
        Ok(())
    })
}

/// Copies the sources row-major into `out` (`m * len` doubles).
///
/// # Safety
/// `sources` must be a live handle and `out` valid for `size` doubles.
#[no_mangle]
pub unsafe extern "C" fn mixkit_sources_copy(sources: *const MixkitSources, out: *mut f64, size: usize) -> MixkitStatus {
    guard(|| {
        let s = &handle(sources, "sources")?.0;
        let need = s.num_sources() * s.len();
        if size != need {
            return Err(MixkitError::LengthMismatch { expected: need, got: size }.into());
        }
        let out = slice_out(out, size, "out")?;
        for (m, row) in s.rows().iter().enumerate() {
            out[m * s.len()..(m + 1) * s.len()].copy_from_slice(row);
        }
        Ok(())
    })
}

/// Thresholded SNR loss `−10·log10(‖y‖² / (‖y−ŷ‖² + τ‖y‖²))`.
///
/// # Safety
/// `y` and `yhat` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_thresholded_snr_loss(
    y: *const f64,
    yhat: *const f64,
    len: usize,
    snr_max_db: f64,
    out: *mut f64,
) -> MixkitStatus {
    guard(|| {
        let v = signal::thresholded_snr_loss(slice_in(y, len, "y")?, slice_in(yhat, len, "yhat")?, snr_max_db)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Scale-invariant SNR in dB; may be `±inf`.
///
/// # Safety
/// `reference` and `estimate` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_si_snr(
    reference: *const f64,
    estimate: *const f64,
    len: usize,
    out: *mut f64,
) -> MixkitStatus {
    guard(|| {
        let v = signal::si_snr(slice_in(reference, len, "reference")?, slice_in(estimate, len, "estimate")?)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Best binary assignment of sources to references. `owners` receives, for
/// each source, the index of the reference it is assigned to.
///
/// # Safety
/// Handles must be live; `owners` must hold `owners_len` entries equal to
/// the number of sources; `total_loss` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_mixit(
    batch: *const MixkitBatch,
    sources: *const MixkitSources,
    snr_max_db: f64,
    search: MixkitSearch,
    cap: u64,
    owners: *mut usize,
    owners_len: usize,
    total_loss: *mut f64,
) -> MixkitStatus {
    guard(|| {
        let b = &handle(batch, "batch")?.0;
        let s = &handle(sources, "sources")?.0;
        if owners_len != s.num_sources() {
            return Err(MixkitError::LengthMismatch { expected: s.num_sources(), got: owners_len }.into());
        }
        let owners = slice_out(owners, owners_len, "owners")?;
        let total_loss = out_ref(total_loss, "total_loss")?;
        let r = mixit::mixit(b, s, snr_max_db, search.into(), cap)?;
        owners.copy_from_slice(r.assignment.owners());
        *total_loss = r.total_loss;
        Ok(())
    })
}

/// Normalized `ℓ1/ℓ2` activity sparsity.
///
/// # Safety
/// `sources` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_sparsity_l1_l2(sources: *const MixkitSources, out: *mut f64) -> MixkitStatus {
    guard(|| {
        let s = &handle(sources, "sources")?.0;
        *out_ref(out, "out")? = regularizers::sparsity_l1_l2(s);
        Ok(())
    })
}

/// Sum of absolute off-diagonal source covariances.
///
/// # Safety
/// `sources` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_covariance_loss(sources: *const MixkitSources, out: *mut f64) -> MixkitStatus {
    guard(|| {
        let s = &handle(sources, "sources")?.0;
        *out_ref(out, "out")? = regularizers::covariance_loss(s)?;
        Ok(())
    })
}

/// Minimum-cost assignment of every row of a row-major `rows × cols` cost
/// matrix (`rows ≤ cols`) to a distinct column.
///
/// # Safety
/// `cost` must point to `rows * cols` doubles and `out` to `rows` entries.
#[no_mangle]
pub unsafe extern "C" fn mixkit_hungarian(
    cost: *const f64,
    rows: usize,
    cols: usize,
    out: *mut usize,
) -> MixkitStatus {
    guard(|| {
        let data = slice_in(cost, checked_size(rows, cols)?, "cost")?;
        let out = slice_out(out, rows, "out")?;
        let assignment = hungarian_assign(&rows_of(data, rows, cols))?;
        out.copy_from_slice(&assignment);
        Ok(())
    })
}

/// Optimizes `config.num_sources` estimates for `batch` and returns them as a
/// new handle, together with the final composite loss.
///
/// # Safety
/// `batch` and `config` must be valid; `out` and `final_loss` writable.
#[no_mangle]
pub unsafe extern "C" fn mixkit_optimize(
    batch: *const MixkitBatch,
    config: *const MixkitLossConfig,
    seed: u64,
    out: *mut *mut MixkitSources,
    final_loss: *mut f64,
) -> MixkitStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let b = &handle(batch, "batch")?.0;
        let c = handle(config, "config")?;
        let final_loss = out_ref(final_loss, "final_loss")?;
        let loss = LossConfig {
            snr_max_db: c.snr_max_db,
            weight_l1: c.weight_l1,
            weight_l1l2: c.weight_l1l2,
            weight_cov: c.weight_cov,
            aggregator: Aggregator::Or,
            num_sources: c.num_sources,
            exhaustive_cap: c.exhaustive_cap,
            ..LossConfig::default()
        };
        let adam = AdamConfig { steps: c.steps, step_size: c.step_size, ..AdamConfig::default() };
        let r = optimizer::optimize_estimates(b, &loss, &adam, seed, None)?;
        *final_loss = r.final_loss.total;
        *out = Box::into_raw(Box::new(MixkitSources(r.estimates)));
        Ok(())
    })
}
