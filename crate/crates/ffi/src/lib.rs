//! C ABI for the cvqkd toolkit.
//!
//! Every fallible function returns a [`CvqkdStatus`]; on failure a message is
//! available from [`cvqkd_last_error_message`] on the same thread. Records
//! are opaque handles released with [`cvqkd_record_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvqkd::cli::resolve_shape;
use cvqkd::estimators::CovarianceAccumulator;
use cvqkd::info::{
    gaussian_conditional_entropy, vacuum_entropy, Covariance2, HeterodyneTransform, ProtocolKind,
    RateReport, ShotNoise,
};
use cvqkd::simulator::{
    run_session, BlockRecord, ChannelModel, EprSource, Quadrature, RecordFormat, SessionConfig,
    SiftingMode,
};
use cvqkd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdStatus {
    Ok = 0,
    Domain = 1,
    InconsistentStatistics = 2,
    Unphysical = 3,
    InsufficientData = 4,
    DegenerateData = 5,
    Configuration = 6,
    Parse = 7,
    Capacity = 8,
    VerificationFailed = 9,
    Io = 10,
    NullPointer = 11,
    InvalidString = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdProtocol {
    Squeezed = 0,
    Coherent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdTransform {
    BeamSplitter = 0,
    ShotNoiseSubtracted = 1,
}

/// Excess-noise shape; non-Gaussian shapes are matched to the variance `t * eps`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdShape {
    Gaussian = 0,
    Mixture = 1,
    Uniform = 2,
    Discrete = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdFormat {
    Csv = 0,
    JsonLines = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvqkdCovariance {
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

/// Rate bound in bits; `cond_var_b_given_a_prime` is NaN for the squeezed protocol.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvqkdRateReport {
    pub protocol: CvqkdProtocol,
    pub block_size: u64,
    pub delta_i_min_per_pulse: f64,
    pub delta_i_min_block: f64,
    pub i_ab: f64,
    pub i_be_bound: f64,
    pub cond_var_b_given_a: f64,
    pub cond_var_b_given_a_prime: f64,
    pub sifting_applied: bool,
    pub saturated: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvqkdSessionConfig {
    pub protocol: CvqkdProtocol,
    pub v: f64,
    pub t: f64,
    pub eps: f64,
    pub shape: CvqkdShape,
    pub block_correlation: f64,
    pub n: usize,
    pub l: usize,
    pub random_basis: bool,
    pub seed: u64,
}

/// Opaque session record.
pub struct CvqkdRecord {
    inner: BlockRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CvqkdStatus {
    match e {
        Error::Domain(_) => CvqkdStatus::Domain,
        Error::InconsistentStatistics(_) => CvqkdStatus::InconsistentStatistics,
        Error::Unphysical(_) => CvqkdStatus::Unphysical,
        Error::InsufficientData { .. } => CvqkdStatus::InsufficientData,
        Error::DegenerateData(_) => CvqkdStatus::DegenerateData,
        Error::Configuration(_) => CvqkdStatus::Configuration,
        Error::Parse(_) => CvqkdStatus::Parse,
        Error::Capacity(_) => CvqkdStatus::Capacity,
        Error::VerificationFailed(_) => CvqkdStatus::VerificationFailed,
        Error::Io(_) => CvqkdStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    BadString(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CvqkdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvqkdStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            CvqkdStatus::NullPointer
        }
        Ok(Err(Failure::BadString(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            CvqkdStatus::InvalidString
        }
        Err(_) => {
            set_error("internal panic".into());
            CvqkdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees `p` is null or valid for reads.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn path<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and nul-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::BadString(what))
}

impl From<CvqkdCovariance> for Covariance2 {
    fn from(k: CvqkdCovariance) -> Self {
        Covariance2 {
            var_a: k.var_a,
            var_b: k.var_b,
            cov_ab: k.cov_ab,
        }
    }
}

impl From<Covariance2> for CvqkdCovariance {
    fn from(k: Covariance2) -> Self {
        CvqkdCovariance {
            var_a: k.var_a,
            var_b: k.var_b,
            cov_ab: k.cov_ab,
        }
    }
}

impl From<CvqkdProtocol> for ProtocolKind {
    fn from(p: CvqkdProtocol) -> Self {
        match p {
            CvqkdProtocol::Squeezed => ProtocolKind::SqueezedHomodyne,
            CvqkdProtocol::Coherent => ProtocolKind::CoherentHeterodyne,
        }
    }
}

impl From<ProtocolKind> for CvqkdProtocol {
    fn from(p: ProtocolKind) -> Self {
        match p {
            ProtocolKind::SqueezedHomodyne => CvqkdProtocol::Squeezed,
            ProtocolKind::CoherentHeterodyne => CvqkdProtocol::Coherent,
        }
    }
}

impl From<CvqkdTransform> for HeterodyneTransform {
    fn from(t: CvqkdTransform) -> Self {
        match t {
            CvqkdTransform::BeamSplitter => HeterodyneTransform::BeamSplitter,
            CvqkdTransform::ShotNoiseSubtracted => HeterodyneTransform::ShotNoiseSubtracted,
        }
    }
}

impl From<RateReport> for CvqkdRateReport {
    fn from(r: RateReport) -> Self {
        CvqkdRateReport {
            protocol: r.protocol.into(),
            block_size: r.block_size,
            delta_i_min_per_pulse: r.delta_i_min_per_pulse,
            delta_i_min_block: r.delta_i_min_block,
            i_ab: r.i_ab,
            i_be_bound: r.i_be_bound,
            cond_var_b_given_a: r.cond_var_b_given_a,
            cond_var_b_given_a_prime: r.cond_var_b_given_a_prime.unwrap_or(f64::NAN),
            sifting_applied: r.sifting_applied,
            saturated: r.saturated,
        }
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvqkd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Entropy of the vacuum quadrature in bits (shot noise 1).
#[no_mangle]
pub extern "C" fn cvqkd_vacuum_entropy() -> f64 {
    vacuum_entropy()
}

/// # Safety
/// `k` must be readable and `out` writable (or null, which fails).
#[no_mangle]
pub unsafe extern "C" fn cvqkd_gaussian_conditional_entropy(
    k: *const CvqkdCovariance,
    out_bits: *mut f64,
) -> CvqkdStatus {
    guard(|| {
        let k = unsafe { deref(k, "k") }?;
        let o = unsafe { out(out_bits, "out_bits") }?;
        *o = gaussian_conditional_entropy(&(*k).into())?;
        Ok(())
    })
}

/// Rate bound for `protocol` over blocks of `n` pulses.
///
/// # Safety
/// `k` must be readable and `report` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_rate_bound(
    k: *const CvqkdCovariance,
    n: u64,
    protocol: CvqkdProtocol,
    transform: CvqkdTransform,
    report: *mut CvqkdRateReport,
) -> CvqkdStatus {
    guard(|| {
        let k = unsafe { deref(k, "k") }?;
        let o = unsafe { out(report, "report") }?;
        let r = ShotNoise::UNIT.rate_bound(&(*k).into(), n, protocol.into(), transform.into())?;
        *o = r.into();
        Ok(())
    })
}

/// `beta * I_AB - I_BE` in bits per pulse, with the rates halved first when
/// `random_basis` is set.
///
/// # Safety
/// `k` must be readable and `out_rate` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_effective_rate(
    k: *const CvqkdCovariance,
    protocol: CvqkdProtocol,
    transform: CvqkdTransform,
    beta: f64,
    random_basis: bool,
    out_rate: *mut f64,
) -> CvqkdStatus {
    guard(|| {
        let k = unsafe { deref(k, "k") }?;
        let o = unsafe { out(out_rate, "out_rate") }?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Configuration(format!("beta must lie in [0, 1], got {beta}")).into());
        }
        let mut r = ShotNoise::UNIT.rate_bound(&(*k).into(), 1, protocol.into(), transform.into())?;
        if random_basis {
            r = r.sifted();
        }
        *o = cvqkd::info::effective_rate_from_report(beta * r.i_ab, &r)?;
        Ok(())
    })
}

fn session_from(c: &CvqkdSessionConfig) -> Result<SessionConfig, Failure> {
    let name = match c.shape {
        CvqkdShape::Gaussian => "gaussian",
        CvqkdShape::Mixture => "mixture",
        CvqkdShape::Uniform => "uniform",
        CvqkdShape::Discrete => "discrete",
    };
    let shape = resolve_shape(name, c.t * c.eps)?;
    let s = SessionConfig {
        source: EprSource::new(c.v).map_err(|e| Error::Configuration(e.to_string()))?,
        channel: ChannelModel::new(c.t, c.eps, shape)?.with_block_correlation(c.block_correlation)?,
        protocol: c.protocol.into(),
        block_size: c.n,
        blocks: c.l,
        sifting: if c.random_basis {
            SiftingMode::RandomBasis
        } else {
            SiftingMode::QuantumMemory
        },
        seed: c.seed,
    };
    s.validate()?;
    Ok(s)
}

/// Simulates a session into a new record handle.
///
/// # Safety
/// `config` must be readable and `record` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_simulate(
    config: *const CvqkdSessionConfig,
    record: *mut *mut CvqkdRecord,
) -> CvqkdStatus {
    guard(|| {
        let c = unsafe { deref(config, "config") }?;
        let o = unsafe { out(record, "record") }?;
        let inner = run_session(&session_from(c)?)?;
        *o = Box::into_raw(Box::new(CvqkdRecord { inner }));
        Ok(())
    })
}

/// Reads a record file (either format) into a new handle.
///
/// # Safety
/// `file` must be a nul-terminated string and `record` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_read(
    file: *const c_char,
    record: *mut *mut CvqkdRecord,
) -> CvqkdStatus {
    guard(|| {
        let p = unsafe { path(file, "file") }?;
        let o = unsafe { out(record, "record") }?;
        let f = File::open(p).map_err(Error::from)?;
        let inner = BlockRecord::read(BufReader::new(f))?;
        *o = Box::into_raw(Box::new(CvqkdRecord { inner }));
        Ok(())
    })
}

/// # Safety
/// `record` must be a live handle and `file` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_write(
    record: *const CvqkdRecord,
    file: *const c_char,
    format: CvqkdFormat,
) -> CvqkdStatus {
    guard(|| {
        let r = unsafe { deref(record, "record") }?;
        let p = unsafe { path(file, "file") }?;
        let mut w = BufWriter::new(File::create(p).map_err(Error::from)?);
        let format = match format {
            CvqkdFormat::Csv => RecordFormat::Csv,
            CvqkdFormat::JsonLines => RecordFormat::JsonLines,
        };
        r.inner.write(&mut w, format)?;
        Ok(())
    })
}

/// Total pulses in the record; 0 for a null handle.
///
/// # Safety
/// `record` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_pulse_count(record: *const CvqkdRecord) -> usize {
    unsafe { record.as_ref() }.map_or(0, |r| r.inner.entries().len())
}

/// Pulses kept after sifting; 0 for a null handle.
///
/// # Safety
/// `record` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_kept_count(record: *const CvqkdRecord) -> usize {
    unsafe { record.as_ref() }.map_or(0, |r| r.inner.kept_count())
}

fn pooled_covariance(r: &BlockRecord) -> Result<Covariance2, Error> {
    let mut acc = CovarianceAccumulator::default();
    for e in r.entries().iter().filter(|e| e.kept) {
        match e.label_b {
            Quadrature::Q => acc.push(e.a, e.b),
            Quadrature::P => acc.push(-e.a, e.b),
        }
    }
    acc.covariance()
}

/// Sample covariance of the kept pulses, both quadratures pooled.
///
/// # Safety
/// `record` must be a live handle and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_covariance(
    record: *const CvqkdRecord,
    k: *mut CvqkdCovariance,
) -> CvqkdStatus {
    guard(|| {
        let r = unsafe { deref(record, "record") }?;
        let o = unsafe { out(k, "k") }?;
        *o = pooled_covariance(&r.inner)?.into();
        Ok(())
    })
}

/// Rate bound from the record's own statistics, protocol and block size;
/// sifting is applied when the record used random bases.
///
/// # Safety
/// `record` must be a live handle and `report` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_rate(
    record: *const CvqkdRecord,
    transform: CvqkdTransform,
    report: *mut CvqkdRateReport,
) -> CvqkdStatus {
    guard(|| {
        let r = unsafe { deref(record, "record") }?;
        let o = unsafe { out(report, "report") }?;
        let h = r.inner.header();
        let k = pooled_covariance(&r.inner)?;
        let mut rep = ShotNoise::UNIT.rate_bound(&k, h.n as u64, h.protocol, transform.into())?;
        if h.sifting == SiftingMode::RandomBasis {
            rep = rep.sifted();
        }
        *o = rep.into();
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `record` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_record_free(record: *mut CvqkdRecord) {
    if !record.is_null() {
        drop(unsafe { Box::from_raw(record) });
    }
}
