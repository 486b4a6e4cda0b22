//! C ABI over `abmlump`.
//!
//! Conventions:
//! - Every fallible function returns an [`AbmStatus`]; on failure a message
//!   is available from [`abm_last_error`] on the same thread.
//! - Objects are opaque handles created by `*_new`/`*_parse`/`*_build`
//!   style functions and released with the matching `*_free`. Passing NULL
//!   to a free function is a no-op.
//! - Strings are UTF-8 and NUL-terminated. Functions producing text write
//!   into a caller buffer and always store the required size (including the
//!   terminating NUL) in `*needed`; if the buffer is too small they return
//!   `ABM_STATUS_BUFFER_TOO_SMALL` and write nothing.
//! - Panics never cross the boundary; they surface as `ABM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use abmlump::analysis::{absorption_analysis, AbsorptionReport};
use abmlump::lumping::{half_hypercube_partition, line_pairing, lump_by_representative};
use abmlump::rational::{format_ratio, to_f64};
use abmlump::{
    build_micro_chain, check_lumpable, frequency_partition, is_chain_symmetric, lump, moran_partition, orbits,
    parse_model, ConfigSpace, Error, GeneratorSet, LumpVerdict, ModelSpec, Partition, StochasticMatrix, Topology,
    DEFAULT_CAP,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    Validation = 4,
    Dimension = 5,
    CapExceeded = 6,
    NotLumpable = 7,
    NoAbsorbingReachable = 8,
    Numerical = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Parsed model.
pub struct AbmModel {
    spec: ModelSpec,
}

/// A transition matrix, optionally tied to the configuration space it was
/// built on.
pub struct AbmChain {
    matrix: StochasticMatrix,
    space: Option<ConfigSpace>,
}

/// Partition of a chain's states into labelled blocks.
pub struct AbmPartition {
    part: Partition,
}

/// Absorption probabilities and expected times of a chain.
pub struct AbmAbsorption {
    report: AbsorptionReport,
}

/// First violation found by [`abm_check_lumpable`]. The two block sums are
/// rounded to `double`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AbmWitness {
    pub source_block: usize,
    pub target_block: usize,
    pub state: usize,
    pub other_state: usize,
    pub state_sum: f64,
    pub other_sum: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AbmStatus {
    match e {
        Error::Syntax { .. } => AbmStatus::Syntax,
        Error::Validation(_) => AbmStatus::Validation,
        Error::Dimension(_) => AbmStatus::Dimension,
        Error::CapExceeded { .. } => AbmStatus::CapExceeded,
        Error::NotLumpable(_) => AbmStatus::NotLumpable,
        Error::NoAbsorbingReachable { .. } => AbmStatus::NoAbsorbingReachable,
        Error::Numerical(_) => AbmStatus::Numerical,
        Error::Io(_) => AbmStatus::Io,
    }
}

struct Fail(AbmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> AbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbmStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AbmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AbmStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AbmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_text(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> FfiResult {
    let needed = out_ptr(needed, "needed")?;
    *needed = s.len() + 1;
    if buf.is_null() || len < s.len() + 1 {
        return Err(Fail(
            AbmStatus::BufferTooSmall,
            format!("buffer of {len} bytes, need {}", s.len() + 1),
        ));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

fn check_state(chain: &AbmChain, x: usize) -> FfiResult {
    if x < chain.matrix.n_states() {
        Ok(())
    } else {
        Err(Fail(
            AbmStatus::Dimension,
            format!("state {x} outside 0..{}", chain.matrix.n_states()),
        ))
    }
}

/// Message of the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn abm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Default enumeration cap (`2^24` configurations).
#[no_mangle]
pub extern "C" fn abm_default_cap() -> u64 {
    DEFAULT_CAP
}

/// Parses a model document.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_model_parse(source: *const c_char, out: *mut *mut AbmModel) -> AbmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = parse_model(text(source, "source")?)?;
        *out = Box::into_raw(Box::new(AbmModel { spec }));
        Ok(())
    })
}

/// Binary voter model on the complete graph with `n_agents` agents.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_model_voter_complete(n_agents: usize, out: *mut *mut AbmModel) -> AbmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = ModelSpec::builtin_voter(Topology::complete(n_agents)?)?;
        *out = Box::into_raw(Box::new(AbmModel { spec }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abm_model_free(model: *mut AbmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of agents, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_model_n_agents(model: *const AbmModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.n_agents())
}

/// Alphabet size δ, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_model_delta(model: *const AbmModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.delta())
}

/// Builds the exact micro chain. `cap` of 0 means the default cap.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_build(model: *const AbmModel, cap: u64, out: *mut *mut AbmChain) -> AbmStatus {
    guard(|| {
        let model = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let cap = if cap == 0 { DEFAULT_CAP } else { cap };
        let micro = build_micro_chain(&model.spec, cap)?;
        let space = micro.space().clone();
        *out = Box::into_raw(Box::new(AbmChain {
            matrix: micro.into_matrix(),
            space: Some(space),
        }));
        Ok(())
    })
}

/// Reads a chain in the sparse text format.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_parse(source: *const c_char, out: *mut *mut AbmChain) -> AbmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let matrix = StochasticMatrix::parse_text(text(source, "source")?)?;
        *out = Box::into_raw(Box::new(AbmChain { matrix, space: None }));
        Ok(())
    })
}

/// # Safety
/// `chain` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_free(chain: *mut AbmChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of states, or 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_n_states(chain: *const AbmChain) -> usize {
    chain.as_ref().map_or(0, |c| c.matrix.n_states())
}

/// Number of stored nonzero entries, or 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_nnz(chain: *const AbmChain) -> usize {
    chain.as_ref().map_or(0, |c| c.matrix.nnz())
}

/// `P(x, y)` rounded to `double`.
///
/// # Safety
/// `chain` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_transition(chain: *const AbmChain, x: usize, y: usize, out: *mut f64) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        let out = out_ptr(out, "out")?;
        check_state(chain, x)?;
        check_state(chain, y)?;
        *out = to_f64(&chain.matrix.get(x, y));
        Ok(())
    })
}

/// `P(x, y)` exactly, as `num/den`.
///
/// # Safety
/// `chain` must be a live handle, `buf` writable for `len` bytes (or NULL
/// to query the size) and `needed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_transition_text(
    chain: *const AbmChain,
    x: usize,
    y: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        check_state(chain, x)?;
        check_state(chain, y)?;
        write_text(&format_ratio(&chain.matrix.get(x, y)), buf, len, needed)
    })
}

/// The chain in the sparse text format.
///
/// # Safety
/// As for [`abm_chain_transition_text`].
#[no_mangle]
pub unsafe extern "C" fn abm_chain_to_text(
    chain: *const AbmChain,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        write_text(&chain.matrix.to_text(), buf, len, needed)
    })
}

/// Checks every generator of `gens` (a comma-separated preset list such as
/// `"SN"` or `"flip"`) against the chain. `*symmetric` is 1 or 0.
///
/// # Safety
/// `model` and `chain` must be live handles, `gens` a NUL-terminated string
/// and `symmetric` a valid pointer. The chain must have been built from
/// `model`.
#[no_mangle]
pub unsafe extern "C" fn abm_check_symmetric(
    model: *const AbmModel,
    chain: *const AbmChain,
    gens: *const c_char,
    symmetric: *mut i32,
) -> AbmStatus {
    guard(|| {
        let model = borrow(model, "model")?;
        let chain = borrow(chain, "chain")?;
        let out = out_ptr(symmetric, "symmetric")?;
        let space = ConfigSpace::for_model(&model.spec, u64::MAX)?;
        let gens = GeneratorSet::preset(text(gens, "gens")?, model.spec.n_agents(), model.spec.alphabet())?;
        *out = is_chain_symmetric(&space, &chain.matrix, &gens)?.is_symmetric() as i32;
        Ok(())
    })
}

/// Orbit partition of the model's configuration space under a preset list.
///
/// # Safety
/// `model` must be a live handle, `gens` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_orbits(
    model: *const AbmModel,
    gens: *const c_char,
    out: *mut *mut AbmPartition,
) -> AbmStatus {
    guard(|| {
        let model = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let space = ConfigSpace::for_model(&model.spec, DEFAULT_CAP)?;
        let gens = GeneratorSet::preset(text(gens, "gens")?, model.spec.n_agents(), model.spec.alphabet())?;
        *out = Box::into_raw(Box::new(AbmPartition {
            part: orbits(&space, &gens)?,
        }));
        Ok(())
    })
}

/// Canonical partition of the model's space: `"frequency"`, `"moran"`
/// (counting the first attribute), `"moran:<label>"`, `"half"`, or
/// `"pairing"` (the `N + 1` Moran states paired as `{k, N - k}`).
///
/// # Safety
/// `model` must be a live handle, `kind` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_canonical(
    model: *const AbmModel,
    kind: *const c_char,
    out: *mut *mut AbmPartition,
) -> AbmStatus {
    guard(|| {
        let model = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let kind = text(kind, "kind")?;
        let space = ConfigSpace::for_model(&model.spec, DEFAULT_CAP)?;
        let part = match kind.split_once(':') {
            None if kind == "frequency" => frequency_partition(&space)?,
            None if kind == "moran" => moran_partition(&space, 0)?,
            None if kind == "half" => half_hypercube_partition(&space)?,
            None if kind == "pairing" => line_pairing(space.n_agents())?,
            Some(("moran", label)) => {
                let code = model
                    .spec
                    .alphabet()
                    .code_of(label)
                    .ok_or_else(|| Fail(AbmStatus::Validation, format!("unknown attribute `{label}`")))?;
                moran_partition(&space, code)?
            }
            _ => {
                return Err(Fail(AbmStatus::Validation, format!("unknown partition kind `{kind}`")));
            }
        };
        *out = Box::into_raw(Box::new(AbmPartition { part }));
        Ok(())
    })
}

/// Reads a partition file (`label: idx idx ...` per line) over `n_states`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_parse(
    source: *const c_char,
    n_states: usize,
    out: *mut *mut AbmPartition,
) -> AbmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let part = Partition::parse_text(text(source, "source")?, Some(n_states))?;
        *out = Box::into_raw(Box::new(AbmPartition { part }));
        Ok(())
    })
}

/// # Safety
/// `part` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_free(part: *mut AbmPartition) {
    if !part.is_null() {
        drop(Box::from_raw(part));
    }
}

/// Number of blocks, or 0 for NULL.
///
/// # Safety
/// `part` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_n_blocks(part: *const AbmPartition) -> usize {
    part.as_ref().map_or(0, |p| p.part.n_blocks())
}

/// Block index of state `x`.
///
/// # Safety
/// `part` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_block_of(part: *const AbmPartition, x: usize, out: *mut usize) -> AbmStatus {
    guard(|| {
        let part = borrow(part, "part")?;
        let out = out_ptr(out, "out")?;
        if x >= part.part.n_states() {
            return Err(Fail(
                AbmStatus::Dimension,
                format!("state {x} outside 0..{}", part.part.n_states()),
            ));
        }
        *out = part.part.block_of(x);
        Ok(())
    })
}

/// Label of block `k`.
///
/// # Safety
/// As for [`abm_chain_transition_text`], with `part` a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_label(
    part: *const AbmPartition,
    k: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbmStatus {
    guard(|| {
        let part = borrow(part, "part")?;
        if k >= part.part.n_blocks() {
            return Err(Fail(
                AbmStatus::Dimension,
                format!("block {k} outside 0..{}", part.part.n_blocks()),
            ));
        }
        write_text(part.part.label(k), buf, len, needed)
    })
}

/// The partition in its text format.
///
/// # Safety
/// As for [`abm_chain_transition_text`], with `part` a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_partition_to_text(
    part: *const AbmPartition,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbmStatus {
    guard(|| {
        let part = borrow(part, "part")?;
        write_text(&part.part.to_text(), buf, len, needed)
    })
}

/// Exact strong-lumpability test. Sets `*lumpable` to 1 or 0; when 0 and
/// `witness` is not NULL, fills it with the first violation.
///
/// # Safety
/// `chain` and `part` must be live handles, `lumpable` a valid pointer and
/// `witness` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn abm_check_lumpable(
    chain: *const AbmChain,
    part: *const AbmPartition,
    lumpable: *mut i32,
    witness: *mut AbmWitness,
) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        let part = borrow(part, "part")?;
        let out = out_ptr(lumpable, "lumpable")?;
        match check_lumpable(&chain.matrix, &part.part)? {
            LumpVerdict::Lumpable => *out = 1,
            LumpVerdict::NotLumpable(ws) => {
                *out = 0;
                if let (Some(dst), Some(w)) = (witness.as_mut(), ws.first()) {
                    *dst = AbmWitness {
                        source_block: w.source_block,
                        target_block: w.target_block,
                        state: w.state,
                        other_state: w.other_state,
                        state_sum: to_f64(&w.state_sum),
                        other_sum: to_f64(&w.other_sum),
                    };
                }
            }
        }
        Ok(())
    })
}

/// Lumped chain over the partition's blocks. Fails with
/// `ABM_STATUS_NOT_LUMPABLE` unless `force` is nonzero, in which case each
/// block's reference row is aggregated.
///
/// # Safety
/// `chain` and `part` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_lump(
    chain: *const AbmChain,
    part: *const AbmPartition,
    force: i32,
    out: *mut *mut AbmChain,
) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        let part = borrow(part, "part")?;
        let out = out_ptr(out, "out")?;
        let mac = if force != 0 {
            lump_by_representative(&chain.matrix, &part.part)?
        } else {
            lump(&chain.matrix, &part.part)?
        };
        *out = Box::into_raw(Box::new(AbmChain {
            matrix: mac.into_matrix(),
            space: None,
        }));
        Ok(())
    })
}

/// Absorption analysis of a chain whose every state reaches an absorbing state.
///
/// # Safety
/// `chain` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_absorption_analyze(chain: *const AbmChain, out: *mut *mut AbmAbsorption) -> AbmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        let out = out_ptr(out, "out")?;
        let report = absorption_analysis(&chain.matrix)?;
        *out = Box::into_raw(Box::new(AbmAbsorption { report }));
        Ok(())
    })
}

/// # Safety
/// `abs` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abm_absorption_free(abs: *mut AbmAbsorption) {
    if !abs.is_null() {
        drop(Box::from_raw(abs));
    }
}

/// Probability of ending in absorbing state `target` from `from`.
///
/// # Safety
/// `abs` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_absorption_probability(
    abs: *const AbmAbsorption,
    from: usize,
    target: usize,
    out: *mut f64,
) -> AbmStatus {
    guard(|| {
        let abs = borrow(abs, "abs")?;
        let out = out_ptr(out, "out")?;
        *out = abs.report.absorption_probability(from, target).ok_or_else(|| {
            Fail(
                AbmStatus::Dimension,
                format!("no absorption entry for {from} -> {target}; is {target} absorbing?"),
            )
        })?;
        Ok(())
    })
}

/// Expected number of steps to absorption from `from`.
///
/// # Safety
/// `abs` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abm_absorption_expected_steps(
    abs: *const AbmAbsorption,
    from: usize,
    out: *mut f64,
) -> AbmStatus {
    guard(|| {
        let abs = borrow(abs, "abs")?;
        let out = out_ptr(out, "out")?;
        *out = abs
            .report
            .expected_steps_from(from)
            .ok_or_else(|| Fail(AbmStatus::Dimension, format!("state {from} outside the chain")))?;
        Ok(())
    })
}

/// Worst residual of the linear solves behind the report.
///
/// # Safety
/// `abs` must be NULL or a live handle; NULL gives NaN.
#[no_mangle]
pub unsafe extern "C" fn abm_absorption_residual(abs: *const AbmAbsorption) -> f64 {
    abs.as_ref().map_or(f64::NAN, |a| a.report.residual)
}

/// Whether the chain was built from a model (1) or read from text (0).
///
/// # Safety
/// `chain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abm_chain_has_space(chain: *const AbmChain) -> i32 {
    chain.as_ref().is_some_and(|c| c.space.is_some()) as i32
}
