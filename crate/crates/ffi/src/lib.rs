//! C ABI over `popcount-core`.
//!
//! Bitsets cross the boundary as opaque [`PopcountBitset`] handles. Every
//! fallible function returns a [`PopcountStatus`] and writes its result
//! through an out-pointer; the message for the most recent failure on the
//! calling thread is available from [`popcount_last_error`]. Panics never
//! unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use popcount_core::{detect_cpu_features, load_words, Dispatcher, Error, KernelKind, WordBlock};

/// Result of every fallible call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopcountStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedKernel = 3,
    UnsupportedFeature = 4,
    LengthMismatch = 5,
    Internal = 6,
}

pub const POPCOUNT_FEATURE_POPCNT: u32 = 1;
pub const POPCOUNT_FEATURE_SSSE3: u32 = 1 << 1;
pub const POPCOUNT_FEATURE_AVX2: u32 = 1 << 2;
pub const POPCOUNT_FEATURE_AVX512: u32 = 1 << 3;

/// Intersection and union counts of two bitsets plus their Jaccard index.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PopcountSimilarity {
    pub intersection_count: u64,
    pub union_count: u64,
    /// 1.0 when both bitsets are empty.
    pub jaccard: f64,
}

/// Owned array of 64-bit words.
pub struct PopcountBitset {
    words: WordBlock,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PopcountStatus, message: impl Into<String>) -> PopcountStatus {
    set_last_error(message.into());
    status
}

fn status_of(e: &Error) -> PopcountStatus {
    match e {
        Error::UnsupportedFeature(_) => PopcountStatus::UnsupportedFeature,
        Error::UnsupportedKernel(_) => PopcountStatus::UnsupportedKernel,
        Error::LengthMismatch { .. } => PopcountStatus::LengthMismatch,
        Error::InvalidConfig(_) => PopcountStatus::InvalidArgument,
        _ => PopcountStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PopcountStatus> + UnwindSafe) -> PopcountStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => PopcountStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PopcountStatus::Internal, "panic inside popcount library"),
    }
}

fn lift<T>(r: popcount_core::Result<T>) -> Result<T, PopcountStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn handle<'a>(p: *const PopcountBitset) -> Result<&'a PopcountBitset, PopcountStatus> {
    p.as_ref()
        .ok_or_else(|| fail(PopcountStatus::NullPointer, "null bitset handle"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, PopcountStatus> {
    p.as_mut()
        .ok_or_else(|| fail(PopcountStatus::NullPointer, "null output pointer"))
}

unsafe fn kernel_name<'a>(p: *const c_char) -> Result<Option<&'a str>, PopcountStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(PopcountStatus::InvalidArgument, "kernel name is not UTF-8"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], PopcountStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PopcountStatus::NullPointer, "null data pointer"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `len` bytes as little-endian words, zero-padding the last word.
/// Returns null if `data` is null while `len` is non-zero.
///
/// # Safety
/// `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn popcount_bitset_from_bytes(
    data: *const u8,
    len: usize,
) -> *mut PopcountBitset {
    match slice(data, len) {
        Ok(bytes) => Box::into_raw(Box::new(PopcountBitset {
            words: load_words(bytes),
        })),
        Err(_) => ptr::null_mut(),
    }
}

/// Copies `len` 64-bit words.
///
/// # Safety
/// `words` must point to `len` readable words.
#[no_mangle]
pub unsafe extern "C" fn popcount_bitset_from_words(
    words: *const u64,
    len: usize,
) -> *mut PopcountBitset {
    match slice(words, len) {
        Ok(w) => Box::into_raw(Box::new(PopcountBitset {
            words: WordBlock::new(w.to_vec()),
        })),
        Err(_) => ptr::null_mut(),
    }
}

/// Number of 64-bit words held; 0 for a null handle.
///
/// # Safety
/// `bitset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn popcount_bitset_len_words(bitset: *const PopcountBitset) -> usize {
    bitset.as_ref().map_or(0, |b| b.words.len())
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `bitset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn popcount_bitset_free(bitset: *mut PopcountBitset) {
    if !bitset.is_null() {
        drop(Box::from_raw(bitset));
    }
}

/// Counts one-bits with the kernel chosen for this CPU and input size.
///
/// # Safety
/// `bitset` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_count(
    bitset: *const PopcountBitset,
    count: *mut u64,
) -> PopcountStatus {
    popcount_count_with_kernel(bitset, ptr::null(), count)
}

/// Like [`popcount_count`] but forces `kernel` (e.g. "wwg", "avx2-hs")
/// unless it is null.
///
/// # Safety
/// `bitset` must be a live handle, `kernel` null or a NUL-terminated
/// string, and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_count_with_kernel(
    bitset: *const PopcountBitset,
    kernel: *const c_char,
    count: *mut u64,
) -> PopcountStatus {
    guard(|| {
        let b = handle(bitset)?;
        let kernel = kernel_name(kernel)?;
        let out = out(count)?;
        *out = lift(Dispatcher::global().count(&b.words, kernel))?;
        Ok(())
    })
}

/// Counts one-bits of a caller-owned word array without making a handle.
///
/// # Safety
/// `words` must point to `len` readable words and `count` be writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_count_words(
    words: *const u64,
    len: usize,
    count: *mut u64,
) -> PopcountStatus {
    guard(|| {
        let w = slice(words, len)?;
        *out(count)? = Dispatcher::global().count_auto(w);
        Ok(())
    })
}

/// Fused intersection and union counts in one pass.
///
/// # Safety
/// `a` and `b` must be live handles and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_jaccard(
    a: *const PopcountBitset,
    b: *const PopcountBitset,
    result: *mut PopcountSimilarity,
) -> PopcountStatus {
    popcount_jaccard_with_kernel(a, b, ptr::null(), result)
}

/// Like [`popcount_jaccard`] but forces a Jaccard kernel (e.g.
/// "jaccard-popcnt") unless `kernel` is null.
///
/// # Safety
/// As for [`popcount_jaccard`]; `kernel` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn popcount_jaccard_with_kernel(
    a: *const PopcountBitset,
    b: *const PopcountBitset,
    kernel: *const c_char,
    result: *mut PopcountSimilarity,
) -> PopcountStatus {
    guard(|| {
        let (a, b) = (handle(a)?, handle(b)?);
        let kernel = kernel_name(kernel)?;
        let out = out(result)?;
        let r = lift(Dispatcher::global().jaccard(&a.words, &b.words, kernel))?;
        *out = PopcountSimilarity {
            intersection_count: r.intersection_count,
            union_count: r.union_count,
            jaccard: r.jaccard,
        };
        Ok(())
    })
}

/// Number of bits set in both `a` and `b`.
///
/// # Safety
/// `a` and `b` must be live handles and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_intersection_count(
    a: *const PopcountBitset,
    b: *const PopcountBitset,
    count: *mut u64,
) -> PopcountStatus {
    guard(|| {
        let (a, b) = (handle(a)?, handle(b)?);
        *out(count)? = lift(Dispatcher::global().intersection_count(&a.words, &b.words, None))?;
        Ok(())
    })
}

/// Number of bits set in `a` or `b`.
///
/// # Safety
/// `a` and `b` must be live handles and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn popcount_union_count(
    a: *const PopcountBitset,
    b: *const PopcountBitset,
    count: *mut u64,
) -> PopcountStatus {
    guard(|| {
        let (a, b) = (handle(a)?, handle(b)?);
        *out(count)? = lift(Dispatcher::global().union_count(&a.words, &b.words, None))?;
        Ok(())
    })
}

/// Bitmask of `POPCOUNT_FEATURE_*` flags usable on this CPU.
#[no_mangle]
pub extern "C" fn popcount_cpu_features() -> u32 {
    let f = detect_cpu_features();
    [
        (f.has_popcnt, POPCOUNT_FEATURE_POPCNT),
        (f.has_ssse3_shuffle, POPCOUNT_FEATURE_SSSE3),
        (f.has_256bit, POPCOUNT_FEATURE_AVX2),
        (f.has_512bit_ternlog, POPCOUNT_FEATURE_AVX512),
    ]
    .iter()
    .filter(|(has, _)| *has)
    .fold(0, |mask, (_, bit)| mask | bit)
}

/// Writes the name of the count kernel selected for `len_bytes` of input
/// into `buf` (NUL-terminated, truncated to `buf_len`). Returns the full
/// name length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn popcount_selected_kernel(
    len_bytes: usize,
    buf: *mut c_char,
    buf_len: usize,
) -> usize {
    let name = Dispatcher::global().select_count(len_bytes).name;
    copy_name(name, buf, buf_len)
}

/// Whether `name` is a runnable kernel of either kind on this CPU.
///
/// # Safety
/// `name` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn popcount_kernel_available(name: *const c_char) -> bool {
    let Ok(Some(name)) = kernel_name(name) else {
        return false;
    };
    let d = Dispatcher::global();
    d.resolve(name, KernelKind::Count).is_ok() || d.resolve(name, KernelKind::Jaccard).is_ok()
}

unsafe fn copy_name(name: &str, buf: *mut c_char, buf_len: usize) -> usize {
    if !buf.is_null() && buf_len > 0 {
        let n = name.len().min(buf_len - 1);
        ptr::copy_nonoverlapping(name.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
    }
    name.len()
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn popcount_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn popcount_status_name(status: PopcountStatus) -> *const c_char {
    let s: &'static CStr = match status {
        PopcountStatus::Ok => c"ok",
        PopcountStatus::NullPointer => c"null pointer",
        PopcountStatus::InvalidArgument => c"invalid argument",
        PopcountStatus::UnsupportedKernel => c"unsupported kernel",
        PopcountStatus::UnsupportedFeature => c"unsupported feature",
        PopcountStatus::LengthMismatch => c"length mismatch",
        PopcountStatus::Internal => c"internal error",
    };
    s.as_ptr()
}
