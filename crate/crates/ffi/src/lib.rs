//! C interface. Every handle is opaque and owned by the caller until passed
//! to its `_free` function. Functions return a [`SafeplcError`] code; the
//! text of the most recent failure on the calling thread is available from
//! [`safeplc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use safeplc::backend::CostTable;
use safeplc::cli::{build, BuildOptions, Outcome, Stage};
use safeplc::firmware::{bootload, LoadedFirmware};
use safeplc::safesim::{Fault, ImageId, InputFrame, InputSample, McuId, Platform, Status, StepError};
use safeplc::wcet::analyze;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafeplcError {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Typecheck = 4,
    Prove = 5,
    Compile = 6,
    Link = 7,
    Integrity = 8,
    Wcet = 9,
    /// The platform is latched in panic mode; only a reset helps.
    Panicked = 10,
    BadArgument = 11,
    Internal = 12,
}

/// Bytes produced by the library, such as a linked bundle.
pub struct SafeplcBytes(Vec<u8>);

/// An integrity-checked firmware bundle.
pub struct SafeplcFirmware(LoadedFirmware);

/// A simulated dual-MCU board running one firmware.
pub struct SafeplcPlatform(Platform);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SafeplcCycleStatus {
    /// Next cycle to run, or the panicking cycle.
    pub cycle: u64,
    pub panicked: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(code: SafeplcError, msg: impl Into<String>) -> SafeplcError {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    code
}

fn guard(f: impl FnOnce() -> SafeplcError) -> SafeplcError {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SafeplcError::Internal, "internal error"))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SafeplcError::NullArgument, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

fn mcu(id: u8) -> Result<McuId, SafeplcError> {
    match id {
        1 => Ok(McuId::Mcu1),
        2 => Ok(McuId::Mcu2),
        _ => Err(fail(SafeplcError::BadArgument, format!("MCU {id} does not exist"))),
    }
}

fn image(id: u8) -> Result<ImageId, SafeplcError> {
    match id {
        0 => Ok(ImageId::A),
        1 => Ok(ImageId::B),
        _ => Err(fail(SafeplcError::BadArgument, format!("image {id} does not exist"))),
    }
}

/// Copies the last error message, NUL-terminated, into `buf`. Returns the
/// length the message needs including the terminator, so a call with
/// `len == 0` sizes the buffer.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn safeplc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let need = msg.len() + 1;
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        need
    })
}

/// Runs the whole pipeline on B0 source text and returns the bundle.
/// Unproven obligations are accepted only with `allow_unproven`; a
/// counterexample always fails with [`SafeplcError::Prove`].
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_build(
    source: *const c_char,
    allow_unproven: bool,
    out: *mut *mut SafeplcBytes,
) -> SafeplcError {
    non_null!(source, out);
    guard(|| {
        let Ok(src) = CStr::from_ptr(source).to_str() else {
            return fail(SafeplcError::InvalidUtf8, "source is not UTF-8");
        };
        let report = build(src, &BuildOptions { allow_unproven, ..BuildOptions::default() });
        match report.bundle.clone() {
            Some(bytes) => {
                *out = Box::into_raw(Box::new(SafeplcBytes(bytes)));
                SafeplcError::Ok
            }
            None => {
                let stage = report.stages.iter().find(|(_, o)| matches!(o, Outcome::Failed(_))).map(|(s, _)| *s);
                let code = match stage {
                    Some(Stage::Parse) => SafeplcError::Parse,
                    Some(Stage::Typecheck) => SafeplcError::Typecheck,
                    Some(Stage::Prove) => SafeplcError::Prove,
                    Some(Stage::Compile) => SafeplcError::Compile,
                    Some(Stage::Link) => SafeplcError::Link,
                    Some(Stage::Bootload) => SafeplcError::Integrity,
                    Some(Stage::Wcet) => SafeplcError::Wcet,
                    _ => SafeplcError::Internal,
                };
                fail(code, report.to_string())
            }
        }
    })
}

/// # Safety
/// `bytes` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_bytes_data(bytes: *const SafeplcBytes) -> *const u8 {
    if bytes.is_null() {
        return ptr::null();
    }
    (*bytes).0.as_ptr()
}

/// # Safety
/// `bytes` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_bytes_len(bytes: *const SafeplcBytes) -> usize {
    if bytes.is_null() {
        return 0;
    }
    (*bytes).0.len()
}

/// # Safety
/// `bytes` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn safeplc_bytes_free(bytes: *mut SafeplcBytes) {
    if !bytes.is_null() {
        drop(Box::from_raw(bytes));
    }
}

/// Checks and loads a bundle.
///
/// # Safety
/// `data` must be valid for `len` bytes and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_firmware_load(
    data: *const u8,
    len: usize,
    out: *mut *mut SafeplcFirmware,
) -> SafeplcError {
    non_null!(data, out);
    guard(|| match bootload(std::slice::from_raw_parts(data, len)) {
        Ok(fw) => {
            *out = Box::into_raw(Box::new(SafeplcFirmware(fw)));
            SafeplcError::Ok
        }
        Err(e) => fail(SafeplcError::Integrity, e.to_string()),
    })
}

/// CRC-32 of the whole bundle the firmware was loaded from.
///
/// # Safety
/// `fw` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_firmware_crc(fw: *const SafeplcFirmware) -> u32 {
    if fw.is_null() {
        return 0;
    }
    (*fw).0.bundle_crc()
}

/// Static cycle-cost bound of the bytecode image under the default costs.
///
/// # Safety
/// `fw` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_firmware_wcet(fw: *const SafeplcFirmware, out: *mut u64) -> SafeplcError {
    non_null!(fw, out);
    guard(|| match analyze((*fw).0.image_b(), &CostTable::default()) {
        Ok(b) => {
            *out = b;
            SafeplcError::Ok
        }
        Err(e) => fail(SafeplcError::Wcet, e.to_string()),
    })
}

/// # Safety
/// `fw` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn safeplc_firmware_free(fw: *mut SafeplcFirmware) {
    if !fw.is_null() {
        drop(Box::from_raw(fw));
    }
}

/// Boots a platform. The firmware handle stays owned by the caller. A
/// platform whose INIT traps is returned already panicked.
///
/// # Safety
/// `fw` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_new(fw: *const SafeplcFirmware, out: *mut *mut SafeplcPlatform) -> SafeplcError {
    non_null!(fw, out);
    guard(|| {
        *out = Box::into_raw(Box::new(SafeplcPlatform(Platform::new((*fw).0.clone()))));
        SafeplcError::Ok
    })
}

/// # Safety
/// `p` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_free(p: *mut SafeplcPlatform) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_input_count(p: *const SafeplcPlatform) -> usize {
    if p.is_null() {
        return 0;
    }
    (*p).0.input_names().len()
}

/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_output_count(p: *const SafeplcPlatform) -> usize {
    if p.is_null() {
        return 0;
    }
    (*p).0.outputs().len()
}

/// # Safety
/// `p` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_status(p: *const SafeplcPlatform, out: *mut SafeplcCycleStatus) -> SafeplcError {
    non_null!(p, out);
    *out = status(&(*p).0);
    SafeplcError::Ok
}

fn status(p: &Platform) -> SafeplcCycleStatus {
    match p.status() {
        Status::Running => SafeplcCycleStatus { cycle: p.cycle(), panicked: false },
        Status::Panic { cycle, .. } => SafeplcCycleStatus { cycle: *cycle, panicked: true },
    }
}

/// Runs one cycle. `levels` and `pulses` hold one entry per input, in
/// declaration order. A cycle that ends in panic still returns
/// [`SafeplcError::Ok`] with `panicked` set; stepping a panicked platform
/// fails with [`SafeplcError::Panicked`].
///
/// # Safety
/// `levels` and `pulses` must be valid for `n` elements (or null with
/// `n == 0`), `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_step(
    p: *mut SafeplcPlatform,
    levels: *const u8,
    pulses: *const u64,
    n: usize,
    out: *mut SafeplcCycleStatus,
) -> SafeplcError {
    non_null!(p);
    if n > 0 {
        non_null!(levels, pulses);
    }
    guard(|| {
        let samples = (0..n).map(|i| InputSample { level: *levels.add(i), pulse: *pulses.add(i) }).collect();
        let p = &mut (*p).0;
        match p.step(&InputFrame { samples }) {
            Ok(_) => {
                if !out.is_null() {
                    *out = status(p);
                }
                SafeplcError::Ok
            }
            Err(e @ StepError::Panicked(_)) => fail(SafeplcError::Panicked, e.to_string()),
            Err(e) => fail(SafeplcError::BadArgument, e.to_string()),
        }
    })
}

/// Physical level of output `index`: 1 only when both MCUs drive it.
///
/// # Safety
/// `p` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_output(p: *const SafeplcPlatform, index: usize, out: *mut u8) -> SafeplcError {
    non_null!(p, out);
    match (*p).0.outputs().get(index) {
        Some(o) => {
            *out = o.driven;
            SafeplcError::Ok
        }
        None => fail(SafeplcError::BadArgument, format!("no output {index}")),
    }
}

/// Hard reset: reboots from the loaded firmware and clears panic mode.
///
/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_platform_reset(p: *mut SafeplcPlatform) -> SafeplcError {
    non_null!(p);
    guard(|| {
        (*p).0.reset();
        SafeplcError::Ok
    })
}

unsafe fn inject(p: *mut SafeplcPlatform, fault: Result<Fault, SafeplcError>) -> SafeplcError {
    non_null!(p);
    let fault = match fault {
        Ok(f) => f,
        Err(code) => return code,
    };
    guard(|| match (*p).0.inject(&fault) {
        Ok(()) => SafeplcError::Ok,
        Err(e) => fail(SafeplcError::BadArgument, e.to_string()),
    })
}

/// Stops MCU `mcu` (1 or 2).
///
/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_inject_halt(p: *mut SafeplcPlatform, mcu_id: u8) -> SafeplcError {
    inject(p, mcu(mcu_id).map(|mcu| Fault::HaltMcu { mcu }))
}

/// Flips one bit of canonical state cell `slot` in image 0 (A) or 1 (B).
///
/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_inject_var_flip(
    p: *mut SafeplcPlatform,
    mcu_id: u8,
    image_id: u8,
    slot: usize,
    bit: u32,
) -> SafeplcError {
    inject(p, mcu(mcu_id).and_then(|mcu| Ok(Fault::VarBitFlip { mcu, image: image(image_id)?, slot, bit })))
}

/// XORs program byte `offset` of image 0 (A) or 1 (B) with `mask`.
///
/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_inject_program_flip(
    p: *mut SafeplcPlatform,
    mcu_id: u8,
    image_id: u8,
    offset: usize,
    mask: u8,
) -> SafeplcError {
    inject(p, mcu(mcu_id).and_then(|mcu| Ok(Fault::ProgramByteFlip { mcu, image: image(image_id)?, offset, mask })))
}

/// Freezes the pulse counter of input `index`.
///
/// # Safety
/// `p` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn safeplc_inject_freeze_pulse(p: *mut SafeplcPlatform, index: usize) -> SafeplcError {
    non_null!(p);
    let name = (*p).0.input_names().get(index).cloned();
    inject(
        p,
        name.map(|input| Fault::FreezePulse { input })
            .ok_or_else(|| fail(SafeplcError::BadArgument, format!("no input {index}"))),
    )
}
