use std::ffi::CString;
use std::process::Command;
use std::ptr;

use safeplc_ffi::*;

const BLINKER: &str = include_str!("../../core/corpus/blinker.b0");

fn last_error() -> String {
    unsafe {
        let n = safeplc_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0u8; n];
        safeplc_last_error(buf.as_mut_ptr().cast(), n);
        String::from_utf8(buf[..n - 1].to_vec()).unwrap()
    }
}

fn built(src: &str) -> *mut SafeplcBytes {
    let src = CString::new(src).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { safeplc_build(src.as_ptr(), false, &mut out) }, SafeplcError::Ok, "{}", last_error());
    out
}

fn loaded(bytes: *const SafeplcBytes) -> *mut SafeplcFirmware {
    let mut fw = ptr::null_mut();
    let rc = unsafe { safeplc_firmware_load(safeplc_bytes_data(bytes), safeplc_bytes_len(bytes), &mut fw) };
    assert_eq!(rc, SafeplcError::Ok, "{}", last_error());
    fw
}

#[test]
fn blinker_end_to_end() {
    unsafe {
        let bytes = built(BLINKER);
        let fw = loaded(bytes);
        safeplc_bytes_free(bytes);
        let mut wcet = 0;
        assert_eq!(safeplc_firmware_wcet(fw, &mut wcet), SafeplcError::Ok);
        assert!(wcet > 0);

        let mut p = ptr::null_mut();
        assert_eq!(safeplc_platform_new(fw, &mut p), SafeplcError::Ok);
        safeplc_firmware_free(fw);
        assert_eq!((safeplc_platform_input_count(p), safeplc_platform_output_count(p)), (1, 1));

        let mut st = SafeplcCycleStatus::default();
        let mut lamp = 9;
        for c in 0..3u64 {
            assert_eq!(safeplc_platform_step(p, &1, &(c + 1), 1, &mut st), SafeplcError::Ok);
            safeplc_platform_output(p, 0, &mut lamp);
            assert_eq!(lamp == 1, c >= 1, "cycle {c}");
        }
        assert_eq!(st, SafeplcCycleStatus { cycle: 3, panicked: false });

        assert_eq!(safeplc_inject_halt(p, 2), SafeplcError::Ok);
        safeplc_platform_output(p, 0, &mut lamp);
        assert_eq!(lamp, 0, "energy drops with the halted MCU");
        for _ in 0..4 {
            safeplc_platform_step(p, &0, &0, 1, &mut st);
        }
        assert!(st.panicked);
        assert_eq!(safeplc_platform_step(p, &0, &0, 1, &mut st), SafeplcError::Panicked);

        assert_eq!(safeplc_platform_reset(p), SafeplcError::Ok);
        safeplc_platform_status(p, &mut st);
        assert_eq!(st, SafeplcCycleStatus { cycle: 0, panicked: false });
        assert_eq!(safeplc_inject_var_flip(p, 1, 0, 0, 3), SafeplcError::Ok);
        safeplc_platform_step(p, &0, &0, 1, &mut st);
        assert_eq!(st, SafeplcCycleStatus { cycle: 0, panicked: true });
        safeplc_platform_free(p);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut out = ptr::null_mut();
        let bad = CString::new("MACHINE").unwrap();
        assert_eq!(safeplc_build(bad.as_ptr(), false, &mut out), SafeplcError::Parse);
        let bug = CString::new(include_str!("../../core/corpus/seeded/bug_div.b0")).unwrap();
        assert_eq!(safeplc_build(bug.as_ptr(), true, &mut out), SafeplcError::Prove);
        assert!(last_error().contains("WD_DIV"));
        assert!(out.is_null());
        assert_eq!(safeplc_build(ptr::null(), false, &mut out), SafeplcError::NullArgument);

        let bytes = built(BLINKER);
        let mut copy = std::slice::from_raw_parts(safeplc_bytes_data(bytes), safeplc_bytes_len(bytes)).to_vec();
        copy[20] ^= 1;
        let mut fw = ptr::null_mut();
        assert_eq!(safeplc_firmware_load(copy.as_ptr(), copy.len(), &mut fw), SafeplcError::Integrity);
        let fw = loaded(bytes);
        let mut p = ptr::null_mut();
        safeplc_platform_new(fw, &mut p);
        assert_eq!(safeplc_inject_halt(p, 3), SafeplcError::BadArgument);
        assert_eq!(safeplc_inject_var_flip(p, 1, 2, 0, 0), SafeplcError::BadArgument);
        assert_eq!(safeplc_inject_program_flip(p, 1, 1, 1 << 20, 1), SafeplcError::BadArgument);
        assert_eq!(safeplc_inject_freeze_pulse(p, 1), SafeplcError::BadArgument);
        assert_eq!(safeplc_platform_step(p, ptr::null(), ptr::null(), 0, ptr::null_mut()), SafeplcError::BadArgument);
        assert!(last_error().contains("1"));
        let mut lamp = 0;
        assert_eq!(safeplc_platform_output(p, 5, &mut lamp), SafeplcError::BadArgument);
        safeplc_platform_free(p);
        safeplc_firmware_free(fw);
        safeplc_bytes_free(bytes);
        safeplc_bytes_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/safeplc.h");
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("use.c");
    std::fs::write(
        &main,
        format!(
            "#include \"{header}\"\n\
             int main(void) {{ SafeplcCycleStatus s = {{0}}; SafeplcError e = SAFEPLC_ERROR_OK; \
             (void)s; (void)safeplc_platform_step; return (int)e; }}\n"
        ),
    )
    .unwrap();
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&main).output() else {
        eprintln!("no C compiler on PATH; header not compiled");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
