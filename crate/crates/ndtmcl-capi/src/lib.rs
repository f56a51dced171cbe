//! C ABI over the ndtmcl library: opaque handles, status codes and a
//! thread-local last-error message. The generated header lands in
//! `include/ndtmcl.h`.

use ndtmcl::config::FullConfig;
use ndtmcl::experiment::{map_delta, run_single};
use ndtmcl::filters::Method;
use ndtmcl::labels::LabelPartition;
use ndtmcl::ndt::{build_map, MapIndex, NdtGrid};
use ndtmcl::sim::{generate, SessionSpec};
use ndtmcl::{Error, Pose2, SessionLog};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

/// Status of a call. Nonzero codes mirror the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdtmclStatus {
    Ok = 0,
    /// A pointer argument was null or a name was not recognized.
    InvalidArgument = 2,
    /// An input file had the wrong magic, version or layout.
    BadFormat = 3,
    RuntimeError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let cleaned: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(cleaned).unwrap());
}

fn status_of(err: &Error) -> NdtmclStatus {
    match err.exit_code() {
        2 => NdtmclStatus::InvalidArgument,
        3 => NdtmclStatus::BadFormat,
        _ => NdtmclStatus::RuntimeError,
    }
}

fn fail(err: Error) -> NdtmclStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn invalid(message: &str) -> NdtmclStatus {
    set_error(message);
    NdtmclStatus::InvalidArgument
}

/// Copy the message of the most recent error on this thread into `buf`
/// (always NUL-terminated, truncated to `len`). Returns the full
/// message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn ndtmcl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

pub struct NdtmclSession {
    log: SessionLog,
}

pub struct NdtmclMap {
    grid: NdtGrid,
    index: MapIndex,
}

pub struct NdtmclTrajectory {
    timestamps: Vec<f64>,
    poses: Vec<Pose2>,
    ate_rmse: f64,
    rpe_rmse: f64,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Generate a synthetic session with default world parameters.
#[no_mangle]
pub unsafe extern "C" fn ndtmcl_session_generate(
    seed: u64,
    duration_s: f64,
    out: *mut *mut NdtmclSession,
) -> NdtmclStatus {
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let spec = SessionSpec {
        seed,
        duration: duration_s,
        ..SessionSpec::default()
    };
    match generate(&spec) {
        Ok(log) => {
            *out = Box::into_raw(Box::new(NdtmclSession { log }));
            NdtmclStatus::Ok
        }
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_session_read(
    path: *const c_char,
    out: *mut *mut NdtmclSession,
) -> NdtmclStatus {
    let Some(path) = cstr(path) else {
        return invalid("path is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    match ndtmcl::io::read_session(Path::new(path)) {
        Ok(log) => {
            *out = Box::into_raw(Box::new(NdtmclSession { log }));
            NdtmclStatus::Ok
        }
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_session_write(
    session: *const NdtmclSession,
    path: *const c_char,
) -> NdtmclStatus {
    let Some(path) = cstr(path) else {
        return invalid("path is null or not UTF-8");
    };
    let Some(session) = session.as_ref() else {
        return invalid("session is null");
    };
    match ndtmcl::io::write_session(Path::new(path), &session.log) {
        Ok(()) => NdtmclStatus::Ok,
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_session_frame_count(session: *const NdtmclSession) -> usize {
    session.as_ref().map_or(0, |s| s.log.frames.len())
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_session_free(session: *mut NdtmclSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Build a map from a session. `map_type` is "baseline" or "static".
#[no_mangle]
pub unsafe extern "C" fn ndtmcl_map_build(
    session: *const NdtmclSession,
    map_type: *const c_char,
    out: *mut *mut NdtmclMap,
) -> NdtmclStatus {
    let Some(session) = session.as_ref() else {
        return invalid("session is null");
    };
    let Some(map_type) = cstr(map_type) else {
        return invalid("map_type is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let cfg = FullConfig::default();
    let result = map_delta(map_type).and_then(|delta| {
        build_map(
            &session.log,
            &LabelPartition::default(),
            delta,
            &cfg.filter,
            &cfg.map,
        )
    });
    match result {
        Ok(grid) => {
            let index = grid.build_index();
            *out = Box::into_raw(Box::new(NdtmclMap { grid, index }));
            NdtmclStatus::Ok
        }
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_map_read(
    path: *const c_char,
    out: *mut *mut NdtmclMap,
) -> NdtmclStatus {
    let Some(path) = cstr(path) else {
        return invalid("path is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    match ndtmcl::io::read_map(Path::new(path)) {
        Ok(grid) => {
            let index = grid.build_index();
            *out = Box::into_raw(Box::new(NdtmclMap { grid, index }));
            NdtmclStatus::Ok
        }
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_map_write(
    map: *const NdtmclMap,
    path: *const c_char,
) -> NdtmclStatus {
    let Some(path) = cstr(path) else {
        return invalid("path is null or not UTF-8");
    };
    let Some(map) = map.as_ref() else {
        return invalid("map is null");
    };
    match ndtmcl::io::write_map(Path::new(path), &map.grid) {
        Ok(()) => NdtmclStatus::Ok,
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_map_cell_count(map: *const NdtmclMap) -> usize {
    map.as_ref().map_or(0, |m| m.grid.cells.len())
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_map_free(map: *mut NdtmclMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Localize a session against a map. `method` is one of baseline,
/// filtered, static, combined.
#[no_mangle]
pub unsafe extern "C" fn ndtmcl_localize(
    session: *const NdtmclSession,
    map: *const NdtmclMap,
    method: *const c_char,
    seed: u64,
    out: *mut *mut NdtmclTrajectory,
) -> NdtmclStatus {
    let Some(session) = session.as_ref() else {
        return invalid("session is null");
    };
    let Some(map) = map.as_ref() else {
        return invalid("map is null");
    };
    let Some(method) = cstr(method) else {
        return invalid("method is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let cfg = FullConfig::default();
    let result = Method::from_name(method).and_then(|method| {
        run_single(
            &session.log,
            &map.index,
            method,
            &cfg,
            seed,
            &LabelPartition::default(),
        )
    });
    match result {
        Ok((poses, ate_rmse, rpe_rmse)) => {
            let timestamps = session.log.frames.iter().map(|f| f.timestamp).collect();
            *out = Box::into_raw(Box::new(NdtmclTrajectory {
                timestamps,
                poses,
                ate_rmse,
                rpe_rmse,
            }));
            NdtmclStatus::Ok
        }
        Err(err) => fail(err),
    }
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_trajectory_len(trajectory: *const NdtmclTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.poses.len())
}

/// Fetch one estimated pose. Returns false if the index is out of range
/// or any pointer is null.
#[no_mangle]
pub unsafe extern "C" fn ndtmcl_trajectory_pose(
    trajectory: *const NdtmclTrajectory,
    index: usize,
    t: *mut f64,
    x: *mut f64,
    y: *mut f64,
    psi: *mut f64,
) -> bool {
    let Some(trajectory) = trajectory.as_ref() else {
        return false;
    };
    if index >= trajectory.poses.len() || t.is_null() || x.is_null() || y.is_null() || psi.is_null()
    {
        return false;
    }
    *t = trajectory.timestamps[index];
    let p = trajectory.poses[index];
    *x = p.x;
    *y = p.y;
    *psi = p.psi;
    true
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_trajectory_ate_rmse(trajectory: *const NdtmclTrajectory) -> f64 {
    trajectory.as_ref().map_or(f64::NAN, |t| t.ate_rmse)
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_trajectory_rpe_rmse(trajectory: *const NdtmclTrajectory) -> f64 {
    trajectory.as_ref().map_or(f64::NAN, |t| t.rpe_rmse)
}

#[no_mangle]
pub unsafe extern "C" fn ndtmcl_trajectory_free(trajectory: *mut NdtmclTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn full_pipeline_round_trip_through_the_abi() {
        unsafe {
            let mut session: *mut NdtmclSession = ptr::null_mut();
            assert_eq!(
                ndtmcl_session_generate(3, 3.0, &mut session),
                NdtmclStatus::Ok
            );
            assert_eq!(ndtmcl_session_frame_count(session), 30);

            let mut map: *mut NdtmclMap = ptr::null_mut();
            assert_eq!(
                ndtmcl_map_build(session, c("static").as_ptr(), &mut map),
                NdtmclStatus::Ok
            );
            assert!(ndtmcl_map_cell_count(map) > 0);

            let mut trajectory: *mut NdtmclTrajectory = ptr::null_mut();
            assert_eq!(
                ndtmcl_localize(session, map, c("combined").as_ptr(), 7, &mut trajectory),
                NdtmclStatus::Ok
            );
            assert_eq!(ndtmcl_trajectory_len(trajectory), 30);
            let (mut t, mut x, mut y, mut psi) = (0.0, 0.0, 0.0, 0.0);
            assert!(ndtmcl_trajectory_pose(
                trajectory, 0, &mut t, &mut x, &mut y, &mut psi
            ));
            assert!(ndtmcl_trajectory_ate_rmse(trajectory).is_finite());
            assert!(!ndtmcl_trajectory_pose(
                trajectory, 999, &mut t, &mut x, &mut y, &mut psi
            ));

            ndtmcl_trajectory_free(trajectory);
            ndtmcl_map_free(map);
            ndtmcl_session_free(session);
        }
    }

    #[test]
    fn file_round_trip_and_error_codes() {
        unsafe {
            let dir = std::env::temp_dir().join("ndtmcl_capi_test");
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("s.bin");
            let cpath = c(path.to_str().unwrap());

            let mut session: *mut NdtmclSession = ptr::null_mut();
            assert_eq!(
                ndtmcl_session_generate(1, 1.0, &mut session),
                NdtmclStatus::Ok
            );
            assert_eq!(ndtmcl_session_write(session, cpath.as_ptr()), NdtmclStatus::Ok);
            let mut back: *mut NdtmclSession = ptr::null_mut();
            assert_eq!(ndtmcl_session_read(cpath.as_ptr(), &mut back), NdtmclStatus::Ok);
            assert_eq!(
                ndtmcl_session_frame_count(back),
                ndtmcl_session_frame_count(session)
            );

            // corrupt file -> BadFormat with a retrievable message
            let garbage = dir.join("garbage.bin");
            std::fs::write(&garbage, b"nope").unwrap();
            let cgarbage = c(garbage.to_str().unwrap());
            let mut broken: *mut NdtmclSession = ptr::null_mut();
            assert_eq!(
                ndtmcl_session_read(cgarbage.as_ptr(), &mut broken),
                NdtmclStatus::BadFormat
            );
            let mut buf = [0i8; 256];
            let n = ndtmcl_last_error_message(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);

            // unknown method -> InvalidArgument
            let mut map: *mut NdtmclMap = ptr::null_mut();
            assert_eq!(
                ndtmcl_map_build(session, c("baseline").as_ptr(), &mut map),
                NdtmclStatus::Ok
            );
            let mut trajectory: *mut NdtmclTrajectory = ptr::null_mut();
            assert_eq!(
                ndtmcl_localize(session, map, c("bogus").as_ptr(), 0, &mut trajectory),
                NdtmclStatus::InvalidArgument
            );
            // null handles are rejected, not dereferenced
            assert_eq!(
                ndtmcl_session_write(ptr::null(), cpath.as_ptr()),
                NdtmclStatus::InvalidArgument
            );

            ndtmcl_map_free(map);
            ndtmcl_session_free(back);
            ndtmcl_session_free(session);
            std::fs::remove_dir_all(&dir).ok();
        }
    }
}
