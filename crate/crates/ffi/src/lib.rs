//! C interface to the `chlab` simulator.
//!
//! Every function returns a [`ChlabStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be fetched with
//! [`chlab_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use chlab::config::{parse_config, RunConfig};
use chlab::potentials::{self, PotentialSpec};
use chlab::solver::{self, InitKind, State};
use chlab::{energy, steady, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NewtonDiverged = 4,
    BoundViolation = 5,
    DomainViolation = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

/// Energies of the current state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChlabEnergy {
    pub psi: f64,
    pub psi_hat: f64,
    pub psi_tilde: f64,
}

/// Opaque simulation handle.
pub struct ChlabSimulation {
    config: RunConfig,
    spec: PotentialSpec,
    state: State,
    steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> ChlabStatus {
    match err {
        Error::Config(_) | Error::InvalidGrid(_) => ChlabStatus::Config,
        Error::InvalidParameter { .. }
        | Error::MeanInfeasible(_)
        | Error::DimensionMismatch { .. }
        | Error::GridMismatch
        | Error::NonFinite { .. }
        | Error::NonZeroMean { .. } => ChlabStatus::InvalidArgument,
        Error::NewtonDiverged { .. } => ChlabStatus::NewtonDiverged,
        Error::BoundViolation { .. } => ChlabStatus::BoundViolation,
        Error::DomainViolation { .. } => ChlabStatus::DomainViolation,
        Error::Io(_) | Error::Format(_) => ChlabStatus::Io,
        _ => ChlabStatus::Other,
    }
}

/// Runs `body`, turning errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), (ChlabStatus, String)>) -> ChlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ChlabStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            ChlabStatus::Panic
        }
    }
}

fn lift(err: Error) -> (ChlabStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (ChlabStatus, String) {
    (ChlabStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn sim_ref<'a>(sim: *const ChlabSimulation) -> Result<&'a ChlabSimulation, (ChlabStatus, String)> {
    sim.as_ref().ok_or_else(|| null("sim"))
}

/// Writes into an out-pointer, rejecting null.
unsafe fn put<T>(out: *mut T, name: &str, value: T) -> Result<(), (ChlabStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length. Passing
/// a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn chlab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = message.len().min(len - 1);
            std::ptr::copy_nonoverlapping(message.as_ptr() as *const c_char, buf, n);
            buf.add(n).write(0);
        }
        message.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a simulation from configuration text (`key = value` lines) and its
/// initial data. Unknown keys are rejected.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_new(config: *const c_char, out: *mut *mut ChlabSimulation) -> ChlabStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| (ChlabStatus::InvalidArgument, "configuration is not UTF-8".to_string()))?;
        let config = parse_config(text, true).map_err(lift)?.config;
        let spec = config.potential().map_err(lift)?;
        let grid = config.grid().map_err(lift)?;
        let kind = match &config.init {
            chlab::config::InitSpec::ConstantPlusNoise => InitKind::ConstantPlusNoise,
            chlab::config::InitSpec::Function(p) => InitKind::Function(*p),
            chlab::config::InitSpec::LoadedSnapshot(path) => {
                let (state, _) = chlab::runner::read_state_file(path).map_err(lift)?;
                InitKind::Fields { u: state.u, v: state.v }
            }
        };
        let state = solver::initial_state(&grid, &kind, config.seed, config.amplitude, (config.mean_u, config.mean_v))
            .map_err(lift)?;
        out.write(Box::into_raw(Box::new(ChlabSimulation { config, spec, state, steps: 0 })));
        Ok(())
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must come from [`chlab_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_free(sim: *mut ChlabSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Integrates up to `t_end` with the configured step. `steps` (may be null)
/// receives the number of accepted steps. On failure the state is unchanged.
///
/// # Safety
/// `sim` must be a live handle; `steps` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_advance(sim: *mut ChlabSimulation, t_end: f64, steps: *mut u64) -> ChlabStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        let (state, index) = solver::run_from(
            sim.state.clone(),
            sim.steps,
            t_end,
            &sim.config.scheme,
            &sim.spec,
            &mut solver::no_observer,
        )
        .map_err(lift)?;
        let taken = index - sim.steps;
        sim.state = state;
        sim.steps = index;
        if !steps.is_null() {
            steps.write(taken);
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_time(sim: *const ChlabSimulation, out: *mut f64) -> ChlabStatus {
    guard(|| put(out, "out", sim_ref(sim)?.state.t))
}

/// # Safety
/// `sim` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_node_count(sim: *const ChlabSimulation, out: *mut usize) -> ChlabStatus {
    guard(|| put(out, "out", sim_ref(sim)?.state.grid().len()))
}

/// Copies the nodal values of `u` and `v` (row-major, last axis fastest)
/// into buffers of `len` doubles each.
///
/// # Safety
/// `sim` must be a live handle; `u` and `v` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_copy_fields(
    sim: *const ChlabSimulation,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> ChlabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let n = sim.state.grid().len();
        if u.is_null() || v.is_null() {
            return Err(null(if u.is_null() { "u" } else { "v" }));
        }
        if len < n {
            return Err((ChlabStatus::BufferTooSmall, format!("buffers hold {len} values, need {n}")));
        }
        std::ptr::copy_nonoverlapping(sim.state.u.values().as_ptr(), u, n);
        std::ptr::copy_nonoverlapping(sim.state.v.values().as_ptr(), v, n);
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_energy(sim: *const ChlabSimulation, out: *mut ChlabEnergy) -> ChlabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let e = energy::full_breakdown(&sim.state.u, &sim.state.v, &sim.spec, false).map_err(lift)?;
        let tilde = energy::psi_tilde(&sim.state.u, &sim.state.v, &sim.spec).map_err(lift)?;
        put(out, "out", ChlabEnergy { psi: e.psi, psi_hat: e.psi_hat, psi_tilde: tilde.psi_tilde })
    })
}

/// # Safety
/// `sim` must be a live handle; `mean_u` and `mean_v` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_means(
    sim: *const ChlabSimulation,
    mean_u: *mut f64,
    mean_v: *mut f64,
) -> ChlabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        put(mean_u, "mean_u", sim.state.u.mean())?;
        put(mean_v, "mean_v", sim.state.v.mean())
    })
}

/// `L^2` norms of the mean-free stationary residuals of the current state.
///
/// # Safety
/// `sim` must be a live handle; `res_u` and `res_v` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulation_stationary_residual(
    sim: *const ChlabSimulation,
    res_u: *mut f64,
    res_v: *mut f64,
) -> ChlabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let (ru, rv) = steady::stationary_residual(&sim.state, &sim.spec).map_err(lift)?;
        put(res_u, "res_u", ru)?;
        put(res_v, "res_v", rv)
    })
}

macro_rules! scalar_fn {
    ($(#[$doc:meta])* $name:ident => $inner:path) => {
        $(#[$doc])*
        ///
        /// # Safety
        /// `out` must be valid for writes.
        #[no_mangle]
        pub unsafe extern "C" fn $name(s: f64, theta: f64, out: *mut f64) -> ChlabStatus {
            guard(|| put(out, "out", $inner(s, theta).map_err(lift)?))
        }
    };
}

scalar_fn!(
    /// Convex Flory–Huggins entropy on [-1, 1].
    chlab_fh_hat => potentials::fh_hat
);
scalar_fn!(
    /// First derivative of the entropy.
    chlab_fh_hat_d1 => potentials::fh_hat_d1
);
scalar_fn!(
    /// Second derivative of the entropy.
    chlab_fh_hat_d2 => potentials::fh_hat_d2
);

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn message() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { chlab_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
        assert_eq!(n, text.len());
        text
    }

    fn make(text: &str) -> Result<*mut ChlabSimulation, ChlabStatus> {
        let config = CString::new(text).unwrap();
        let mut sim = ptr::null_mut();
        match unsafe { chlab_simulation_new(config.as_ptr(), &mut sim) } {
            ChlabStatus::Ok => Ok(sim),
            status => Err(status),
        }
    }

    #[test]
    fn lifecycle() {
        let sim = make("dim = 1\nn = 16\neps_u = 0.1\neps_v = 0.1\nsigma = 1\nc = 0.2\nmean_v = -0.2\ntau = 1e-3\n").unwrap();
        let mut steps = 0;
        assert_eq!(unsafe { chlab_simulation_advance(sim, 0.01, &mut steps) }, ChlabStatus::Ok);
        assert_eq!(steps, 10);
        let (mut t, mut n) = (0.0, 0usize);
        unsafe {
            assert_eq!(chlab_simulation_time(sim, &mut t), ChlabStatus::Ok);
            assert_eq!(chlab_simulation_node_count(sim, &mut n), ChlabStatus::Ok);
        }
        assert_eq!((t, n), (0.01, 16));
        let (mut u, mut v) = (vec![0.0; 16], vec![0.0; 16]);
        assert_eq!(unsafe { chlab_simulation_copy_fields(sim, u.as_mut_ptr(), v.as_mut_ptr(), 16) }, ChlabStatus::Ok);
        let (mut mu, mut mv) = (0.0, 0.0);
        assert_eq!(unsafe { chlab_simulation_means(sim, &mut mu, &mut mv) }, ChlabStatus::Ok);
        assert!((u.iter().sum::<f64>() / 16.0 - mu).abs() < 1e-14);
        let mut expected = -0.2;
        for _ in 0..10 {
            expected = solver::next_v_mean(expected, 1e-3, 1.0, 0.2);
        }
        assert!((mv - expected).abs() < 1e-13);
        assert!(v.iter().all(|x| x.abs() < 1.0));
        let mut e = ChlabEnergy::default();
        assert_eq!(unsafe { chlab_simulation_energy(sim, &mut e) }, ChlabStatus::Ok);
        assert!(e.psi_tilde >= e.psi);
        let (mut ru, mut rv) = (0.0, 0.0);
        assert_eq!(unsafe { chlab_simulation_stationary_residual(sim, &mut ru, &mut rv) }, ChlabStatus::Ok);
        assert!(ru.is_finite() && rv.is_finite());
        assert_eq!(
            unsafe { chlab_simulation_copy_fields(sim, u.as_mut_ptr(), v.as_mut_ptr(), 8) },
            ChlabStatus::BufferTooSmall
        );
        assert!(message().contains("need 16"));
        unsafe { chlab_simulation_free(sim) };
    }

    #[test]
    fn errors_are_reported() {
        assert_eq!(make("c = 1.5\n").unwrap_err(), ChlabStatus::Config);
        assert!(message().contains("|c| < 1"));
        assert_eq!(unsafe { chlab_simulation_new(ptr::null(), ptr::null_mut()) }, ChlabStatus::NullPointer);
        let mut t = 0.0;
        assert_eq!(unsafe { chlab_simulation_time(ptr::null(), &mut t) }, ChlabStatus::NullPointer);
        let mut x = 0.0;
        assert_eq!(unsafe { chlab_fh_hat(1.5, 0.5, &mut x) }, ChlabStatus::DomainViolation);
        assert_eq!(unsafe { chlab_fh_hat_d2(1.0, 0.5, &mut x) }, ChlabStatus::DomainViolation);
        assert_eq!(unsafe { chlab_fh_hat_d1(0.0, 0.5, &mut x) }, ChlabStatus::Ok);
        assert_eq!(x, 0.0);
        unsafe { chlab_simulation_free(ptr::null_mut()) };
    }

    #[test]
    fn version_is_terminated() {
        let v = unsafe { CStr::from_ptr(chlab_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
