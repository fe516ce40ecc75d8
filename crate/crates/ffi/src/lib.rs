//! C ABI over `entangle-lab`.
//!
//! Every function returns an [`ElStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be copied out
//! with [`el_last_error_message`]. Formfactors are opaque handles created by
//! the `el_formfactor_*` constructors and released with [`el_formfactor_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entangle_lab::bell::{self, UnitVector3};
use entangle_lab::field::{self, FieldError};
use entangle_lab::formfactor::{self, Formfactor, FormfactorError};
use entangle_lab::franson::{self, FransonSettings};
use entangle_lab::quadrature::{QuadratureError, QuadratureSpec};
use entangle_lab::CoincidenceBase;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Panic = 4,
}

/// Opaque formfactor handle.
pub struct ElFormfactor {
    inner: Formfactor,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|b| *b != 0));
    });
}

struct Failure(ElStatus, String);

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        let status = if e.is_numerical() {
            ElStatus::NumericalFailure
        } else {
            ElStatus::InvalidArgument
        };
        Failure(status, e.to_string())
    }
}

impl From<FormfactorError> for Failure {
    fn from(e: FormfactorError) -> Self {
        let status = match e {
            FormfactorError::Quadrature(QuadratureError::ToleranceNotMet { .. }) => {
                ElStatus::NumericalFailure
            }
            _ => ElStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<bell::BellError> for Failure {
    fn from(e: bell::BellError) -> Self {
        Failure(ElStatus::InvalidArgument, e.to_string())
    }
}

impl From<franson::FransonError> for Failure {
    fn from(e: franson::FransonError) -> Self {
        let status = match e {
            franson::FransonError::NegativeRate(_) => ElStatus::NumericalFailure,
            _ => ElStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(ElStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `body`, converting failures and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ElStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            ElStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ElStatus::Panic
        }
    }
}

fn spec_for(tol: f64) -> Result<QuadratureSpec, Failure> {
    if tol == 0.0 {
        return Ok(QuadratureSpec::default());
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Failure(
            ElStatus::InvalidArgument,
            format!("tol must lie in (0, 1), got {tol}"),
        ));
    }
    Ok(QuadratureSpec {
        rel_tol: tol,
        abs_tol: 1e-2 * tol,
        ..QuadratureSpec::default()
    })
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    // SAFETY: non-null, and the caller promises it points to writable memory.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn formfactor<'a>(f: *const ElFormfactor) -> Result<&'a Formfactor, Failure> {
    // SAFETY: caller passes a live handle or null.
    unsafe { f.as_ref() }
        .map(|h| &h.inner)
        .ok_or_else(|| null("formfactor"))
}

unsafe fn vector(v: *const f64, name: &str) -> Result<UnitVector3, Failure> {
    if v.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller promises three readable doubles.
    let s = unsafe { std::slice::from_raw_parts(v, 3) };
    Ok(UnitVector3::new(s[0], s[1], s[2])?)
}

unsafe fn new_handle(
    out: *mut *mut ElFormfactor,
    make: impl FnOnce() -> Result<Formfactor, FormfactorError>,
) -> ElStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let handle = Box::into_raw(Box::new(ElFormfactor { inner: make()? }));
        // SAFETY: checked non-null above.
        unsafe { out.write(handle) };
        Ok(())
    })
}

/// Sharp cutoff at `|p| = cutoff`.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn el_formfactor_step(cutoff: f64, out: *mut *mut ElFormfactor) -> ElStatus {
    unsafe { new_handle(out, || Formfactor::step(cutoff)) }
}

/// `exp(-p^2 / width)`.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn el_formfactor_gaussian(
    width: f64,
    out: *mut *mut ElFormfactor,
) -> ElStatus {
    unsafe { new_handle(out, || Formfactor::gaussian(width)) }
}

/// Smooth bump supported on `(lo, hi)`.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn el_formfactor_bump(
    lo: f64,
    hi: f64,
    out: *mut *mut ElFormfactor,
) -> ElStatus {
    unsafe { new_handle(out, || Formfactor::bump(lo, hi)) }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `f` must be null or a handle from an `el_formfactor_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn el_formfactor_free(f: *mut ElFormfactor) {
    if !f.is_null() {
        // SAFETY: caller hands back ownership of a Box-allocated handle.
        drop(unsafe { Box::from_raw(f) });
    }
}

/// `f(x)`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_formfactor_evaluate(
    f: *const ElFormfactor,
    x: f64,
    out: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        let f = formfactor(f)?;
        write(out, "out", f.evaluate(x))
    })
}

/// Half-line transform `I(alpha)`. `tol = 0` selects the default tolerances.
///
/// # Safety
/// `f` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_transform(
    f: *const ElFormfactor,
    alpha: f64,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        let f = formfactor(f)?;
        let v = formfactor::transform(f, alpha, &spec_for(tol)?)?;
        write(re, "re", v.value.re)?;
        write(im, "im", v.value.im)
    })
}

/// Field amplitude `phi(r, t)`.
///
/// # Safety
/// `f` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_phi(
    f: *const ElFormfactor,
    r: f64,
    t: f64,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        let f = formfactor(f)?;
        let v = field::phi_radial(f, r, t, &spec_for(tol)?)?;
        write(re, "re", v.value.re)?;
        write(im, "im", v.value.im)
    })
}

/// Coincidence base rate `|phi(r1, t)|^2 |phi(r2, t)|^2`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_r0(
    f: *const ElFormfactor,
    r1: f64,
    r2: f64,
    t: f64,
    tol: f64,
    out: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        let f = formfactor(f)?;
        let b = field::r0(f, r1, r2, t, &spec_for(tol)?)?;
        write(out, "out", b.r0)
    })
}

/// Singlet correlation `-a . b` for unit vectors given as three doubles each.
///
/// # Safety
/// `a` and `b` must point to three readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_spin_correlation(
    a: *const f64,
    b: *const f64,
    out: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        let a = vector(a, "a")?;
        let b = vector(b, "b")?;
        write(out, "out", bell::spin_correlation(&a, &b))
    })
}

/// Singlet CHSH value for coplanar settings given in degrees.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_chsh_coplanar(
    a: f64,
    a_prime: f64,
    b: f64,
    b_prime: f64,
    out: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        if ![a, a_prime, b, b_prime].iter().all(|v| v.is_finite()) {
            return Err(Failure(
                ElStatus::InvalidArgument,
                "angles must be finite".into(),
            ));
        }
        let s = bell::ChshSettings::coplanar_degrees(a, a_prime, b, b_prime);
        write(out, "out", s.evaluate(bell::spin_correlation))
    })
}

/// Largest reachable `|S|` for spatial factor `g`, and whether it exceeds 2.
///
/// # Safety
/// `max_chsh` and `violated` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_violation_threshold(
    g: f64,
    max_chsh: *mut f64,
    violated: *mut bool,
) -> ElStatus {
    guard(|| unsafe {
        if !g.is_finite() {
            return Err(Failure(
                ElStatus::InvalidArgument,
                format!("g must be finite, got {g}"),
            ));
        }
        let v = bell::violation_threshold(g);
        write(max_chsh, "max_chsh", v.max_chsh)?;
        write(violated, "violated", v.violated)
    })
}

/// Interferometer coincidence rate from a base rate `r0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_coincidence_rate(
    r0: f64,
    phi1: f64,
    phi2: f64,
    eta1: f64,
    eta2: f64,
    out: *mut f64,
) -> ElStatus {
    guard(|| unsafe {
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(Failure(
                ElStatus::InvalidArgument,
                format!("r0 must be nonnegative, got {r0}"),
            ));
        }
        let s = FransonSettings {
            phi1,
            phi2,
            eta1,
            eta2,
            ..FransonSettings::default()
        };
        s.validate()?;
        let base = CoincidenceBase {
            r1: f64::NAN,
            r2: f64::NAN,
            t: f64::NAN,
            r0,
        };
        write(out, "out", franson::coincidence_rate(&base, &s).rc)
    })
}

/// Fringe visibility of `len` rates.
///
/// # Safety
/// `rates` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_visibility(rates: *const f64, len: usize, out: *mut f64) -> ElStatus {
    guard(|| unsafe {
        if rates.is_null() {
            return Err(null("rates"));
        }
        let rates = std::slice::from_raw_parts(rates, len);
        let tagged: Vec<(f64, f64)> = rates
            .iter()
            .enumerate()
            .map(|(i, r)| (i as f64, *r))
            .collect();
        write(out, "out", franson::visibility(&tagged)?)
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the full message length
/// (excluding the terminator), so a too-small buffer can be detected.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn el_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            // SAFETY: caller promises `cap` writable bytes.
            unsafe {
                ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn el_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string contains NUL"),
        };
    VERSION.as_ptr()
}
