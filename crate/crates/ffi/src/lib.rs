//! C ABI over `relu-forge`.
//!
//! Nets and datasets cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`RfStatus`]; on failure [`rf_last_error`] describes what went wrong.
//! Panics are caught at the boundary and reported as [`RfStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relu_forge::dataset::Dataset;
use relu_forge::deepen::{bad_interpolant, deepen, make_plan, DeepenFlavor};
use relu_forge::gate::{multi_gate, pair_gate, GateFlavor, GateSpec};
use relu_forge::primitives::{bump_net, identity_net, BumpSpec};
use relu_forge::{Error, ReluNet};

/// Opaque ReLU network.
pub struct RfNet(ReluNet);

/// Opaque labelled point set.
pub struct RfDataset(Dataset);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Resource = 4,
    Infeasible = 5,
    Divergence = 6,
    Io = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> RfStatus {
    match e {
        Error::InvalidInput(_) => RfStatus::InvalidInput,
        Error::Parse { .. } => RfStatus::Parse,
        Error::Resource(_) => RfStatus::Resource,
        Error::Infeasible(_) => RfStatus::Infeasible,
        Error::Divergence { .. } => RfStatus::Divergence,
        Error::Io(_) => RfStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            RfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn emit_net(out: *mut *mut RfNet, net: ReluNet) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(Box::into_raw(Box::new(RfNet(net))));
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a net from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_net_from_json(json: *const c_char, out: *mut *mut RfNet) -> RfStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let net = ReluNet::from_json(CStr::from_ptr(json).to_bytes())?;
        emit_net(out, net)
    })
}

/// Serializes a net; free the result with [`rf_string_free`].
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_net_to_json(net: *const RfNet, out: *mut *mut c_char) -> RfStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let s = CString::new(net.0.to_json())
            .map_err(|e| Failure::Lib(Error::InvalidInput(e.to_string())))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// Frees a net. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rf_net_free(net: *mut RfNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_net_input_dim(net: *const RfNet) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

/// Hidden-layer count, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_net_depth(net: *const RfNet) -> usize {
    net.as_ref().map_or(0, |n| n.0.depth())
}

/// Free-parameter count, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_net_param_count(net: *const RfNet) -> usize {
    net.as_ref().map_or(0, |n| n.0.param_count())
}

/// Evaluates the net at `x[0..len]`.
///
/// # Safety
/// `x` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_net_evaluate(
    net: *const RfNet,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let y = net.0.evaluate(slice(x, len, "x")?)?;
        write_out(out, y, "out")
    })
}

/// Evaluates `rows` points stored row-major in `xs` (`rows × cols`) into
/// `out[0..rows]`.
///
/// # Safety
/// `xs` must hold `rows · cols` doubles and `out` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn rf_net_evaluate_batch(
    net: *const RfNet,
    xs: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let total = rows
            .checked_mul(cols)
            .ok_or(Failure::Lib(Error::InvalidInput("batch too large".into())))?;
        let flat = slice(xs, total, "xs")?;
        if cols != net.0.input_dim() {
            return Err(Error::InvalidInput(format!(
                "rows have {cols} columns, net expects {}",
                net.0.input_dim()
            ))
            .into());
        }
        if rows > 0 && out.is_null() {
            return Err(Failure::Null("out"));
        }
        let points: Vec<Vec<f64>> = flat.chunks(cols.max(1)).map(<[f64]>::to_vec).collect();
        if let Some(v) = flat.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite input coordinate {v}")).into());
        }
        let ys = net.0.evaluate_batch(&points)?;
        if rows > 0 {
            std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&ys);
        }
        Ok(())
    })
}

/// Net equal to 1 on `[a,b]^dim` and 0 outside `[a−τ, b+τ]^dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_bump_net(
    a: f64,
    b: f64,
    tau: f64,
    dim: usize,
    out: *mut *mut RfNet,
) -> RfStatus {
    guard(|| emit_net(out, bump_net(&BumpSpec::new(a, b, tau, dim)?)?))
}

/// Scalar identity of the given depth.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_identity_net(depth: usize, out: *mut *mut RfNet) -> RfStatus {
    guard(|| emit_net(out, identity_net(depth)?))
}

/// Two-input product gate with uniform error at most `nu` on `[−1,1]²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_pair_gate(nu: f64, out: *mut *mut RfNet) -> RfStatus {
    guard(|| emit_net(out, pair_gate(nu)?))
}

/// `ell`-input product gate. With `log_depth` set, the gate is a balanced
/// tree of pair gates and `theta`, `tilde_l` are ignored.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_multi_gate(
    ell: usize,
    nu: f64,
    theta: f64,
    tilde_l: usize,
    log_depth: bool,
    out: *mut *mut RfNet,
) -> RfStatus {
    guard(|| {
        let spec = if log_depth {
            GateSpec::log_depth(ell, nu)?
        } else {
            GateSpec::new(ell, nu, theta, tilde_l, GateFlavor::FixedDepth)?
        };
        emit_net(out, multi_gate(&spec)?)
    })
}

/// Dataset of `m` points of dimension `d`, stored row-major in `points`,
/// with `labels[0..m]`.
///
/// # Safety
/// `points` must hold `m · d` doubles and `labels` `m`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_new(
    points: *const f64,
    labels: *const f64,
    m: usize,
    d: usize,
    out: *mut *mut RfDataset,
) -> RfStatus {
    guard(|| {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()).into());
        }
        let total = m.checked_mul(d).ok_or(Failure::Lib(Error::InvalidInput(
            "dataset too large".into(),
        )))?;
        let flat = slice(points, total, "points")?;
        let labels = slice(labels, m, "labels")?;
        let ds = Dataset::new(
            flat.chunks(d).map(<[f64]>::to_vec).collect(),
            labels.to_vec(),
        )?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        out.write(Box::into_raw(Box::new(RfDataset(ds))));
        Ok(())
    })
}

/// Frees a dataset. Null is ignored.
///
/// # Safety
/// `ds` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_free(ds: *mut RfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Half the smallest pairwise distance of the dataset's points.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_separation_radius(ds: *const RfDataset, out: *mut f64) -> RfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        write_out(out, ds.0.separation_radius()?, "out")
    })
}

/// Deepens `teacher` into a net that interpolates `ds` exactly and stays
/// within `C′ε` of the teacher in `L^p`.
///
/// # Safety
/// `teacher` and `ds` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_deepen(
    teacher: *const RfNet,
    ds: *const RfDataset,
    epsilon: f64,
    p: f64,
    theta: f64,
    tilde_l: usize,
    fully_connected: bool,
    out: *mut *mut RfNet,
) -> RfStatus {
    guard(|| {
        let teacher = deref(teacher, "teacher")?;
        let ds = deref(ds, "dataset")?;
        let flavor = if fully_connected {
            DeepenFlavor::FullyConnected
        } else {
            DeepenFlavor::FixedDepth
        };
        let plan = make_plan(&ds.0, &teacher.0, epsilon, p, theta, tilde_l, flavor)?;
        emit_net(out, deepen(&teacher.0, &ds.0, &plan)?)
    })
}

/// Sum of bumps of width `tau` through the data.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_bad_interpolant(
    ds: *const RfDataset,
    tau: f64,
    out: *mut *mut RfNet,
) -> RfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        emit_net(out, bad_interpolant(&ds.0, tau)?)
    })
}
