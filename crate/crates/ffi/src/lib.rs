//! C interface to intelm models.
//!
//! Models are opaque [`IntelmModel`] handles created by
//! [`intelm_model_load`] or [`intelm_model_quantize`] and released with
//! [`intelm_model_free`]. Every fallible call returns an [`IntelmStatus`];
//! on failure [`intelm_last_error_message`] describes the error for the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use intelm::format::{read_model, write_model, ModelFile};
use intelm::quantize::{quantize_beta, reduce_precision_step};
use intelm::{predict_float, Error, QuantizedModel};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntelmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    OutOfRange = 6,
    Headroom = 7,
    ZeroInput = 8,
    WrongModelKind = 9,
    Numeric = 10,
    Panic = 99,
}

/// A loaded model, float or integer.
pub struct IntelmModel {
    inner: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> IntelmStatus {
    match e.root() {
        Error::DimensionMismatch { .. } => IntelmStatus::DimensionMismatch,
        Error::OutOfRange { .. } => IntelmStatus::OutOfRange,
        Error::Headroom(_) => IntelmStatus::Headroom,
        Error::ZeroInput { .. } | Error::ZeroRow { .. } => IntelmStatus::ZeroInput,
        Error::Io { .. } => IntelmStatus::Io,
        Error::Format { .. } => IntelmStatus::Format,
        Error::CholeskyBreakdown { .. }
        | Error::NonFinite { .. }
        | Error::ZeroBeta
        | Error::LadderExhausted { .. } => IntelmStatus::Numeric,
        _ => IntelmStatus::InvalidArgument,
    }
}

struct Failure {
    status: IntelmStatus,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        fail(status_of(&e), e.to_string())
    }
}

fn fail(status: IntelmStatus, msg: impl Into<String>) -> Failure {
    Failure {
        status,
        msg: msg.into(),
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IntelmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            IntelmStatus::Ok
        }
        Ok(Err(f)) => {
            set_error(&f.msg);
            f.status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            IntelmStatus::Panic
        }
    }
}

fn model_ref<'a>(m: *const IntelmModel) -> Result<&'a IntelmModel, Failure> {
    // SAFETY: non-null handles come from `intelm_model_load`/`_quantize`
    // and stay valid until `intelm_model_free`.
    unsafe { m.as_ref() }.ok_or_else(|| fail(IntelmStatus::NullPointer, "model handle is null"))
}

fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(IntelmStatus::NullPointer, "path is null"));
    }
    // SAFETY: caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(IntelmStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(IntelmStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes a writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(|| fail(IntelmStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next intelm call on this thread.
#[no_mangle]
pub extern "C" fn intelm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reads a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_load(path: *const c_char, out: *mut *mut IntelmModel) -> IntelmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = read_model(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(IntelmModel { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_free(model: *mut IntelmModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Writes the model to `path`. An existing file is replaced only when
/// `overwrite` is true.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_save(model: *const IntelmModel, path: *const c_char, overwrite: bool) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        write_model(&path_arg(path)?, &m.inner, overwrite)?;
        Ok(())
    })
}

/// Input length, hidden units and class count.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_dims(
    model: *const IntelmModel,
    inputs: *mut usize,
    hidden: *mut usize,
    classes: *mut usize,
) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_arg(inputs, "inputs")? = m.inner.inputs();
        *out_arg(hidden, "hidden")? = m.inner.hidden();
        *out_arg(classes, "classes")? = m.inner.classes();
        Ok(())
    })
}

/// Writes true when the model classifies on the integer-only path.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_is_quantized(model: *const IntelmModel, out: *mut bool) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_arg(out, "out")? = matches!(m.inner, ModelFile::Quantized(_));
        Ok(())
    })
}

/// Bits per integer output weight (sign included). Integer models only.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_bit_width(model: *const IntelmModel, out: *mut u32) -> IntelmStatus {
    guard(|| {
        let q = quantized(model_ref(model)?)?;
        *out_arg(out, "out")? = q.bit_width();
        Ok(())
    })
}

fn quantized(m: &IntelmModel) -> Result<&QuantizedModel, Failure> {
    match &m.inner {
        ModelFile::Quantized(q) => Ok(q),
        ModelFile::Float(_) => Err(fail(IntelmStatus::WrongModelKind, "model has float output weights")),
    }
}

fn check_len(m: &IntelmModel, len: usize) -> Result<(), Failure> {
    if len != m.inner.inputs() {
        return Err(fail(
            IntelmStatus::DimensionMismatch,
            format!("input has {len} values, model expects {}", m.inner.inputs()),
        ));
    }
    Ok(())
}

/// Classifies one raw integer sample of `len` values. Integer models use
/// integer arithmetic only; float models preprocess the sample first.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `len` values, `class_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_classify_i32(
    model: *const IntelmModel,
    x: *const i32,
    len: usize,
    class_out: *mut usize,
) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = slice_arg(x, len, "x")?;
        check_len(m, len)?;
        let class = match &m.inner {
            ModelFile::Quantized(q) => q.classify(x)?,
            ModelFile::Float(f) => predict_float(f, &f.meta.preprocessing.apply(x, 0)?)?,
        };
        *out_arg(class_out, "class_out")? = class;
        Ok(())
    })
}

/// Classifies one already preprocessed real-valued sample. Float models only.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `len` values, `class_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_classify_f64(
    model: *const IntelmModel,
    x: *const f64,
    len: usize,
    class_out: *mut usize,
) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = slice_arg(x, len, "x")?;
        check_len(m, len)?;
        let ModelFile::Float(f) = &m.inner else {
            return Err(fail(IntelmStatus::WrongModelKind, "real-valued input needs a float model"));
        };
        *out_arg(class_out, "class_out")? = predict_float(f, x)?;
        Ok(())
    })
}

/// Integer class scores of a raw sample into `scores[0..classes]`.
/// Integer models only.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `len` values and `scores`
/// must have room for `scores_len` values.
#[no_mangle]
pub unsafe extern "C" fn intelm_scores_i64(
    model: *const IntelmModel,
    x: *const i32,
    len: usize,
    scores: *mut i64,
    scores_len: usize,
) -> IntelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let q = quantized(m)?;
        let x = slice_arg(x, len, "x")?;
        check_len(m, len)?;
        if scores_len < q.classes() {
            return Err(fail(
                IntelmStatus::InvalidArgument,
                format!("scores buffer holds {scores_len}, need {}", q.classes()),
            ));
        }
        if scores.is_null() {
            return Err(fail(IntelmStatus::NullPointer, "scores is null"));
        }
        let s = q.scores(x)?;
        // SAFETY: checked non-null with room for `classes` values.
        std::slice::from_raw_parts_mut(scores, s.len()).copy_from_slice(&s);
        Ok(())
    })
}

/// Integer model from a ternary-weight float model for inputs in
/// `[lo, hi]`. `steps` extra halvings are applied; with `fit` further
/// halvings are taken until the accumulator bounds hold.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn intelm_model_quantize(
    model: *const IntelmModel,
    lo: i32,
    hi: i32,
    steps: u32,
    fit: bool,
    out: *mut *mut IntelmModel,
) -> IntelmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ModelFile::Float(f) = &model_ref(model)?.inner else {
            return Err(fail(IntelmStatus::WrongModelKind, "model is already integer"));
        };
        let mut beta = quantize_beta(f.beta())?;
        for _ in 0..steps {
            beta = reduce_precision_step(&beta)?;
        }
        let q = loop {
            match QuantizedModel::with_beta(f, beta.clone(), (lo, hi)) {
                Err(Error::Headroom(_)) if fit => beta = reduce_precision_step(&beta)?,
                other => break other?,
            }
        };
        *out = Box::into_raw(Box::new(IntelmModel {
            inner: ModelFile::Quantized(q),
        }));
        Ok(())
    })
}
