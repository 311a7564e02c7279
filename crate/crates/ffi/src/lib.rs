//! C ABI over the `causal-nie` engine.
//!
//! Models are opaque handles built from the JSON model format. Every
//! fallible call returns a `CnieStatus`; on failure the message is kept per
//! thread and read back with `cnie_last_error_message`. Strings handed out
//! by the library must be released with `cnie_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use causal_nie::counterfactual::TreatmentSpec;
use causal_nie::graph::count_dag_configurations;
use causal_nie::mediation::{estimate_nie, McConfig};
use causal_nie::model_file::ModelSpecFile;
use causal_nie::oracle::exact_nie;
use causal_nie::report::{sha256_hex, AnalysisReport};
use causal_nie::scm::Scm;
use causal_nie::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnieStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidGraph = 4,
    InvalidModel = 5,
    InvalidTreatment = 6,
    InvalidConfig = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnieFormat {
    Tsv = 0,
    Json = 1,
}

/// One Monte Carlo effect estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CnieEstimate {
    pub point: f64,
    pub std_error: f64,
    pub n_draws: u64,
}

/// Parsed and validated model with its default treatment settings.
pub struct CnieModel {
    scm: Scm,
    specs: Vec<TreatmentSpec>,
    sha256: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CnieStatus {
    use Error::*;
    match e {
        Parse(_) => CnieStatus::Parse,
        Io(_) => CnieStatus::Io,
        DuplicateNode(_)
        | DanglingEdge { .. }
        | ForbiddenEdge { .. }
        | MultipleOutcomes(_)
        | NoOutcome
        | CycleDetected(_)
        | InvalidMediatorOrder(_)
        | UnknownNode(_)
        | WrongRole { .. }
        | UnclassifiableEdge { .. } => CnieStatus::InvalidGraph,
        InvalidModel { .. } | DomainError { .. } | NotLinear(_) => CnieStatus::InvalidModel,
        MissingTreatmentValue(_) | MissingObservation(_) | MissingTreatmentSpec(_) | DuplicateTreatmentSpec(_) => {
            CnieStatus::InvalidTreatment
        }
        InvalidCount(_) | TooLarge(_) | InvalidConfig(_) => CnieStatus::InvalidConfig,
        _ => CnieStatus::Unsupported,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guarded(f: impl FnOnce() -> Result<(), (CnieStatus, String)>) -> CnieStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CnieStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            CnieStatus::Panic
        }
    }
}

fn engine(e: Error) -> (CnieStatus, String) {
    (status_of(&e), format!("{}: {e}", e.kind()))
}

fn null(what: &str) -> (CnieStatus, String) {
    (CnieStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CnieStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CnieStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

fn hand_out(s: String) -> *mut c_char {
    CString::new(s).expect("engine output has no nul bytes").into_raw()
}

/// Message for the most recent failure on this thread, or null. Valid
/// until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cnie_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cnie_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cnie_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON model and stores a new handle in `out`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cnie_model_from_json(json: *const c_char, out: *mut *mut CnieModel) -> CnieStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let file = ModelSpecFile::parse(text).map_err(engine)?;
        let scm = file.to_scm().map_err(engine)?;
        let specs = file.treatment_specs(scm.dag()).map_err(engine)?;
        let model = CnieModel {
            scm,
            specs,
            sha256: sha256_hex(text.as_bytes()),
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `cnie_model_from_json`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cnie_model_free(model: *mut CnieModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of nodes in the model's graph, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnie_model_node_count(model: *const CnieModel) -> usize {
    model.as_ref().map_or(0, |m| m.scm.dag().len())
}

/// Decimal count of DAG configurations for `treatments` treatments and
/// `mediators` mediators.
///
/// # Safety
/// `out` must be writable; the string is released with `cnie_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cnie_count_dags(treatments: u64, mediators: u64, out: *mut *mut c_char) -> CnieStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let count = count_dag_configurations(treatments, mediators).map_err(engine)?;
        *out = hand_out(count.to_string());
        Ok(())
    })
}

unsafe fn model_ref<'a>(model: *const CnieModel) -> Result<&'a CnieModel, (CnieStatus, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

/// Monte Carlo NIE for one treatment/mediator pair using the model's
/// treatment settings.
///
/// # Safety
/// `model` must be a live handle, names nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnie_estimate_nie(
    model: *const CnieModel,
    treatment: *const c_char,
    mediator: *const c_char,
    n_draws: u64,
    seed: u64,
    out: *mut CnieEstimate,
) -> CnieStatus {
    guarded(|| {
        let model = model_ref(model)?;
        let treatment = read_str(treatment, "treatment")?;
        let mediator = read_str(mediator, "mediator")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = estimate_nie(
            &model.scm,
            treatment,
            mediator,
            &model.specs,
            &McConfig::new(n_draws, seed),
        )
        .map_err(engine)?;
        *out = CnieEstimate {
            point: e.point,
            std_error: e.std_error,
            n_draws: e.n_draws,
        };
        Ok(())
    })
}

/// Exact NIE for finite-noise models.
///
/// # Safety
/// As for `cnie_estimate_nie`.
#[no_mangle]
pub unsafe extern "C" fn cnie_exact_nie(
    model: *const CnieModel,
    treatment: *const c_char,
    mediator: *const c_char,
    out: *mut f64,
) -> CnieStatus {
    guarded(|| {
        let model = model_ref(model)?;
        let treatment = read_str(treatment, "treatment")?;
        let mediator = read_str(mediator, "mediator")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = exact_nie(&model.scm, treatment, mediator, &model.specs).map_err(engine)?;
        Ok(())
    })
}

/// Full report (every NIE plus total and direct effects), as the command
/// line prints it.
///
/// # Safety
/// `model` must be a live handle; `out` writable. Release the string with
/// `cnie_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cnie_analyze(
    model: *const CnieModel,
    n_draws: u64,
    seed: u64,
    format: CnieFormat,
    out: *mut *mut c_char,
) -> CnieStatus {
    guarded(|| {
        let model = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let report = AnalysisReport::build(
            &model.scm,
            &model.specs,
            &McConfig::new(n_draws, seed),
            model.sha256.clone(),
        )
        .map_err(engine)?;
        *out = hand_out(match format {
            CnieFormat::Tsv => report.to_tsv(),
            CnieFormat::Json => report.to_json(),
        });
        Ok(())
    })
}
