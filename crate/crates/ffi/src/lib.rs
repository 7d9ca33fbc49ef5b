//! C ABI over `structdm`.
//!
//! Objects are opaque handles created by `sdm_*_new`/`_load` functions and
//! released with the matching `_free`. Every fallible call returns an
//! [`SdmStatus`]; on failure `sdm_last_error()` describes what went wrong on the
//! calling thread. Strings handed out by the library are freed with
//! `sdm_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use structdm::episode::Metrics;
use structdm::error::Error;
use structdm::harness::{ChatAgent, ChatSession};
use structdm::learn::{evaluate_oracle, evaluate_policy, GoalOptions};
use structdm::ontology::Ontology;
use structdm::policy::{Policy, PolicyKind};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    /// Bad value: unknown domain, slot or policy kind, an invalid act, a bad config.
    InvalidArgument = 5,
    Checkpoint = 6,
    /// The library panicked; the handle involved should be dropped.
    Internal = 7,
}

/// Loaded ontology.
pub struct SdmOntology(Arc<Ontology>);

/// A dialogue policy.
pub struct SdmPolicy(Policy);

/// An interactive dialogue in which the caller plays the user.
pub struct SdmSession(ChatSession);

/// Evaluation summary over a batch of simulated dialogues.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SdmMetrics {
    pub dialogues: usize,
    pub inform_precision: f64,
    pub inform_recall: f64,
    pub inform_f1: f64,
    pub book_rate: f64,
    pub success: f64,
    pub complete: f64,
    pub avg_turns_success: f64,
    pub avg_turns_all: f64,
    pub avg_reward: f64,
}

impl From<Metrics> for SdmMetrics {
    fn from(m: Metrics) -> Self {
        SdmMetrics {
            dialogues: m.dialogues,
            inform_precision: m.inform_precision,
            inform_recall: m.inform_recall,
            inform_f1: m.inform_f1,
            book_rate: m.book_rate,
            success: m.success,
            complete: m.complete,
            avg_turns_success: m.turns_success,
            avg_turns_all: m.turns_all,
            avg_reward: m.reward,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SdmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => SdmStatus::Io,
            Error::Parse { .. } => SdmStatus::Parse,
            Error::Checkpoint(_) => SdmStatus::Checkpoint,
            _ => SdmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SdmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SdmStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SdmStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SdmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn to_c(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SdmStatus::Internal, "string contains NUL".into()))
}

/// Message for the last failed call on this thread ("" after a success).
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sdm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn sdm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sdm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The bundled seven-domain ontology.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_ontology_bundled(out: *mut *mut SdmOntology) -> SdmStatus {
    guard(|| emit(out, SdmOntology(Arc::new(Ontology::bundled()))))
}

/// Loads an ontology JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_ontology_load(path: *const c_char, out: *mut *mut SdmOntology) -> SdmStatus {
    guard(|| {
        let path = text(path, "path")?;
        emit(out, SdmOntology(Arc::new(Ontology::load(path)?)))
    })
}

/// A new ontology with only the comma-separated `domains`, in that order.
///
/// # Safety
/// `ontology` must be a live handle, `domains` a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_ontology_restrict(
    ontology: *const SdmOntology,
    domains: *const c_char,
    out: *mut *mut SdmOntology,
) -> SdmStatus {
    guard(|| {
        let ont = handle(ontology, "ontology")?;
        let names: Vec<&str> = text(domains, "domains")?.split(',').map(str::trim).collect();
        emit(out, SdmOntology(Arc::new(ont.0.restrict(&names)?)))
    })
}

/// Number of domains (0 for a null handle).
///
/// # Safety
/// `ontology` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sdm_ontology_domain_count(ontology: *const SdmOntology) -> usize {
    ontology.as_ref().map_or(0, |o| o.0.len())
}

/// # Safety
/// `ontology` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdm_ontology_free(ontology: *mut SdmOntology) {
    if !ontology.is_null() {
        drop(Box::from_raw(ontology));
    }
}

/// A freshly initialised policy. `kind` is one of fnn, fnn-ref, hfnn, hgnn, uhgnn.
///
/// # Safety
/// `ontology` must be a live handle, `kind` a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_policy_new(
    ontology: *const SdmOntology,
    kind: *const c_char,
    seed: u64,
    out: *mut *mut SdmPolicy,
) -> SdmStatus {
    guard(|| {
        let ont = handle(ontology, "ontology")?;
        let kind: PolicyKind = text(kind, "kind")?.parse()?;
        emit(out, SdmPolicy(Policy::new(kind, ont.0.clone(), seed)?))
    })
}

/// Loads a checkpoint against `ontology`, or against the bundled ontology restricted
/// to the checkpoint's recorded domains when `ontology` is null.
///
/// # Safety
/// `path` must be a NUL-terminated string, `ontology` a live handle or null, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_policy_load(
    path: *const c_char,
    ontology: *const SdmOntology,
    out: *mut *mut SdmPolicy,
) -> SdmStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        let policy = match ontology.as_ref() {
            Some(o) => Policy::load(path, o.0.clone())?.0,
            None => structdm::harness::load_policy(path, None, None)?,
        };
        emit(out, SdmPolicy(policy))
    })
}

/// Writes a checkpoint (without optimiser state).
///
/// # Safety
/// `policy` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sdm_policy_save(policy: *const SdmPolicy, path: *const c_char) -> SdmStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        Ok(p.0.save(Path::new(text(path, "path")?), None)?)
    })
}

/// Number of scalar parameters (0 for a null handle).
///
/// # Safety
/// `policy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sdm_policy_param_count(policy: *const SdmPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.0.param_count())
}

/// # Safety
/// `policy` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdm_policy_free(policy: *mut SdmPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

fn goals(max_goal_domains: usize) -> Result<GoalOptions, Failure> {
    if max_goal_domains == 0 {
        return Err(Failure(SdmStatus::InvalidArgument, "max_goal_domains must be positive".into()));
    }
    Ok(GoalOptions {
        max_domains: max_goal_domains,
        ..GoalOptions::default()
    })
}

fn dialogues_ok(n: usize) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure(SdmStatus::InvalidArgument, "dialogues must be positive".into()));
    }
    Ok(())
}

/// Greedy evaluation of `policy` on `dialogues` simulated users drawn from `seed`.
///
/// # Safety
/// `policy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_evaluate_policy(
    policy: *const SdmPolicy,
    dialogues: usize,
    seed: u64,
    max_goal_domains: usize,
    out: *mut SdmMetrics,
) -> SdmStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        dialogues_ok(dialogues)?;
        let results = evaluate_policy(&p.0, dialogues, seed, goals(max_goal_domains)?)?;
        *out = Metrics::from_results(&results).into();
        Ok(())
    })
}

/// Same as `sdm_evaluate_policy` for the handcrafted oracle.
///
/// # Safety
/// `ontology` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_evaluate_oracle(
    ontology: *const SdmOntology,
    dialogues: usize,
    seed: u64,
    max_goal_domains: usize,
    out: *mut SdmMetrics,
) -> SdmStatus {
    guard(|| {
        let o = handle(ontology, "ontology")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        dialogues_ok(dialogues)?;
        let results = evaluate_oracle(&o.0, dialogues, seed, goals(max_goal_domains)?)?;
        *out = Metrics::from_results(&results).into();
        Ok(())
    })
}

/// A session answered by the oracle.
///
/// # Safety
/// `ontology` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_session_new_oracle(ontology: *const SdmOntology, out: *mut *mut SdmSession) -> SdmStatus {
    guard(|| {
        let o = handle(ontology, "ontology")?;
        emit(out, SdmSession(ChatSession::new(o.0.clone(), ChatAgent::Oracle)))
    })
}

/// A session answered greedily by a copy of `policy`.
///
/// # Safety
/// `policy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_session_new_policy(policy: *const SdmPolicy, out: *mut *mut SdmSession) -> SdmStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        let ont = p.0.ontology().clone();
        emit(out, SdmSession(ChatSession::new(ont, ChatAgent::Policy(Box::new(p.0.clone())))))
    })
}

/// Plays one user turn, e.g. `inform[restaurant.food=italian]; request[restaurant.phone]`.
///
/// On success `*reply` receives a JSON object with `system` (list of act strings),
/// `belief` and `verdict` (null, or `{"success":..,"complete":..}` after `bye`).
/// Free it with `sdm_string_free`.
///
/// # Safety
/// `session` must be a live handle, `line` a NUL-terminated string and `reply` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdm_session_send(
    session: *mut SdmSession,
    line: *const c_char,
    reply: *mut *mut c_char,
) -> SdmStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        if reply.is_null() {
            return Err(null("reply"));
        }
        let r = s.0.send(text(line, "line")?)?;
        let json = serde_json::json!({
            "system": r.system.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "belief": r.belief,
            "verdict": r.verdict.map(|v| serde_json::json!({"success": v.success, "complete": v.complete})),
        });
        *reply = to_c(json.to_string())?;
        Ok(())
    })
}

/// Forgets the current dialogue.
///
/// # Safety
/// `session` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sdm_session_reset(session: *mut SdmSession) {
    if let Some(s) = session.as_mut() {
        s.0.reset();
    }
}

/// # Safety
/// `session` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdm_session_free(session: *mut SdmSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}
