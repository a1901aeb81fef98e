//! C ABI over `specrag-core`.
//!
//! Conventions:
//! - Every fallible call returns a [`SpecragStatus`]; on failure a message is
//!   available from [`specrag_last_error`] on the same thread.
//! - Strings crossing the boundary are NUL-terminated UTF-8. Strings returned
//!   through `out` parameters are owned by the caller and must be released
//!   with [`specrag_string_free`].
//! - Handles are opaque and released with their matching `_free` function.
//!
//! The header `include/specrag.h` is generated from this file at build time.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specrag_core::backend::{Backends, MockScript, MockServer};
use specrag_core::drafting::{sequence_logprob, ByteSpan, TokenLogprob};
use specrag_core::harness::{evaluate_answer, run_pipeline, DatasetLine, DatasetRecord, RunMode};
use specrag_core::verification::combine_scores;
use specrag_core::{validate_config, Error, PipelineConfig, ScoreTerm};
use tokio::runtime::Runtime;

pub const SPECRAG_MODE_SPECULATIVE: u32 = 0;
pub const SPECRAG_MODE_STANDARD: u32 = 1;

pub const SPECRAG_TERM_DRAFT: u32 = 1;
pub const SPECRAG_TERM_SELF_CONSISTENCY: u32 = 2;
pub const SPECRAG_TERM_SELF_REFLECTION: u32 = 4;
pub const SPECRAG_TERM_ALL: u32 = 7;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecragStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    ConfigError = 5,
    PipelineError = 6,
    IoError = 7,
    Panic = 8,
}

/// One scored token: byte offsets `[start, end)` and its natural-log
/// probability.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecragToken {
    pub logprob: f64,
    pub start: usize,
    pub end: usize,
}

/// Pipeline configuration plus the endpoint clients and a runtime to drive
/// them. Safe to share between threads.
pub struct SpecragEngine {
    runtime: Runtime,
    backends: Backends,
    config: PipelineConfig,
}

/// A mock model server running on its own runtime.
pub struct SpecragMockServer {
    server: Option<MockServer>,
    runtime: Runtime,
}

impl Drop for SpecragMockServer {
    fn drop(&mut self) {
        if let Some(server) = self.server.take() {
            self.runtime.block_on(server.shutdown());
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SpecragStatus,
    message: String,
}

impl Failure {
    fn new(status: SpecragStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Config(_) => SpecragStatus::ConfigError,
            Error::Io(_) => SpecragStatus::IoError,
            Error::Argument(_) => SpecragStatus::InvalidArgument,
            _ => SpecragStatus::PipelineError,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("NUL bytes replaced"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpecragStatus {
    set_last_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpecragStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(Some(failure.message));
            failure.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("panic: {msg}")));
            SpecragStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string that outlives `'a`.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(SpecragStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(SpecragStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(SpecragStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes replaced").into_raw()
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::new(SpecragStatus::InvalidJson, format!("{what}: {e}")))
}

fn parse_record(text: &str) -> Result<DatasetRecord, Failure> {
    let line: DatasetLine = parse_json(text, "record")?;
    line.into_record()
        .map_err(|e| Failure::new(SpecragStatus::InvalidArgument, format!("record: {e}")))
}

fn new_runtime() -> Result<Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(SpecragStatus::IoError, format!("starting runtime: {e}")))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next `specrag_*` call on the same thread.
#[no_mangle]
pub extern "C" fn specrag_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn specrag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned through an `out` parameter of this
/// library that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn specrag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks a JSON config (missing fields take defaults). On return
/// `*out_violations` holds a JSON array of `{field, message}` objects, empty
/// when the config is valid; the status is `ConfigError` when it is not.
///
/// # Safety
/// `config_json` must be a valid C string; `out_violations` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_validate_config(
    config_json: *const c_char,
    out_violations: *mut *mut c_char,
) -> SpecragStatus {
    guard(|| {
        check_out(out_violations, "out_violations")?;
        let cfg: PipelineConfig = parse_json(read_str(config_json, "config_json")?, "config")?;
        let violations = validate_config(&cfg);
        let json = serde_json::to_string(&violations).expect("violations serialize");
        *out_violations = into_c_string(json);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Failure::from(Error::Config(violations)))
        }
    })
}

/// Log of the product of the score terms selected by `terms`, a bitwise OR of
/// the `SPECRAG_TERM_*` flags. Unknown bits are ignored.
#[no_mangle]
pub extern "C" fn specrag_combine_scores(
    rho_draft_log: f64,
    rho_sc_log: f64,
    rho_sr_log: f64,
    terms: u32,
) -> f64 {
    let selected: BTreeSet<ScoreTerm> = [
        (SPECRAG_TERM_DRAFT, ScoreTerm::Draft),
        (SPECRAG_TERM_SELF_CONSISTENCY, ScoreTerm::SelfConsistency),
        (SPECRAG_TERM_SELF_REFLECTION, ScoreTerm::SelfReflection),
    ]
    .into_iter()
    .filter(|(bit, _)| terms & bit != 0)
    .map(|(_, t)| t)
    .collect();
    combine_scores(rho_draft_log, rho_sc_log, rho_sr_log, &selected)
}

/// Sum (or mean, if `normalize`) of the logprobs of tokens overlapping the
/// byte span `[span_start, span_end)`. An empty span scores 0.
///
/// # Safety
/// `tokens` must point to `len` readable tokens (it may be null when `len` is
/// 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_sequence_logprob(
    tokens: *const SpecragToken,
    len: usize,
    span_start: usize,
    span_end: usize,
    normalize: bool,
    out: *mut f64,
) -> SpecragStatus {
    guard(|| {
        check_out(out, "out")?;
        if tokens.is_null() && len > 0 {
            return Err(Failure::new(SpecragStatus::NullArgument, "tokens is null"));
        }
        if span_start > span_end {
            return Err(Failure::new(
                SpecragStatus::InvalidArgument,
                format!("span start {span_start} > end {span_end}"),
            ));
        }
        let raw = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(tokens, len)
        };
        let converted: Vec<TokenLogprob> = raw
            .iter()
            .map(|t| TokenLogprob {
                token_text: String::new(),
                logprob: t.logprob,
                char_start: t.start,
                char_end: t.end,
            })
            .collect();
        *out = sequence_logprob(&converted, ByteSpan::new(span_start, span_end), normalize);
        Ok(())
    })
}

/// Whether `prediction` answers the record's question. `record_json` is one
/// dataset line.
///
/// # Safety
/// Both strings must be valid C strings; `out_correct` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_evaluate_answer(
    prediction: *const c_char,
    record_json: *const c_char,
    out_correct: *mut bool,
) -> SpecragStatus {
    guard(|| {
        check_out(out_correct, "out_correct")?;
        let prediction = read_str(prediction, "prediction")?;
        let record = parse_record(read_str(record_json, "record_json")?)?;
        *out_correct = evaluate_answer(prediction, &record.query);
        Ok(())
    })
}

/// Creates an engine from a JSON config; missing fields take defaults.
///
/// # Safety
/// `config_json` must be a valid C string; `out_engine` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_engine_new(
    config_json: *const c_char,
    out_engine: *mut *mut SpecragEngine,
) -> SpecragStatus {
    guard(|| {
        check_out(out_engine, "out_engine")?;
        *out_engine = ptr::null_mut();
        let config: PipelineConfig = parse_json(read_str(config_json, "config_json")?, "config")?;
        let violations = validate_config(&config);
        if !violations.is_empty() {
            return Err(Error::Config(violations).into());
        }
        let engine = SpecragEngine {
            runtime: new_runtime()?,
            backends: Backends::from_config(&config),
            config,
        };
        *out_engine = Box::into_raw(Box::new(engine));
        Ok(())
    })
}

/// Runs one dataset record. `mode` is `SPECRAG_MODE_SPECULATIVE` or
/// `SPECRAG_MODE_STANDARD`. On success `*out_result_json` holds the pipeline
/// result with an added boolean `correct` field.
///
/// # Safety
/// `engine` must come from [`specrag_engine_new`]; `record_json` must be a
/// valid C string; `out_result_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_engine_run(
    engine: *const SpecragEngine,
    record_json: *const c_char,
    mode: u32,
    out_result_json: *mut *mut c_char,
) -> SpecragStatus {
    guard(|| {
        check_out(out_result_json, "out_result_json")?;
        *out_result_json = ptr::null_mut();
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure::new(SpecragStatus::NullArgument, "engine is null"))?;
        let mode = match mode {
            SPECRAG_MODE_SPECULATIVE => RunMode::Speculative,
            SPECRAG_MODE_STANDARD => RunMode::Standard,
            other => {
                return Err(Failure::new(
                    SpecragStatus::InvalidArgument,
                    format!("unknown mode {other}"),
                ))
            }
        };
        let record = parse_record(read_str(record_json, "record_json")?)?;
        let result = engine
            .runtime
            .block_on(run_pipeline(&record, &engine.config, &engine.backends, mode))?;
        let correct = evaluate_answer(&result.final_answer, &record.query);
        let mut value = serde_json::to_value(&result).expect("result serializes");
        value["correct"] = serde_json::Value::Bool(correct);
        *out_result_json = into_c_string(value.to_string());
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or come from [`specrag_engine_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn specrag_engine_free(engine: *mut SpecragEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Starts a mock model server on `127.0.0.1:port` (0 picks a free port).
/// `script_json` may be null for an unscripted server. `delay_ms` of 0 keeps
/// the script's own delay.
///
/// # Safety
/// `script_json` must be null or a valid C string; `out_server` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_mock_server_start(
    script_json: *const c_char,
    port: u16,
    delay_ms: u64,
    out_server: *mut *mut SpecragMockServer,
) -> SpecragStatus {
    guard(|| {
        check_out(out_server, "out_server")?;
        *out_server = ptr::null_mut();
        let script = if script_json.is_null() {
            MockScript::default()
        } else {
            MockScript::from_json_str(read_str(script_json, "script_json")?)
                .map_err(|e| Failure::new(SpecragStatus::InvalidJson, format!("script: {e}")))?
        };
        let runtime = new_runtime()?;
        let delay = (delay_ms > 0).then_some(delay_ms);
        let server = runtime
            .block_on(MockServer::start(script, port, delay))
            .map_err(|e| Failure::new(SpecragStatus::IoError, format!("binding port {port}: {e}")))?;
        *out_server = Box::into_raw(Box::new(SpecragMockServer {
            server: Some(server),
            runtime,
        }));
        Ok(())
    })
}

/// Base URL of the server, e.g. `http://127.0.0.1:8100`; append `/generate`
/// or `/embed` for the endpoints.
///
/// # Safety
/// `server` must come from [`specrag_mock_server_start`]; `out_url` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn specrag_mock_server_url(
    server: *const SpecragMockServer,
    out_url: *mut *mut c_char,
) -> SpecragStatus {
    guard(|| {
        check_out(out_url, "out_url")?;
        let server = server
            .as_ref()
            .and_then(|s| s.server.as_ref())
            .ok_or_else(|| Failure::new(SpecragStatus::NullArgument, "server is null"))?;
        *out_url = into_c_string(server.base_url());
        Ok(())
    })
}

/// Stops the server and releases it.
///
/// # Safety
/// `server` must be null or come from [`specrag_mock_server_start`] and not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn specrag_mock_server_free(server: *mut SpecragMockServer) {
    if !server.is_null() {
        drop(Box::from_raw(server));
    }
}
