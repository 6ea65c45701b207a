//! C ABI for the FAQ engine.
//!
//! Every fallible call returns a [`FaqragStatus`]. On failure the message is
//! kept per thread and read with [`faqrag_last_error_message`]. Strings handed
//! out by the library must be released with [`faqrag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use faqrag::config::{ConfigError, ServiceConfig};
use faqrag::knowledge_base::{lookup_answer, sample_faqs, CorpusError, FaqCorpus, FaqId};
use faqrag::pipeline::{Pipeline, PipelineConfig, PipelineError, Providers};
use faqrag::prompt_builder::PromptTemplate;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaqragStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Corpus = 5,
    Provider = 6,
    NotFound = 7,
    Panic = 8,
}

/// Opaque engine handle.
pub struct FaqragEngine {
    pipeline: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(FaqragStatus, String);

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let status = match &e {
            ConfigError::Corpus(_) | ConfigError::Index { .. } => FaqragStatus::Corpus,
            ConfigError::Pipeline(p) if p.stage().is_some() => FaqragStatus::Provider,
            _ => FaqragStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::EmptyQuery => FaqragStatus::InvalidArgument,
            PipelineError::Config(_) | PipelineError::Prompt(_) => FaqragStatus::Config,
            _ => FaqragStatus::Provider,
        };
        Failure(status, e.to_string())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let status = match &e {
            CorpusError::UnknownId(_) => FaqragStatus::NotFound,
            CorpusError::NTooLarge { .. } | CorpusError::NTooSmall => FaqragStatus::InvalidArgument,
            _ => FaqragStatus::Corpus,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, recording any error or panic for [`faqrag_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FaqragStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FaqragStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FaqragStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(FaqragStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FaqragStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn engine<'a>(p: *const FaqragEngine) -> Result<&'a FaqragEngine, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(FaqragStatus::NullPointer, "engine is null".into()))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(FaqragStatus::InvalidArgument, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(FaqragStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

unsafe fn install(out: *mut *mut FaqragEngine, pipeline: Pipeline) {
    *out = Box::into_raw(Box::new(FaqragEngine { pipeline }));
}

/// Engine over the bundled corpus with offline mock providers.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn faqrag_engine_new_mock(out: *mut *mut FaqragEngine) -> FaqragStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let p = Pipeline::build(FaqCorpus::bundled(), Providers::mock(256), PromptTemplate::default(), PipelineConfig::default())?;
        install(out, p);
        Ok(())
    })
}

/// Engine from a TOML config file; `FAQRAG_*` environment overrides apply.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn faqrag_engine_from_config(path: *const c_char, out: *mut *mut FaqragEngine) -> FaqragStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let config = ServiceConfig::resolve(Some(Path::new(path)))?;
        install(out, config.build_pipeline()?);
        Ok(())
    })
}

/// # Safety
/// `engine` must come from one of the constructors, or be null.
#[no_mangle]
pub unsafe extern "C" fn faqrag_engine_free(engine: *mut FaqragEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Answers a query. Writes the response as a JSON object to `out_json`.
///
/// # Safety
/// `engine` must be live, `query` NUL-terminated, `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn faqrag_answer(
    engine: *const FaqragEngine,
    query: *const c_char,
    out_json: *mut *mut c_char,
) -> FaqragStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = ptr::null_mut();
        let e = self::engine(engine)?;
        let resp = e.pipeline.answer_query(read_str(query, "query")?)?;
        write_string(out_json, serde_json::to_string(&resp).expect("response serializes"))
    })
}

/// `n` distinct FAQs as a JSON array of `{id, question, language}`.
///
/// # Safety
/// `engine` must be live and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn faqrag_sample_faqs(
    engine: *const FaqragEngine,
    n: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> FaqragStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = ptr::null_mut();
        let e = self::engine(engine)?;
        let items: Vec<_> = sample_faqs(e.pipeline.corpus(), n, seed)?
            .into_iter()
            .map(|f| serde_json::json!({"id": f.id, "question": f.question, "language": f.language}))
            .collect();
        write_string(out_json, serde_json::Value::from(items).to_string())
    })
}

/// The stored answer for an FAQ id, verbatim.
///
/// # Safety
/// `engine` must be live, `id` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn faqrag_lookup_answer(
    engine: *const FaqragEngine,
    id: *const c_char,
    out: *mut *mut c_char,
) -> FaqragStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let e = self::engine(engine)?;
        let answer = lookup_answer(e.pipeline.corpus(), &FaqId::new(read_str(id, "id")?))?;
        write_string(out, answer.to_owned())
    })
}

/// Writes `"en"`, `"bn"` or `"banglish"`.
///
/// # Safety
/// `text` must be NUL-terminated and `out_code` valid.
#[no_mangle]
pub unsafe extern "C" fn faqrag_detect_language(text: *const c_char, out_code: *mut *mut c_char) -> FaqragStatus {
    guard(|| {
        check_out(out_code)?;
        *out_code = ptr::null_mut();
        let tag = faqrag::detect_language_and_script(read_str(text, "text")?)
            .map_err(|e| Failure(FaqragStatus::InvalidArgument, e.to_string()))?;
        write_string(out_code, tag.code().to_owned())
    })
}

/// Cosine similarity of two equal-length vectors.
///
/// # Safety
/// `a` and `b` must point to `len` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn faqrag_cosine(a: *const f32, b: *const f32, len: usize, out: *mut f64) -> FaqragStatus {
    guard(|| {
        check_out(out)?;
        if a.is_null() || b.is_null() {
            return Err(Failure(FaqragStatus::NullPointer, "vector is null".into()));
        }
        if len == 0 {
            return Err(Failure(FaqragStatus::InvalidArgument, "vectors are empty".into()));
        }
        let (a, b) = (std::slice::from_raw_parts(a, len), std::slice::from_raw_parts(b, len));
        *out = faqrag::embedding_store::cosine(a, b).map_err(|e| Failure(FaqragStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or "" after a success.
/// Valid until the next library call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn faqrag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn faqrag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn faqrag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
