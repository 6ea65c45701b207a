use std::ffi::{c_char, CStr, CString};
use std::ptr;

use faqrag_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { faqrag_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(faqrag_last_error_message()) }.to_str().unwrap().to_owned()
}

struct Engine(*mut FaqragEngine);

impl Drop for Engine {
    fn drop(&mut self) {
        unsafe { faqrag_engine_free(self.0) };
    }
}

fn engine() -> Engine {
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { faqrag_engine_new_mock(&mut e) }, FaqragStatus::Ok);
    Engine(e)
}

#[test]
fn answers_as_json() {
    let e = engine();
    let q = CString::new("amar payment fail hocche keno?").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { faqrag_answer(e.0, q.as_ptr(), &mut out) }, FaqragStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["source"], "generated");
    assert!(!v["context_ids"].as_array().unwrap().is_empty());
    assert_eq!(last_error(), "");
}

#[test]
fn sample_then_lookup_round_trip() {
    let e = engine();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { faqrag_sample_faqs(e.0, 4, 7, &mut out) }, FaqragStatus::Ok);
    let items: Vec<serde_json::Value> = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(items.len(), 4);
    let id = CString::new(items[0]["id"].as_str().unwrap()).unwrap();
    assert_eq!(unsafe { faqrag_lookup_answer(e.0, id.as_ptr(), &mut out) }, FaqragStatus::Ok);
    assert!(!take(out).is_empty());

    let missing = CString::new("no-such-id").unwrap();
    assert_eq!(unsafe { faqrag_lookup_answer(e.0, missing.as_ptr(), &mut out) }, FaqragStatus::NotFound);
    assert!(out.is_null());
    assert!(last_error().contains("no-such-id"));
    assert_eq!(unsafe { faqrag_sample_faqs(e.0, 0, 7, &mut out) }, FaqragStatus::InvalidArgument);
}

#[test]
fn argument_errors() {
    let e = engine();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { faqrag_answer(ptr::null(), c"hi".as_ptr(), &mut out) }, FaqragStatus::NullPointer);
    assert_eq!(unsafe { faqrag_answer(e.0, ptr::null(), &mut out) }, FaqragStatus::NullPointer);
    assert_eq!(unsafe { faqrag_answer(e.0, c"hi".as_ptr(), ptr::null_mut()) }, FaqragStatus::NullPointer);
    assert_eq!(unsafe { faqrag_answer(e.0, c"   ".as_ptr(), &mut out) }, FaqragStatus::InvalidArgument);
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { faqrag_answer(e.0, bad.as_ptr().cast(), &mut out) }, FaqragStatus::InvalidUtf8);
    assert!(last_error().contains("UTF-8"));
}

#[test]
fn detect_and_cosine() {
    let mut out = ptr::null_mut();
    let text = CString::new("আমার টাকা ফেরত চাই").unwrap();
    assert_eq!(unsafe { faqrag_detect_language(text.as_ptr(), &mut out) }, FaqragStatus::Ok);
    assert_eq!(take(out), "bn");

    let (a, b) = ([4.0f32, 3.0], [1.0f32, 0.0]);
    let mut c = 0.0;
    assert_eq!(unsafe { faqrag_cosine(a.as_ptr(), b.as_ptr(), 2, &mut c) }, FaqragStatus::Ok);
    assert_eq!(c, 0.8);
    let zero = [0.0f32, 0.0];
    assert_eq!(unsafe { faqrag_cosine(a.as_ptr(), zero.as_ptr(), 2, &mut c) }, FaqragStatus::InvalidArgument);
}

#[test]
fn bad_config_path_is_config_error() {
    let mut e = ptr::null_mut();
    let path = CString::new("/nonexistent/faqrag.toml").unwrap();
    assert_eq!(unsafe { faqrag_engine_from_config(path.as_ptr(), &mut e) }, FaqragStatus::Config);
    assert!(e.is_null());
    assert!(!last_error().is_empty());
    unsafe { faqrag_engine_free(ptr::null_mut()) };
}

#[test]
fn errors_are_per_thread() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { faqrag_detect_language(ptr::null(), &mut out) }, FaqragStatus::NullPointer);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert_eq!(last_error(), "text is null");
}
