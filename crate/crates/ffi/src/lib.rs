//! C interface to a trained dmon checkpoint.
//!
//! Every fallible call returns a [`DmonStatus`]; on failure the message is
//! available from [`dmon_last_error`] on the same thread. Handles are opaque
//! and must be released with [`dmon_model_free`]. Strings returned through
//! out-parameters are owned by the caller and released with
//! [`dmon_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use dmon::checkpoint::load_checkpoint;
use dmon::corpus::{generate_synthetic_corpus, to_jsonl, PlantedRule, SynthSpec};
use dmon::encoder::encode_pairs;
use dmon::fusion::{confidence_margin, fuse_with, predict_tensor};
use dmon::model::{Branch, BranchLogits};
use dmon::{
    DmonParams, Document, Error, LabelSpace, PredictionMode, RelationshipTensor, TrainConfig,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numeric = 5,
    Unsupported = 6,
    Panic = 7,
}

/// Which tower a fused cell came from.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmonBranch {
    Head = 0,
    Tail = 1,
}

/// A loaded checkpoint. Opaque to C.
pub struct DmonModel {
    params: DmonParams,
    space: LabelSpace,
    config: TrainConfig,
    prediction: PredictionMode,
    label_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> DmonStatus {
    match err {
        Error::Io { .. } => DmonStatus::Io,
        Error::Parse { .. } | Error::Serialize(_) => DmonStatus::Parse,
        Error::Numeric(_) | Error::Diverged { .. } => DmonStatus::Numeric,
        Error::Unsupported(_) => DmonStatus::Unsupported,
        Error::Validation(_) | Error::Encoder { .. } | Error::RunsFailed(_) => {
            DmonStatus::InvalidArgument
        }
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DmonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DmonStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            DmonStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            DmonStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DmonStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(model: *const DmonModel) -> Result<&'a DmonModel, Failure> {
    model.as_ref().ok_or(Failure::Null("model"))
}

fn checked_len(parts: &[usize], what: &str) -> Result<usize, Failure> {
    parts
        .iter()
        .try_fold(1usize, |acc, x| acc.checked_mul(*x))
        .ok_or_else(|| Failure::Arg(format!("{what} size overflows")))
}

fn write_labels(model: &DmonModel, h: &RelationshipTensor, out: *mut u32) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out_labels"));
    }
    let fused = predict_tensor(
        h,
        &model.params,
        &model.space,
        model.config.bypass_towers,
        model.prediction,
    )?;
    let out = unsafe { slice::from_raw_parts_mut(out, fused.labels.values.len()) };
    for (o, v) in out.iter_mut().zip(&fused.labels.values) {
        *o = *v as u32;
    }
    Ok(())
}

/// Loads the checkpoint directory at `path` into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_load(
    path: *const c_char,
    out: *mut *mut DmonModel,
) -> DmonStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let ck = load_checkpoint(Path::new(path))?;
        let label_names = ck
            .manifest
            .label_space
            .labels
            .iter()
            .map(|l| {
                CString::new(l.as_str())
                    .map_err(|_| Failure::Arg(format!("label {l:?} contains NUL")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let model = DmonModel {
            params: ck.state.params,
            space: ck.manifest.label_space,
            config: ck.manifest.train_config,
            prediction: ck.manifest.prediction,
            label_names,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`dmon_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_free(model: *mut DmonModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Pair-embedding width the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_embed_dim(model: *const DmonModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.dim())
}

/// Number of relation classes; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_num_labels(model: *const DmonModel) -> usize {
    model.as_ref().map_or(0, |m| m.space.len())
}

/// Index of the no-relation class.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_no_relation(model: *const DmonModel) -> usize {
    model.as_ref().map_or(0, |m| m.space.no_relation_index)
}

/// Name of class `index`, or null when out of range. The string lives as
/// long as the handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_label_name(
    model: *const DmonModel,
    index: usize,
) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.label_names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Predicts labels for a precomputed `n × n × d` pair tensor laid out
/// row-major as `[head][tail][channel]`. Writes `n * n` class indices.
///
/// # Safety
/// `tensor` must hold `n * n * d` values and `out_labels` room for `n * n`.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_predict_tensor(
    model: *const DmonModel,
    n: usize,
    d: usize,
    tensor: *const f64,
    out_labels: *mut u32,
) -> DmonStatus {
    guard(|| {
        let model = model_ref(model)?;
        if tensor.is_null() {
            return Err(Failure::Null("tensor"));
        }
        if d != model.params.dim() {
            return Err(Failure::Arg(format!(
                "tensor width {d} does not match model width {}",
                model.params.dim()
            )));
        }
        let len = checked_len(&[n, n, d], "tensor")?;
        let values = slice::from_raw_parts(tensor, len).to_vec();
        let h = RelationshipTensor::from_values(n, d, values)?;
        write_labels(model, &h, out_labels)
    })
}

/// Encodes `n` sentences with the model's own encoder and predicts every
/// ordered pair. Writes `n * n` class indices, row = head, column = tail.
///
/// # Safety
/// `sentences` must hold `n` NUL-terminated strings and `out_labels` room
/// for `n * n` values.
#[no_mangle]
pub unsafe extern "C" fn dmon_model_predict_sentences(
    model: *const DmonModel,
    sentences: *const *const c_char,
    n: usize,
    out_labels: *mut u32,
) -> DmonStatus {
    guard(|| {
        let model = model_ref(model)?;
        if sentences.is_null() && n > 0 {
            return Err(Failure::Null("sentences"));
        }
        let raw = if n == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(sentences, n)
        };
        let sentences = raw
            .iter()
            .map(|p| str_arg(*p, "sentence").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        let doc = Document {
            doc_id: "ffi".into(),
            sentences,
            relations: Vec::new(),
        };
        let backend = model.config.backend()?;
        let h = encode_pairs(&doc, &backend)?;
        write_labels(model, &h, out_labels)
    })
}

/// Top-1 minus top-2 softmax probability of `l` logits.
///
/// # Safety
/// `logits` must hold `l` values and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmon_confidence_margin(
    logits: *const f64,
    l: usize,
    out: *mut f64,
) -> DmonStatus {
    guard(|| {
        if logits.is_null() {
            return Err(Failure::Null("logits"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = confidence_margin(slice::from_raw_parts(logits, l))?;
        Ok(())
    })
}

/// Fuses two `m × m × l` logit grids cell by cell: the branch with the
/// larger margin supplies the label, ties go to the head. `out_source` may
/// be null.
///
/// # Safety
/// `head` and `tail` must hold `m * m * l` values, `out_labels` room for
/// `m * m`, and `out_source` null or room for `m * m`.
#[no_mangle]
pub unsafe extern "C" fn dmon_fuse(
    head: *const f64,
    tail: *const f64,
    m: usize,
    l: usize,
    out_labels: *mut u32,
    out_source: *mut DmonBranch,
) -> DmonStatus {
    guard(|| {
        if head.is_null() || tail.is_null() {
            return Err(Failure::Null("logits"));
        }
        if out_labels.is_null() {
            return Err(Failure::Null("out_labels"));
        }
        let len = checked_len(&[m, m, l], "logits")?;
        let grid = |p: *const f64, branch| BranchLogits {
            m,
            l,
            branch,
            values: slice::from_raw_parts(p, len).to_vec(),
        };
        let fused = fuse_with(
            &grid(head, Branch::Head),
            &grid(tail, Branch::Tail),
            PredictionMode::Fused,
        )?;
        let labels = slice::from_raw_parts_mut(out_labels, m * m);
        for (o, v) in labels.iter_mut().zip(&fused.labels.values) {
            *o = *v as u32;
        }
        if !out_source.is_null() {
            let source = slice::from_raw_parts_mut(out_source, m * m);
            for (o, b) in source.iter_mut().zip(&fused.source) {
                *o = match b {
                    Branch::Head => DmonBranch::Head,
                    Branch::Tail => DmonBranch::Tail,
                };
            }
        }
        Ok(())
    })
}

/// Generates a synthetic corpus as JSONL. `rule` is `"chain"` or `"star"`.
/// The string written to `out` must be released with [`dmon_string_free`].
///
/// # Safety
/// `rule` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmon_synth_jsonl(
    num_docs: usize,
    min_sentences: usize,
    max_sentences: usize,
    rule: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> DmonStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let rule: PlantedRule = str_arg(rule, "rule")?.parse()?;
        let docs = generate_synthetic_corpus(&SynthSpec::new(
            num_docs,
            (min_sentences, max_sentences),
            rule,
            seed,
        ))?;
        let text = CString::new(to_jsonl(&docs))
            .map_err(|_| Failure::Arg("corpus text contains NUL".into()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dmon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dmon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dmon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
