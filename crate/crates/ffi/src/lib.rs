//! C interface to `bclearn`.
//!
//! Every function returns a [`BcStatus`]; results come back through out
//! pointers. Datasets and models are opaque handles owned by the caller and
//! released with the matching `_free` function. After a non-`Ok` status,
//! `bc_last_error_message` describes the failure on the calling thread.
//!
//! Missing entries in cell buffers are encoded as `-1`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bclearn::error::Error;
use bclearn::{
    builtin_spec, delete_entries, k2_bc, load_csv, log_marginal, sample, tally, Dataset,
    DeletionPlan, Model, OrderConstraint, ParentContext, PhiPolicy, PriorPolicy, Variable,
};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Invariant = 5,
    Panic = 6,
}

/// How the completion distribution is chosen for each family.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcPhi {
    Mar = 0,
    Uniform = 1,
}

/// Opaque dataset handle.
pub struct BcDataset(Dataset);

/// Opaque network handle.
pub struct BcModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BcStatus {
    match e {
        Error::Io { .. } => BcStatus::Io,
        Error::Csv(_) | Error::Json(_) => BcStatus::Parse,
        Error::Invariant(_) => BcStatus::Invariant,
        _ => BcStatus::InvalidArgument,
    }
}

struct Failure(BcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(BcStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn dataset<'a>(d: *const BcDataset) -> Result<&'a Dataset, Failure> {
    d.as_ref().map(|d| &d.0).ok_or_else(|| null("dataset"))
}

unsafe fn model<'a>(m: *const BcModel) -> Result<&'a Model, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn prior(alpha: f64, beta: f64) -> Result<PriorPolicy, Failure> {
    let p = PriorPolicy { alpha, beta };
    p.validate()?;
    Ok(p)
}

fn phi_policy(phi: BcPhi) -> PhiPolicy {
    match phi {
        BcPhi::Mar => PhiPolicy::Mar,
        BcPhi::Uniform => PhiPolicy::Uniform,
    }
}

fn indices(raw: &[u32], n: usize, what: &str) -> Result<Vec<usize>, Failure> {
    raw.iter()
        .map(|&i| {
            let i = i as usize;
            if i < n {
                Ok(i)
            } else {
                Err(invalid(format!("{what}: variable index {i} out of range")))
            }
        })
        .collect()
}

/// Message for the last failure on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a CSV file. `missing_token` may be null for the default `?`.
///
/// # Safety
/// `path` and a non-null `missing_token` must be NUL-terminated strings;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_load_csv(
    path: *const c_char,
    missing_token: *const c_char,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let token = if missing_token.is_null() {
            "?"
        } else {
            str_arg(missing_token, "missing_token")?
        };
        let d = load_csv(path, token, None)?;
        put(out, Box::into_raw(Box::new(BcDataset(d))))
    })
}

/// Builds a dataset from a row-major cell buffer of `num_cases * num_variables`
/// state indices, `-1` marking a missing entry. Variables are named `X1..Xn`
/// and their states `1..c`.
///
/// # Safety
/// `cardinalities` must hold `num_variables` entries and `cells` the full
/// buffer; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_from_cells(
    num_variables: usize,
    cardinalities: *const u32,
    num_cases: usize,
    cells: *const i32,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guard(|| {
        let cards = slice_arg(cardinalities, num_variables, "cardinalities")?;
        let total = num_cases
            .checked_mul(num_variables)
            .ok_or_else(|| invalid("cell buffer size overflows"))?;
        let raw = slice_arg(cells, total, "cells")?;
        let variables = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Variable::numbered(format!("X{}", i + 1), c as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let cells = raw
            .iter()
            .map(|&v| match v {
                -1 => Ok(None),
                v if (0..=u16::MAX as i32 - 1).contains(&v) => Ok(Some(v as u16)),
                v => Err(invalid(format!(
                    "cell value {v} is neither -1 nor a state index"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let d = Dataset::from_cells(variables, cells)?;
        put(out, Box::into_raw(Box::new(BcDataset(d))))
    })
}

/// Samples `n` complete cases from a built-in network (`M1`..`M4`).
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_simulate(
    spec: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guard(|| {
        let spec = builtin_spec(str_arg(spec, "spec")?)?
            .with_n(n)
            .with_seed(seed);
        let d = sample(&spec)?;
        put(out, Box::into_raw(Box::new(BcDataset(d))))
    })
}

/// Returns a copy of `d` in which `fraction` of all entries are missing.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_delete_entries(
    d: *const BcDataset,
    fraction: f64,
    seed: u64,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guard(|| {
        let d = dataset(d)?;
        let thinned = delete_entries(d, &DeletionPlan::new(fraction, seed)?)?;
        put(out, Box::into_raw(Box::new(BcDataset(thinned))))
    })
}

/// Writes the number of cases, variables and missing entries. Any output
/// pointer may be null.
///
/// # Safety
/// `d` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_shape(
    d: *const BcDataset,
    num_cases: *mut usize,
    num_variables: *mut usize,
    num_missing: *mut usize,
) -> BcStatus {
    guard(|| {
        let d = dataset(d)?;
        for (p, v) in [
            (num_cases, d.num_cases()),
            (num_variables, d.num_variables()),
            (num_missing, d.num_missing()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_free(d: *mut BcDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Tallies the family of `child` given `parents`.
///
/// `obs` and `comp` receive `q * c` counts laid out by parent configuration
/// then child state, where `q` is the product of parent cardinalities and
/// `c` the child cardinality. `parent_obs` and `parent_comp` receive `q`
/// counts each. Pass `len = 0` and null buffers to learn `q * c` through
/// `cells_out` first; any buffer may be null to skip it.
///
/// # Safety
/// `parents` must hold `num_parents` entries; non-null buffers must hold
/// the sizes above.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bc_family_counts(
    d: *const BcDataset,
    child: u32,
    parents: *const u32,
    num_parents: usize,
    obs: *mut u64,
    comp: *mut u64,
    parent_obs: *mut u64,
    parent_comp: *mut u64,
    len: usize,
    cells_out: *mut usize,
) -> BcStatus {
    guard(|| {
        let d = dataset(d)?;
        let n = d.num_variables();
        let child = indices(&[child], n, "child")?[0];
        let parents = indices(slice_arg(parents, num_parents, "parents")?, n, "parents")?;
        let ctx = ParentContext::new(d, child, &parents)?;
        let (q, c) = (ctx.num_configs(), ctx.child_cardinality());
        if !cells_out.is_null() {
            cells_out.write(q * c);
        }
        let wants =
            !(obs.is_null() && comp.is_null() && parent_obs.is_null() && parent_comp.is_null());
        if !wants {
            return Ok(());
        }
        if len < q * c {
            return Err(invalid(format!(
                "buffer holds {len} cells, family needs {}",
                q * c
            )));
        }
        let t = tally(d, &ctx);
        for j in 0..q {
            for k in 0..c {
                if !obs.is_null() {
                    obs.add(j * c + k).write(t.obs(j, k));
                }
                if !comp.is_null() {
                    comp.add(j * c + k).write(t.comp(j, k));
                }
            }
            if !parent_obs.is_null() {
                parent_obs.add(j).write(t.parent_obs(j));
            }
            if !parent_comp.is_null() {
                parent_comp.add(j).write(t.parent_comp(j));
            }
        }
        Ok(())
    })
}

/// Greedy search under a variable order. `order` may be null for the
/// column order; `max_parents < 0` means unbounded.
///
/// # Safety
/// `d` must be a live handle, a non-null `order` must hold `order_len`
/// entries, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_learn(
    d: *const BcDataset,
    order: *const u32,
    order_len: usize,
    max_parents: i32,
    alpha: f64,
    beta: f64,
    phi: BcPhi,
    out: *mut *mut BcModel,
) -> BcStatus {
    guard(|| {
        let d = dataset(d)?;
        let n = d.num_variables();
        let max_parents = usize::try_from(max_parents).ok();
        let order = if order.is_null() {
            (0..n).collect()
        } else {
            indices(slice_arg(order, order_len, "order")?, n, "order")?
        };
        let constraint = OrderConstraint::new(order, n, max_parents)?;
        let m = k2_bc(d, &constraint, prior(alpha, beta)?, &phi_policy(phi))?;
        put(out, Box::into_raw(Box::new(BcModel(m))))
    })
}

/// Builds a network over the variables of `d` from `num_arcs` arcs given
/// as parallel `from`/`to` index arrays.
///
/// # Safety
/// `from` and `to` must each hold `num_arcs` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_model_from_arcs(
    d: *const BcDataset,
    from: *const u32,
    to: *const u32,
    num_arcs: usize,
    out: *mut *mut BcModel,
) -> BcStatus {
    guard(|| {
        let d = dataset(d)?;
        let n = d.num_variables();
        let from = indices(slice_arg(from, num_arcs, "from")?, n, "from")?;
        let to = indices(slice_arg(to, num_arcs, "to")?, n, "to")?;
        let arcs: Vec<_> = from.into_iter().zip(to).collect();
        let m = Model::from_arcs(d.variables().to_vec(), &arcs)?;
        put(out, Box::into_raw(Box::new(BcModel(m))))
    })
}

/// Log marginal likelihood of `m` given `d`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_score(
    m: *const BcModel,
    d: *const BcDataset,
    alpha: f64,
    beta: f64,
    phi: BcPhi,
    out: *mut f64,
) -> BcStatus {
    guard(|| {
        let (m, d) = (model(m)?, dataset(d)?);
        if m.variables() != d.variables() {
            return Err(invalid("model and dataset variables differ"));
        }
        let s = log_marginal(m, d, prior(alpha, beta)?, &phi_policy(phi))?;
        put(out, s.total)
    })
}

/// Number of arcs in `m`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_model_num_arcs(m: *const BcModel, out: *mut usize) -> BcStatus {
    guard(|| put(out, model(m)?.num_arcs()))
}

/// Copies arcs, sorted by child then parent, into `from`/`to`, which must
/// hold at least `capacity` entries.
///
/// # Safety
/// `m` must be a live handle; buffers must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn bc_model_arcs(
    m: *const BcModel,
    from: *mut u32,
    to: *mut u32,
    capacity: usize,
) -> BcStatus {
    guard(|| {
        let arcs = model(m)?.arcs();
        if capacity < arcs.len() {
            return Err(invalid(format!(
                "capacity {capacity} < {} arcs",
                arcs.len()
            )));
        }
        if !arcs.is_empty() && (from.is_null() || to.is_null()) {
            return Err(null("arc buffer"));
        }
        for (i, (a, b)) in arcs.into_iter().enumerate() {
            from.add(i).write(a as u32);
            to.add(i).write(b as u32);
        }
        Ok(())
    })
}

/// Serializes `m` as JSON. Release the string with `bc_string_free`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_model_to_json(m: *const BcModel, out: *mut *mut c_char) -> BcStatus {
    guard(|| {
        let text = serde_json::to_string_pretty(&model(m)?.to_json()).map_err(Error::from)?;
        put(out, into_c_string(text))
    })
}

/// Renders `m` in DOT. Release the string with `bc_string_free`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_model_to_dot(m: *const BcModel, out: *mut *mut c_char) -> BcStatus {
    guard(|| put(out, into_c_string(model(m)?.to_dot())))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .unwrap_or_default()
        .into_raw()
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_model_free(m: *mut BcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
