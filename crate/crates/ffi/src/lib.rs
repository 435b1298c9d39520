//! C interface to `r2pack`.
//!
//! Objects are opaque handles created by `*_generate`/`*_load`/`r2_solve` and
//! released with the matching `*_free`. Every function returns an
//! [`R2Status`]; on failure, [`r2_last_error`] gives a message for the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use r2pack::baselines::{Agent, AgentKind, Solution};
use r2pack::env::Dim;
use r2pack::generator::{cube_bin, generate, Instance};
use r2pack::instance_io::{load_instance, save_instance};
use r2pack::net::Checkpoint;
use r2pack::ranking::{Percentile, RewardBuffer};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum R2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// The object lacks the requested data (e.g. a checkpoint without a reward buffer).
    NotAvailable = 5,
    Failed = 6,
    Panic = 7,
}

/// A generated or loaded problem instance.
pub struct R2Instance(Instance);

/// A network checkpoint, with its reward buffer when it has one.
pub struct R2Network(Checkpoint);

/// An agent's layout for one instance.
pub struct R2Solution(Solution);

/// One placed item.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct R2Placement {
    pub item_id: u64,
    pub x: i64,
    pub y: i64,
    pub z: i64,
    pub orientation: u8,
    pub l: i64,
    pub w: i64,
    pub h: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Fail(R2Status, String);

impl Fail {
    fn new(status: R2Status, msg: impl ToString) -> Self {
        Fail(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> R2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            R2Status::Ok
        }
        Ok(Err(Fail(status, msg))) => {
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
            R2Status::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(R2Status::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail::new(R2Status::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(R2Status::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(R2Status::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn r2_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn r2_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates an instance by splitting a `bin_edge` square (dim 2) or cube
/// (dim 3) into `items` boxes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_generate(
    dim: u8,
    items: usize,
    bin_edge: i64,
    seed: u64,
    out: *mut *mut R2Instance,
) -> R2Status {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let dim = Dim::from_number(dim).ok_or_else(|| Fail::new(R2Status::InvalidArgument, "dim must be 2 or 3"))?;
        let inst =
            generate(dim, items, cube_bin(dim, bin_edge), seed).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(R2Instance(inst)));
        Ok(())
    })
}

/// Loads an instance file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_load(path: *const c_char, out: *mut *mut R2Instance) -> R2Status {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(c_str(path, "path")?);
        let inst = load_instance(&path).map_err(|e| match e {
            r2pack::instance_io::InstanceIoError::Io { .. } => Fail::new(R2Status::Io, e),
            other => Fail::new(R2Status::Parse, other),
        })?;
        *out = Box::into_raw(Box::new(R2Instance(inst)));
        Ok(())
    })
}

/// Writes an instance file.
///
/// # Safety
/// `inst` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_save(inst: *const R2Instance, path: *const c_char) -> R2Status {
    guard(|| {
        let inst = as_ref(inst, "inst")?;
        let path = PathBuf::from(c_str(path, "path")?);
        save_instance(&inst.0, &path).map_err(|e| Fail::new(R2Status::Io, e))
    })
}

/// Number of items in an instance.
///
/// # Safety
/// `inst` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_len(inst: *const R2Instance, out: *mut usize) -> R2Status {
    guard(|| {
        let inst = as_ref(inst, "inst")?;
        *out_ptr(out, "out")? = inst.0.len();
        Ok(())
    })
}

/// Extents of item `index`, written to `dims[0..3]` (third extent is 1 in 2D).
///
/// # Safety
/// `inst` must come from this library; `dims` must point to 3 writable `int64_t`.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_item(inst: *const R2Instance, index: usize, dims: *mut i64) -> R2Status {
    guard(|| {
        let inst = as_ref(inst, "inst")?;
        if dims.is_null() {
            return Err(Fail::new(R2Status::NullPointer, "dims is null"));
        }
        let d = inst
            .0
            .items
            .get(index)
            .ok_or_else(|| Fail::new(R2Status::InvalidArgument, format!("item {index} out of range")))?;
        ptr::copy_nonoverlapping(d.as_ptr(), dims, 3);
        Ok(())
    })
}

/// Releases an instance. Null is ignored.
///
/// # Safety
/// `inst` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn r2_instance_free(inst: *mut R2Instance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Loads a `.r2` checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_network_load(path: *const c_char, out: *mut *mut R2Network) -> R2Status {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(c_str(path, "path")?);
        let ck = Checkpoint::load(&path, None).map_err(|e| match e {
            r2pack::net::NetError::Io(_) => Fail::new(R2Status::Io, e),
            other => Fail::new(R2Status::Parse, other),
        })?;
        *out = Box::into_raw(Box::new(R2Network(ck)));
        Ok(())
    })
}

/// Releases a network. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn r2_network_free(net: *mut R2Network) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Ranking threshold at percentile `alpha` of the checkpoint's reward buffer.
///
/// # Safety
/// `net` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_network_threshold(net: *const R2Network, alpha: f64, out: *mut f64) -> R2Status {
    guard(|| {
        let net = as_ref(net, "net")?;
        let out = out_ptr(out, "out")?;
        let p = Percentile::new(alpha).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        let buf = net
            .0
            .buffer
            .as_ref()
            .ok_or_else(|| Fail::new(R2Status::NotAvailable, "checkpoint has no reward buffer"))?;
        *out = buf.threshold(p).map_err(|e| Fail::new(R2Status::NotAvailable, e))?;
        Ok(())
    })
}

/// Nearest-rank threshold at percentile `alpha` over `len` rewards.
///
/// # Safety
/// `rewards` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_threshold(rewards: *const f64, len: usize, alpha: f64, out: *mut f64) -> R2Status {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if rewards.is_null() {
            return Err(Fail::new(R2Status::NullPointer, "rewards is null"));
        }
        if len == 0 {
            return Err(Fail::new(R2Status::InvalidArgument, "no rewards"));
        }
        let values = std::slice::from_raw_parts(rewards, len);
        let p = Percentile::new(alpha).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        let buf = RewardBuffer::from_entries(len, values).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        *out = buf.threshold(p).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        Ok(())
    })
}

/// Solves `inst` with the named agent (`lego`, `random`, `plain-mcts`,
/// `exhaustive`, `net-only`, `supervised-net`, `r2-mcts`). Network agents
/// need `net`; others accept null. `alpha` selects the ranking threshold for
/// `r2-mcts` from the checkpoint's buffer.
///
/// # Safety
/// Handles must come from this library; `agent` must be NUL-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_solve(
    inst: *const R2Instance,
    agent: *const c_char,
    net: *const R2Network,
    simulations: usize,
    alpha: f64,
    seed: u64,
    out: *mut *mut R2Solution,
) -> R2Status {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inst = as_ref(inst, "inst")?;
        let kind: AgentKind = c_str(agent, "agent")?
            .parse()
            .map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        if simulations == 0 {
            return Err(Fail::new(R2Status::InvalidArgument, "simulations must be at least 1"));
        }
        let ck = net.as_ref().map(|n| &n.0);
        let threshold = match (kind, ck) {
            (AgentKind::R2Mcts, Some(c)) => {
                let p = Percentile::new(alpha).map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
                c.buffer.as_ref().and_then(|b| b.threshold(p).ok())
            }
            _ => None,
        };
        let agent = Agent::build(kind, ck.map(|c| Arc::new(c.net.clone())), threshold, simulations)
            .map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        let problem = inst.0.problem().map_err(|e| Fail::new(R2Status::InvalidArgument, e))?;
        let sol = agent.solve(problem, seed).map_err(|e| Fail::new(R2Status::Failed, e))?;
        *out = Box::into_raw(Box::new(R2Solution(sol)));
        Ok(())
    })
}

/// Terminal reward of a solution, in (0, 1].
///
/// # Safety
/// `sol` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_solution_reward(sol: *const R2Solution, out: *mut f64) -> R2Status {
    guard(|| {
        *out_ptr(out, "out")? = as_ref(sol, "sol")?.0.reward;
        Ok(())
    })
}

/// Enclosing-box cost of a solution.
///
/// # Safety
/// `sol` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_solution_cost(sol: *const R2Solution, out: *mut i64) -> R2Status {
    guard(|| {
        *out_ptr(out, "out")? = as_ref(sol, "sol")?.0.cost;
        Ok(())
    })
}

/// Number of placements (equals the instance's item count).
///
/// # Safety
/// `sol` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_solution_len(sol: *const R2Solution, out: *mut usize) -> R2Status {
    guard(|| {
        *out_ptr(out, "out")? = as_ref(sol, "sol")?.0.layout.len();
        Ok(())
    })
}

/// Placement number `index`, in placement order.
///
/// # Safety
/// `sol` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn r2_solution_placement(sol: *const R2Solution, index: usize, out: *mut R2Placement) -> R2Status {
    guard(|| {
        let sol = as_ref(sol, "sol")?;
        let out = out_ptr(out, "out")?;
        let p = sol
            .0
            .layout
            .get(index)
            .ok_or_else(|| Fail::new(R2Status::InvalidArgument, format!("placement {index} out of range")))?;
        *out = R2Placement {
            item_id: p.item_id as u64,
            x: p.pos[0],
            y: p.pos[1],
            z: p.pos[2],
            orientation: p.orient.code(),
            l: p.size[0],
            w: p.size[1],
            h: p.size[2],
        };
        Ok(())
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `sol` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn r2_solution_free(sol: *mut R2Solution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
