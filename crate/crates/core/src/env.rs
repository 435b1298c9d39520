//! Single-bin packing as a deterministic single-player MDP.
//!
//! Items are axis-aligned boxes with integer edges. A state is the ordered list
//! of placements made so far; an action places one unplaced item, in one of
//! its orientations, at a candidate corner point. The episode ends when every
//! item has been placed, and only then is a reward paid: the ratio of the ideal
//! cost (a square or cube holding the same area or volume) to the cost of the
//! tight enclosing box.
//!
//! 2D problems reuse the 3D machinery with a third extent of 1. In 2D gravity
//! acts along `y` (axis 1), in 3D along `z` (axis 2).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Integer coordinate triple. Unused trailing axes are 0 (positions) or 1 (sizes).
pub type Vec3 = [i64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid orientation code {code} for a {dim} problem")]
    InvalidOrientation { code: u8, dim: Dim },
    #[error("item {id} has a non-positive dimension {dims:?}")]
    BadDimensions { id: usize, dims: Vec3 },
    #[error("2D item {id} must have a unit third extent, got {dims:?}")]
    NotPlanar { id: usize, dims: Vec3 },
    #[error("problem has no items")]
    EmptyProblem,
    #[error("unknown item id {0}")]
    UnknownItem(usize),
    #[error("item {0} is already placed")]
    AlreadyPlaced(usize),
    #[error("action size {got:?} does not match item {id} in orientation {orient}")]
    SizeMismatch { id: usize, orient: u8, got: Vec3 },
    #[error("position {pos:?} for item {id} is not a candidate position")]
    NotCandidate { id: usize, pos: Vec3 },
    #[error("overlap: item {id} intersects placed item {other}")]
    Overlap { id: usize, other: usize },
    #[error("support: item {id} at {pos:?} has no supporting face under its center")]
    Unsupported { id: usize, pos: Vec3 },
    #[error("state is terminal")]
    Terminal,
    #[error("state is not terminal ({remaining} items unplaced)")]
    NotTerminal { remaining: usize },
    #[error("no items placed")]
    NothingPlaced,
}

pub type Result<T, E = EnvError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn from_number(n: u8) -> Option<Dim> {
        match n {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of active axes.
    pub fn axes(self) -> usize {
        self.number() as usize
    }

    pub fn gravity_axis(self) -> usize {
        self.axes() - 1
    }

    pub fn orientation_count(self) -> u8 {
        match self {
            Dim::Two => 2,
            Dim::Three => 6,
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D", self.number())
    }
}

/// Axis permutation per 3D orientation code: 0:(l,w,h) 1:(l,h,w) 2:(w,l,h)
/// 3:(w,h,l) 4:(h,l,w) 5:(h,w,l).
const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Rotation code. In 2D only 0 (identity) and 1 (swap) exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Orientation(u8);

impl Orientation {
    pub const IDENTITY: Orientation = Orientation(0);

    pub fn new(code: u8, dim: Dim) -> Result<Self> {
        if code < dim.orientation_count() {
            Ok(Orientation(code))
        } else {
            Err(EnvError::InvalidOrientation { code, dim })
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn all(dim: Dim) -> impl Iterator<Item = Orientation> {
        (0..dim.orientation_count()).map(Orientation)
    }

    fn permutation(self, dim: Dim) -> [usize; 3] {
        match (dim, self.0) {
            (Dim::Two, 0) => [0, 1, 2],
            (Dim::Two, _) => [1, 0, 2],
            (Dim::Three, c) => PERMUTATIONS[c as usize],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Item {
    pub id: usize,
    pub dims: Vec3,
}

impl Item {
    pub fn volume(&self) -> i64 {
        self.dims.iter().product()
    }
}

/// Dimensions of `dims` after applying orientation `o`.
pub fn oriented_dims(dims: Vec3, o: Orientation, dim: Dim) -> Result<Vec3> {
    if o.0 >= dim.orientation_count() {
        return Err(EnvError::InvalidOrientation { code: o.0, dim });
    }
    let p = o.permutation(dim);
    Ok([dims[p[0]], dims[p[1]], dims[p[2]]])
}

/// Axis-aligned box given by its minimum corner and extents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Aabb {
    pub min: Vec3,
    pub size: Vec3,
}

impl Aabb {
    pub fn max(&self) -> Vec3 {
        [
            self.min[0] + self.size[0],
            self.min[1] + self.size[1],
            self.min[2] + self.size[2],
        ]
    }
}

/// Interior intersection on every axis. Shared faces and edges do not count.
#[inline]
pub fn overlaps(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|k| a.min[k] < b.min[k] + b.size[k] && b.min[k] < a.min[k] + a.size[k])
}

/// One placed item. Actions carry the same fields; `size` is derived from the
/// item and orientation and is checked when the action is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Placement {
    pub item_id: usize,
    pub pos: Vec3,
    pub orient: Orientation,
    pub size: Vec3,
}

pub type Action = Placement;

impl Placement {
    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.pos,
            size: self.size,
        }
    }

    pub fn top(&self, gravity: usize) -> i64 {
        self.pos[gravity] + self.size[gravity]
    }
}

/// The items to pack. Deliberately carries no knowledge of any reference layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    dim: Dim,
    items: Vec<Item>,
    total_volume: i64,
}

impl Problem {
    /// Builds a problem from item sizes; ids are assigned by position.
    pub fn new(dim: Dim, sizes: &[Vec3]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(EnvError::EmptyProblem);
        }
        let mut items = Vec::with_capacity(sizes.len());
        for (id, &dims) in sizes.iter().enumerate() {
            if dims.iter().any(|&d| d < 1) {
                return Err(EnvError::BadDimensions { id, dims });
            }
            if dim == Dim::Two && dims[2] != 1 {
                return Err(EnvError::NotPlanar { id, dims });
            }
            items.push(Item { id, dims });
        }
        let total_volume = items.iter().map(Item::volume).sum();
        Ok(Problem {
            dim,
            items,
            total_volume,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: usize) -> Result<&Item> {
        self.items.get(id).ok_or(EnvError::UnknownItem(id))
    }

    /// Total area (2D) or volume (3D).
    pub fn total_volume(&self) -> i64 {
        self.total_volume
    }

    /// Cost of the square/cube holding exactly the total area/volume:
    /// `2·√A` in 2D, `3·V^(2/3)` in 3D.
    pub fn ideal_cost(&self) -> f64 {
        let v = self.total_volume as f64;
        match self.dim {
            Dim::Two => 2.0 * v.sqrt(),
            Dim::Three => 3.0 * v.cbrt().powi(2),
        }
    }

    /// Edge of the ideal square/cube.
    pub fn ideal_edge(&self) -> f64 {
        let v = self.total_volume as f64;
        match self.dim {
            Dim::Two => v.sqrt(),
            Dim::Three => v.cbrt(),
        }
    }

    /// Exact test of `cost == ideal_cost()` in integer arithmetic.
    pub fn cost_is_ideal(&self, cost: i64) -> bool {
        let c = cost as i128;
        let v = self.total_volume as i128;
        match self.dim {
            Dim::Two => c * c == 4 * v,
            Dim::Three => c * c * c == 27 * v * v,
        }
    }

    /// Builds the placement for `item_id` in orientation `orient` at `pos`
    /// without checking legality.
    pub fn placement(&self, item_id: usize, orient: Orientation, pos: Vec3) -> Result<Placement> {
        let item = self.item(item_id)?;
        let size = oriented_dims(item.dims, orient, self.dim)?;
        Ok(Placement {
            item_id,
            pos,
            orient,
            size,
        })
    }
}

/// Cost of an enclosing box with the given extents.
pub fn cost_of_extents(dim: Dim, ext: Vec3) -> i64 {
    match dim {
        Dim::Two => ext[0] + ext[1],
        Dim::Three => ext[0] * ext[1] + ext[1] * ext[2] + ext[0] * ext[2],
    }
}

/// Immutable MDP state. Cloning is cheap relative to search work and states
/// are `Send + Sync`.
#[derive(Clone, Debug, PartialEq)]
pub struct PackState {
    problem: Arc<Problem>,
    placed: Vec<Placement>,
    /// Sorted ascending.
    unplaced: Vec<usize>,
    extent_min: Vec3,
    extent_max: Vec3,
}

impl PackState {
    pub fn new(problem: Arc<Problem>) -> Self {
        let unplaced = (0..problem.len()).collect();
        PackState {
            problem,
            placed: Vec::new(),
            unplaced,
            extent_min: [0; 3],
            extent_max: [0; 3],
        }
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn dim(&self) -> Dim {
        self.problem.dim
    }

    pub fn placed(&self) -> &[Placement] {
        &self.placed
    }

    pub fn unplaced(&self) -> &[usize] {
        &self.unplaced
    }

    pub fn step(&self) -> usize {
        self.placed.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.unplaced.is_empty()
    }

    /// Extents of the tight enclosing box, `[0, 0, 0]` when empty. In 2D the
    /// third extent is 1 once anything is placed.
    pub fn extents(&self) -> Vec3 {
        [
            self.extent_max[0] - self.extent_min[0],
            self.extent_max[1] - self.extent_min[1],
            self.extent_max[2] - self.extent_min[2],
        ]
    }

    /// Per-axis candidate coordinates: `{0}` plus the far face of every placed
    /// box, sorted and deduplicated. Inactive axes only contain 0.
    pub fn axis_candidates(&self) -> [Vec<i64>; 3] {
        let axes = self.dim().axes();
        let mut out: [Vec<i64>; 3] = Default::default();
        for (k, coords) in out.iter_mut().enumerate() {
            coords.push(0);
            if k < axes {
                coords.extend(self.placed.iter().map(|p| p.pos[k] + p.size[k]));
            }
            coords.sort_unstable();
            coords.dedup();
        }
        out
    }

    /// Event-point set: Cartesian product of the per-axis candidates, in
    /// lexicographic order.
    pub fn candidate_positions(&self) -> Vec<Vec3> {
        let [xs, ys, zs] = self.axis_candidates();
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }

    fn collides(&self, b: &Aabb) -> Option<usize> {
        self.placed
            .iter()
            .find(|p| overlaps(&p.aabb(), b))
            .map(|p| p.item_id)
    }

    /// Floor contact, or the footprint center lies in the closed top face of a
    /// single placed item whose top is exactly at the base height.
    pub fn is_supported(&self, a: &Action) -> bool {
        let g = self.dim().gravity_axis();
        let base = a.pos[g];
        if base == 0 {
            return true;
        }
        // doubled coordinates keep the center integral
        let center: [i64; 2] = [2 * a.pos[0] + a.size[0], 2 * a.pos[1] + a.size[1]];
        self.placed.iter().any(|p| {
            p.top(g) == base
                && (0..g).all(|k| 2 * p.pos[k] <= center[k] && center[k] <= 2 * (p.pos[k] + p.size[k]))
        })
    }

    /// All legal actions, ordered by item id, orientation code, then position.
    /// Orientations that reproduce an earlier orientation's extents are dropped.
    pub fn legal_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        if self.is_terminal() {
            return out;
        }
        let dim = self.dim();
        let g = dim.gravity_axis();
        let [xs, ys, zs] = self.axis_candidates();
        let tops: Vec<i64> = self.placed.iter().map(|p| p.top(g)).collect();
        let mut sizes: Vec<Vec3> = Vec::with_capacity(6);
        for &id in &self.unplaced {
            let item = &self.problem.items[id];
            sizes.clear();
            for o in Orientation::all(dim) {
                let size = oriented_dims(item.dims, o, dim).expect("valid orientation");
                if sizes.contains(&size) {
                    continue;
                }
                sizes.push(size);
                for &x in &xs {
                    for &y in &ys {
                        for &z in &zs {
                            let pos = [x, y, z];
                            if pos[g] != 0 && !tops.contains(&pos[g]) {
                                continue;
                            }
                            let a = Placement {
                                item_id: id,
                                pos,
                                orient: o,
                                size,
                            };
                            if self.is_supported(&a) && self.collides(&a.aabb()).is_none() {
                                out.push(a);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Checks every constraint on `a` and names the first one violated.
    pub fn check_action(&self, a: &Action) -> Result<()> {
        if self.is_terminal() {
            return Err(EnvError::Terminal);
        }
        let id = a.item_id;
        let expected = self.problem.placement(id, a.orient, a.pos)?;
        if self.unplaced.binary_search(&id).is_err() {
            return Err(EnvError::AlreadyPlaced(id));
        }
        if expected.size != a.size {
            return Err(EnvError::SizeMismatch {
                id,
                orient: a.orient.code(),
                got: a.size,
            });
        }
        let cands = self.axis_candidates();
        if (0..3).any(|k| cands[k].binary_search(&a.pos[k]).is_err()) {
            return Err(EnvError::NotCandidate { id, pos: a.pos });
        }
        if let Some(other) = self.collides(&a.aabb()) {
            return Err(EnvError::Overlap { id, other });
        }
        if !self.is_supported(a) {
            return Err(EnvError::Unsupported { id, pos: a.pos });
        }
        Ok(())
    }

    /// Returns the successor state; `self` is left untouched.
    pub fn apply_action(&self, a: &Action) -> Result<PackState> {
        self.check_action(a)?;
        Ok(self.apply_unchecked(a))
    }

    /// Successor state for an action taken from [`PackState::legal_actions`].
    pub fn apply_unchecked(&self, a: &Action) -> PackState {
        let mut next = self.clone();
        let hi = a.aabb().max();
        if next.placed.is_empty() {
            next.extent_min = a.pos;
            next.extent_max = hi;
        } else {
            for k in 0..3 {
                next.extent_min[k] = next.extent_min[k].min(a.pos[k]);
                next.extent_max[k] = next.extent_max[k].max(hi[k]);
            }
        }
        next.placed.push(*a);
        next.unplaced.retain(|&i| i != a.item_id);
        next
    }

    /// Integer cost of the tight enclosing box.
    pub fn bin_cost_int(&self) -> Result<i64> {
        if self.placed.is_empty() {
            return Err(EnvError::NothingPlaced);
        }
        Ok(cost_of_extents(self.dim(), self.extents()))
    }

    pub fn bin_cost(&self) -> Result<f64> {
        self.bin_cost_int().map(|c| c as f64)
    }

    /// Cost the enclosing box would have after placing `a`.
    pub fn cost_after(&self, a: &Action) -> i64 {
        let hi = a.aabb().max();
        let mut ext = [0; 3];
        for (k, e) in ext.iter_mut().enumerate() {
            if self.placed.is_empty() {
                *e = a.size[k];
            } else {
                *e = self.extent_max[k].max(hi[k]) - self.extent_min[k].min(a.pos[k]);
            }
        }
        cost_of_extents(self.dim(), ext)
    }

    /// True when the enclosing box cost equals the ideal cost exactly.
    pub fn is_ideal(&self) -> bool {
        self.bin_cost_int()
            .map(|c| self.problem.cost_is_ideal(c))
            .unwrap_or(false)
    }

    /// Terminal reward `C*/C` in `(0, 1]`, exactly 1.0 for an ideal packing.
    pub fn terminal_reward(&self) -> Result<f64> {
        if !self.is_terminal() {
            return Err(EnvError::NotTerminal {
                remaining: self.unplaced.len(),
            });
        }
        let cost = self.bin_cost_int()?;
        if self.problem.cost_is_ideal(cost) {
            return Ok(1.0);
        }
        Ok((self.problem.ideal_cost() / cost as f64).min(1.0))
    }

    /// Replays `placements` from the empty state, validating each step.
    pub fn replay(problem: Arc<Problem>, placements: &[Placement]) -> Result<PackState> {
        placements
            .iter()
            .try_fold(PackState::new(problem), |s, p| s.apply_action(p))
    }
}

pub fn ideal_cost(problem: &Problem) -> f64 {
    problem.ideal_cost()
}
