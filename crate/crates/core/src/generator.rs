//! Instance generation by recursive random splitting of a square or cube.
//!
//! Starting from the origin bin, the generator repeatedly pops a box, picks
//! an axis and an integer cut position, and replaces the box by its two
//! halves, until the requested number of items exists. The halves tile the
//! origin bin, so the split layout is a gap-free optimum and is kept as
//! metadata next to the items.
//!
//! Sampling weights (swap them here if another reading is wanted):
//! - box: proportional to its volume, among boxes with some edge ≥ 2;
//! - axis: proportional to the edge length, among active axes of length ≥ 2;
//! - cut `p` on an edge of length `e`, `p ∈ 1..e`: proportional to `min(p, e − p) + 1`.

use std::sync::Arc;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Dim, EnvError, Orientation, PackState, Placement, Problem, Vec3};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("cannot split a bin of volume {volume} into {n} items")]
    TooManyItems { n: usize, volume: i64 },
    #[error("item count must be at least 1")]
    NoItems,
    #[error("bin dimensions {0:?} must be positive (and 1 on the third axis in 2D)")]
    BadBin(Vec3),
    #[error("instance {seed}: no support-respecting replay order for the reference layout")]
    NoOrdering { seed: u64 },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// A generated problem plus its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub dim: Dim,
    pub seed: u64,
    pub origin_bin: Vec3,
    pub items: Vec<Vec3>,
    /// Reference layout (one placement per item, orientation 0). Never handed
    /// to learning agents; see [`Instance::problem`].
    pub optimal_layout: Vec<Placement>,
}

impl Instance {
    /// The agent-facing view: item sizes only.
    pub fn problem(&self) -> Result<Arc<Problem>, EnvError> {
        Problem::new(self.dim, &self.items).map(Arc::new)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn origin_volume(&self) -> i64 {
        self.origin_bin.iter().product()
    }

    /// Cost of the origin bin, the best achievable cost for this instance.
    pub fn origin_cost(&self) -> i64 {
        crate::env::cost_of_extents(self.dim, self.origin_bin)
    }
}

fn validate_bin(dim: Dim, bin: Vec3) -> Result<(), GenError> {
    if bin.iter().any(|&d| d < 1) || (dim == Dim::Two && bin[2] != 1) {
        return Err(GenError::BadBin(bin));
    }
    Ok(())
}

/// Splits `bin` into `n` items. Deterministic in `seed`.
pub fn generate(dim: Dim, n: usize, bin: Vec3, seed: u64) -> Result<Instance, GenError> {
    validate_bin(dim, bin)?;
    if n == 0 {
        return Err(GenError::NoItems);
    }
    let volume: i64 = bin.iter().product();
    if n as i64 > volume {
        return Err(GenError::TooManyItems { n, volume });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = dim.axes();
    // (corner, size)
    let mut boxes: Vec<(Vec3, Vec3)> = vec![([0; 3], bin)];
    while boxes.len() < n {
        let weights: Vec<i64> = boxes
            .iter()
            .map(|(_, s)| {
                if s[..axes].iter().any(|&e| e >= 2) {
                    s.iter().product()
                } else {
                    0
                }
            })
            .collect();
        // n <= volume guarantees some box still has an edge >= 2
        let pick = WeightedIndex::new(&weights).expect("splittable box exists").sample(&mut rng);
        let (corner, size) = boxes.swap_remove(pick);

        let axis_weights: Vec<i64> = (0..axes)
            .map(|k| if size[k] >= 2 { size[k] } else { 0 })
            .collect();
        let axis = WeightedIndex::new(&axis_weights).expect("edge >= 2").sample(&mut rng);

        let e = size[axis];
        let cut_weights: Vec<i64> = (1..e).map(|p| p.min(e - p) + 1).collect();
        let cut = 1 + WeightedIndex::new(&cut_weights).expect("interior cut").sample(&mut rng) as i64;

        let mut low = size;
        low[axis] = cut;
        let mut high_corner = corner;
        high_corner[axis] += cut;
        let mut high = size;
        high[axis] = e - cut;
        boxes.push((corner, low));
        boxes.push((high_corner, high));
    }
    let items = boxes.iter().map(|&(_, s)| s).collect();
    let optimal_layout = boxes
        .iter()
        .enumerate()
        .map(|(id, &(pos, size))| Placement {
            item_id: id,
            pos,
            orient: Orientation::IDENTITY,
            size,
        })
        .collect();
    Ok(Instance {
        dim,
        seed,
        origin_bin: bin,
        items,
        optimal_layout,
    })
}

/// Square (2D) or cube (3D) origin bin with the given edge.
pub fn cube_bin(dim: Dim, edge: i64) -> Vec3 {
    match dim {
        Dim::Two => [edge, edge, 1],
        Dim::Three => [edge, edge, edge],
    }
}

/// Orders the reference layout into a sequence of legal actions.
///
/// The first action is the layout item sitting at the origin (the only legal
/// first move that stays on the layout). After that the sequence greedily
/// takes, among layout placements that are currently legal, the one whose
/// enclosing-box cost is smallest, breaking ties by base height, then the
/// remaining coordinates, then item id.
pub fn optimal_sequence(inst: &Instance) -> Result<Vec<Placement>, GenError> {
    let problem = inst.problem()?;
    let dim = inst.dim;
    let g = dim.gravity_axis();
    let mut state = PackState::new(problem);
    let mut remaining: Vec<Placement> = inst.optimal_layout.clone();
    let mut seq = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let key = |p: &Placement| {
            let mut order = [p.pos[g], 0, 0];
            let mut k = 1;
            for (axis, &c) in p.pos.iter().enumerate() {
                if axis != g {
                    order[k] = c;
                    k += 1;
                }
            }
            (order, p.item_id)
        };
        let best = remaining
            .iter()
            .enumerate()
            .filter(|(_, p)| state.check_action(p).is_ok())
            .min_by_key(|(_, p)| (state.cost_after(p), key(p)))
            .map(|(i, _)| i);
        let Some(i) = best else {
            return Err(GenError::NoOrdering { seed: inst.seed });
        };
        let p = remaining.swap_remove(i);
        state = state.apply_unchecked(&p);
        seq.push(p);
    }
    Ok(seq)
}
