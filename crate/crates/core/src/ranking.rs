//! Ranked rewards: a FIFO of recent terminal rewards, a nearest-rank
//! percentile threshold over it, and the binary reshaping of a reward
//! against that threshold.

use std::collections::VecDeque;
use std::sync::Mutex;

use rand::Rng;
use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("reward {0} outside (0, 1]")]
    RewardOutOfRange(f64),
    #[error("percentile {0} outside (0, 100)")]
    BadPercentile(f64),
    #[error("reward buffer is empty")]
    EmptyBuffer,
    #[error("buffer capacity must be positive")]
    ZeroCapacity,
}

/// Percentile in the open interval (0, 100).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Percentile(f64);

impl Percentile {
    pub fn new(alpha: f64) -> Result<Self, RankError> {
        if alpha > 0.0 && alpha < 100.0 {
            Ok(Percentile(alpha))
        } else {
            Err(RankError::BadPercentile(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// 1-based nearest rank `ceil(α·n/100)` clamped to `[1, n]`.
    pub fn rank_of(self, n: usize) -> usize {
        // α·n is exact for integral α, so the division only rounds away from
        // integers when the true quotient is not one
        let r = (self.0 * n as f64 / 100.0).ceil() as usize;
        r.clamp(1, n.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardBuffer {
    capacity: usize,
    entries: VecDeque<f64>,
}

impl Default for RewardBuffer {
    fn default() -> Self {
        RewardBuffer::new(DEFAULT_CAPACITY).expect("positive capacity")
    }
}

impl RewardBuffer {
    pub fn new(capacity: usize) -> Result<Self, RankError> {
        if capacity == 0 {
            return Err(RankError::ZeroCapacity);
        }
        Ok(RewardBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    /// Rebuilds a buffer from stored entries, oldest first.
    pub fn from_entries(capacity: usize, entries: &[f64]) -> Result<Self, RankError> {
        let mut b = RewardBuffer::new(capacity)?;
        for &r in entries {
            b.push(r)?;
        }
        Ok(b)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }

    pub fn push(&mut self, r: f64) -> Result<(), RankError> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(RankError::RewardOutOfRange(r));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(r);
        Ok(())
    }

    /// Nearest-rank percentile: always an element of the buffer.
    pub fn threshold(&self, alpha: Percentile) -> Result<f64, RankError> {
        if self.entries.is_empty() {
            return Err(RankError::EmptyBuffer);
        }
        let mut sorted: Vec<f64> = self.entries.iter().copied().collect();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(sorted[alpha.rank_of(sorted.len()) - 1])
    }
}

/// Reshaping settings. `optimal_tolerance` widens the `r = 1` test; 0 means
/// exact equality, which is safe because the environment returns exactly 1.0
/// for ideal packings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ranker {
    pub optimal_tolerance: f64,
}

impl Default for Ranker {
    fn default() -> Self {
        Ranker {
            optimal_tolerance: 0.0,
        }
    }
}

impl Ranker {
    pub fn is_optimal(&self, r: f64) -> bool {
        (1.0 - r).abs() <= self.optimal_tolerance
    }

    /// `+1` above the threshold or at the optimum, `−1` below it, a fair coin
    /// on an exact tie.
    pub fn rank<R: Rng + ?Sized>(&self, r: f64, r_alpha: f64, rng: &mut R) -> f64 {
        if r > r_alpha || self.is_optimal(r) {
            1.0
        } else if r < r_alpha {
            -1.0
        } else if rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    }
}

/// [`Ranker::rank`] with exact optimum detection.
pub fn rank<R: Rng + ?Sized>(r: f64, r_alpha: f64, rng: &mut R) -> f64 {
    Ranker::default().rank(r, r_alpha, rng)
}

/// Single owner of the live buffer shared by episode workers. Each
/// `push_and_threshold` is atomic, so the episode's own reward is always in
/// the buffer its threshold is computed from.
#[derive(Debug)]
pub struct BufferOwner {
    inner: Mutex<RewardBuffer>,
    alpha: Percentile,
}

impl BufferOwner {
    pub fn new(buffer: RewardBuffer, alpha: Percentile) -> Self {
        BufferOwner {
            inner: Mutex::new(buffer),
            alpha,
        }
    }

    pub fn alpha(&self) -> Percentile {
        self.alpha
    }

    /// Current threshold, `None` while the buffer is empty.
    pub fn snapshot(&self) -> Option<f64> {
        self.inner.lock().expect("buffer lock").threshold(self.alpha).ok()
    }

    pub fn push_and_threshold(&self, r: f64) -> Result<f64, RankError> {
        let mut b = self.inner.lock().expect("buffer lock");
        b.push(r)?;
        b.threshold(self.alpha)
    }

    pub fn buffer(&self) -> RewardBuffer {
        self.inner.lock().expect("buffer lock").clone()
    }

    pub fn into_buffer(self) -> RewardBuffer {
        self.inner.into_inner().expect("buffer lock")
    }
}
