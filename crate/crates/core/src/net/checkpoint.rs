//! Binary checkpoint container (`.r2`).
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic            b"R2PK"
//! format version   u32   (currently 1)
//! feature width    u32
//! hidden width     u32
//! parameter count  u64
//! adam step        u64
//! iteration        u64   (trainer iteration, u64::MAX when none)
//! buffer capacity  u64
//! buffer length    u64
//! weights          f64 × parameter count   (layer order, see `model`)
//! adam m           f64 × parameter count
//! adam v           f64 × parameter count
//! buffer entries   f64 × buffer length     (oldest first)
//! sha256           32 bytes over everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::{Adam, NetParams, NetShape};
use super::NetError;
use crate::ranking::RewardBuffer;

pub const MAGIC: &[u8; 4] = b"R2PK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 * 5;

/// Everything needed to resume training or to run a trained agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: NetParams,
    pub buffer: Option<RewardBuffer>,
    pub iteration: Option<u64>,
}

impl Checkpoint {
    pub fn net_only(net: NetParams) -> Self {
        Checkpoint {
            net,
            buffer: None,
            iteration: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.net.shape();
        let n = shape.param_count();
        let (cap, entries): (u64, Vec<f64>) = match &self.buffer {
            Some(b) => (b.capacity() as u64, b.entries().collect()),
            None => (0, Vec::new()),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (3 * n + entries.len()) + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(shape.features as u32).to_le_bytes());
        out.extend_from_slice(&(shape.hidden as u32).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.net.adam.step.to_le_bytes());
        out.extend_from_slice(&self.iteration.unwrap_or(u64::MAX).to_le_bytes());
        out.extend_from_slice(&cap.to_le_bytes());
        out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for block in [&self.net.weights, &self.net.adam.m, &self.net.adam.v, &entries] {
            for x in block.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses a checkpoint; `expect_features` rejects networks built for a
    /// different feature width.
    pub fn from_bytes(bytes: &[u8], expect_features: Option<usize>) -> Result<Self, NetError> {
        let bad = |m: &str| NetError::Checkpoint(m.to_string());
        if bytes.len() < HEADER_LEN + 32 {
            return Err(bad("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("not an r2 checkpoint (bad magic)"));
        }
        let mut r = Reader { bytes, at: 4 };
        let version = r.u32();
        if version != FORMAT_VERSION {
            return Err(NetError::Checkpoint(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let features = r.u32() as usize;
        let hidden = r.u32() as usize;
        let n = r.u64();
        let step = r.u64();
        let iteration = r.u64();
        let cap = r.u64();
        let len = r.u64();
        let shape = NetShape::new(features, hidden);
        if n != shape.param_count() as u64 {
            return Err(bad("parameter count does not match the layer sizes"));
        }
        let body = n
            .checked_mul(3)
            .and_then(|x| x.checked_add(len))
            .and_then(|x| x.checked_mul(8))
            .and_then(|x| usize::try_from(x).ok())
            .ok_or_else(|| bad("corrupt sizes"))?;
        let expected = HEADER_LEN
            .checked_add(body)
            .and_then(|x| x.checked_add(32))
            .ok_or_else(|| bad("corrupt sizes"))?;
        if bytes.len() != expected {
            return Err(NetError::Checkpoint(format!(
                "expected {expected} bytes, found {} (truncated or padded)",
                bytes.len()
            )));
        }
        let (payload, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(payload).as_slice() != digest {
            return Err(bad("content hash mismatch"));
        }
        if let Some(f) = expect_features {
            if f != features {
                return Err(NetError::Incompatible {
                    expected: f,
                    found: features,
                });
            }
        }
        let n = n as usize;
        let weights = r.f64s(n);
        let m = r.f64s(n);
        let v = r.f64s(n);
        let entries = r.f64s(len as usize);
        let net = NetParams::from_parts(shape, weights, Adam { m, v, step })?;
        let buffer = if cap == 0 {
            None
        } else {
            Some(
                RewardBuffer::from_entries(cap as usize, &entries)
                    .map_err(|e| NetError::Checkpoint(format!("reward buffer: {e}")))?,
            )
        };
        Ok(Checkpoint {
            net,
            buffer,
            iteration: (iteration != u64::MAX).then_some(iteration),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        fs::write(path, self.to_bytes()).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path, expect_features: Option<usize>) -> Result<Self, NetError> {
        let bytes = fs::read(path).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))?;
        Checkpoint::from_bytes(&bytes, expect_features)
    }
}

pub fn save_checkpoint(net: &NetParams, path: &Path) -> Result<(), NetError> {
    Checkpoint::net_only(net.clone()).save(path)
}

pub fn load_checkpoint(path: &Path, expect_features: Option<usize>) -> Result<NetParams, NetError> {
    Checkpoint::load(path, expect_features).map(|c| c.net)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.at..self.at + N].try_into().expect("length checked");
        self.at += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| f64::from_le_bytes(self.take())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::features::FeatureMatrix;

    fn sample() -> Checkpoint {
        let mut net = NetParams::init(NetShape::new(10, 8), 11);
        net.adam.step = 7;
        net.adam.m[3] = 0.25;
        Checkpoint {
            net,
            buffer: Some(RewardBuffer::from_entries(5, &[0.5, 0.9, 1.0]).unwrap()),
            iteration: Some(4),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes(), Some(10)).unwrap();
        assert_eq!(back, c);
        let f = FeatureMatrix::new(2, 10, (0..20).map(|i| i as f64 * 0.1).collect()).unwrap();
        let a = c.net.forward(&f).unwrap();
        let b = back.net.forward(&f).unwrap();
        assert_eq!(a, b);
        let bare = Checkpoint::net_only(c.net.clone());
        assert_eq!(Checkpoint::from_bytes(&bare.to_bytes(), None).unwrap(), bare);
    }

    #[test]
    fn truncation_and_corruption_are_errors() {
        let bytes = sample().to_bytes();
        for cut in [0, 3, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut], None).is_err());
        }
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 5] ^= 1;
        let err = Checkpoint::from_bytes(&flipped, None).unwrap_err();
        assert!(err.to_string().contains("hash"), "{err}");
    }

    #[test]
    fn version_and_width_mismatch() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        let err = Checkpoint::from_bytes(&bytes, None).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        let ok = sample().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&ok, Some(13)),
            Err(NetError::Incompatible {
                expected: 13,
                found: 10
            })
        ));
    }
}
