//! The flattening transform `x ↦ H D_ξ x`: a public random sign flip followed
//! by the orthonormal Walsh–Hadamard transform.
//!
//! After flattening, every coordinate of a vector with norm `‖x‖₂` is
//! subgaussian with variance proxy `‖x‖₂²/d` over the choice of signs, which is
//! what keeps modular wraparound rare.

use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Domain tag for the sign-vector PRF.
pub const SIGN_TAG: &[u8] = b"ddgauss/signs";

/// An input dimension together with the power of two it is padded to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PaddedDim {
    original: usize,
    padded: usize,
}

impl PaddedDim {
    pub fn new(original: usize) -> Result<Self> {
        if original == 0 {
            return Err(invalid("d", "must be positive"));
        }
        let padded = original
            .checked_next_power_of_two()
            .ok_or_else(|| invalid("d", "too large to pad"))?;
        Ok(Self { original, padded })
    }

    pub fn original(&self) -> usize {
        self.original
    }

    pub fn padded(&self) -> usize {
        self.padded
    }

    /// Zero-pads `x` to the padded length.
    pub fn pad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.original {
            return Err(Error::DimensionMismatch {
                expected: self.original,
                actual: x.len(),
            });
        }
        let mut out = x.to_vec();
        out.resize(self.padded, 0.0);
        Ok(out)
    }

    /// Drops the padding coordinates.
    pub fn truncate(&self, mut y: Vec<f64>) -> Result<Vec<f64>> {
        if y.len() != self.padded {
            return Err(Error::DimensionMismatch {
                expected: self.padded,
                actual: y.len(),
            });
        }
        y.truncate(self.original);
        Ok(y)
    }
}

/// The shared public sign vector `ξ ∈ {−1, +1}^d`.
///
/// Sign `i` is bit `i mod 256` (least significant bit of each byte first) of
/// the block `SHA-256(SIGN_TAG || seed_le || (i / 256)_le)`; a set bit means
/// `−1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector {
    seed: u64,
    signs: Vec<i8>,
}

impl SignVector {
    pub fn from_seed(seed: u64, padded_len: usize) -> Result<Self> {
        if !padded_len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(padded_len));
        }
        let mut signs = Vec::with_capacity(padded_len);
        let mut counter = 0u64;
        while signs.len() < padded_len {
            let mut h = Sha256::new();
            h.update(SIGN_TAG);
            h.update(seed.to_le_bytes());
            h.update(counter.to_le_bytes());
            let block = h.finalize();
            'block: for byte in block.iter() {
                for bit in 0..8 {
                    if signs.len() == padded_len {
                        break 'block;
                    }
                    signs.push(if (byte >> bit) & 1 == 1 { -1 } else { 1 });
                }
            }
            counter += 1;
        }
        Ok(Self { seed, signs })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    fn apply(&self, x: &mut [f64]) {
        for (v, &s) in x.iter_mut().zip(&self.signs) {
            if s < 0 {
                *v = -*v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place orthonormal Walsh–Hadamard transform (Sylvester ordering).
///
/// The matrix is symmetric and orthogonal, hence its own inverse, so both
/// directions compute the same map.
///
/// ```
/// use ddgauss::flatten::{wht, Direction};
/// let mut x = [1.0, 1.0, 1.0, 1.0];
/// wht(&mut x, Direction::Forward).unwrap();
/// assert_eq!(x, [2.0, 0.0, 0.0, 0.0]);
/// ```
pub fn wht(x: &mut [f64], direction: Direction) -> Result<()> {
    let _ = direction;
    let d = x.len();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let mut h = 1;
    while h < d {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    let norm = 1.0 / (d as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= norm);
    Ok(())
}

fn check_len(x: &[f64], xi: &SignVector) -> Result<()> {
    if x.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// `H D_ξ x`.
pub fn flatten(x: &[f64], xi: &SignVector) -> Result<Vec<f64>> {
    check_len(x, xi)?;
    let mut y = x.to_vec();
    xi.apply(&mut y);
    wht(&mut y, Direction::Forward)?;
    Ok(y)
}

/// `D_ξ Hᵀ y`, the inverse of [`flatten`].
pub fn unflatten(y: &[f64], xi: &SignVector) -> Result<Vec<f64>> {
    check_len(y, xi)?;
    let mut x = y.to_vec();
    wht(&mut x, Direction::Inverse)?;
    xi.apply(&mut x);
    Ok(x)
}
