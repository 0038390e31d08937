//! Residue arithmetic over `Z_m`, the centered representative map, real-valued
//! modular clipping, and a zero-sum-mask simulation of secure aggregation.

use rand::{Rng, RngCore};

use crate::error::{invalid, Error, Result};

/// Largest supported bit width; residue sums of two entries stay inside `u64`.
pub const MAX_BITS: u32 = 62;

/// The group size `m` (even, at least 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Modulus {
    m: u64,
    bit_width: u32,
}

impl Modulus {
    pub fn new(m: u64) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(invalid("m", format!("must be even and at least 2, got {m}")));
        }
        if m > 1u64 << MAX_BITS {
            return Err(invalid("m", format!("must be at most 2^{MAX_BITS}, got {m}")));
        }
        let bit_width = 64 - (m - 1).leading_zeros();
        Ok(Self { m, bit_width })
    }

    /// `m = 2^B`.
    pub fn from_bits(bits: u32) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(invalid("B", format!("must lie in 1..={MAX_BITS}, got {bits}")));
        }
        Self::new(1u64 << bits)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Bits needed per residue, `ceil(log2 m)`.
    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    /// `m/2`, the largest centered representative.
    pub fn half(&self) -> u64 {
        self.m / 2
    }

    pub fn reduce(&self, v: i128) -> u64 {
        v.rem_euclid(self.m as i128) as u64
    }

    pub fn center(&self, r: u64) -> i64 {
        debug_assert!(r < self.m);
        if r <= self.half() {
            r as i64
        } else {
            r as i64 - self.m as i64
        }
    }
}

/// A vector over `Z_m`, every entry in `[0, m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueVector {
    residues: Vec<u64>,
    modulus: Modulus,
}

impl ResidueVector {
    pub fn zeros(len: usize, modulus: Modulus) -> Self {
        Self {
            residues: vec![0; len],
            modulus,
        }
    }

    /// Wraps residues that are already reduced.
    pub fn from_residues(residues: Vec<u64>, modulus: Modulus) -> Result<Self> {
        if let Some(&r) = residues.iter().find(|&&r| r >= modulus.m()) {
            return Err(invalid("residues", format!("{r} is not below m = {}", modulus.m())));
        }
        Ok(Self { residues, modulus })
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    fn add_assign(&mut self, other: &ResidueVector) {
        let m = self.modulus.m();
        for (a, &b) in self.residues.iter_mut().zip(&other.residues) {
            let s = *a + b;
            *a = if s >= m { s - m } else { s };
        }
    }
}

/// Entrywise `v mod m` in `[0, m)`.
///
/// ```
/// use ddgauss::modular::{mod_reduce, Modulus};
/// let m = Modulus::new(8).unwrap();
/// assert_eq!(mod_reduce(&[-1, 8, 13], m).residues(), &[7, 0, 5]);
/// ```
pub fn mod_reduce(v: &[i64], modulus: Modulus) -> ResidueVector {
    ResidueVector {
        residues: v.iter().map(|&x| modulus.reduce(x as i128)).collect(),
        modulus,
    }
}

/// Maps each residue to its representative in `{1 - m/2, ..., m/2}`.
pub fn center(z: &ResidueVector) -> Vec<i64> {
    z.residues.iter().map(|&r| z.modulus.center(r)).collect()
}

/// `M_[a,b](x)`: the point of `[a, b]` congruent to `x` modulo `b - a`.
///
/// At the boundary the lower end wins, so `b` itself maps to `a`.
pub fn mod_clip_real(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("range", format!("need finite a < b, got [{a}, {b}]")));
    }
    let w = b - a;
    let r = (x - a).rem_euclid(w);
    Ok(if r >= w { a } else { a + r })
}

/// The modular sum of the clients' messages, the only thing the server sees.
///
/// Values of this type can only come out of [`secagg_sum`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedResidues {
    sum: ResidueVector,
    clients: usize,
}

impl AggregatedResidues {
    pub fn residues(&self) -> &ResidueVector {
        &self.sum
    }

    pub fn clients(&self) -> usize {
        self.clients
    }
}

fn check_shapes(messages: &[ResidueVector]) -> Result<(usize, Modulus)> {
    let first = messages
        .first()
        .ok_or_else(|| invalid("messages", "at least one message is required"))?;
    let (len, modulus) = (first.len(), first.modulus);
    for msg in messages {
        if msg.modulus != modulus {
            return Err(invalid(
                "messages",
                format!("mixed moduli {} and {}", modulus.m(), msg.modulus.m()),
            ));
        }
        if msg.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: msg.len(),
            });
        }
    }
    Ok((len, modulus))
}

/// Adds uniform masks that sum to zero mod `m`: every masked message on its
/// own is uniform on `Z_m^d`, while their sum is unchanged.
pub fn apply_zero_sum_masks<R: RngCore + ?Sized>(
    messages: &[ResidueVector],
    rng: &mut R,
) -> Result<Vec<ResidueVector>> {
    let (len, modulus) = check_shapes(messages)?;
    let m = modulus.m();
    let mut total = ResidueVector::zeros(len, modulus);
    let mut out = Vec::with_capacity(messages.len());
    for (i, msg) in messages.iter().enumerate() {
        let mask = if i + 1 < messages.len() {
            let mask = ResidueVector {
                residues: (0..len).map(|_| rng.random_range(0..m)).collect(),
                modulus,
            };
            total.add_assign(&mask);
            mask
        } else {
            ResidueVector {
                residues: total.residues.iter().map(|&t| (m - t) % m).collect(),
                modulus,
            }
        };
        let mut masked = msg.clone();
        masked.add_assign(&mask);
        out.push(masked);
    }
    Ok(out)
}

/// `Σ messages mod m`, optionally after zero-sum masking.
pub fn secagg_sum<R: RngCore + ?Sized>(
    messages: &[ResidueVector],
    masked: bool,
    rng: &mut R,
) -> Result<AggregatedResidues> {
    let (len, modulus) = check_shapes(messages)?;
    let masked_msgs;
    let inputs = if masked {
        masked_msgs = apply_zero_sum_masks(messages, rng)?;
        &masked_msgs
    } else {
        messages
    };
    let mut sum = ResidueVector::zeros(len, modulus);
    for msg in inputs {
        sum.add_assign(msg);
    }
    Ok(AggregatedResidues {
        sum,
        clients: messages.len(),
    })
}

/// Per-coordinate bounds on the error introduced by wrapping a centered
/// subgaussian into `[-r, r]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClipErrorBound {
    /// Bound on `E|M(X) - X|`.
    pub abs_bound: f64,
    /// Bound on `E(M(X) - X)^2`.
    pub sq_bound: f64,
}

/// For `X` with `E[e^{tX}] ≤ ω e^{t²σ²/2}`:
/// `E|M(X) - X| ≤ 4rω e^{-r²/2σ²}` and `E(M(X) - X)² ≤ 8r²ω e^{-r²/2σ²}`.
pub fn mod_clip_error_bound(r: f64, proxy_sigma: f64, log_omega: f64) -> Result<ClipErrorBound> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    if !(proxy_sigma >= 0.0) {
        return Err(invalid("sigma", format!("must be nonnegative, got {proxy_sigma}")));
    }
    if proxy_sigma > r {
        return Err(invalid(
            "sigma",
            format!("bound needs sigma <= r, got sigma = {proxy_sigma} > r = {r}"),
        ));
    }
    if proxy_sigma == 0.0 {
        return Ok(ClipErrorBound {
            abs_bound: 0.0,
            sq_bound: 0.0,
        });
    }
    let log_tail = log_omega - r * r / (2.0 * proxy_sigma * proxy_sigma);
    Ok(ClipErrorBound {
        abs_bound: 4.0 * r * log_tail.exp(),
        sq_bound: 8.0 * r * r * log_tail.exp(),
    })
}
