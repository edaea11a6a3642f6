//! Fixed-capacity Bloom filter over 32-byte group-element encodings.
//!
//! Index `i` of element `x` is `(h1 + i * h2) mod m`, where `h1` and `h2` are
//! the first and second little-endian 64-bit words of `SHA-256(x)` and `h2`
//! is forced odd. The arithmetic is done in 128 bits, so there is no wrap.

use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Filter geometry: `m` bits probed by `k` hashes, sized for `capacity`
/// insertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BloomParams {
    pub m: u64,
    pub k: u16,
    pub capacity: u64,
}

impl BloomParams {
    /// `k = round(log2(1/p))`, `m = ceil(1.44 * log2(1/p) * n)`.
    pub fn derive(capacity: u64, target_fp: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("capacity must be at least 1".into()));
        }
        if !(target_fp > 0.0 && target_fp < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "false-positive rate {target_fp} outside (0, 1)"
            )));
        }
        let bits_per_log = (1.0 / target_fp).log2();
        let k = bits_per_log.round();
        if k < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "false-positive rate {target_fp} yields zero hash functions"
            )));
        }
        if k > f64::from(u16::MAX) {
            return Err(Error::InvalidParameter("too many hash functions".into()));
        }
        let m = (1.44 * bits_per_log * capacity as f64).ceil();
        // positions travel as 4-byte integers
        if m > f64::from(u32::MAX) {
            return Err(Error::InvalidParameter(format!(
                "filter of {m} bits exceeds 2^32"
            )));
        }
        Ok(Self {
            m: m as u64,
            k: k as u16,
            capacity,
        })
    }

    pub fn new(m: u64, k: u16, capacity: u64) -> Result<Self> {
        if m == 0 || k == 0 || capacity == 0 || m > u64::from(u32::MAX) {
            return Err(Error::InvalidParameter(format!(
                "bloom geometry m={m} k={k} capacity={capacity}"
            )));
        }
        Ok(Self { m, k, capacity })
    }
}

/// The `k` probe positions of `x` in a filter of `m` bits.
pub fn positions(x: &[u8; 32], m: u64, k: u16) -> Vec<u64> {
    let digest = Sha256::digest(x);
    let h1 = u64::from_le_bytes(digest[0..8].try_into().unwrap());
    let h2 = u64::from_le_bytes(digest[8..16].try_into().unwrap()) | 1;
    (0..u128::from(k))
        .map(|i| ((u128::from(h1) + i * u128::from(h2)) % u128::from(m)) as u64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    params: BloomParams,
    bits: Vec<u8>,
    inserted: u64,
}

impl BloomFilter {
    pub fn new(params: BloomParams) -> Self {
        Self {
            params,
            bits: vec![0u8; params.m.div_ceil(8) as usize],
            inserted: 0,
        }
    }

    pub fn params(&self) -> BloomParams {
        self.params
    }

    pub fn len(&self) -> u64 {
        self.params.m
    }

    pub fn is_empty(&self) -> bool {
        self.inserted == 0
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn bit(&self, i: u64) -> bool {
        self.bits[(i / 8) as usize] >> (i % 8) & 1 == 1
    }

    fn set(&mut self, i: u64) {
        self.bits[(i / 8) as usize] |= 1 << (i % 8);
    }

    /// Iterator over all `m` bits in index order.
    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.params.m).map(move |i| self.bit(i))
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    pub fn insert(&mut self, x: &[u8; 32]) -> Result<()> {
        if self.inserted >= self.params.capacity {
            return Err(Error::CapacityExceeded {
                capacity: self.params.capacity,
            });
        }
        for p in positions(x, self.params.m, self.params.k) {
            self.set(p);
        }
        self.inserted += 1;
        Ok(())
    }

    pub fn contains(&self, x: &[u8; 32]) -> bool {
        positions(x, self.params.m, self.params.k)
            .into_iter()
            .all(|p| self.bit(p))
    }

    /// `m (8) || k (2) || inserted (8) || packed bits`, LSB-first within bytes.
    /// Capacity is not part of the encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(18 + self.bits.len());
        w.u64(self.params.m)
            .u16(self.params.k)
            .u64(self.inserted)
            .bytes(&self.bits);
        w.into_bytes()
    }

    pub fn decode(r: &mut Reader<'_>, capacity: u64) -> Result<Self> {
        let m = r.u64()?;
        let k = r.u16()?;
        let inserted = r.u64()?;
        let params = BloomParams::new(m, k, capacity)?;
        let bits = r.take(m.div_ceil(8) as usize)?.to_vec();
        if m % 8 != 0 && bits[bits.len() - 1] >> (m % 8) != 0 {
            return Err(Error::Decode("bloom padding bits set".into()));
        }
        if inserted > capacity {
            return Err(Error::Decode("bloom insert count above capacity".into()));
        }
        Ok(Self {
            params,
            bits,
            inserted,
        })
    }

    pub fn from_bytes(bytes: &[u8], capacity: u64) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let f = Self::decode(&mut r, capacity)?;
        r.finish()?;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hash_count_at_one_in_a_million() {
        assert_eq!(BloomParams::derive(1000, 1e-6).unwrap().k, 20);
    }

    #[test]
    fn sizing_at_one_in_a_million() {
        // 1.44 * log2(1e6) * 1000 = 28701.4587..., evaluated with mpmath at 50 digits
        assert_eq!(BloomParams::derive(1000, 1e-6).unwrap().m, 28702);
    }

    #[test]
    fn sizing_degenerate_point() {
        let p = BloomParams::derive(1, 0.5).unwrap();
        assert_eq!((p.m, p.k), (2, 1));
    }

    #[test]
    fn parameter_errors() {
        assert!(BloomParams::derive(0, 0.1).is_err());
        assert!(BloomParams::derive(10, 0.0).is_err());
        assert!(BloomParams::derive(10, 1.0).is_err());
        assert!(BloomParams::derive(10, 0.9).is_err());
    }

    /// Second implementation of the probe rule: mod-m arithmetic on reduced
    /// operands instead of 128-bit sums.
    fn positions_oracle(x: &[u8; 32], m: u64, k: u16) -> Vec<u64> {
        let d = Sha256::digest(x);
        let mut h1 = 0u64;
        let mut h2 = 0u64;
        for i in (0..8).rev() {
            h1 = h1 << 8 | u64::from(d[i]);
            h2 = h2 << 8 | u64::from(d[8 + i]);
        }
        h2 |= 1;
        let (a, b) = (h1 % m, h2 % m);
        let mut out = Vec::new();
        let mut cur = a;
        for _ in 0..k {
            out.push(cur);
            cur = ((u128::from(cur) + u128::from(b)) % u128::from(m)) as u64;
        }
        out
    }

    #[test]
    fn positions_match_oracle_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: [u8; 32] = rng.gen();
            let m = rng.gen_range(1..1_000_000u64);
            let k = rng.gen_range(1..30u16);
            let p = positions(&x, m, k);
            assert_eq!(p, positions(&x, m, k));
            assert!(p.iter().all(|&i| i < m));
            assert_eq!(p, positions_oracle(&x, m, k));
        }
    }

    #[test]
    fn empty_filter_contains_nothing() {
        let f = BloomFilter::new(BloomParams::derive(10, 0.01).unwrap());
        assert!(!f.contains(&[7u8; 32]));
    }

    #[test]
    fn capacity_is_enforced() {
        let mut f = BloomFilter::new(BloomParams::derive(2, 0.01).unwrap());
        f.insert(&[1; 32]).unwrap();
        f.insert(&[2; 32]).unwrap();
        assert_eq!(
            f.insert(&[3; 32]),
            Err(Error::CapacityExceeded { capacity: 2 })
        );
    }

    #[test]
    fn false_positive_rate_at_capacity() {
        let params = BloomParams::derive(10_000, 1e-3).unwrap();
        let mut f = BloomFilter::new(params);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..params.capacity {
            f.insert(&rng.gen()).unwrap();
        }
        let fp = (0..100_000).filter(|_| f.contains(&rng.gen())).count();
        assert!(fp as f64 / 1e5 <= 2e-3, "fp rate {}", fp as f64 / 1e5);
    }

    #[test]
    fn serialization_layout_and_round_trip() {
        let mut f = BloomFilter::new(BloomParams::new(10, 2, 5).unwrap());
        f.insert(&[9u8; 32]).unwrap();
        let b = f.to_bytes();
        assert_eq!(b.len(), 8 + 2 + 8 + 2);
        assert_eq!(&b[0..8], &10u64.to_le_bytes());
        assert_eq!(&b[8..10], &2u16.to_le_bytes());
        assert_eq!(&b[10..18], &1u64.to_le_bytes());
        assert_eq!(BloomFilter::from_bytes(&b, 5).unwrap(), f);
        assert!(BloomFilter::from_bytes(&b[..19], 5).is_err());
    }

    proptest! {
        #[test]
        fn no_false_negatives(xs in prop::collection::vec(any::<[u8; 32]>(), 1..200)) {
            let mut f = BloomFilter::new(BloomParams::derive(200, 1e-2).unwrap());
            for x in &xs {
                f.insert(x).unwrap();
            }
            for x in &xs {
                prop_assert!(f.contains(x));
            }
            prop_assert!(f.count_ones() <= u64::from(f.params().k) * f.inserted());
        }
    }
}
