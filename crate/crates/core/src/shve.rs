//! Symmetric-key hidden vector encryption over the binary alphabet.
//!
//! A ciphertext hides an `m`-bit index vector `x` as `c_l = F(msk, x_l || l)`.
//! A key for a predicate vector `v` over `{0, 1, *}` lets the holder learn
//! whether `x` agrees with `v` on every non-wildcard slot and nothing else.
//!
//! `K0` is 33 bytes. Its first 32 bytes are masked into `d0` by the XOR of
//! the selected PRF outputs. The last byte rides in clear as the associated
//! data of `d1`, so a matching query recovers all of `K0`.

use rand::{CryptoRng, RngCore};
use std::collections::BTreeMap;

use crate::bloom::BloomFilter;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::prims::{prf_f, sym_dec_ad, sym_enc_ad, Key32, KeyedPrf};

/// Length of `K0` and of the zero payload: 256 + log2(256) bits.
pub const PAYLOAD_LEN: usize = 33;

const D1_KEY_LABEL: &[u8] = b"shve-d1";

pub fn shve_setup<R: RngCore + CryptoRng>(rng: &mut R) -> Key32 {
    Key32::random(rng)
}

/// One slot of a predicate vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    Wildcard,
}

impl Symbol {
    pub fn matches(self, bit: bool) -> bool {
        match self {
            Symbol::Zero => !bit,
            Symbol::One => bit,
            Symbol::Wildcard => true,
        }
    }
}

/// Length-`m` vector over `{0, 1, *}`, stored sparsely since nearly every
/// slot of a search predicate is a wildcard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateVector {
    len: u64,
    fixed: BTreeMap<u64, bool>,
}

impl PredicateVector {
    pub fn all_wildcards(len: u64) -> Self {
        Self {
            len,
            fixed: BTreeMap::new(),
        }
    }

    /// `1` at each listed position, `*` elsewhere.
    pub fn ones_at(len: u64, positions: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut v = Self::all_wildcards(len);
        for p in positions {
            v.set(p, Symbol::One)?;
        }
        Ok(v)
    }

    pub fn from_symbols(symbols: &[Symbol]) -> Self {
        let mut v = Self::all_wildcards(symbols.len() as u64);
        for (i, s) in symbols.iter().enumerate() {
            v.set(i as u64, *s).expect("index within length");
        }
        v
    }

    pub fn set(&mut self, pos: u64, s: Symbol) -> Result<()> {
        if pos >= self.len {
            return Err(Error::LengthMismatch {
                expected: self.len as usize,
                actual: pos as usize + 1,
            });
        }
        match s {
            Symbol::Wildcard => self.fixed.remove(&pos),
            Symbol::Zero => self.fixed.insert(pos, false),
            Symbol::One => self.fixed.insert(pos, true),
        };
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn symbol(&self, pos: u64) -> Symbol {
        match self.fixed.get(&pos) {
            Some(true) => Symbol::One,
            Some(false) => Symbol::Zero,
            None => Symbol::Wildcard,
        }
    }

    /// Plaintext predicate `P_v(x)`.
    pub fn matches(&self, x: &[bool]) -> bool {
        x.len() as u64 == self.len
            && self.fixed.iter().all(|(&p, &b)| x[p as usize] == b)
    }

    /// Count of non-wildcard slots.
    pub fn fixed_count(&self) -> usize {
        self.fixed.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShveCiphertext {
    components: Vec<[u8; 32]>,
}

impl ShveCiphertext {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, l: usize) -> &[u8; 32] {
        &self.components[l]
    }

    pub fn components(&self) -> &[[u8; 32]] {
        &self.components
    }

    /// `m (4) || m * 32 bytes`.
    pub fn encode(&self, w: &mut Writer) {
        w.count(self.components.len());
        for c in &self.components {
            w.bytes(c);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let m = r.count(32)?;
        let mut components = Vec::with_capacity(m);
        for _ in 0..m {
            components.push(r.array()?);
        }
        Ok(Self { components })
    }
}

fn component_input(bit: bool, l: u64) -> [u8; 9] {
    let mut b = [0u8; 9];
    b[0] = u8::from(bit);
    b[1..].copy_from_slice(&l.to_be_bytes());
    b
}

/// `c_l = F(msk, x_l || l)` with `l` as 8 big-endian bytes, zero-based.
pub fn shve_enc(msk: &Key32, x: &[bool]) -> ShveCiphertext {
    let prf = KeyedPrf::new(msk);
    let components = x
        .iter()
        .enumerate()
        .map(|(l, &bit)| prf.eval(&[&component_input(bit, l as u64)]))
        .collect();
    ShveCiphertext { components }
}

/// Encrypts the bit vector of a Bloom filter.
pub fn shve_enc_filter(msk: &Key32, filter: &BloomFilter) -> ShveCiphertext {
    let prf = KeyedPrf::new(msk);
    let components = filter
        .iter_bits()
        .enumerate()
        .map(|(l, bit)| prf.eval(&[&component_input(bit, l as u64)]))
        .collect();
    ShveCiphertext { components }
}

/// Decryption key `(d0, d1, S)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShveKey {
    pub d0: [u8; 32],
    /// `K0[32] || AEAD(0^33)`.
    pub d1: Vec<u8>,
    /// Non-wildcard positions, strictly increasing.
    pub positions: Vec<u32>,
}

impl ShveKey {
    pub fn encode(&self, w: &mut Writer) {
        w.count(self.positions.len());
        for p in &self.positions {
            w.u32(*p);
        }
        w.bytes(&self.d0).var_bytes(&self.d1);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.count(4)?;
        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let p = r.u32()?;
            if positions.last().is_some_and(|&last| last >= p) {
                return Err(Error::Decode("SHVE key positions not strictly increasing".into()));
            }
            positions.push(p);
        }
        let d0 = r.array()?;
        let d1 = r.var_bytes()?.to_vec();
        Ok(Self { d0, d1, positions })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let k = Self::decode(&mut r)?;
        r.finish()?;
        Ok(k)
    }
}

fn d1_key(k0_head: &[u8; 32]) -> Key32 {
    Key32(prf_f(&Key32(*k0_head), D1_KEY_LABEL))
}

pub fn shve_keygen<R: RngCore + CryptoRng>(
    msk: &Key32,
    v: &PredicateVector,
    rng: &mut R,
) -> Result<ShveKey> {
    let mut k0 = [0u8; PAYLOAD_LEN];
    rng.fill_bytes(&mut k0);
    let head: [u8; 32] = k0[..32].try_into().unwrap();

    let prf = KeyedPrf::new(msk);
    let mut d0 = head;
    let mut positions = Vec::with_capacity(v.fixed.len());
    for (&l, &bit) in &v.fixed {
        let l32 = u32::try_from(l)
            .map_err(|_| Error::InvalidParameter(format!("position {l} exceeds 2^32")))?;
        positions.push(l32);
        xor_into(&mut d0, &prf.eval(&[&component_input(bit, l)]));
    }

    let mut d1 = vec![k0[32]];
    d1.extend(sym_enc_ad(&d1_key(&head), &k0[32..], &[0u8; PAYLOAD_LEN]));
    Ok(ShveKey { d0, d1, positions })
}

/// `true` iff the encrypted vector satisfies the key's predicate. A key with
/// positions outside the ciphertext or a malformed `d1` yields `false`.
pub fn shve_query(key: &ShveKey, ct: &ShveCiphertext) -> bool {
    let mut k0_head = key.d0;
    for &l in &key.positions {
        match ct.components.get(l as usize) {
            Some(c) => xor_into(&mut k0_head, c),
            None => return false,
        }
    }
    let Some((&tail, body)) = key.d1.split_first() else {
        return false;
    };
    match sym_dec_ad(&d1_key(&k0_head), &[tail], body) {
        Ok(mu) => mu == [0u8; PAYLOAD_LEN],
        Err(_) => false,
    }
}

fn xor_into(acc: &mut [u8; 32], x: &[u8; 32]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a ^= b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(v: u8, m: usize) -> Vec<bool> {
        (0..m).map(|i| v >> i & 1 == 1).collect()
    }

    #[test]
    fn component_locality() {
        let msk = shve_setup(&mut OsRng);
        let x = bits(0b1011_0010, 8);
        let c = shve_enc(&msk, &x);
        assert_eq!(c, shve_enc(&msk, &x));
        for l in 0..8 {
            let mut y = x.clone();
            y[l] = !y[l];
            let d = shve_enc(&msk, &y);
            for i in 0..8 {
                assert_eq!(c.component(i) == d.component(i), i != l);
            }
        }
    }

    #[test]
    fn components_match_direct_prf_loop() {
        let msk = shve_setup(&mut OsRng);
        let x = bits(0b0110_1001, 8);
        let c = shve_enc(&msk, &x);
        for (l, bit) in x.iter().enumerate() {
            let mut input = vec![u8::from(*bit)];
            input.extend_from_slice(&(l as u64).to_be_bytes());
            assert_eq!(*c.component(l), prf_f(&msk, &input));
        }
    }

    #[test]
    fn all_wildcard_key_is_bare_k0() {
        let msk = shve_setup(&mut OsRng);
        let key = shve_keygen(&msk, &PredicateVector::all_wildcards(8), &mut OsRng).unwrap();
        assert!(key.positions.is_empty());
        // d1 must decrypt under d0 alone
        assert!(sym_dec_ad(&d1_key(&key.d0), &key.d1[..1], &key.d1[1..]).is_ok());
        for x in 0..=255u8 {
            assert!(shve_query(&key, &shve_enc(&msk, &bits(x, 8))));
        }
    }

    #[test]
    fn single_fixed_slot() {
        let msk = shve_setup(&mut OsRng);
        let v = PredicateVector::ones_at(8, [3]).unwrap();
        let key = shve_keygen(&msk, &v, &mut OsRng).unwrap();
        assert_eq!(key.positions, vec![3]);
        assert!(shve_query(&key, &shve_enc(&msk, &bits(0b1000, 8))));
        assert!(!shve_query(&key, &shve_enc(&msk, &bits(0b0111, 8))));
    }

    #[test]
    fn fresh_k0_per_keygen() {
        let msk = shve_setup(&mut OsRng);
        let v = PredicateVector::ones_at(16, [1, 5, 9]).unwrap();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let key = shve_keygen(&msk, &v, &mut OsRng).unwrap();
            assert_eq!(key.positions, vec![1, 5, 9]);
            assert!(seen.insert((key.d0, key.d1.clone())));
        }
    }

    #[test]
    fn malformed_keys_fail_closed() {
        let msk = shve_setup(&mut OsRng);
        let ct = shve_enc(&msk, &bits(0xff, 8));
        let mut key = shve_keygen(&msk, &PredicateVector::ones_at(8, [0]).unwrap(), &mut OsRng)
            .unwrap();
        assert!(shve_query(&key, &ct));
        let mut short = key.clone();
        short.d1.clear();
        assert!(!shve_query(&short, &ct));
        key.positions = vec![9];
        assert!(!shve_query(&key, &ct));
    }

    #[test]
    fn key_wire_form() {
        let msk = shve_setup(&mut OsRng);
        let key = shve_keygen(&msk, &PredicateVector::ones_at(100, [2, 70]).unwrap(), &mut OsRng)
            .unwrap();
        let b = key.to_bytes();
        assert_eq!(&b[..4], &2u32.to_le_bytes());
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &70u32.to_le_bytes());
        assert_eq!(&b[12..44], &key.d0);
        assert_eq!(ShveKey::from_bytes(&b).unwrap(), key);

        let mut unsorted = Writer::new();
        unsorted.count(2).u32(5).u32(5).bytes(&[0; 32]).var_bytes(&[]);
        assert!(ShveKey::from_bytes(&unsorted.into_bytes()).is_err());
    }

    #[test]
    fn random_predicates_match_plaintext() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let msk = shve_setup(&mut OsRng);
        for _ in 0..200 {
            let m = rng.gen_range(1..40usize);
            let x: Vec<bool> = (0..m).map(|_| rng.gen()).collect();
            let syms: Vec<Symbol> = (0..m)
                .map(|i| match rng.gen_range(0..4) {
                    0 => Symbol::Zero,
                    1 => Symbol::One,
                    // bias towards agreement so both outcomes occur
                    2 => if x[i] { Symbol::One } else { Symbol::Zero },
                    _ => Symbol::Wildcard,
                })
                .collect();
            let v = PredicateVector::from_symbols(&syms);
            let key = shve_keygen(&msk, &v, &mut OsRng).unwrap();
            assert_eq!(shve_query(&key, &shve_enc(&msk, &x)), v.matches(&x));
        }
    }
}
