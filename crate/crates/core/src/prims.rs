//! Keyed primitives shared by every layer of the scheme.
//!
//! * `F`, `F2`: HMAC-SHA-256, 32-byte output.
//! * `F1`: HMAC-SHA-512, 64-byte output.
//! * `Fp`: HMAC-SHA-512 reduced into the Ristretto scalar field, never zero.
//!
//! Each family prepends its own one-byte tag to the input, so equal raw inputs
//! under one key never produce related outputs across families.
//!
//! The group is Ristretto255. [`GroupElement`] and [`Scalar`] carry the
//! canonical 32-byte encodings used on the wire and as hash inputs.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar as DalekScalar;
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Sha256, Sha512};
use std::fmt;

use crate::error::{Error, Result};

pub const KEY_LEN: usize = 32;

const TAG_F: u8 = 0x01;
const TAG_F1: u8 = 0x02;
const TAG_F2: u8 = 0x03;
const TAG_FP: u8 = 0x04;

/// Separator between a keyword and the fixed-width suffix in PRF inputs.
pub const KEYWORD_SEP: u8 = 0x1F;

const MAX_SCALAR_RETRIES: u8 = u8::MAX;

type HmacSha256 = Hmac<Sha256>;
type HmacSha512 = Hmac<Sha512>;

/// A 256-bit secret key.
#[derive(Clone, PartialEq, Eq)]
pub struct Key32(pub [u8; KEY_LEN]);

impl Key32 {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for Key32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Key32(<redacted>)")
    }
}

/// Every client secret: `(msk, K, K_T, K_X, K_Y, K_Z)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKeyBundle {
    /// SHVE master key.
    pub msk: Key32,
    /// Frequency-encryption key for the least-frequent-keyword protocol.
    pub freq: Key32,
    /// TSet address and value-mask key.
    pub tset: Key32,
    /// Cross-tag keyword key.
    pub xtag_keyword: Key32,
    /// Cross-tag identifier key.
    pub xtag_id: Key32,
    /// Blinding key tying a cross-token to a TSet entry.
    pub blind: Key32,
}

impl SecretKeyBundle {
    pub const ENCODED_LEN: usize = 6 * KEY_LEN;

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self {
            msk: Key32::random(rng),
            freq: Key32::random(rng),
            tset: Key32::random(rng),
            xtag_keyword: Key32::random(rng),
            xtag_id: Key32::random(rng),
            blind: Key32::random(rng),
        }
    }

    fn keys(&self) -> [&Key32; 6] {
        [
            &self.msk,
            &self.freq,
            &self.tset,
            &self.xtag_keyword,
            &self.xtag_id,
            &self.blind,
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.keys().iter().flat_map(|k| k.0).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(Error::LengthMismatch {
                expected: Self::ENCODED_LEN,
                actual: bytes.len(),
            });
        }
        let key = |i: usize| {
            let mut k = [0u8; KEY_LEN];
            k.copy_from_slice(&bytes[i * KEY_LEN..(i + 1) * KEY_LEN]);
            Key32(k)
        };
        Ok(Self {
            msk: key(0),
            freq: key(1),
            tset: key(2),
            xtag_keyword: key(3),
            xtag_id: key(4),
            blind: key(5),
        })
    }
}

fn hmac256(key: &Key32, tag: u8, parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(&key.0).expect("HMAC accepts any key length");
    mac.update(&[tag]);
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

fn hmac512(key: &Key32, tag: u8, parts: &[&[u8]]) -> [u8; 64] {
    let mut mac = <HmacSha512 as Mac>::new_from_slice(&key.0).expect("HMAC accepts any key length");
    mac.update(&[tag]);
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// `F`: 256-bit PRF.
pub fn prf_f(key: &Key32, input: &[u8]) -> [u8; 32] {
    hmac256(key, TAG_F, &[input])
}

/// `F1`: 512-bit PRF.
pub fn prf_f1(key: &Key32, input: &[u8]) -> [u8; 64] {
    hmac512(key, TAG_F1, &[input])
}

/// `F2`: 256-bit PRF, separate family from `F`.
pub fn prf_f2(key: &Key32, input: &[u8]) -> [u8; 32] {
    hmac256(key, TAG_F2, &[input])
}

/// `Fp`: PRF into the nonzero scalars.
///
/// Attempt `c` hashes `input || c` with HMAC-SHA-512 and reduces the 64-byte
/// digest modulo the group order; the first nonzero result wins.
pub fn prf_fp(key: &Key32, input: &[u8]) -> Scalar {
    try_prf_fp(key, input).expect("2^-252 event occurred 256 times in a row")
}

pub fn try_prf_fp(key: &Key32, input: &[u8]) -> Result<Scalar> {
    for retry in 0..=MAX_SCALAR_RETRIES {
        let wide = hmac512(key, TAG_FP, &[input, &[retry]]);
        let s = DalekScalar::from_bytes_mod_order_wide(&wide);
        if s != DalekScalar::ZERO {
            return Ok(Scalar(s));
        }
    }
    Err(Error::ScalarDerivation)
}

/// A `F` instance with the key schedule done once, for bulk evaluation.
#[derive(Clone)]
pub struct KeyedPrf {
    mac: HmacSha256,
}

impl KeyedPrf {
    pub fn new(key: &Key32) -> Self {
        let mut mac = <HmacSha256 as Mac>::new_from_slice(&key.0).expect("HMAC accepts any key length");
        mac.update(&[TAG_F]);
        Self { mac }
    }

    /// Same output as `prf_f(key, concat(parts))`.
    pub fn eval(&self, parts: &[&[u8]]) -> [u8; 32] {
        let mut mac = self.mac.clone();
        for p in parts {
            mac.update(p);
        }
        mac.finalize().into_bytes().into()
    }
}

/// `w || 0x1F || counter (8 bytes BE) || tag`, the input to every per-update
/// derivation (TSet address, value mask, blinding scalar).
pub fn keyword_counter_input(keyword: &[u8], counter: u64, tag: u8) -> Vec<u8> {
    let mut v = Vec::with_capacity(keyword.len() + 10);
    v.extend_from_slice(keyword);
    v.push(KEYWORD_SEP);
    v.extend_from_slice(&counter.to_be_bytes());
    v.push(tag);
    v
}

/// Nonzero element of the scalar field of the group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(DalekScalar);

impl Scalar {
    pub const ONE: Scalar = Scalar(DalekScalar::ONE);

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = DalekScalar::random(rng);
            if s != DalekScalar::ZERO {
                return Scalar(s);
            }
        }
    }

    /// 32-byte little-endian reduced form.
    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    /// Rejects non-reduced encodings and zero.
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self> {
        let s: Option<DalekScalar> = DalekScalar::from_canonical_bytes(*bytes).into();
        match s {
            Some(s) if s != DalekScalar::ZERO => Ok(Scalar(s)),
            _ => Err(Error::NonCanonical("scalar")),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        // product of nonzero elements of a prime field is nonzero
        Scalar(self.0 * other.0)
    }

    pub fn invert(&self) -> Scalar {
        Scalar(self.0.invert())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex32(&self.to_bytes()))
    }
}

pub fn scalar_mul(a: &Scalar, b: &Scalar) -> Scalar {
    a.mul(b)
}

/// Field inverse. A zero encoding never reaches a [`Scalar`], so the error
/// path exists only for raw-byte callers.
pub fn scalar_inv(a: &Scalar) -> Scalar {
    a.invert()
}

pub fn scalar_inv_bytes(bytes: &[u8; 32]) -> Result<Scalar> {
    match Scalar::from_bytes(bytes) {
        Ok(s) => Ok(s.invert()),
        Err(_) if bytes.iter().all(|b| *b == 0) => Err(Error::ZeroInverse),
        Err(e) => Err(e),
    }
}

/// Element of the prime-order group, stored decompressed with its canonical
/// encoding cached.
#[derive(Clone, Copy)]
pub struct GroupElement {
    point: RistrettoPoint,
    encoded: [u8; 32],
}

impl GroupElement {
    pub fn generator() -> Self {
        Self::from_point(curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT)
    }

    fn from_point(point: RistrettoPoint) -> Self {
        Self {
            point,
            encoded: point.compress().to_bytes(),
        }
    }

    /// `g^e` using the precomputed basepoint table.
    pub fn base_exp(e: &Scalar) -> Self {
        Self::from_point(RistrettoPoint::mul_base(&e.0))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.encoded
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.encoded
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self> {
        let point = CompressedRistretto(*bytes)
            .decompress()
            .ok_or(Error::NonCanonical("group element"))?;
        Ok(Self {
            point,
            encoded: *bytes,
        })
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.encoded == other.encoded
    }
}

impl Eq for GroupElement {}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", hex32(&self.encoded))
    }
}

pub fn group_exp(base: &GroupElement, e: &Scalar) -> GroupElement {
    GroupElement::from_point(base.point * e.0)
}

fn hex32(b: &[u8; 32]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

const SYM_NONCE: [u8; 12] = [0u8; 12];

/// Authenticated encryption under a single-use key.
///
/// The nonce is fixed, so a key must never encrypt two different messages.
/// Every caller derives a fresh key per message.
pub fn sym_enc(key: &Key32, msg: &[u8]) -> Vec<u8> {
    sym_enc_ad(key, &[], msg)
}

pub fn sym_enc_ad(key: &Key32, ad: &[u8], msg: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new((&key.0).into())
        .encrypt(Nonce::from_slice(&SYM_NONCE), Payload { msg, aad: ad })
        .expect("ChaCha20-Poly1305 encryption is infallible for in-memory buffers")
}

/// Fails on a wrong key or a malformed ciphertext.
pub fn sym_dec(key: &Key32, ct: &[u8]) -> Result<Vec<u8>> {
    sym_dec_ad(key, &[], ct)
}

pub fn sym_dec_ad(key: &Key32, ad: &[u8], ct: &[u8]) -> Result<Vec<u8>> {
    ChaCha20Poly1305::new((&key.0).into())
        .decrypt(Nonce::from_slice(&SYM_NONCE), Payload { msg: ct, aad: ad })
        .map_err(|_| Error::SymDecrypt)
}
