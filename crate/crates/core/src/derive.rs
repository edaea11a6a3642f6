//! Per-update and per-search derivations. Every value the client sends is
//! computed here, so tests can recompute any of them with full key knowledge.

use crate::prims::{keyword_counter_input, prf_f, prf_fp, GroupElement, Scalar, SecretKeyBundle};
use crate::types::{DocId, Op, RECORD_LEN};

const TAG_ADDR: u8 = 0x00;
const TAG_VAL: u8 = 0x01;
const TAG_BLIND: u8 = 0x02;

/// `F(K_T, w || cnt || 0)`.
pub fn addr(sk: &SecretKeyBundle, keyword: &[u8], counter: u64) -> [u8; 32] {
    prf_f(&sk.tset, &keyword_counter_input(keyword, counter, TAG_ADDR))
}

/// `F(K_T, w || cnt || 1)`.
pub fn value_mask(sk: &SecretKeyBundle, keyword: &[u8], counter: u64) -> [u8; RECORD_LEN] {
    prf_f(&sk.tset, &keyword_counter_input(keyword, counter, TAG_VAL))
}

/// `Fp(K_Z, w || cnt)`.
pub fn blind(sk: &SecretKeyBundle, keyword: &[u8], counter: u64) -> Scalar {
    prf_fp(&sk.blind, &keyword_counter_input(keyword, counter, TAG_BLIND))
}

/// `Fp(K_Y, id || op)`.
pub fn id_scalar(sk: &SecretKeyBundle, id: &DocId, op: Op) -> Scalar {
    prf_fp(&sk.xtag_id, &id.pack(op))
}

/// `Fp(K_X, w)`.
pub fn keyword_scalar(sk: &SecretKeyBundle, keyword: &[u8]) -> Scalar {
    prf_fp(&sk.xtag_keyword, keyword)
}

pub fn masked_value(sk: &SecretKeyBundle, keyword: &[u8], counter: u64, id: &DocId, op: Op) -> [u8; RECORD_LEN] {
    xor32(&id.pack(op), &value_mask(sk, keyword, counter))
}

/// `alpha = Fp(K_Y, id || op) * Fp(K_Z, w || cnt)^-1`.
pub fn alpha(sk: &SecretKeyBundle, keyword: &[u8], counter: u64, id: &DocId, op: Op) -> Scalar {
    id_scalar(sk, id, op).mul(&blind(sk, keyword, counter).invert())
}

/// `g^(Fp(K_X, w) * Fp(K_Y, id || op))`.
pub fn xtag(sk: &SecretKeyBundle, keyword: &[u8], id: &DocId, op: Op) -> GroupElement {
    GroupElement::base_exp(&keyword_scalar(sk, keyword).mul(&id_scalar(sk, id, op)))
}

/// `g^(Fp(K_Z, s || j) * Fp(K_X, x))`.
pub fn xtoken(sk: &SecretKeyBundle, s_term: &[u8], j: u64, x_term: &[u8]) -> GroupElement {
    GroupElement::base_exp(&blind(sk, s_term, j).mul(&keyword_scalar(sk, x_term)))
}

pub fn xor32(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut out = *a;
    for (o, x) in out.iter_mut().zip(b) {
        *o ^= x;
    }
    out
}
