//! On-disk snapshot of an [`EncryptedDatabase`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ESPS" | version (1) | m (8) | k (2)
//! freq_set: r (8) | count (4) | ecnt (64) ...
//! tset:     count (8) | addr (32) | val (32) | alpha (32) ...   sorted by addr
//! xtag_bf:  count (4) | component (32) ...
//! SHA-256 of everything above (32)
//! ```
//!
//! Sorting the TSet makes the file a function of the database contents, so
//! two snapshots of equal databases are byte-identical.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use csse_core::codec::{Reader, Writer};
use csse_core::lfka::EncryptedFreqSet;
use csse_core::server::{EncryptedDatabase, TSetValue};
use csse_core::shve::ShveCiphertext;
use csse_core::Scalar;
use sha2::{Digest, Sha256};

use crate::error::{ServiceError, ServiceResult};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"ESPS";
pub const SNAPSHOT_VERSION: u8 = 1;
const CHECKSUM_LEN: usize = 32;
const TSET_ENTRY_LEN: usize = 96;

pub fn encode_snapshot(edb: &EncryptedDatabase) -> Vec<u8> {
    let mut w = Writer::with_capacity(
        64 + edb.freq_set().len() * 64 + edb.entry_count() * TSET_ENTRY_LEN + edb.m() as usize * 32,
    );
    w.bytes(&SNAPSHOT_MAGIC).u8(SNAPSHOT_VERSION).u64(edb.m()).u16(edb.k());
    edb.freq_set().encode(&mut w);

    let mut entries: Vec<_> = edb.tset().iter().collect();
    entries.sort_unstable_by_key(|(addr, _)| **addr);
    w.u64(entries.len() as u64);
    for (addr, v) in entries {
        w.bytes(addr).bytes(&v.val).bytes(&v.alpha.to_bytes());
    }
    edb.xtag_bf().encode(&mut w);

    let mut out = w.into_bytes();
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> ServiceResult<EncryptedDatabase> {
    let bad = |m: String| ServiceError::Snapshot(m);
    if bytes.len() < CHECKSUM_LEN + 15 {
        return Err(bad(format!("{} bytes is too short", bytes.len())));
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if body[..4] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    if Sha256::digest(body).as_slice() != sum {
        return Err(bad("checksum mismatch".into()));
    }

    let parse = || -> csse_core::Result<EncryptedDatabase> {
        let mut r = Reader::new(&body[4..]);
        let version = r.u8()?;
        if version != SNAPSHOT_VERSION {
            return Err(csse_core::Error::Decode(format!("unsupported version {version}")));
        }
        let m = r.u64()?;
        let k = r.u16()?;
        let freq_set = EncryptedFreqSet::decode(&mut r)?;

        let n = r.u64()?;
        if n > (r.remaining() / TSET_ENTRY_LEN) as u64 {
            return Err(csse_core::Error::Decode(format!("tset count {n} exceeds file size")));
        }
        let mut tset = HashMap::with_capacity(n as usize);
        let mut last: Option<[u8; 32]> = None;
        for _ in 0..n {
            let addr: [u8; 32] = r.array()?;
            if last.is_some_and(|l| l >= addr) {
                return Err(csse_core::Error::Decode("tset not sorted by address".into()));
            }
            last = Some(addr);
            let val = r.array()?;
            let alpha = Scalar::from_bytes(&r.array()?)?;
            tset.insert(addr, TSetValue { val, alpha });
        }
        let xtag_bf = ShveCiphertext::decode(&mut r)?;
        r.finish()?;
        EncryptedDatabase::from_parts(m, k, tset, xtag_bf, freq_set)
    };
    parse().map_err(|e| bad(e.to_string()))
}

/// Writes to a sibling temporary file, syncs it, then renames over `path`.
pub fn persist(edb: &EncryptedDatabase, path: &Path) -> ServiceResult<()> {
    let bytes = encode_snapshot(edb);
    let file_name = path
        .file_name()
        .ok_or_else(|| ServiceError::Snapshot(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn restore(path: &Path) -> ServiceResult<EncryptedDatabase> {
    decode_snapshot(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csse_core::protocol::{run_setup, run_update, LocalServer};
    use csse_core::{DocId, Op, UpdateTriple};
    use rand::rngs::OsRng;

    fn sample_db(docs: usize) -> EncryptedDatabase {
        let mut s = LocalServer::new();
        let (sk, mut st) = run_setup(&mut s, 400, 1e-4, &mut OsRng).unwrap();
        for d in 0..docs {
            let id = DocId::try_from(format!("doc{d}").as_str()).unwrap();
            let batch: Vec<_> = (0..3).map(|w| UpdateTriple::new(Op::Add, id, format!("w{}", (d + w) % 7))).collect();
            run_update(&sk, &mut st, &mut s, &batch, &mut OsRng).unwrap();
        }
        s.database().unwrap().clone()
    }

    #[test]
    fn round_trip_is_identity() {
        for docs in [0, 1, 20] {
            let db = sample_db(docs);
            let bytes = encode_snapshot(&db);
            let back = decode_snapshot(&bytes).unwrap();
            assert_eq!(back, db);
            assert_eq!(encode_snapshot(&back), bytes);
        }
    }

    #[test]
    fn truncation_and_corruption_rejected() {
        let bytes = encode_snapshot(&sample_db(3));
        for cut in [0, 10, 46, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_snapshot(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[60] ^= 1;
        assert!(matches!(decode_snapshot(&flipped), Err(ServiceError::Snapshot(m)) if m.contains("checksum")));
    }

    #[test]
    fn checksum_valid_but_malformed_body_rejected() {
        let mut body = encode_snapshot(&sample_db(1));
        body.truncate(body.len() - CHECKSUM_LEN);
        body.push(0);
        let sum = Sha256::digest(&body);
        body.extend_from_slice(&sum);
        assert!(decode_snapshot(&body).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edb.snap");
        let db = sample_db(2);
        persist(&db, &path).unwrap();
        persist(&db, &path).unwrap();
        assert_eq!(restore(&path).unwrap(), db);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("edb.snap")]);
    }
}
