//! Frame layout: `"ESPC" | version (1) | msg_type (1) | payload_len (4 LE) | payload`.
//!
//! A response reuses the request's type with the high bit set. Failures are
//! answered with [`MsgType::Error`], whose payload is a one-byte
//! [`ErrorCode`] followed by a UTF-8 message.

use std::io::{Read, Write};

use crate::error::{ServiceError, ServiceResult};

pub const MAGIC: [u8; 4] = *b"ESPC";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;
pub const DEFAULT_MAX_FRAME: u64 = 64 << 20;
const RESPONSE_BIT: u8 = 0x80;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MsgType {
    Hello,
    Update,
    Setup,
    SearchR1,
    SearchR2,
    SearchR3,
    Snapshot,
    Stats,
    Error,
}

impl MsgType {
    pub const REQUESTS: [MsgType; 8] = [
        MsgType::Hello,
        MsgType::Update,
        MsgType::Setup,
        MsgType::SearchR1,
        MsgType::SearchR2,
        MsgType::SearchR3,
        MsgType::Snapshot,
        MsgType::Stats,
    ];

    pub fn code(self) -> u8 {
        match self {
            MsgType::Hello => 0x01,
            MsgType::Update => 0x02,
            MsgType::Setup => 0x03,
            MsgType::SearchR1 => 0x10,
            MsgType::SearchR2 => 0x11,
            MsgType::SearchR3 => 0x12,
            MsgType::Snapshot => 0x20,
            MsgType::Stats => 0x21,
            MsgType::Error => 0xEE,
        }
    }

    pub fn from_code(b: u8) -> Option<Self> {
        Self::REQUESTS
            .into_iter()
            .chain([MsgType::Error])
            .find(|t| t.code() == b)
    }

    pub fn response_code(self) -> u8 {
        self.code() | RESPONSE_BIT
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Malformed = 1,
    Version = 2,
    Oversized = 3,
    UnknownType = 4,
    Session = 5,
    NotInitialized = 6,
    Rejected = 7,
    Persistence = 8,
}

impl ErrorCode {
    pub fn from_byte(b: u8) -> Option<Self> {
        use ErrorCode::*;
        [Malformed, Version, Oversized, UnknownType, Session, NotInitialized, Rejected, Persistence]
            .into_iter()
            .find(|c| *c as u8 == b)
    }
}

/// A frame as it appears on the wire; `msg_type` is kept raw so unknown
/// types and response codes survive a round trip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: u8, payload: Vec<u8>) -> Self {
        Self {
            version: VERSION,
            msg_type,
            payload,
        }
    }

    pub fn request(t: MsgType, payload: Vec<u8>) -> Self {
        Self::new(t.code(), payload)
    }

    pub fn response(t: MsgType, payload: Vec<u8>) -> Self {
        Self::new(t.response_code(), payload)
    }

    pub fn error(code: ErrorCode, message: &str) -> Self {
        let mut payload = Vec::with_capacity(1 + message.len());
        payload.push(code as u8);
        payload.extend_from_slice(message.as_bytes());
        Self::new(MsgType::Error.code(), payload)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.push(self.msg_type);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8], max_payload: u64) -> ServiceResult<Self> {
        let (version, msg_type, len) = parse_header(bytes.get(..HEADER_LEN).ok_or_else(|| {
            ServiceError::Frame(format!("{} bytes is shorter than a header", bytes.len()))
        })?)?;
        if len > max_payload {
            return Err(ServiceError::Oversized { len, cap: max_payload });
        }
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != len {
            return Err(ServiceError::Frame(format!(
                "payload_len {len} but {} payload bytes",
                payload.len()
            )));
        }
        Ok(Self {
            version,
            msg_type,
            payload: payload.to_vec(),
        })
    }

    /// Splits an error frame into code and message.
    pub fn as_error(&self) -> Option<(ErrorCode, String)> {
        if self.msg_type != MsgType::Error.code() {
            return None;
        }
        let (&code, msg) = self.payload.split_first()?;
        Some((
            ErrorCode::from_byte(code).unwrap_or(ErrorCode::Malformed),
            String::from_utf8_lossy(msg).into_owned(),
        ))
    }
}

fn parse_header(h: &[u8]) -> ServiceResult<(u8, u8, u64)> {
    if h[..4] != MAGIC {
        return Err(ServiceError::Frame("bad magic".into()));
    }
    let len = u32::from_le_bytes(h[6..10].try_into().unwrap());
    Ok((h[4], h[5], u64::from(len)))
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before any
/// header byte.
pub fn read_frame<R: Read>(r: &mut R, max_payload: u64) -> ServiceResult<Option<Frame>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(ServiceError::Frame("stream ended inside a header".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (version, msg_type, len) = parse_header(&header)?;
    if len > max_payload {
        return Err(ServiceError::Oversized { len, cap: max_payload });
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Some(Frame {
        version,
        msg_type,
        payload,
    }))
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> ServiceResult<()> {
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let f = Frame::request(MsgType::SearchR2, vec![9, 8, 7]);
        assert_eq!(f.encode(), [b'E', b'S', b'P', b'C', 1, 0x11, 3, 0, 0, 0, 9, 8, 7]);
        assert_eq!(Frame::response(MsgType::Stats, vec![]).msg_type, 0xA1);
    }

    #[test]
    fn rejects_bad_magic_and_length() {
        let mut b = Frame::request(MsgType::Hello, vec![1]).encode();
        assert!(matches!(Frame::decode(&b[..b.len() - 1], 100), Err(ServiceError::Frame(_))));
        b[0] = b'X';
        assert!(matches!(Frame::decode(&b, 100), Err(ServiceError::Frame(_))));
    }

    #[test]
    fn cap_is_checked_before_reading_the_payload() {
        let mut b = Frame::request(MsgType::Update, vec![]).encode();
        b[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            read_frame(&mut &b[..], 1024),
            Err(ServiceError::Oversized { len: 4294967295, cap: 1024 })
        ));
    }

    #[test]
    fn clean_eof_and_torn_header() {
        assert!(read_frame(&mut &[][..], 10).unwrap().is_none());
        assert!(read_frame(&mut &b"ESP"[..], 10).is_err());
    }

    #[test]
    fn error_frames() {
        let f = Frame::error(ErrorCode::Session, "gone");
        assert_eq!(f.as_error(), Some((ErrorCode::Session, "gone".into())));
        assert_eq!(Frame::request(MsgType::Hello, vec![]).as_error(), None);
    }

    #[test]
    fn message_type_codes_are_distinct() {
        let mut codes: Vec<u8> = MsgType::REQUESTS.iter().map(|t| t.code()).collect();
        codes.extend(MsgType::REQUESTS.iter().map(|t| t.response_code()));
        codes.push(MsgType::Error.code());
        let n = codes.len();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), n);
        for t in MsgType::REQUESTS {
            assert_eq!(MsgType::from_code(t.code()), Some(t));
        }
        assert_eq!(MsgType::from_code(0x55), None);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            t in prop::sample::select(MsgType::REQUESTS.to_vec()),
            resp in any::<bool>(),
            payload in prop::collection::vec(any::<u8>(), 0..2048),
        ) {
            let f = if resp { Frame::response(t, payload) } else { Frame::request(t, payload) };
            let bytes = f.encode();
            prop_assert_eq!(&Frame::decode(&bytes, DEFAULT_MAX_FRAME).unwrap(), &f);
            prop_assert_eq!(read_frame(&mut &bytes[..], DEFAULT_MAX_FRAME).unwrap().unwrap(), f);
        }

        #[test]
        fn any_raw_type_round_trips(t in any::<u8>(), payload in prop::collection::vec(any::<u8>(), 0..64)) {
            let f = Frame::new(t, payload);
            prop_assert_eq!(Frame::decode(&f.encode(), 64).unwrap(), f);
        }
    }
}
