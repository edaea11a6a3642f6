//! Client side of the wire protocol.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;

use csse_core::client::ClientState;
use csse_core::codec::Reader;
use csse_core::messages::UpdateMessage;
use csse_core::protocol::{run_search, run_setup, run_update, Channel, SearchOutcome, ServerInfo};
use csse_core::{SearchQuery, SecretKeyBundle, UpdateTriple};
use rand::rngs::OsRng;

use crate::error::{ServiceError, ServiceResult};
use crate::wire::{read_frame, write_frame, Frame, MsgType, DEFAULT_MAX_FRAME, VERSION};

const KEYFILE_HEADER: &str = "csse-key-v1";

/// Reply to STATS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub entries: u64,
    pub m: u64,
    pub k: u16,
    pub epoch: u64,
    /// Estimated from the entry count; the filter contents are encrypted.
    pub fill_ratio: f64,
    pub sessions: u32,
}

/// One TCP connection speaking the framed protocol.
pub struct RemoteChannel {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    session: Option<u64>,
    max_frame: u64,
}

impl RemoteChannel {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> ServiceResult<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            session: None,
            max_frame: DEFAULT_MAX_FRAME,
        })
    }

    pub fn with_max_frame(mut self, cap: u64) -> Self {
        self.max_frame = cap;
        self
    }

    /// Sends a raw frame and returns the raw reply.
    pub fn exchange(&mut self, frame: &Frame) -> ServiceResult<Frame> {
        write_frame(&mut self.writer, frame)?;
        read_frame(&mut self.reader, self.max_frame)?
            .ok_or_else(|| ServiceError::Frame("server closed the connection".into()))
    }

    pub fn call(&mut self, t: MsgType, payload: Vec<u8>) -> ServiceResult<Vec<u8>> {
        let reply = self.exchange(&Frame::request(t, payload))?;
        if let Some((code, message)) = reply.as_error() {
            return Err(ServiceError::Remote { code, message });
        }
        if reply.msg_type != t.response_code() {
            return Err(ServiceError::Frame(format!(
                "expected reply type 0x{:02x}, got 0x{:02x}",
                t.response_code(),
                reply.msg_type
            )));
        }
        Ok(reply.payload)
    }

    /// HELLO without the initialization check: `(epoch, m, k)`, all zero on
    /// a server that has not been set up.
    pub fn hello_raw(&mut self) -> ServiceResult<(u64, u64, u16)> {
        let p = self.call(MsgType::Hello, Vec::new())?;
        let mut r = Reader::new(&p);
        let version = r.u8()?;
        if version != VERSION {
            return Err(ServiceError::Frame(format!("server speaks version {version}")));
        }
        let out = (r.u64()?, r.u64()?, r.u16()?);
        r.finish()?;
        Ok(out)
    }

    pub fn stats(&mut self) -> ServiceResult<Stats> {
        let p = self.call(MsgType::Stats, Vec::new())?;
        let mut r = Reader::new(&p);
        let s = Stats {
            entries: r.u64()?,
            m: r.u64()?,
            k: r.u16()?,
            epoch: r.u64()?,
            fill_ratio: f64::from_bits(r.u64()?),
            sessions: r.u32()?,
        };
        r.finish()?;
        Ok(s)
    }

    /// Asks the server to persist; returns the number of TSet entries written.
    pub fn snapshot(&mut self) -> ServiceResult<u64> {
        let p = self.call(MsgType::Snapshot, Vec::new())?;
        let mut r = Reader::new(&p);
        let n = r.u64()?;
        r.finish()?;
        Ok(n)
    }

    fn session_payload(&self, body: &[u8]) -> csse_core::Result<Vec<u8>> {
        let id = self
            .session
            .ok_or_else(|| csse_core::Error::Protocol("no open search session".into()))?;
        let mut p = id.to_le_bytes().to_vec();
        p.extend_from_slice(body);
        Ok(p)
    }
}

impl Channel for RemoteChannel {
    fn hello(&mut self) -> csse_core::Result<ServerInfo> {
        let (epoch, m, k) = self.hello_raw()?;
        if m == 0 {
            return Err(csse_core::Error::Protocol("server not initialized".into()));
        }
        Ok(ServerInfo { epoch, m, k })
    }

    fn setup(&mut self, payload: &[u8]) -> csse_core::Result<()> {
        self.call(MsgType::Setup, payload.to_vec())?;
        Ok(())
    }

    fn update(&mut self, payload: &[u8]) -> csse_core::Result<()> {
        self.call(MsgType::Update, payload.to_vec())?;
        Ok(())
    }

    fn round1(&mut self, payload: &[u8]) -> csse_core::Result<Vec<u8>> {
        self.session = None;
        let p = self.call(MsgType::SearchR1, payload.to_vec())?;
        if p.len() < 8 {
            return Err(csse_core::Error::Decode("round-1 reply without session id".into()));
        }
        let (id, rest) = p.split_at(8);
        self.session = Some(u64::from_le_bytes(id.try_into().unwrap()));
        Ok(rest.to_vec())
    }

    fn round2(&mut self, payload: &[u8]) -> csse_core::Result<Vec<u8>> {
        let p = self.session_payload(payload)?;
        Ok(self.call(MsgType::SearchR2, p)?)
    }

    fn round3(&mut self, payload: &[u8]) -> csse_core::Result<Vec<u8>> {
        let p = self.session_payload(payload)?;
        self.session = None;
        Ok(self.call(MsgType::SearchR3, p)?)
    }
}

/// A connection plus the secret keys: the searcher's (and owner's) handle.
pub struct RemoteClient {
    channel: RemoteChannel,
    sk: SecretKeyBundle,
}

impl RemoteClient {
    pub fn new(channel: RemoteChannel, sk: SecretKeyBundle) -> Self {
        Self { channel, sk }
    }

    pub fn keys(&self) -> &SecretKeyBundle {
        &self.sk
    }

    pub fn channel(&mut self) -> &mut RemoteChannel {
        &mut self.channel
    }

    /// Creates fresh keys, initializes the server, and returns the client.
    pub fn setup<A: ToSocketAddrs>(
        addr: A,
        capacity: u64,
        target_fp: f64,
    ) -> ServiceResult<(Self, ClientState)> {
        let mut channel = RemoteChannel::connect(addr)?;
        let (sk, st) = run_setup(&mut channel, capacity, target_fp, &mut OsRng)?;
        Ok((Self { channel, sk }, st))
    }

    pub fn update(&mut self, st: &mut ClientState, batch: &[UpdateTriple]) -> ServiceResult<UpdateMessage> {
        Ok(run_update(&self.sk, st, &mut self.channel, batch, &mut OsRng)?)
    }

    pub fn search(&mut self, query: &SearchQuery) -> ServiceResult<SearchOutcome> {
        Ok(run_search(&self.sk, &mut self.channel, query, &mut OsRng)?)
    }
}

pub fn client_connect<A: ToSocketAddrs>(addr: A, keyfile: &Path) -> ServiceResult<RemoteClient> {
    let sk = read_keyfile(keyfile)?;
    Ok(RemoteClient::new(RemoteChannel::connect(addr)?, sk))
}

pub fn write_keyfile(path: &Path, sk: &SecretKeyBundle) -> ServiceResult<()> {
    let body = format!("{KEYFILE_HEADER}\n{}\n", hex::encode(sk.to_bytes()));
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    use std::io::Write;
    opts.open(path)?.write_all(body.as_bytes())?;
    Ok(())
}

pub fn read_keyfile(path: &Path) -> ServiceResult<SecretKeyBundle> {
    let s = std::fs::read_to_string(path)?;
    let bad = |m: &str| ServiceError::Config(format!("{}: {m}", path.display()));
    let mut lines = s.lines();
    if lines.next() != Some(KEYFILE_HEADER) {
        return Err(bad("not a key file"));
    }
    let bytes = hex::decode(lines.next().unwrap_or("").trim()).map_err(|_| bad("bad hex"))?;
    SecretKeyBundle::from_bytes(&bytes).map_err(|e| bad(&e.to_string()))
}
