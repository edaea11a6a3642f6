//! Multi-connection server. Searches pin the database version current at
//! round 1 and keep it for rounds 2 and 3; updates copy-on-write a new
//! version under an exclusive commit section, so readers never wait on a
//! writer longer than one pointer swap plus, when a search holds the old
//! version, one clone.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use csse_core::codec::{Reader, Writer};
use csse_core::messages::{Round1Request, Round2Request, Round2Response, Round3Request, SetupMessage, UpdateMessage};
use csse_core::server::{EncryptedDatabase, PendingSearch};
use rand::RngCore;

use crate::config::ServerConfig;
use crate::error::{ServiceError, ServiceResult};
use crate::persist;
use crate::wire::{read_frame, write_frame, ErrorCode, Frame, MsgType, VERSION};

pub const SESSION_ID_LEN: usize = 8;

struct Session {
    snapshot: Arc<EncryptedDatabase>,
    pending: Option<PendingSearch>,
    last_used: Instant,
}

struct Failure(ErrorCode, String);

impl From<csse_core::Error> for Failure {
    fn from(e: csse_core::Error) -> Self {
        let code = match e {
            csse_core::Error::Decode(_)
            | csse_core::Error::NonCanonical(_)
            | csse_core::Error::LengthMismatch { .. } => ErrorCode::Malformed,
            _ => ErrorCode::Rejected,
        };
        Failure(code, e.to_string())
    }
}

type Handled = Result<Vec<u8>, Failure>;

/// State shared by every connection.
pub struct Shared {
    config: ServerConfig,
    db: RwLock<Option<Arc<EncryptedDatabase>>>,
    commit: Mutex<()>,
    sessions: Mutex<HashMap<u64, Session>>,
}

impl Shared {
    pub fn new(config: ServerConfig, db: Option<EncryptedDatabase>) -> Self {
        Self {
            config,
            db: RwLock::new(db.map(Arc::new)),
            commit: Mutex::new(()),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// The current database version, if initialized.
    pub fn current(&self) -> Option<Arc<EncryptedDatabase>> {
        self.db.read().unwrap().clone()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn require_db(&self) -> Result<Arc<EncryptedDatabase>, Failure> {
        self.current()
            .ok_or_else(|| Failure(ErrorCode::NotInitialized, "server has no database yet".into()))
    }

    /// Answers one request frame.
    pub fn handle(&self, frame: &Frame) -> Frame {
        if frame.version != VERSION {
            return Frame::error(
                ErrorCode::Version,
                &format!("version {} not supported, expected {VERSION}", frame.version),
            );
        }
        let t = match MsgType::from_code(frame.msg_type) {
            Some(t) if t != MsgType::Error => t,
            _ => {
                return Frame::error(
                    ErrorCode::UnknownType,
                    &format!("unknown message type 0x{:02x}", frame.msg_type),
                )
            }
        };
        let p = &frame.payload;
        let out = match t {
            MsgType::Hello => self.hello(),
            MsgType::Setup => self.setup(p),
            MsgType::Update => self.update(p),
            MsgType::SearchR1 => self.round1(p),
            MsgType::SearchR2 => self.round2(p),
            MsgType::SearchR3 => self.round3(p),
            MsgType::Snapshot => self.snapshot(),
            MsgType::Stats => self.stats(),
            MsgType::Error => unreachable!(),
        };
        match out {
            Ok(payload) => Frame::response(t, payload),
            Err(Failure(code, msg)) => Frame::error(code, &msg),
        }
    }

    fn hello(&self) -> Handled {
        let (epoch, m, k) = self.current().map_or((0, 0, 0), |db| (db.epoch(), db.m(), db.k()));
        let mut w = Writer::new();
        w.u8(VERSION).u64(epoch).u64(m).u16(k);
        Ok(w.into_bytes())
    }

    fn setup(&self, p: &[u8]) -> Handled {
        let msg = SetupMessage::from_bytes(p)?;
        let db = EncryptedDatabase::from_setup(msg)?;
        let _commit = self.commit.lock().unwrap();
        let mut slot = self.db.write().unwrap();
        if slot.is_some() {
            return Err(Failure(ErrorCode::Rejected, "server already initialized".into()));
        }
        *slot = Some(Arc::new(db));
        Ok(Vec::new())
    }

    fn update(&self, p: &[u8]) -> Handled {
        let msg = UpdateMessage::from_bytes(p)?;
        let _commit = self.commit.lock().unwrap();
        let mut slot = self.db.write().unwrap();
        let db = slot
            .as_mut()
            .ok_or_else(|| Failure(ErrorCode::NotInitialized, "server has no database yet".into()))?;
        // clones only if a search session still pins this version
        Arc::make_mut(db).apply_update(msg)?;
        Ok(Vec::new())
    }

    fn round1(&self, p: &[u8]) -> Handled {
        let req = Round1Request::from_bytes(p)?;
        let snapshot = self.require_db()?;
        let resp = snapshot.search_round1(&req);
        let mut sessions = self.sessions.lock().unwrap();
        self.expire(&mut sessions);
        let id = loop {
            let id = rand::thread_rng().next_u64();
            if id != 0 && !sessions.contains_key(&id) {
                break id;
            }
        };
        sessions.insert(
            id,
            Session {
                snapshot,
                pending: None,
                last_used: Instant::now(),
            },
        );
        let mut out = id.to_le_bytes().to_vec();
        out.extend(resp.to_bytes());
        Ok(out)
    }

    fn round2(&self, p: &[u8]) -> Handled {
        let (id, body) = split_session(p)?;
        let req = Round2Request::from_bytes(body)?;
        let snapshot = {
            let mut sessions = self.sessions.lock().unwrap();
            self.expire(&mut sessions);
            match sessions.get_mut(&id) {
                Some(s) if s.pending.is_none() => {
                    s.last_used = Instant::now();
                    s.snapshot.clone()
                }
                Some(_) => return Err(session_error("round 2 already answered for this session")),
                None => return Err(session_error("unknown or expired session")),
            }
        };
        let result = snapshot.search_round2(&req);
        let mut sessions = self.sessions.lock().unwrap();
        match result {
            Ok((resp @ Round2Response::Positions(_), pending)) => {
                if let Some(s) = sessions.get_mut(&id) {
                    s.pending = Some(pending);
                }
                Ok(resp.to_bytes())
            }
            Ok((resp, _)) => {
                sessions.remove(&id);
                Ok(resp.to_bytes())
            }
            Err(e) => {
                sessions.remove(&id);
                Err(e.into())
            }
        }
    }

    fn round3(&self, p: &[u8]) -> Handled {
        let (id, body) = split_session(p)?;
        let req = Round3Request::from_bytes(body)?;
        let session = {
            let mut sessions = self.sessions.lock().unwrap();
            self.expire(&mut sessions);
            match sessions.get(&id) {
                Some(s) if s.pending.is_some() => sessions.remove(&id).unwrap(),
                Some(_) => return Err(session_error("round 3 before round 2")),
                None => return Err(session_error("unknown or expired session")),
            }
        };
        let pending = session.pending.expect("checked above");
        Ok(session.snapshot.search_round3(pending, &req)?.to_bytes())
    }

    fn snapshot(&self) -> Handled {
        let path = self
            .config
            .snapshot_path
            .as_ref()
            .ok_or_else(|| Failure(ErrorCode::Persistence, "no snapshot path configured".into()))?;
        // serialize with updates so the file is one committed version
        let _commit = self.commit.lock().unwrap();
        let db = self.require_db()?;
        persist::persist(&db, path).map_err(|e| Failure(ErrorCode::Persistence, e.to_string()))?;
        let mut w = Writer::new();
        w.u64(db.entry_count() as u64);
        Ok(w.into_bytes())
    }

    fn stats(&self) -> Handled {
        let db = self.require_db()?;
        let mut w = Writer::new();
        w.u64(db.entry_count() as u64)
            .u64(db.m())
            .u16(db.k())
            .u64(db.epoch())
            .u64(estimated_fill(db.m(), db.k(), db.entry_count() as u64).to_bits())
            .u32(self.session_count() as u32);
        Ok(w.into_bytes())
    }

    fn expire(&self, sessions: &mut HashMap<u64, Session>) {
        let timeout = self.config.session_timeout();
        sessions.retain(|_, s| s.last_used.elapsed() <= timeout);
    }
}

fn session_error(msg: &str) -> Failure {
    Failure(ErrorCode::Session, msg.into())
}

fn split_session(p: &[u8]) -> Result<(u64, &[u8]), Failure> {
    let mut r = Reader::new(p);
    let id = r
        .u64()
        .map_err(|_| Failure(ErrorCode::Malformed, "missing session id".into()))?;
    Ok((id, &p[SESSION_ID_LEN..]))
}

/// Expected fraction of set bits after `n` insertions. The filter itself is
/// encrypted, so the server can only estimate it from the entry count, one
/// cross-tag per TSet entry.
pub fn estimated_fill(m: u64, k: u16, n: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    1.0 - (-(f64::from(k) * n as f64) / m as f64).exp()
}

fn serve_connection(shared: &Shared, stream: TcpStream) -> ServiceResult<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let cap = shared.config.max_frame_bytes;
    loop {
        let frame = match read_frame(&mut reader, cap) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(ServiceError::Oversized { len, cap }) => {
                let msg = format!("frame of {len} bytes exceeds the {cap}-byte cap");
                write_frame(&mut writer, &Frame::error(ErrorCode::Oversized, &msg))?;
                return Ok(());
            }
            Err(ServiceError::Frame(msg)) => {
                write_frame(&mut writer, &Frame::error(ErrorCode::Malformed, &msg))?;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        write_frame(&mut writer, &shared.handle(&frame))?;
    }
}

/// A listener running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shared(&self) -> &Arc<Shared> {
        &self.shared
    }

    /// Blocks until the listener stops.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `config.listen`, restores the snapshot if one exists, and starts
/// accepting connections.
pub fn spawn(config: ServerConfig) -> ServiceResult<ServerHandle> {
    let db = match &config.snapshot_path {
        Some(p) if p.exists() => Some(persist::restore(p)?),
        _ => None,
    };
    let listener = TcpListener::bind(config.listen)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared::new(config, db));
    let stop = Arc::new(AtomicBool::new(false));

    let thread = {
        let shared = shared.clone();
        let stop = stop.clone();
        thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let stream = match conn {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        continue;
                    }
                };
                let shared = shared.clone();
                thread::spawn(move || {
                    let peer = stream.peer_addr().ok();
                    if let Err(e) = serve_connection(&shared, stream) {
                        log::debug!("connection {peer:?} closed: {e}");
                    }
                });
            }
        })
    };
    Ok(ServerHandle {
        addr,
        shared,
        stop,
        thread: Some(thread),
    })
}
