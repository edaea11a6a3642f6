use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::rngs::OsRng;

use csse_cli::audit::audit;
use csse_cli::bench::{self, Profile, Transport};
use csse_cli::ingest::ingest;
use csse_cli::owner::OwnerState;
use csse_cli::query::parse_query;
use csse_cli::recording::{recorded_search, recorded_update};
use csse_cli::workload::batches;
use csse_cli::{CliError, CliResult};
use csse_core::bloom::BloomParams;
use csse_core::client::setup_with_keys;
use csse_core::protocol::{run_search, run_update, Channel, RecordingChannel};
use csse_core::transcript::SearchTranscript;
use csse_core::SecretKeyBundle;
use csse_service::{read_keyfile, spawn, write_keyfile, RemoteChannel, ServerConfig};

#[derive(Parser)]
#[command(name = "csse", version, about = "Conjunctive searchable encryption: owner, searcher, server, and test tooling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a fresh secret key file.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Initialize an empty server database and write the owner state file.
    Init {
        #[arg(long)]
        server: SocketAddr,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        state: PathBuf,
        /// Maximum number of triples the filter is sized for.
        #[arg(long)]
        capacity: u64,
        #[arg(long, default_value_t = 1e-6)]
        fp_rate: f64,
    },
    /// Ingest a JSON-lines dataset and send it as update batches.
    Update {
        #[arg(long)]
        server: SocketAddr,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        state: PathBuf,
        dataset: PathBuf,
        /// Documents per update batch.
        #[arg(long, default_value_t = 500)]
        batch_docs: usize,
        /// Append the exchanged messages to this transcript file.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run a conjunctive query such as "w1 AND w2".
    Search {
        #[arg(long)]
        server: SocketAddr,
        #[arg(long)]
        key: PathBuf,
        query: String,
        /// Append the exchanged messages to this transcript file (needs --state).
        #[arg(long, requires = "state")]
        transcript: Option<PathBuf>,
        /// Owner state, used only for transcript ground truth.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Latency sweeps; prints CSV and a verdict per sweep.
    Bench {
        #[arg(long)]
        profile: String,
        /// local, or tcp for a fresh loopback daemon per cell.
        #[arg(long, default_value = "local")]
        transport: String,
        #[arg(long)]
        runs: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a transcript for leakage beyond the allowed profile.
    Audit {
        transcript: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the server daemon.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn keys(path: &Path) -> CliResult<SecretKeyBundle> {
    read_keyfile(path).map_err(|e| CliError::user(format!("key file: {e}")))
}

fn open_transcript(path: &Path) -> CliResult<SearchTranscript> {
    if path.exists() {
        SearchTranscript::load(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
    } else {
        Ok(SearchTranscript::new())
    }
}

fn save_transcript(path: &Path, t: &SearchTranscript) -> CliResult<()> {
    t.save(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn run(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Keygen { out } => {
            let sk = SecretKeyBundle::generate(&mut OsRng);
            write_keyfile(&out, &sk).map_err(|e| CliError::user(format!("{}: {e}", out.display())))
        }

        Cmd::Init {
            server,
            key,
            state,
            capacity,
            fp_rate,
        } => {
            let sk = keys(&key)?;
            let params = BloomParams::derive(capacity, fp_rate)?;
            let (st, msg) = setup_with_keys(&sk, params);
            RemoteChannel::connect(server)?.setup(&msg.to_bytes())?;
            OwnerState::new(st).save(&state)?;
            eprintln!("initialized: m = {} bits, k = {}", params.m, params.k);
            Ok(())
        }

        Cmd::Update {
            server,
            key,
            state,
            dataset,
            batch_docs,
            transcript,
        } => {
            let sk = keys(&key)?;
            let mut owner = OwnerState::load(&state)?;
            let mut ledger = owner.ledger.clone();
            let records = ingest(&dataset, &mut ledger)?;
            let mut ch = RecordingChannel::new(RemoteChannel::connect(server)?);
            if let Some(p) = &transcript {
                *ch.transcript_mut() = open_transcript(p)?;
            }
            let mut oracle = owner.oracle();
            let mut sent = 0;
            for (chunk, batch) in records.chunks(batch_docs.max(1)).zip(batches(&records, batch_docs)) {
                let result = if transcript.is_some() {
                    recorded_update(&mut ch, &sk, &mut owner.client, &mut oracle, &batch, &mut OsRng)
                } else {
                    run_update(&sk, &mut owner.client, ch.inner_mut(), &batch, &mut OsRng).map(|_| ())
                };
                if let Err(e) = result {
                    // keep whatever the server already accepted
                    owner.save(&state)?;
                    if let Some(p) = &transcript {
                        save_transcript(p, ch.transcript())?;
                    }
                    return Err(e.into());
                }
                for r in chunk {
                    owner.ledger.apply(r.clone()).expect("validated at ingestion");
                }
                owner.history.extend_from_slice(chunk);
                owner.save(&state)?;
                sent += batch.len();
            }
            if let Some(p) = &transcript {
                save_transcript(p, ch.transcript())?;
            }
            eprintln!("sent {} records as {sent} triples", records.len());
            Ok(())
        }

        Cmd::Search {
            server,
            key,
            query,
            transcript,
            state,
        } => {
            let sk = keys(&key)?;
            let q = parse_query(&query)?;
            let mut remote = RemoteChannel::connect(server)?;
            if remote.hello_raw()?.1 == 0 {
                // uninitialized server: nothing is indexed
                return Ok(());
            }
            let out = match (&transcript, &state) {
                (Some(tp), Some(sp)) => {
                    let owner = OwnerState::load(sp)?;
                    let mut ch = RecordingChannel::new(remote);
                    *ch.transcript_mut() = open_transcript(tp)?;
                    let out = recorded_search(&mut ch, &sk, &owner.oracle(), &q, &mut OsRng)?;
                    save_transcript(tp, ch.transcript())?;
                    out
                }
                _ => run_search(&sk, &mut remote, &q, &mut OsRng)?,
            };
            if let Some(w) = &out.not_indexed {
                eprintln!("note: keyword not indexed: {w}");
            }
            for id in &out.ids {
                println!("{id}");
            }
            Ok(())
        }

        Cmd::Bench {
            profile,
            transport,
            runs,
            out,
        } => {
            let profile: Profile = profile.parse()?;
            let transport: Transport = transport.parse()?;
            let mut cfg = profile.config();
            if let Some(r) = runs {
                cfg.runs = r;
            }
            let report = bench::run(&cfg, transport, |cell| log::info!("finished {cell}"))?;
            match &out {
                Some(p) => {
                    let f = std::fs::File::create(p).map_err(|e| CliError::user(format!("{}: {e}", p.display())))?;
                    report.write_csv(f)?;
                }
                None => report.write_csv(std::io::stdout().lock())?,
            }
            for v in &report.verdicts {
                eprintln!("{v}");
            }
            Ok(())
        }

        Cmd::Audit { transcript, json } => {
            let t = SearchTranscript::load(&transcript)
                .map_err(|e| CliError::user(format!("{}: {e}", transcript.display())))?;
            let report = audit(&t);
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.summary());
            }
            Ok(())
        }

        Cmd::Serve { config, listen } => {
            let mut cfg = ServerConfig::load(config.as_deref())?;
            if let Some(l) = listen {
                cfg.listen = l;
            }
            let handle = spawn(cfg)?;
            eprintln!("listening on {}", handle.addr());
            handle.join();
            Ok(())
        }
    }
}
