//! Worker pool: one REPL child process per worker thread.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use serde_json::Value;

use super::client::{Client, Session, SessionError};
use super::{Oracle, OracleError, OracleRequest, VerificationResult};

#[derive(Debug, Clone)]
pub struct PoolConfig {
    pub repl_path: PathBuf,
    pub repl_args: Vec<String>,
    /// Working directory for the REPL (a Lake project with Mathlib).
    pub project_root: Option<PathBuf>,
    pub size: usize,
    pub memory_cap_mb: Option<u64>,
    pub recycle_after: Option<usize>,
    /// Budget for building a base environment from the import block.
    pub import_timeout: Duration,
}

impl PoolConfig {
    pub fn new(repl_path: impl Into<PathBuf>) -> Self {
        Self {
            repl_path: repl_path.into(),
            repl_args: Vec::new(),
            project_root: None,
            size: default_pool_size(),
            memory_cap_mb: None,
            recycle_after: Some(200),
            import_timeout: Duration::from_secs(600),
        }
    }
}

/// Logical cores minus one, at least one.
pub fn default_pool_size() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().saturating_sub(1))
        .unwrap_or(1)
        .max(1)
}

struct ProcessSession {
    config: PoolConfig,
    child: Child,
    stdin: ChildStdin,
    responses: Receiver<Value>,
}

impl ProcessSession {
    fn spawn(config: &PoolConfig) -> Result<Self, OracleError> {
        let mut cmd = Command::new(&config.repl_path);
        cmd.args(&config.repl_args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if let Some(root) = &config.project_root {
            cmd.current_dir(root);
        }
        if let Some(mb) = config.memory_cap_mb {
            limit_memory(&mut cmd, mb);
        }
        let mut child = cmd.spawn().map_err(|e| {
            OracleError::ToolchainUnavailable(format!(
                "cannot start {}: {e}",
                config.repl_path.display()
            ))
        })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = unbounded();
        std::thread::spawn(move || read_responses(BufReader::new(stdout), tx));
        Ok(Self {
            config: config.clone(),
            child,
            stdin,
            responses: rx,
        })
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(unix)]
fn limit_memory(cmd: &mut Command, mb: u64) {
    use std::os::unix::process::CommandExt;
    let bytes = mb.saturating_mul(1024 * 1024) as libc::rlim_t;
    // SAFETY: setrlimit is async-signal-safe and touches only the child.
    unsafe {
        cmd.pre_exec(move || {
            let lim = libc::rlimit {
                rlim_cur: bytes,
                rlim_max: bytes,
            };
            if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn limit_memory(_cmd: &mut Command, _mb: u64) {
    tracing::warn!("memory caps are only supported on unix");
}

/// Accumulates stdout lines until they form one JSON value.
fn read_responses(reader: impl BufRead, tx: Sender<Value>) {
    let mut buf = String::new();
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() && buf.trim().is_empty() {
            continue;
        }
        buf.push_str(&line);
        buf.push('\n');
        match serde_json::from_str::<Value>(&buf) {
            Ok(v) => {
                buf.clear();
                if tx.send(v).is_err() {
                    break;
                }
            }
            Err(e) if e.is_eof() => {}
            Err(_) => {
                tracing::debug!("discarding unparsable REPL output: {}", buf.trim());
                buf.clear();
            }
        }
    }
}

impl Session for ProcessSession {
    fn request(&mut self, req: &Value, timeout: Duration) -> Result<Value, SessionError> {
        let line = format!("{req}\n\n");
        if let Err(e) = self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
        {
            return Err(SessionError::Crashed(format!("write failed: {e}")));
        }
        match self.responses.recv_timeout(timeout) {
            Ok(v) => Ok(v),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(SessionError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .wait()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|e| e.to_string());
                Err(SessionError::Crashed(format!("process exited ({status})")))
            }
        }
    }

    fn restart(&mut self) -> Result<(), OracleError> {
        self.kill();
        *self = ProcessSession::spawn(&self.config)?;
        Ok(())
    }
}

impl Drop for ProcessSession {
    fn drop(&mut self) {
        self.kill();
    }
}

struct Job {
    request: OracleRequest,
    reply: Sender<Result<VerificationResult, OracleError>>,
}

/// A fixed-size pool of REPL workers. Safe to share between threads; each
/// worker serves one request at a time.
pub struct ReplPool {
    jobs: Option<Sender<Job>>,
    workers: Vec<JoinHandle<()>>,
    size: usize,
}

impl ReplPool {
    /// Starts `config.size` workers. Fails if the REPL cannot be spawned.
    pub fn start(config: PoolConfig) -> Result<Self, OracleError> {
        let size = config.size.max(1);
        let (tx, rx) = unbounded::<Job>();
        let mut workers = Vec::with_capacity(size);
        for i in 0..size {
            let session = ProcessSession::spawn(&config)?;
            let client = Client::new(session, config.import_timeout, config.recycle_after);
            let rx = rx.clone();
            let handle = std::thread::Builder::new()
                .name(format!("repl-worker-{i}"))
                .spawn(move || worker_loop(client, rx))
                .map_err(|e| {
                    OracleError::ToolchainUnavailable(format!("cannot start worker thread: {e}"))
                })?;
            workers.push(handle);
        }
        tracing::debug!(size, repl = %config.repl_path.display(), "REPL pool started");
        Ok(Self {
            jobs: Some(tx),
            workers,
            size,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Stops accepting work, lets in-flight requests finish and joins workers.
    pub fn shutdown(&mut self) {
        self.jobs.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn worker_loop<S: Session>(mut client: Client<S>, jobs: Receiver<Job>) {
    for job in jobs {
        let result = client.verify(&job.request);
        let _ = job.reply.send(result);
    }
}

impl Oracle for ReplPool {
    fn verify(&self, request: &OracleRequest) -> Result<VerificationResult, OracleError> {
        let jobs = self.jobs.as_ref().ok_or(OracleError::PoolClosed)?;
        let (tx, rx) = bounded(1);
        jobs.send(Job {
            request: request.clone(),
            reply: tx,
        })
        .map_err(|_| OracleError::PoolClosed)?;
        rx.recv()
            .map_err(|_| OracleError::WorkerCrashed("worker thread exited".into()))?
    }
}

impl Drop for ReplPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}
