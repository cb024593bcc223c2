//! Child-process execution under a wall-clock timeout, an address-space
//! cap and an output cap.
//!
//! Every child runs in its own process group so a timeout kills helpers it
//! spawned as well. A global semaphore bounds how many children run at once.

use std::io::{self, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub wall_timeout: Duration,
    pub memory_cap: Option<u64>,
    pub output_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Termination {
    Exited(i32),
    Signaled(i32),
    TimedOut,
    OutputLimit,
}

impl Termination {
    pub fn is_success(&self) -> bool {
        *self == Termination::Exited(0)
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub termination: Termination,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub duration: Duration,
}

impl ProcessOutput {
    pub fn stdout_lossy(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }

    pub fn stderr_lossy(&self) -> String {
        String::from_utf8_lossy(&self.stderr).into_owned()
    }
}

#[derive(Debug)]
struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

static PROCESS_SLOTS: OnceLock<Semaphore> = OnceLock::new();

fn slots() -> &'static Semaphore {
    PROCESS_SLOTS.get_or_init(|| Semaphore {
        available: Mutex::new(thread::available_parallelism().map_or(4, |n| n.get())),
        freed: Condvar::new(),
    })
}

/// Sets the number of child processes allowed to run at once. Only the
/// first call (or first process launch) takes effect.
pub fn set_max_concurrent_processes(n: usize) -> bool {
    PROCESS_SLOTS
        .set(Semaphore {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        })
        .is_ok()
}

fn spawn_reader<R: Read + Send + 'static>(
    mut source: R,
    cap: usize,
    overflow: Arc<AtomicBool>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match source.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                    if n > room {
                        overflow.store(true, Ordering::SeqCst);
                        // keep draining so the child never blocks on a full pipe
                    }
                }
            }
        }
        kept
    })
}

fn kill_group(pid: u32) {
    // SAFETY: kill(2) with a negative pid signals the process group we created
    // in pre_exec; it has no memory-safety preconditions.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs `cmd`, feeding `stdin`, until it exits, times out or overflows the
/// output cap. Returns an error only when the process cannot be started.
pub fn run(mut cmd: Command, stdin: &[u8], limits: &Limits) -> io::Result<ProcessOutput> {
    let memory_cap = limits.memory_cap;
    cmd.stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    // SAFETY: only async-signal-safe libc calls run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            let no_core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            if let Some(cap) = memory_cap {
                let lim = libc::rlimit {
                    rlim_cur: cap as libc::rlim_t,
                    rlim_max: cap as libc::rlim_t,
                };
                if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                    return Err(io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }

    let _permit = slots().acquire();
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pid = child.id();

    let input = stdin.to_vec();
    let mut child_stdin = child.stdin.take().expect("stdin is piped");
    let writer = thread::spawn(move || {
        // a child that exits without reading its input closes the pipe early
        let _ = child_stdin.write_all(&input);
    });
    let overflow = Arc::new(AtomicBool::new(false));
    let out = spawn_reader(
        child.stdout.take().expect("stdout is piped"),
        limits.output_cap,
        overflow.clone(),
    );
    let err = spawn_reader(
        child.stderr.take().expect("stderr is piped"),
        limits.output_cap,
        overflow.clone(),
    );

    let mut forced: Option<Termination> = None;
    let mut pause = Duration::from_millis(1);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if forced.is_none() {
            if start.elapsed() >= limits.wall_timeout {
                forced = Some(Termination::TimedOut);
                kill_group(pid);
            } else if overflow.load(Ordering::SeqCst) {
                forced = Some(Termination::OutputLimit);
                kill_group(pid);
            }
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(10));
    };
    let duration = start.elapsed();
    // reap anything the child left behind so the pipes close
    kill_group(pid);

    let _ = writer.join();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    let termination = match forced {
        Some(t) => t,
        None if overflow.load(Ordering::SeqCst) => Termination::OutputLimit,
        None => match (status.code(), status.signal()) {
            (Some(code), _) => Termination::Exited(code),
            (None, Some(sig)) => Termination::Signaled(sig),
            (None, None) => Termination::Signaled(0),
        },
    };
    Ok(ProcessOutput {
        termination,
        stdout,
        stderr,
        duration,
    })
}
