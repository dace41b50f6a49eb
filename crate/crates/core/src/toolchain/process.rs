use std::io::Read;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

pub(crate) struct Captured {
    pub status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

pub(crate) enum RunError {
    Spawn(std::io::Error),
    TimedOut,
}

/// Runs `cmd` to completion or kills it after `budget`.
pub(crate) fn run_with_timeout(mut cmd: Command, budget: Duration) -> Result<Captured, RunError> {
    log::debug!("exec {cmd:?}");
    let mut child =
        cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().map_err(RunError::Spawn)?;
    let drain = |mut r: Box<dyn Read + Send>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("stdout piped")));
    let err = drain(Box::new(child.stderr.take().expect("stderr piped")));
    let status = match child.wait_timeout(budget).map_err(RunError::Spawn)? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(RunError::TimedOut);
        }
    };
    Ok(Captured {
        status: status.code(),
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
    })
}
