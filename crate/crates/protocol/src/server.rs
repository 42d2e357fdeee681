//! TCP front end of the servo emulator.

use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::clock::Clock;
use crate::controller::ServoController;
use crate::frame::{encode_reply, Reply};
use crate::servo::ServoBank;

const POLL: Duration = Duration::from_millis(2);
const MAX_LINE: usize = 256;

/// Read-only copy of the emulator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub positions: [f64; 4],
    pub targets: [f64; 4],
    pub last_seq: Option<u64>,
    pub connected: bool,
    pub frames_handled: u64,
}

/// A running emulator. Dropping the handle stops the service.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    latest: Arc<Mutex<Snapshot>>,
    thread: Option<JoinHandle<ServoBank>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn snapshot(&self) -> Snapshot {
        *self.latest.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Stops the loop and hands back the servo bank.
    pub fn shutdown(mut self) -> ServoBank {
        self.stop.store(true, Ordering::SeqCst);
        let thread = self.thread.take().expect("joined once");
        thread.join().expect("emulator thread panicked")
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves one client at a time on a background thread.
pub fn serve<C: Clock>(addr: impl ToSocketAddrs, bank: ServoBank, clock: C) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let mut service = Service {
        controller: ServoController::new(bank),
        clock,
        frames_handled: 0,
        latest: Arc::new(Mutex::new(Snapshot {
            time: 0.0,
            positions: bank.positions(),
            targets: bank.targets(),
            last_seq: None,
            connected: false,
            frames_handled: 0,
        })),
    };
    let latest = service.latest.clone();
    let flag = stop.clone();
    let thread = thread::Builder::new()
        .name("servo-emulator".into())
        .spawn(move || {
            service.run(&listener, &flag);
            *service.controller.bank()
        })?;
    log::info!("servo emulator listening on {local}");
    Ok(ServerHandle {
        addr: local,
        stop,
        latest,
        thread: Some(thread),
    })
}

struct Service<C> {
    controller: ServoController,
    clock: C,
    frames_handled: u64,
    latest: Arc<Mutex<Snapshot>>,
}

impl<C: Clock> Service<C> {
    fn run(&mut self, listener: &TcpListener, stop: &AtomicBool) {
        self.controller.tick(self.clock.now());
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    log::info!("client {peer} connected");
                    if let Err(e) = self.session(stream, stop) {
                        log::warn!("client {peer}: {e}");
                    }
                    self.controller.freeze();
                    self.publish(false);
                    log::info!("client {peer} gone, servos frozen");
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    self.controller.tick(self.clock.now());
                    self.publish(false);
                    thread::sleep(POLL);
                }
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    }

    fn session(&mut self, stream: TcpStream, stop: &AtomicBool) -> io::Result<()> {
        stream.set_nonblocking(false)?;
        stream.set_read_timeout(Some(POLL))?;
        stream.set_nodelay(true)?;
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        self.controller.begin_session();
        self.publish(true);
        let mut line = Vec::with_capacity(MAX_LINE);
        let mut overlong = false;
        while !stop.load(Ordering::SeqCst) {
            match reader.read_until(b'\n', &mut line) {
                Ok(0) => return Ok(()),
                Ok(_) if line.last() != Some(&b'\n') => return Ok(()),
                Ok(_) => {
                    let reply = if overlong {
                        overlong = false;
                        Reply::Nack {
                            seq: 0,
                            reason: "line too long".into(),
                        }
                    } else {
                        self.controller.handle_line(&line, self.clock.now())
                    };
                    line.clear();
                    self.frames_handled += 1;
                    let bytes = encode_reply(&reply).map_err(|e| io::Error::new(ErrorKind::InvalidData, e))?;
                    writer.write_all(&bytes)?;
                    self.publish(true);
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    // partial bytes stay in `line` until the newline arrives
                    if line.len() > MAX_LINE {
                        overlong = true;
                        line.clear();
                    }
                    self.controller.tick(self.clock.now());
                    self.publish(true);
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn publish(&self, connected: bool) {
        let bank = self.controller.bank();
        let snap = Snapshot {
            time: self.clock.now(),
            positions: bank.positions(),
            targets: bank.targets(),
            last_seq: self.controller.last_seq(),
            connected,
            frames_handled: self.frames_handled,
        };
        *self.latest.lock().unwrap_or_else(|e| e.into_inner()) = snap;
    }
}
