use std::io::{self, Read};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use super::frame::{decode_body, frame_len, write_frame, Envelope, FrameError};
use super::{CallError, Component};
use crate::engine::PreemptHandle;

const POLL: Duration = Duration::from_millis(50);

enum ReadError {
    Frame(FrameError),
    /// Peer closed the connection between frames.
    Closed,
    TimedOut,
    Stopped,
}

/// Reads one frame in short slices so a deadline or stop request is noticed
/// while waiting. Partial progress survives the slices.
fn read_polling(
    stream: &mut TcpStream,
    deadline: Option<Instant>,
    stop: &dyn Fn() -> bool,
) -> Result<Envelope, ReadError> {
    stream
        .set_read_timeout(Some(POLL))
        .map_err(|e| ReadError::Frame(e.into()))?;
    let mut header = [0u8; 4];
    fill(stream, &mut header, true, deadline, stop)?;
    let n = frame_len(header).map_err(ReadError::Frame)?;
    let mut body = vec![0u8; n];
    fill(stream, &mut body, false, deadline, stop)?;
    decode_body(&body).map_err(ReadError::Frame)
}

fn fill(
    stream: &mut TcpStream,
    buf: &mut [u8],
    at_boundary: bool,
    deadline: Option<Instant>,
    stop: &dyn Fn() -> bool,
) -> Result<(), ReadError> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) if at_boundary && filled == 0 => return Err(ReadError::Closed),
            Ok(0) => {
                return Err(ReadError::Frame(FrameError::Incomplete {
                    have: filled,
                    need: buf.len(),
                }))
            }
            Ok(k) => filled += k,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                if stop() {
                    return Err(ReadError::Stopped);
                }
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    return Err(ReadError::TimedOut);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ReadError::Frame(e.into())),
        }
    }
    Ok(())
}

/// Client side of one socket component: strict request/response alternation.
///
/// Connects lazily on the first call. A timeout or cancellation drops the
/// connection, so a late answer can never be mistaken for the next one. A
/// response whose id differs from the request's poisons the client for good.
#[derive(Debug)]
pub struct SocketClient {
    endpoint: String,
    stream: Option<TcpStream>,
    next_id: u64,
    poisoned: Option<String>,
}

impl SocketClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        SocketClient {
            endpoint: endpoint.into(),
            stream: None,
            next_id: 1,
            poisoned: None,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.is_some()
    }

    fn connect(&self, timeout: Duration) -> Result<TcpStream, CallError> {
        let addrs: Vec<SocketAddr> = self
            .endpoint
            .to_socket_addrs()
            .map_err(|e| CallError::Transport(format!("cannot resolve `{}`: {e}", self.endpoint)))?
            .collect();
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout.max(Duration::from_millis(1))) {
                Ok(s) => {
                    s.set_nodelay(true).ok();
                    return Ok(s);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(CallError::Transport(match last {
            Some(e) => format!("cannot connect to `{}`: {e}", self.endpoint),
            None => format!("`{}` resolved to no address", self.endpoint),
        }))
    }

    /// Sends one request and waits for its response payload.
    pub fn call(
        &mut self,
        op: &str,
        payload: &Json,
        timeout: Duration,
        cancel: Option<&PreemptHandle>,
    ) -> Result<Json, CallError> {
        if let Some(why) = &self.poisoned {
            return Err(CallError::Poisoned(why.clone()));
        }
        let request = Envelope::from_json(self.next_id, op, payload.clone())
            .map_err(|e| CallError::Protocol(super::ProtocolError::general(e.to_string())))?;
        let envelope = self.exchange(&request, timeout, cancel)?;
        if envelope.id != request.id {
            let why = format!(
                "response id {} does not match request id {}",
                envelope.id, request.id
            );
            self.poisoned = Some(why.clone());
            self.stream = None;
            return Err(CallError::Poisoned(why));
        }
        if let Some(m) = envelope.error_message() {
            return Err(CallError::Failed(m.to_owned()));
        }
        Ok(envelope.payload_json())
    }

    /// Writes `request` verbatim and returns whatever envelope comes back.
    pub fn exchange(
        &mut self,
        request: &Envelope,
        timeout: Duration,
        cancel: Option<&PreemptHandle>,
    ) -> Result<Envelope, CallError> {
        let deadline = Instant::now() + timeout;
        self.next_id = self.next_id.max(request.id + 1);
        let mut stream = match self.stream.take() {
            Some(s) => s,
            None => self.connect(timeout)?,
        };
        if let Err(e) = write_frame(&mut stream, request) {
            return Err(CallError::Transport(format!(
                "send to `{}` failed: {e}",
                self.endpoint
            )));
        }
        let stop = || cancel.is_some_and(PreemptHandle::is_preempted);
        match read_polling(&mut stream, Some(deadline), &stop) {
            Ok(env) => {
                self.stream = Some(stream);
                Ok(env)
            }
            Err(ReadError::TimedOut) => Err(CallError::Timeout {
                component: self.endpoint.clone(),
                after: timeout,
            }),
            Err(ReadError::Stopped) => Err(CallError::Cancelled),
            Err(ReadError::Closed) => Err(CallError::Transport(format!(
                "`{}` closed the connection",
                self.endpoint
            ))),
            Err(ReadError::Frame(FrameError::Io(e))) => Err(CallError::Transport(e.to_string())),
            Err(ReadError::Frame(e)) => Err(CallError::Protocol(super::ProtocolError::general(
                e.to_string(),
            ))),
        }
    }
}

/// Serves one component over TCP, one connection at a time.
///
/// A malformed frame is answered with an error envelope (id 0) and the
/// connection is kept; an oversized or truncated frame closes it.
pub struct ComponentServer {
    listener: TcpListener,
    component: Arc<dyn Component>,
}

impl ComponentServer {
    pub fn bind(addr: &str, component: Arc<dyn Component>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(ComponentServer {
            listener,
            component,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `stop` is set.
    pub fn serve(&self, stop: &AtomicBool) -> io::Result<()> {
        self.listener.set_nonblocking(true)?;
        while !stop.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    log::debug!(
                        "component `{}`: connection from {peer}",
                        self.component.descriptor().id
                    );
                    stream.set_nonblocking(false)?;
                    self.serve_connection(stream, stop);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(5))
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn serve_connection(&self, mut stream: TcpStream, stop: &AtomicBool) {
        stream.set_nodelay(true).ok();
        let halt = || stop.load(Ordering::SeqCst);
        loop {
            let response = match read_polling(&mut stream, None, &halt) {
                Ok(req) => match self.component.handle_json(&req.op, &req.payload_json()) {
                    Ok(Json::Object(m)) => Envelope::new(req.id, req.op, m),
                    Ok(_) => Envelope::error(req.id, "component produced a non-object payload"),
                    Err(e) => Envelope::error(req.id, e.0),
                },
                Err(ReadError::Frame(FrameError::Malformed(m))) => {
                    Envelope::error(0, format!("malformed frame: {m}"))
                }
                Err(ReadError::Frame(e)) => {
                    log::debug!("closing connection: {e}");
                    return;
                }
                Err(ReadError::Closed | ReadError::TimedOut | ReadError::Stopped) => return,
            };
            if write_frame(&mut stream, &response).is_err() {
                return;
            }
        }
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name(format!("serve-{}", self.component.descriptor().id))
            .spawn(move || {
                if let Err(e) = self.serve(&flag) {
                    log::error!("component server stopped: {e}");
                }
            })?;
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

/// A running background server; stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}
