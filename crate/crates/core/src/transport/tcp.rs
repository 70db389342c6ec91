//! Framed TCP: `[u32 big-endian length][frame]`, one connection per site.
//!
//! A site opens its connection with a hello frame carrying its `u16` index so
//! the mixer can route broadcasts and pick the right channel key. The hello
//! is connection setup and is not counted in the metrics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{direction, Endpoint, MetricsHandle, Peer, TransportError};

const MAX_FRAME_BYTES: usize = 64 << 20;

pub fn write_frame(stream: &mut impl Write, frame: &[u8]) -> Result<(), TransportError> {
    let len = u32::try_from(frame.len())
        .map_err(|_| TransportError::IoFailure(format!("frame of {} bytes", frame.len())))?;
    stream.write_all(&len.to_be_bytes())?;
    stream.write_all(frame)?;
    stream.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before a length prefix.
pub fn read_frame(stream: &mut impl Read) -> Result<Option<Vec<u8>>, TransportError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match stream.read(&mut prefix[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(TransportError::IoFailure("truncated length prefix".into())),
            n => got += n,
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(TransportError::IoFailure(format!(
            "frame length {len} too large"
        )));
    }
    let mut frame = vec![0u8; len];
    stream.read_exact(&mut frame)?;
    Ok(Some(frame))
}

pub struct TcpSiteEndpoint {
    site_index: u16,
    stream: Option<TcpStream>,
    metrics: MetricsHandle,
}

impl TcpSiteEndpoint {
    /// Retries the connection until `timeout` elapses, so sites may start
    /// before the mixer listens.
    pub fn connect(
        addr: SocketAddr,
        site_index: u16,
        metrics: MetricsHandle,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let deadline = Instant::now() + timeout;
        let mut stream = loop {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(s) => break s,
                Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(50)),
                Err(e) => return Err(e.into()),
            }
        };
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        write_frame(&mut stream, &site_index.to_be_bytes())?;
        Ok(Self {
            site_index,
            stream: Some(stream),
            metrics,
        })
    }
}

impl Endpoint for TcpSiteEndpoint {
    fn peer(&self) -> Peer {
        Peer::Site(self.site_index)
    }

    fn send(&mut self, to: Peer, frame: &[u8]) -> Result<(), TransportError> {
        if to != Peer::Mixer {
            return Err(TransportError::InvalidRoute {
                from: self.peer(),
                to,
            });
        }
        let stream = self.stream.as_mut().ok_or(TransportError::Closed)?;
        write_frame(stream, frame)?;
        self.metrics
            .record_wire(super::Direction::SiteToMixer, frame.len());
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<(Peer, Vec<u8>)>, TransportError> {
        let stream = self.stream.as_mut().ok_or(TransportError::Closed)?;
        match read_frame(stream)? {
            Some(frame) => Ok(Some((Peer::Mixer, frame))),
            None => Err(TransportError::Closed),
        }
    }

    fn close(&mut self) {
        if let Some(s) = self.stream.take() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

type Inbox = mpsc::Receiver<Result<(Peer, Vec<u8>), TransportError>>;

pub struct TcpMixerEndpoint {
    writers: BTreeMap<u16, TcpStream>,
    inbox: Inbox,
    timeout: Duration,
    metrics: MetricsHandle,
    closed: bool,
}

impl TcpMixerEndpoint {
    /// Accepts exactly `site_count` connections, each announcing a distinct
    /// index in `1..=site_count`.
    pub fn accept(
        listener: &TcpListener,
        site_count: u16,
        metrics: MetricsHandle,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let (tx, inbox) = mpsc::channel();
        let mut writers = BTreeMap::new();
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + timeout;
        while writers.len() < site_count as usize {
            let mut stream = match listener.accept() {
                Ok((s, _)) => s,
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(TransportError::Timeout);
                    }
                    thread::sleep(Duration::from_millis(10));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            stream.set_nonblocking(false)?;
            stream.set_nodelay(true)?;
            stream.set_read_timeout(Some(timeout))?;
            let hello = read_frame(&mut stream)?.ok_or_else(|| {
                TransportError::Handshake("connection closed before hello".into())
            })?;
            let index = match hello[..] {
                [hi, lo] => u16::from_be_bytes([hi, lo]),
                _ => {
                    return Err(TransportError::Handshake(format!(
                        "{}-byte hello",
                        hello.len()
                    )))
                }
            };
            if index == 0 || index > site_count || writers.contains_key(&index) {
                return Err(TransportError::Handshake(format!(
                    "site index {index} rejected"
                )));
            }
            // Reader threads block without a deadline; the mixer applies its
            // own timeout on the shared inbox.
            stream.set_read_timeout(None)?;
            let mut reader = stream.try_clone()?;
            let tx = tx.clone();
            thread::spawn(move || loop {
                match read_frame(&mut reader) {
                    Ok(Some(frame)) => {
                        if tx.send(Ok((Peer::Site(index), frame))).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            });
            writers.insert(index, stream);
        }
        listener.set_nonblocking(false)?;
        Ok(Self {
            writers,
            inbox,
            timeout,
            metrics,
            closed: false,
        })
    }
}

impl Endpoint for TcpMixerEndpoint {
    fn peer(&self) -> Peer {
        Peer::Mixer
    }

    fn send(&mut self, to: Peer, frame: &[u8]) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let dir = direction(Peer::Mixer, to).ok_or(TransportError::InvalidRoute {
            from: Peer::Mixer,
            to,
        })?;
        let Peer::Site(index) = to else {
            unreachable!()
        };
        let stream = self
            .writers
            .get_mut(&index)
            .ok_or(TransportError::UnknownPeer(to))?;
        write_frame(stream, frame)?;
        self.metrics.record_wire(dir, frame.len());
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<(Peer, Vec<u8>)>, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        match self.inbox.recv_timeout(self.timeout) {
            Ok(msg) => msg.map(Some),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(TransportError::Timeout),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }

    fn close(&mut self) {
        self.closed = true;
        for s in self.writers.values() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 5]);
        let mut cursor = std::io::Cursor::new(buf);
        assert_eq!(read_frame(&mut cursor).unwrap(), Some(b"hello".to_vec()));
        assert_eq!(read_frame(&mut cursor).unwrap(), None);
    }

    #[test]
    fn truncated_frame() {
        let mut cursor = std::io::Cursor::new(vec![0, 0, 0, 9, 1, 2]);
        assert!(read_frame(&mut cursor).is_err());
        let mut cursor = std::io::Cursor::new(vec![0, 0]);
        assert!(read_frame(&mut cursor).is_err());
    }

    #[test]
    fn loopback_exchange() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let metrics = MetricsHandle::new();
        let timeout = Duration::from_secs(5);
        let sites: Vec<_> = (1..=3u16)
            .map(|i| {
                let metrics = metrics.clone();
                thread::spawn(move || {
                    let mut ep = TcpSiteEndpoint::connect(addr, i, metrics, timeout).unwrap();
                    ep.send(Peer::Mixer, &[i as u8; 10]).unwrap();
                    let (from, frame) = ep.recv().unwrap().unwrap();
                    assert_eq!(from, Peer::Mixer);
                    assert_eq!(frame, vec![i as u8 + 100]);
                    ep.close();
                    assert_eq!(ep.send(Peer::Mixer, b"x"), Err(TransportError::Closed));
                })
            })
            .collect();
        let mut mixer = TcpMixerEndpoint::accept(&listener, 3, metrics.clone(), timeout).unwrap();
        let mut seen = Vec::new();
        for _ in 0..3 {
            let (from, frame) = mixer.recv().unwrap().unwrap();
            let Peer::Site(i) = from else { panic!() };
            assert_eq!(frame, vec![i as u8; 10]);
            seen.push(i);
            mixer.send(from, &[i as u8 + 100]).unwrap();
        }
        seen.sort();
        assert_eq!(seen, vec![1, 2, 3]);
        for s in sites {
            s.join().unwrap();
        }
        let m = metrics.snapshot();
        assert_eq!(m.site_to_mixer_bytes, 3 * 14);
        assert_eq!(m.mixer_to_sites_bytes, 3 * 5);
    }
}
