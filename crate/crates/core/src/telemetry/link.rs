//! Datagram transports: UDP for real sockets, an in-process pair for lockstep runs.

use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::{Arc, Mutex};

/// Largest datagram either side accepts.
pub const MAX_DATAGRAM: usize = 1024;

pub trait Link {
    fn send(&mut self, bytes: &[u8]) -> io::Result<()>;
    /// Non-blocking; `Ok(None)` when nothing is pending.
    fn recv(&mut self) -> io::Result<Option<Vec<u8>>>;
}

#[derive(Debug)]
pub struct UdpLink {
    socket: UdpSocket,
    peer: SocketAddr,
}

impl UdpLink {
    pub fn bind(local: SocketAddr, peer: SocketAddr) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        socket.set_nonblocking(true)?;
        Ok(Self { socket, peer })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn set_peer(&mut self, peer: SocketAddr) {
        self.peer = peer;
    }
}

impl Link for UdpLink {
    fn send(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.socket.send_to(bytes, self.peer).map(|_| ())
    }

    fn recv(&mut self) -> io::Result<Option<Vec<u8>>> {
        let mut buf = [0u8; MAX_DATAGRAM];
        match self.socket.recv_from(&mut buf) {
            Ok((n, _)) => Ok(Some(buf[..n].to_vec())),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(None),
            Err(e) => Err(e),
        }
    }
}

type Queue = Arc<Mutex<VecDeque<Vec<u8>>>>;

/// One end of an in-memory datagram pipe.
#[derive(Debug, Clone)]
pub struct LoopbackLink {
    tx: Queue,
    rx: Queue,
    /// When set, sends fail (simulates a dead socket).
    pub broken: bool,
}

pub fn loopback_pair() -> (LoopbackLink, LoopbackLink) {
    let a: Queue = Default::default();
    let b: Queue = Default::default();
    (LoopbackLink { tx: a.clone(), rx: b.clone(), broken: false }, LoopbackLink { tx: b, rx: a, broken: false })
}

impl Link for LoopbackLink {
    fn send(&mut self, bytes: &[u8]) -> io::Result<()> {
        if self.broken {
            return Err(io::Error::new(io::ErrorKind::BrokenPipe, "link down"));
        }
        self.tx.lock().expect("loopback poisoned").push_back(bytes.to_vec());
        Ok(())
    }

    fn recv(&mut self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.rx.lock().expect("loopback poisoned").pop_front())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_is_fifo_and_directional() {
        let (mut a, mut b) = loopback_pair();
        a.send(&[1]).unwrap();
        a.send(&[2, 3]).unwrap();
        assert_eq!(a.recv().unwrap(), None);
        assert_eq!(b.recv().unwrap(), Some(vec![1]));
        assert_eq!(b.recv().unwrap(), Some(vec![2, 3]));
        assert_eq!(b.recv().unwrap(), None);
        a.broken = true;
        assert!(a.send(&[4]).is_err());
    }

    #[test]
    fn udp_roundtrip_on_localhost() {
        let any: SocketAddr = "127.0.0.1:0".parse().unwrap();
        let mut a = UdpLink::bind(any, any).unwrap();
        let mut b = UdpLink::bind(any, a.local_addr().unwrap()).unwrap();
        a.set_peer(b.local_addr().unwrap());
        b.send(b"ping").unwrap();
        let mut got = None;
        for _ in 0..200 {
            got = a.recv().unwrap();
            if got.is_some() {
                break;
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
        assert_eq!(got.as_deref(), Some(&b"ping"[..]));
    }
}
