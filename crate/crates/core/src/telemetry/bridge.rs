//! Newline-delimited JSON bridge for the operator console.
//!
//! Outbound: one JSON object per dashboard frame. Inbound: one
//! basestation command object per line. Both use the message field names.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;

use super::frames::{BasestationFrame, DashboardFrame};
use super::link::Link;

pub fn dashboard_json(f: &DashboardFrame) -> String {
    serde_json::to_string(f).expect("frame serializes")
}

pub fn parse_command(line: &str) -> Result<BasestationFrame, String> {
    let f: BasestationFrame = serde_json::from_str(line).map_err(|e| e.to_string())?;
    f.check().map_err(|e| e.to_string())?;
    Ok(f)
}

/// TCP server; every connected console gets every frame.
pub struct JsonBridge {
    addr: SocketAddr,
    clients: Arc<Mutex<Vec<TcpStream>>>,
    commands: Receiver<BasestationFrame>,
    /// Lines that failed to parse.
    pub rejected: Arc<Mutex<u64>>,
}

impl JsonBridge {
    pub fn bind(addr: SocketAddr) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let clients: Arc<Mutex<Vec<TcpStream>>> = Default::default();
        let rejected: Arc<Mutex<u64>> = Default::default();
        let (tx, rx) = mpsc::channel();
        {
            let clients = clients.clone();
            let rejected = rejected.clone();
            thread::spawn(move || {
                for stream in listener.incoming().flatten() {
                    if let Ok(w) = stream.try_clone() {
                        clients.lock().expect("bridge poisoned").push(w);
                    }
                    let tx = tx.clone();
                    let rejected = rejected.clone();
                    thread::spawn(move || read_commands(stream, tx, rejected));
                }
            });
        }
        Ok(Self { addr, clients, commands: rx, rejected })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn clients(&self) -> usize {
        self.clients.lock().expect("bridge poisoned").len()
    }

    /// Sends the frame to all consoles, dropping any that fail.
    pub fn publish(&self, f: &DashboardFrame) {
        let mut line = dashboard_json(f);
        line.push('\n');
        self.clients.lock().expect("bridge poisoned").retain_mut(|c| c.write_all(line.as_bytes()).is_ok());
    }

    pub fn poll_commands(&self) -> Vec<BasestationFrame> {
        self.commands.try_iter().collect()
    }

    /// Moves traffic between the car link and the consoles: dashboard
    /// datagrams out as JSON, console commands in as binary frames.
    /// Returns the number of undecodable datagrams.
    pub fn relay(&self, car: &mut dyn Link) -> io::Result<u64> {
        let mut dropped = 0;
        while let Some(bytes) = car.recv()? {
            match DashboardFrame::decode(&bytes) {
                Ok(f) => self.publish(&f),
                Err(_) => dropped += 1,
            }
        }
        for cmd in self.poll_commands() {
            car.send(&cmd.encode())?;
        }
        Ok(dropped)
    }
}

fn read_commands(stream: TcpStream, tx: Sender<BasestationFrame>, rejected: Arc<Mutex<u64>>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { return };
        if line.trim().is_empty() {
            continue;
        }
        match parse_command(&line) {
            Ok(f) => {
                if tx.send(f).is_err() {
                    return;
                }
            }
            Err(_) => *rejected.lock().expect("bridge poisoned") += 1,
        }
    }
}
