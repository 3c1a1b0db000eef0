//! Wire frames, links, the console bridge and run logging.

pub mod bridge;
pub mod frames;
pub mod link;
pub mod log;

pub use frames::{
    apply_basestation, BasestationFrame, DashboardFrame, FrameError, Stamp, BASESTATION_SIZE, DASHBOARD_SIZE,
};
pub use link::{loopback_pair, Link, LoopbackLink, UdpLink};

use crate::planner::FlagState;

/// Receive-side counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RxStats {
    pub applied: u64,
    pub stale: u64,
    pub dropped: u64,
    pub link_errors: u64,
}

/// Decodes one inbound datagram and applies it.
pub fn receive_datagram(bytes: &[u8], flags: &mut FlagState, racelines: usize, stats: &mut RxStats) {
    match BasestationFrame::decode(bytes) {
        Ok(f) => {
            if apply_basestation(flags, &f, racelines) {
                stats.applied += 1;
            } else {
                stats.stale += 1;
            }
        }
        Err(_) => stats.dropped += 1,
    }
}

/// Drains the link into the flag state. Bad frames bump `dropped`; a link
/// error bumps `link_errors` and stops the drain.
pub fn receive_basestation(link: &mut dyn Link, flags: &mut FlagState, racelines: usize, stats: &mut RxStats) {
    loop {
        match link.recv() {
            Ok(Some(bytes)) => receive_datagram(&bytes, flags, racelines, stats),
            Ok(None) => return,
            Err(_) => {
                stats.link_errors += 1;
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests;
