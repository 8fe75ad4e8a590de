//! Probe receiver: timestamps UDP probe packets as they arrive and reports
//! per-train arrival times over a TCP control connection on the same port.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs, UdpSocket};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::control::ControlMessage;
use crate::wire::ProbeHeader;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    /// Emulate a bottleneck of this many Mbps in front of the receiver.
    pub limit_mbps: Option<f64>,
    /// Silence after the last packet that closes an incomplete train.
    pub reassembly_timeout: Duration,
    /// How long to wait for the first packet of an announced train.
    pub first_packet_timeout: Duration,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            limit_mbps: None,
            reassembly_timeout: Duration::from_millis(200),
            first_packet_timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Default)]
struct Arrivals {
    len: u32,
    size: usize,
    /// `(seq, arrival ns)` in arrival order.
    packets: Vec<(u32, u64)>,
    last: Option<Instant>,
    complete: bool,
}

#[derive(Default)]
struct Shared {
    trains: Mutex<HashMap<u32, Arrivals>>,
    arrived: Condvar,
}

pub struct Receiver {
    udp: UdpSocket,
    tcp: TcpListener,
    config: ReceiverConfig,
}

impl Receiver {
    /// Binds the control listener and the probe socket to one address. Port
    /// 0 picks a free port for both.
    pub fn bind(addr: impl ToSocketAddrs, config: ReceiverConfig) -> io::Result<Self> {
        let mut last_err = None;
        for addr in addr.to_socket_addrs()? {
            match Self::bind_one(addr, config) {
                Ok(r) => return Ok(r),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no address to bind")))
    }

    fn bind_one(addr: SocketAddr, config: ReceiverConfig) -> io::Result<Self> {
        // an ephemeral TCP port can be taken on the UDP side; retry a few times
        for _ in 0..16 {
            let tcp = TcpListener::bind(addr)?;
            match UdpSocket::bind(tcp.local_addr()?) {
                Ok(udp) => return Ok(Self { udp, tcp, config }),
                Err(e) if addr.port() == 0 && e.kind() == io::ErrorKind::AddrInUse => continue,
                Err(e) => return Err(e),
            }
        }
        Err(io::Error::new(io::ErrorKind::AddrInUse, "no port free for both TCP and UDP"))
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    /// Serves until the listener fails. Each control connection gets its own
    /// thread.
    pub fn serve(self) -> io::Result<()> {
        let shared = Arc::new(Shared::default());
        let epoch = Instant::now();
        {
            let shared = Arc::clone(&shared);
            let udp = self.udp.try_clone()?;
            thread::Builder::new()
                .name("pab-recv-udp".into())
                .spawn(move || collect(udp, shared, epoch))?;
        }
        for stream in self.tcp.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("control accept failed: {e}");
                    continue;
                }
            };
            let shared = Arc::clone(&shared);
            let config = self.config;
            thread::Builder::new()
                .name("pab-recv-ctl".into())
                .spawn(move || {
                    let peer = stream.peer_addr().ok();
                    if let Err(e) = control(stream, &shared, config) {
                        debug!("control connection {peer:?} ended: {e}");
                    }
                })?;
        }
        Ok(())
    }

    /// Serves on a background thread and returns the bound address.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::Builder::new()
            .name("pab-recv".into())
            .spawn(move || {
                if let Err(e) = self.serve() {
                    warn!("receiver stopped: {e}");
                }
            })?;
        Ok(addr)
    }
}

fn collect(udp: UdpSocket, shared: Arc<Shared>, epoch: Instant) {
    let mut buf = vec![0u8; 65_536];
    loop {
        let n = match udp.recv(&mut buf) {
            Ok(n) => n,
            Err(e) => {
                warn!("probe socket failed: {e}");
                return;
            }
        };
        let now = Instant::now();
        let at = now.duration_since(epoch).as_nanos() as u64;
        let header = match ProbeHeader::decode(&buf[..n]) {
            Ok(h) => h,
            Err(e) => {
                debug!("dropping datagram: {e}");
                continue;
            }
        };
        let mut trains = shared.trains.lock().expect("receiver state poisoned");
        // packets may beat the control message; keep them until it arrives
        let entry = trains.entry(header.train_id).or_default();
        if entry.len == 0 {
            entry.len = header.train_len;
        }
        if entry.size == 0 {
            entry.size = n;
        }
        entry.packets.push((header.seq, at));
        entry.last = Some(now);
        if header.seq + 1 >= header.train_len {
            entry.complete = true;
        }
        drop(trains);
        shared.arrived.notify_all();
    }
}

fn control(stream: TcpStream, shared: &Shared, config: ReceiverConfig) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: ControlMessage = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                warn!("bad control message {line:?}: {e}");
                continue;
            }
        };
        let ControlMessage::Start { train_id, length, size } = msg else {
            warn!("unexpected control message {line:?}");
            continue;
        };
        let recv_times = wait_for_train(shared, train_id, length, size as usize, &config);
        let reply = ControlMessage::Summary { train_id, recv_times };
        let mut out = serde_json::to_string(&reply).map_err(io::Error::other)?;
        out.push('\n');
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

fn wait_for_train(
    shared: &Shared,
    train_id: u32,
    length: u32,
    size: usize,
    config: &ReceiverConfig,
) -> Vec<Option<u64>> {
    let announced = Instant::now();
    let mut trains = shared.trains.lock().expect("receiver state poisoned");
    loop {
        let now = Instant::now();
        let deadline = match trains.get(&train_id) {
            Some(a) if a.complete => break,
            Some(Arrivals { last: Some(last), .. }) => *last + config.reassembly_timeout,
            _ => announced + config.first_packet_timeout,
        };
        if now >= deadline {
            break;
        }
        trains = shared
            .arrived
            .wait_timeout(trains, deadline - now)
            .expect("receiver state poisoned")
            .0;
    }
    let arrivals = trains.remove(&train_id).unwrap_or_default();
    // anything older than a few timeouts belongs to an abandoned train
    trains.retain(|_, a| a.last.is_some_and(|t| t.elapsed() < 10 * config.reassembly_timeout + config.first_packet_timeout));
    drop(trains);

    let size = if arrivals.size > 0 { arrivals.size } else { size };
    let packets = match config.limit_mbps {
        Some(limit) => shape(&arrivals.packets, size, limit),
        None => arrivals.packets,
    };
    let mut times = vec![None; length as usize];
    for (seq, at) in packets {
        if let Some(slot) = times.get_mut(seq as usize) {
            slot.get_or_insert(at);
        }
    }
    times
}

/// Departure times from a FIFO that drains at `limit_mbps`.
fn shape(packets: &[(u32, u64)], size: usize, limit_mbps: f64) -> Vec<(u32, u64)> {
    let service = (size as f64 * 8.0 / limit_mbps * 1e3).round() as u64;
    let mut free_at = 0u64;
    packets
        .iter()
        .map(|&(seq, at)| {
            free_at = free_at.max(at) + service;
            (seq, free_at)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shaping_spaces_back_to_back_packets() {
        // 1000-byte packets at 8 Mbps take 1 ms each
        let out = shape(&[(0, 0), (1, 10), (2, 20)], 1000, 8.0);
        assert_eq!(out, vec![(0, 1_000_000), (1, 2_000_000), (2, 3_000_000)]);
    }

    #[test]
    fn shaping_leaves_slow_traffic_alone() {
        let out = shape(&[(0, 0), (1, 5_000_000)], 1000, 8.0);
        assert_eq!(out, vec![(0, 1_000_000), (1, 6_000_000)]);
    }
}
