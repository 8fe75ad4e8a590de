//! Sending side: paces trains, collects the receiver's arrival times and
//! turns them into a rate difference test outcome.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs, UdpSocket};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, warn};
use pab_core::likelihood::rdt;
use pab_core::{MeasureError, Measurement, Measurer, PathId};

use crate::control::ControlMessage;
use crate::train::{egress_rate, lower_median, wait_until, ProbeSpec, TrainRecord};
use crate::wire::ProbeHeader;
use crate::ProbeError;

/// Extra time the receiver gets beyond the train itself to send its summary.
pub const DEFAULT_REPLY_TIMEOUT: Duration = Duration::from_secs(3);

/// Result of one multi-train probe at a single rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub ingress_mbps: f64,
    /// Egress rate of every train that produced one.
    pub train_rates: Vec<f64>,
    pub invalid_trains: usize,
    pub median_mbps: f64,
    pub outcome: bool,
}

/// A connection to one receiver.
pub struct Prober {
    dest: SocketAddr,
    udp: UdpSocket,
    control: BufReader<TcpStream>,
    epoch: Instant,
    next_train: u32,
    reply_timeout: Duration,
}

impl Prober {
    pub fn connect(dest: impl ToSocketAddrs, timeout: Duration) -> Result<Self, ProbeError> {
        let addrs: Vec<SocketAddr> = dest
            .to_socket_addrs()
            .map_err(|e| ProbeError::Resolve(e.to_string()))?
            .collect();
        let mut last = String::from("no addresses");
        for addr in addrs {
            match Self::connect_addr(addr, timeout) {
                Ok(p) => return Ok(p),
                Err(e) => last = e.to_string(),
            }
        }
        Err(ProbeError::Timeout(last))
    }

    fn connect_addr(dest: SocketAddr, timeout: Duration) -> std::io::Result<Self> {
        let tcp = TcpStream::connect_timeout(&dest, timeout)?;
        tcp.set_nodelay(true)?;
        let local = if dest.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" };
        let udp = UdpSocket::bind(local)?;
        udp.connect(dest)?;
        // distinct senders sharing a receiver should not reuse train ids
        let seed = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.subsec_nanos()).unwrap_or(0);
        Ok(Self {
            dest,
            udp,
            control: BufReader::new(tcp),
            epoch: Instant::now(),
            next_train: seed ^ std::process::id().rotate_left(16),
            reply_timeout: DEFAULT_REPLY_TIMEOUT,
        })
    }

    pub fn dest(&self) -> SocketAddr {
        self.dest
    }

    pub fn set_reply_timeout(&mut self, timeout: Duration) {
        self.reply_timeout = timeout;
    }

    /// Sends one paced train and returns both ends' timestamps.
    pub fn send_train(&mut self, spec: &ProbeSpec) -> Result<TrainRecord, ProbeError> {
        spec.validate()?;
        let train_id = self.next_train;
        self.next_train = self.next_train.wrapping_add(1);
        let length = spec.packets_per_train as u32;
        self.send_control(&ControlMessage::Start {
            train_id,
            length,
            size: spec.packet_size as u32,
        })?;

        let gap = spec.nominal_gap().as_secs_f64();
        let mut buf = vec![0u8; spec.packet_size];
        let mut send_ns = Vec::with_capacity(spec.packets_per_train);
        let start = Instant::now();
        for seq in 0..length {
            wait_until(start + Duration::from_secs_f64(f64::from(seq) * gap));
            let at = self.epoch.elapsed().as_nanos() as u64;
            let header = ProbeHeader { train_id, seq, train_len: length, send_ns: at, flags: 0 };
            header.encode_into(&mut buf)?;
            send_ns.push(at);
            if let Err(e) = self.udp.send(&buf) {
                // a refused datagram is just a lost packet to the estimator
                debug!("packet {seq} of train {train_id} not sent: {e}");
            }
        }

        let train_time = start.elapsed();
        let recv_ns = self.await_summary(train_id, train_time + self.reply_timeout)?;
        TrainRecord::new(send_ns, recv_ns, spec.tau())
    }

    /// Sends `spec.trains` trains and applies the rate difference test to
    /// the median egress rate.
    pub fn probe(&mut self, spec: &ProbeSpec, epsilon: f64) -> Result<ProbeOutcome, ProbeError> {
        spec.validate()?;
        let mut train_rates = Vec::with_capacity(spec.trains);
        let mut invalid_trains = 0;
        for t in 0..spec.trains {
            if t > 0 {
                std::thread::sleep(spec.inter_train_gap);
            }
            let record = self.send_train(spec)?;
            match egress_rate(&record, spec.packet_size) {
                Ok(r) => train_rates.push(r),
                Err(e) => {
                    warn!("train {t} to {} unusable: {e}", self.dest);
                    invalid_trains += 1;
                }
            }
        }
        let median_mbps = lower_median(&train_rates).ok_or(ProbeError::AllTrainsInvalid)?;
        Ok(ProbeOutcome {
            ingress_mbps: spec.rate,
            outcome: rdt(spec.rate, median_mbps, epsilon),
            train_rates,
            invalid_trains,
            median_mbps,
        })
    }

    fn send_control(&mut self, msg: &ControlMessage) -> Result<(), ProbeError> {
        let mut line = serde_json::to_string(msg).map_err(|e| ProbeError::Protocol(e.to_string()))?;
        line.push('\n');
        let stream = self.control.get_mut();
        stream
            .write_all(line.as_bytes())
            .and_then(|_| stream.flush())
            .map_err(|e| ProbeError::Timeout(format!("control channel to {}: {e}", self.dest)))
    }

    fn await_summary(&mut self, train_id: u32, timeout: Duration) -> Result<Vec<Option<u64>>, ProbeError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(ProbeError::Timeout(format!("no summary for train {train_id} from {}", self.dest)));
            }
            self.control.get_ref().set_read_timeout(Some(left))?;
            let mut line = String::new();
            match self.control.read_line(&mut line) {
                Ok(0) => return Err(ProbeError::Timeout(format!("{} closed the control channel", self.dest))),
                Ok(_) => {}
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                    return Err(ProbeError::Timeout(format!("no summary for train {train_id} from {}", self.dest)));
                }
                Err(e) => return Err(e.into()),
            }
            match serde_json::from_str(&line) {
                Ok(ControlMessage::Summary { train_id: id, recv_times }) if id == train_id => return Ok(recv_times),
                Ok(other) => debug!("ignoring control message {other:?}"),
                Err(e) => return Err(ProbeError::Protocol(format!("bad summary {line:?}: {e}"))),
            }
        }
    }
}

/// One live measurement of `path` at `spec.rate`.
pub fn measure(
    spec: &ProbeSpec,
    dest: impl ToSocketAddrs,
    epsilon: f64,
    path: PathId,
    seq: usize,
) -> Result<Measurement, ProbeError> {
    let mut prober = Prober::connect(dest, DEFAULT_REPLY_TIMEOUT)?;
    let out = prober.probe(spec, epsilon)?;
    Ok(Measurement {
        path,
        // the grid is integral; fractional rates only appear in direct use
        rate: spec.rate.round() as u32,
        outcome: out.outcome,
        seq,
    })
}

/// Measurement source for live sessions: one receiver endpoint per path.
pub struct LiveMeasurer {
    endpoints: Vec<String>,
    template: ProbeSpec,
    epsilon: f64,
    connect_timeout: Duration,
    connections: HashMap<usize, Prober>,
}

impl LiveMeasurer {
    /// `endpoints[p]` is the `host:port` of the receiver at the far end of
    /// path `p`.
    pub fn new(endpoints: Vec<String>, template: ProbeSpec, epsilon: f64) -> Self {
        Self {
            endpoints,
            template,
            epsilon,
            connect_timeout: Duration::from_secs(2),
            connections: HashMap::new(),
        }
    }

    pub fn with_connect_timeout(mut self, timeout: Duration) -> Self {
        self.connect_timeout = timeout;
        self
    }

    pub fn probe(&mut self, path: PathId, rate: f64) -> Result<ProbeOutcome, ProbeError> {
        let endpoint = self
            .endpoints
            .get(path.0)
            .ok_or_else(|| ProbeError::Resolve(format!("no endpoint for path {path}")))?;
        let prober = match self.connections.entry(path.0) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(Prober::connect(endpoint.as_str(), self.connect_timeout)?)
            }
        };
        let spec = ProbeSpec { rate, ..self.template };
        let out = prober.probe(&spec, self.epsilon);
        if out.is_err() {
            // reconnect on the next attempt
            self.connections.remove(&path.0);
        }
        out
    }
}

impl Measurer for LiveMeasurer {
    fn measure(&mut self, path: PathId, rate: u32) -> Result<bool, MeasureError> {
        self.probe(path, f64::from(rate))
            .map(|o| {
                debug!("{path} at {rate} Mbps: median egress {:.2} Mbps -> {}", o.median_mbps, o.outcome);
                o.outcome
            })
            .map_err(|e| MeasureError(e.to_string()))
    }
}
