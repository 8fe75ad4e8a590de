//! Train parameters, per-train records and the receiver-side rate estimate.

use std::time::{Duration, Instant};

use crate::wire::HEADER_LEN;
use crate::ProbeError;

/// Below this much remaining time the pacer spins instead of sleeping.
pub const SPIN_THRESHOLD: Duration = Duration::from_micros(100);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub trains: usize,
    pub packets_per_train: usize,
    /// Bytes per packet, header included.
    pub packet_size: usize,
    /// Ingress rate in Mbps.
    pub rate: f64,
    /// Largest departure gap that keeps a packet valid; `None` means three
    /// nominal gaps.
    pub validity_gap: Option<Duration>,
    pub inter_train_gap: Duration,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            trains: 3,
            packets_per_train: 25,
            packet_size: 1000,
            rate: 10.0,
            validity_gap: None,
            inter_train_gap: Duration::from_millis(20),
        }
    }
}

impl ProbeSpec {
    pub fn at_rate(rate: f64) -> Self {
        Self {
            rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |msg: String| Err(ProbeError::InvalidSpec(msg));
        if self.trains == 0 {
            return bad("trains must be at least 1".into());
        }
        if self.packets_per_train < 2 {
            return bad(format!("packets per train must be at least 2, got {}", self.packets_per_train));
        }
        if self.packets_per_train > u32::MAX as usize {
            return bad(format!("packets per train {} does not fit the header", self.packets_per_train));
        }
        if self.packet_size < HEADER_LEN || self.packet_size > 65_507 {
            return bad(format!(
                "packet size must be between {HEADER_LEN} and 65507 bytes, got {}",
                self.packet_size
            ));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        Ok(())
    }

    /// Target spacing between consecutive departures.
    pub fn nominal_gap(&self) -> Duration {
        packet_gap(self.rate, self.packet_size)
    }

    pub fn tau(&self) -> Duration {
        self.validity_gap.unwrap_or(3 * self.nominal_gap())
    }
}

/// Time to serialize one packet of `size` bytes at `rate` Mbps.
pub fn packet_gap(rate: f64, size: usize) -> Duration {
    // Mbps is bits per microsecond
    Duration::from_secs_f64(size as f64 * 8.0 / rate * 1e-6)
}

/// Target departure offsets from the start of the train.
pub fn pace_train(rate: f64, packets: usize, size: usize) -> Vec<Duration> {
    let gap = packet_gap(rate, size).as_secs_f64();
    (0..packets).map(|i| Duration::from_secs_f64(i as f64 * gap)).collect()
}

/// Sleeps until close to `deadline`, then spins the rest of the way.
pub fn wait_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let remaining = deadline - now;
        if remaining > SPIN_THRESHOLD {
            std::thread::sleep(remaining - SPIN_THRESHOLD);
        } else {
            std::hint::spin_loop();
        }
    }
}

/// One train as seen by both ends. Timestamps are nanoseconds on each end's
/// own clock; only differences within one clock are ever used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainRecord {
    pub send_ns: Vec<u64>,
    pub recv_ns: Vec<Option<u64>>,
    pub valid: Vec<bool>,
}

impl TrainRecord {
    /// Packet 0 is never valid; packet `i` is valid when it left at most
    /// `tau` after packet `i - 1`.
    pub fn new(send_ns: Vec<u64>, recv_ns: Vec<Option<u64>>, tau: Duration) -> Result<Self, ProbeError> {
        if send_ns.len() != recv_ns.len() {
            return Err(ProbeError::Protocol(format!(
                "{} departures but {} arrival slots",
                send_ns.len(),
                recv_ns.len()
            )));
        }
        let tau = tau.as_nanos();
        let valid = (0..send_ns.len())
            .map(|i| i > 0 && u128::from(send_ns[i].saturating_sub(send_ns[i - 1])) <= tau)
            .collect();
        Ok(Self { send_ns, recv_ns, valid })
    }

    pub fn valid_set(&self) -> Vec<usize> {
        (0..self.valid.len()).filter(|&i| self.valid[i]).collect()
    }

    pub fn received(&self) -> usize {
        self.recv_ns.iter().filter(|t| t.is_some()).count()
    }
}

/// Receiver rate in Mbps from the inter-arrival gaps of valid packets.
///
/// A gap counts only if both of its packets arrived.
pub fn egress_rate(record: &TrainRecord, packet_size: usize) -> Result<f64, ProbeError> {
    let valid = record.valid_set();
    if valid.is_empty() {
        return Err(ProbeError::NoValidPackets);
    }
    let mut gaps = 0usize;
    let mut span_ns = 0i128;
    for &i in &valid {
        if let (Some(a), Some(b)) = (record.recv_ns[i - 1], record.recv_ns[i]) {
            gaps += 1;
            span_ns += i128::from(b) - i128::from(a);
        }
    }
    if gaps == 0 {
        return Err(ProbeError::MissingArrival);
    }
    if span_ns <= 0 {
        return Err(ProbeError::Protocol(format!(
            "non-positive arrival span of {span_ns} ns over {gaps} gaps"
        )));
    }
    let bits = (gaps * packet_size * 8) as f64;
    Ok(bits / span_ns as f64 * 1e3)
}

/// Middle value; the lower of the two middle values for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}
