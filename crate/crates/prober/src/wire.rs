//! Probe packet header. Fixed 28 bytes, big-endian, zero-padded to the
//! packet size.

use thiserror::Error;

pub const MAGIC: u32 = 0x5041_4221;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("datagram of {0} bytes is shorter than the {HEADER_LEN}-byte header")]
    Truncated(usize),
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("packet size {size} is smaller than the {HEADER_LEN}-byte header")]
    PacketTooSmall { size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeHeader {
    pub train_id: u32,
    pub seq: u32,
    pub train_len: u32,
    /// Sender timestamp, nanoseconds since the sender's session start.
    pub send_ns: u64,
    pub flags: u32,
}

impl ProbeHeader {
    /// Writes the header into the front of `buf` and zeroes the rest.
    pub fn encode_into(&self, buf: &mut [u8]) -> Result<(), WireError> {
        if buf.len() < HEADER_LEN {
            return Err(WireError::PacketTooSmall { size: buf.len() });
        }
        buf[0..4].copy_from_slice(&MAGIC.to_be_bytes());
        buf[4..8].copy_from_slice(&self.train_id.to_be_bytes());
        buf[8..12].copy_from_slice(&self.seq.to_be_bytes());
        buf[12..16].copy_from_slice(&self.train_len.to_be_bytes());
        buf[16..24].copy_from_slice(&self.send_ns.to_be_bytes());
        buf[24..28].copy_from_slice(&self.flags.to_be_bytes());
        buf[HEADER_LEN..].fill(0);
        Ok(())
    }

    pub fn encode(&self, packet_size: usize) -> Result<Vec<u8>, WireError> {
        let mut buf = vec![0; packet_size];
        self.encode_into(&mut buf)?;
        Ok(buf)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        if buf.len() < HEADER_LEN {
            return Err(WireError::Truncated(buf.len()));
        }
        let u32_at = |i: usize| u32::from_be_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
        let magic = u32_at(0);
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        Ok(Self {
            train_id: u32_at(4),
            seq: u32_at(8),
            train_len: u32_at(12),
            send_ns: u64::from_be_bytes(buf[16..24].try_into().expect("8 bytes")),
            flags: u32_at(24),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let h = ProbeHeader {
            train_id: 1,
            seq: 2,
            train_len: 3,
            send_ns: 0x0102_0304_0506_0708,
            flags: 9,
        };
        let buf = h.encode(32).unwrap();
        assert_eq!(&buf[0..4], &[0x50, 0x41, 0x42, 0x21]);
        assert_eq!(&buf[16..24], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(&buf[28..], &[0; 4]);
    }

    #[test]
    fn rejects_short_and_foreign() {
        assert_eq!(ProbeHeader::decode(&[0; 10]), Err(WireError::Truncated(10)));
        assert_eq!(ProbeHeader::decode(&[0; 28]), Err(WireError::BadMagic(0)));
        let h = ProbeHeader { train_id: 0, seq: 0, train_len: 2, send_ns: 0, flags: 0 };
        assert_eq!(h.encode(20), Err(WireError::PacketTooSmall { size: 20 }));
    }

    proptest! {
        #[test]
        fn round_trip(train_id: u32, seq: u32, train_len: u32, send_ns: u64, flags: u32, pad in 0usize..64) {
            let h = ProbeHeader { train_id, seq, train_len, send_ns, flags };
            let buf = h.encode(HEADER_LEN + pad).unwrap();
            prop_assert_eq!(buf.len(), HEADER_LEN + pad);
            prop_assert_eq!(ProbeHeader::decode(&buf).unwrap(), h);
        }
    }
}
