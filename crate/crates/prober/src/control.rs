//! Line-delimited JSON messages on the control connection.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMessage {
    /// Sender to receiver, before the train's first packet.
    Start { train_id: u32, length: u32, size: u32 },
    /// Receiver to sender: arrival time of every packet, `null` if lost.
    Summary { train_id: u32, recv_times: Vec<Option<u64>> },
}
