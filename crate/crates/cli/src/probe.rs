use std::time::Duration;

use pab_prober::{ProbeSpec, Prober, Receiver, ReceiverConfig};

use crate::{Classify, Failure};

#[derive(Debug, clap::Args)]
pub struct ProbeArgs {
    /// Receiver address, `host:port`.
    #[arg(long)]
    dest: String,
    /// Ingress rate in Mbps.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 3)]
    trains: usize,
    #[arg(long, default_value_t = 25)]
    packets: usize,
    /// Packet size in bytes.
    #[arg(long, default_value_t = 1000)]
    size: usize,
    /// Rate difference tolerance in Mbps.
    #[arg(long, default_value_t = 5.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    timeout_ms: u64,
}

#[derive(Debug, clap::Args)]
pub struct ReceiveArgs {
    #[arg(long, default_value = "0.0.0.0:7800")]
    listen: String,
    /// Emulate a bottleneck of this many Mbps in front of the receiver.
    #[arg(long)]
    limit_mbps: Option<f64>,
}

pub fn run_probe(args: ProbeArgs) -> Result<(), Failure> {
    let spec = ProbeSpec {
        trains: args.trains,
        packets_per_train: args.packets,
        packet_size: args.size,
        rate: args.rate,
        ..ProbeSpec::default()
    };
    spec.validate().config()?;
    if !(args.epsilon.is_finite() && args.epsilon >= 0.0) {
        return Err(Failure::Config(anyhow::anyhow!("epsilon must be non-negative")));
    }
    let mut prober = Prober::connect(args.dest.as_str(), Duration::from_millis(args.timeout_ms)).runtime()?;
    let out = prober.probe(&spec, args.epsilon).runtime()?;
    let rates: Vec<String> = out.train_rates.iter().map(|r| format!("{r:.3}")).collect();
    println!("trains {} ({} invalid)", rates.join(" "), out.invalid_trains);
    println!(
        "ingress {:.3} Mbps  median egress {:.3} Mbps  z = {}",
        out.ingress_mbps,
        out.median_mbps,
        u8::from(out.outcome)
    );
    Ok(())
}

pub fn run_receive(args: ReceiveArgs) -> Result<(), Failure> {
    if let Some(limit) = args.limit_mbps {
        if !(limit.is_finite() && limit > 0.0) {
            return Err(Failure::Config(anyhow::anyhow!("limit must be positive, got {limit}")));
        }
    }
    let config = ReceiverConfig {
        limit_mbps: args.limit_mbps,
        ..ReceiverConfig::default()
    };
    let receiver = Receiver::bind(args.listen.as_str(), config).config()?;
    println!("listening on {}", receiver.local_addr().runtime()?);
    receiver.serve().runtime()
}
