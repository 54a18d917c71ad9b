//! Bidirectional flow grouping.

use std::collections::HashMap;
use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::packet::PacketHeaders;
use super::IngestError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub ip: IpAddr,
    pub port: u16,
}

/// Canonical bidirectional five-tuple: `endpoint_a <= endpoint_b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub endpoint_a: Endpoint,
    pub endpoint_b: Endpoint,
    pub protocol: u8,
}

impl FlowKey {
    pub fn new(x: Endpoint, y: Endpoint, protocol: u8) -> Self {
        let (endpoint_a, endpoint_b) = if x <= y { (x, y) } else { (y, x) };
        Self { endpoint_a, endpoint_b, protocol }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ep = |e: &Endpoint| match e.ip {
            IpAddr::V4(ip) => format!("{ip}:{}", e.port),
            IpAddr::V6(ip) => format!("[{ip}]:{}", e.port),
        };
        write!(f, "{}-{}/{}", ep(&self.endpoint_a), ep(&self.endpoint_b), self.protocol)
    }
}

/// Key of the flow a packet belongs to. Ports are 0 without a transport header.
pub fn flow_key(h: &PacketHeaders) -> Result<FlowKey, IngestError> {
    let net = h.network.as_ref().ok_or(IngestError::NoNetworkLayer)?;
    let (sport, dport) = h.transport.as_ref().map_or((0, 0), |t| t.ports());
    Ok(FlowKey::new(
        Endpoint { ip: net.src(), port: sport },
        Endpoint { ip: net.dst(), port: dport },
        net.protocol(),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub packets: Vec<PacketHeaders>,
    pub label: Option<usize>,
    pub source_file: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowOptions {
    /// Split a flow when the gap between consecutive packets exceeds this many seconds.
    pub idle_timeout: Option<f64>,
}

/// Groups packets of one capture file into flows.
///
/// Packets without a network layer are dropped. Within a flow, packets keep
/// arrival order (stable-sorted by timestamp). Flows are ordered by first
/// packet timestamp, then key.
pub fn assemble_flows(
    packets: Vec<PacketHeaders>,
    source_file: &str,
    label: Option<usize>,
    options: FlowOptions,
) -> Vec<FlowRecord> {
    let mut open: HashMap<FlowKey, usize> = HashMap::new();
    let mut flows: Vec<FlowRecord> = Vec::new();
    for h in packets {
        let Ok(key) = flow_key(&h) else { continue };
        let slot = match open.get(&key) {
            Some(&i) => {
                let expired = match (options.idle_timeout, flows[i].packets.last()) {
                    (Some(t), Some(last)) => h.timestamp.as_secs_f64() - last.timestamp.as_secs_f64() > t,
                    _ => false,
                };
                if expired { None } else { Some(i) }
            }
            None => None,
        };
        let i = match slot {
            Some(i) => i,
            None => {
                flows.push(FlowRecord { key, packets: Vec::new(), label, source_file: source_file.to_string() });
                open.insert(key, flows.len() - 1);
                flows.len() - 1
            }
        };
        flows[i].packets.push(h);
    }
    for f in &mut flows {
        f.packets.sort_by_key(|p| p.timestamp);
    }
    flows.sort_by(|a, b| a.packets[0].timestamp.cmp(&b.packets[0].timestamp).then(a.key.cmp(&b.key)));
    flows
}
