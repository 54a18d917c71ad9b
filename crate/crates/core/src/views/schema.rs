//! Fixed bit layouts for each protocol layer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ViewError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LayerId {
    Link,
    Network,
    Transport,
    Application,
}

impl LayerId {
    pub const ALL: [LayerId; 4] = [LayerId::Link, LayerId::Network, LayerId::Transport, LayerId::Application];

    /// Numeric id used in binary view headers.
    pub fn code(self) -> u32 {
        match self {
            LayerId::Link => 0,
            LayerId::Network => 1,
            LayerId::Transport => 2,
            LayerId::Application => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::Link => "LINK",
            LayerId::Network => "NETWORK",
            LayerId::Transport => "TRANSPORT",
            LayerId::Application => "APPLICATION",
        }
    }

    /// Short OSI-style tag (`L2`, `L3`, `L4`, `L7`).
    pub fn tag(self) -> &'static str {
        match self {
            LayerId::Link => "L2",
            LayerId::Network => "L3",
            LayerId::Transport => "L4",
            LayerId::Application => "L7",
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerId {
    type Err = ViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L2" | "LINK" => Ok(LayerId::Link),
            "L3" | "NETWORK" => Ok(LayerId::Network),
            "L4" | "TRANSPORT" => Ok(LayerId::Transport),
            "L7" | "APPLICATION" | "PAYLOAD" => Ok(LayerId::Application),
            _ => Err(ViewError::UnknownLayer(s.to_string())),
        }
    }
}

/// Every header field the encoder knows how to extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum FieldId {
    EthDst,
    EthSrc,
    EthType,
    Ipv4Version,
    Ipv4Ihl,
    Ipv4Tos,
    Ipv4TotalLength,
    Ipv4Identification,
    Ipv4Flags,
    Ipv4FragmentOffset,
    Ipv4Ttl,
    Ipv4Protocol,
    Ipv4Checksum,
    Ipv4SrcAddr,
    Ipv4DstAddr,
    Ipv6Version,
    Ipv6TrafficClass,
    Ipv6FlowLabel,
    Ipv6PayloadLength,
    Ipv6NextHeader,
    Ipv6HopLimit,
    Ipv6SrcAddr,
    Ipv6DstAddr,
    TcpSrcPort,
    TcpDstPort,
    TcpSeq,
    TcpAck,
    TcpDataOffset,
    TcpReserved,
    TcpFlags,
    TcpWindow,
    TcpChecksum,
    TcpUrgentPtr,
    TcpOptions,
    UdpSrcPort,
    UdpDstPort,
    UdpLength,
    UdpChecksum,
    Payload,
}

use FieldId::*;

const LINK_FIELDS: &[(FieldId, &str, usize)] =
    &[(EthDst, "eth_dst", 48), (EthSrc, "eth_src", 48), (EthType, "eth_type", 16)];

const NETWORK_FIELDS: &[(FieldId, &str, usize)] = &[
    (Ipv4Version, "ipv4_version", 4),
    (Ipv4Ihl, "ipv4_ihl", 4),
    (Ipv4Tos, "ipv4_tos", 8),
    (Ipv4TotalLength, "ipv4_total_length", 16),
    (Ipv4Identification, "ipv4_identification", 16),
    (Ipv4Flags, "ipv4_flags", 3),
    (Ipv4FragmentOffset, "ipv4_fragment_offset", 13),
    (Ipv4Ttl, "ipv4_ttl", 8),
    (Ipv4Protocol, "ipv4_protocol", 8),
    (Ipv4Checksum, "ipv4_checksum", 16),
    (Ipv4SrcAddr, "ipv4_src_addr", 32),
    (Ipv4DstAddr, "ipv4_dst_addr", 32),
    (Ipv6Version, "ipv6_version", 4),
    (Ipv6TrafficClass, "ipv6_traffic_class", 8),
    (Ipv6FlowLabel, "ipv6_flow_label", 20),
    (Ipv6PayloadLength, "ipv6_payload_length", 16),
    (Ipv6NextHeader, "ipv6_next_header", 8),
    (Ipv6HopLimit, "ipv6_hop_limit", 8),
    (Ipv6SrcAddr, "ipv6_src_addr", 128),
    (Ipv6DstAddr, "ipv6_dst_addr", 128),
];

const TRANSPORT_FIELDS: &[(FieldId, &str, usize)] = &[
    (TcpSrcPort, "tcp_src_port", 16),
    (TcpDstPort, "tcp_dst_port", 16),
    (TcpSeq, "tcp_seq", 32),
    (TcpAck, "tcp_ack", 32),
    (TcpDataOffset, "tcp_data_offset", 4),
    (TcpReserved, "tcp_reserved", 3),
    (TcpFlags, "tcp_flags", 9),
    (TcpWindow, "tcp_window", 16),
    (TcpChecksum, "tcp_checksum", 16),
    (TcpUrgentPtr, "tcp_urgent_ptr", 16),
    (TcpOptions, "tcp_options", 320),
    (UdpSrcPort, "udp_src_port", 16),
    (UdpDstPort, "udp_dst_port", 16),
    (UdpLength, "udp_length", 16),
    (UdpChecksum, "udp_checksum", 16),
];

impl FieldId {
    pub(crate) fn from_name(name: &str) -> Option<FieldId> {
        if name == "payload" {
            return Some(Payload);
        }
        [LINK_FIELDS, NETWORK_FIELDS, TRANSPORT_FIELDS]
            .iter()
            .flat_map(|t| t.iter())
            .find(|(_, n, _)| *n == name)
            .map(|(id, _, _)| *id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub bits: usize,
    /// Bit offset within one packet slot.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSchema {
    pub layer: LayerId,
    pub fields: Vec<FieldSpec>,
    pub total_bits_per_packet: usize,
}

impl LayerSchema {
    /// Lays fields out back to back. Names must be unique, known to the
    /// encoder, and widths positive.
    pub fn new(layer: LayerId, fields: &[(&str, usize)]) -> Result<Self, ViewError> {
        let mut out = Vec::with_capacity(fields.len());
        let mut offset = 0;
        for &(name, bits) in fields {
            if bits == 0 {
                return Err(ViewError::InvalidSchema(format!("field {name} has zero width")));
            }
            if FieldId::from_name(name).is_none() {
                return Err(ViewError::UnknownField { layer, field: name.to_string() });
            }
            if out.iter().any(|f: &FieldSpec| f.name == name) {
                return Err(ViewError::InvalidSchema(format!("duplicate field {name}")));
            }
            out.push(FieldSpec { name: name.to_string(), bits, offset });
            offset += bits;
        }
        Ok(Self { layer, fields: out, total_bits_per_packet: offset })
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn d_f(&self, packets_per_flow: usize) -> usize {
        packets_per_flow * self.total_bits_per_packet
    }

    pub(crate) fn resolved(&self) -> Vec<(FieldId, &FieldSpec)> {
        self.fields
            .iter()
            .map(|f| (FieldId::from_name(&f.name).expect("validated at construction"), f))
            .collect()
    }
}

fn table_schema(layer: LayerId, table: &[(FieldId, &str, usize)]) -> LayerSchema {
    let fields: Vec<(&str, usize)> = table.iter().map(|(_, n, b)| (*n, *b)).collect();
    LayerSchema::new(layer, &fields).expect("built-in tables are valid")
}

/// The built-in schema for one layer.
pub fn layer_schema(layer: LayerId, payload_bytes: usize) -> LayerSchema {
    match layer {
        LayerId::Link => table_schema(layer, LINK_FIELDS),
        LayerId::Network => table_schema(layer, NETWORK_FIELDS),
        LayerId::Transport => table_schema(layer, TRANSPORT_FIELDS),
        LayerId::Application if payload_bytes == 0 => {
            LayerSchema { layer, fields: Vec::new(), total_bits_per_packet: 0 }
        }
        LayerId::Application => LayerSchema::new(layer, &[("payload", 8 * payload_bytes)]).expect("valid"),
    }
}

/// Schemas for all four layers. The IPv4/IPv6 and TCP/UDP headers occupy
/// parallel bands, so every field keeps a fixed offset regardless of
/// which protocol a packet uses.
pub fn default_schemas(payload_bytes: usize) -> Vec<LayerSchema> {
    LayerId::ALL.iter().map(|&l| layer_schema(l, payload_bytes)).collect()
}
