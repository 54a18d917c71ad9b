//! Bit-level flow encoding and field masking.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::schema::{FieldId, LayerId, LayerSchema};
use super::{ViewError, ViewMatrix};
use crate::ingest::{FlowRecord, NetworkHeader, PacketHeaders, TransportHeader};

pub const DEFAULT_FILL: f64 = -1.0;

enum FieldValue<'a> {
    Uint(u128),
    /// Leading bytes of a byte-granular field; missing bytes are absent.
    Bytes(&'a [u8]),
    Absent,
}

fn extract(h: &PacketHeaders, id: FieldId) -> FieldValue<'_> {
    use FieldId::*;
    use FieldValue::*;
    let v4 = match &h.network {
        Some(NetworkHeader::V4(n)) => Some(n),
        _ => None,
    };
    let v6 = match &h.network {
        Some(NetworkHeader::V6(n)) => Some(n),
        _ => None,
    };
    let tcp = match &h.transport {
        Some(TransportHeader::Tcp(t)) => Some(t),
        _ => None,
    };
    let udp = match &h.transport {
        Some(TransportHeader::Udp(u)) => Some(u),
        _ => None,
    };
    let mac = |m: &[u8; 6]| m.iter().fold(0u128, |acc, &b| (acc << 8) | b as u128);
    let opt = |v: Option<u128>| v.map_or(Absent, Uint);
    match id {
        EthDst => opt(h.link.as_ref().map(|l| mac(&l.dst))),
        EthSrc => opt(h.link.as_ref().map(|l| mac(&l.src))),
        EthType => opt(h.link.as_ref().map(|l| l.ethertype as u128)),
        Ipv4Version => opt(v4.map(|n| n.version as u128)),
        Ipv4Ihl => opt(v4.map(|n| n.ihl as u128)),
        Ipv4Tos => opt(v4.map(|n| n.tos as u128)),
        Ipv4TotalLength => opt(v4.map(|n| n.total_length as u128)),
        Ipv4Identification => opt(v4.map(|n| n.identification as u128)),
        Ipv4Flags => opt(v4.map(|n| n.flags as u128)),
        Ipv4FragmentOffset => opt(v4.map(|n| n.fragment_offset as u128)),
        Ipv4Ttl => opt(v4.map(|n| n.ttl as u128)),
        Ipv4Protocol => opt(v4.map(|n| n.protocol as u128)),
        Ipv4Checksum => opt(v4.map(|n| n.checksum as u128)),
        Ipv4SrcAddr => opt(v4.map(|n| u32::from(n.src) as u128)),
        Ipv4DstAddr => opt(v4.map(|n| u32::from(n.dst) as u128)),
        Ipv6Version => opt(v6.map(|n| n.version as u128)),
        Ipv6TrafficClass => opt(v6.map(|n| n.traffic_class as u128)),
        Ipv6FlowLabel => opt(v6.map(|n| n.flow_label as u128)),
        Ipv6PayloadLength => opt(v6.map(|n| n.payload_length as u128)),
        Ipv6NextHeader => opt(v6.map(|n| n.next_header as u128)),
        Ipv6HopLimit => opt(v6.map(|n| n.hop_limit as u128)),
        Ipv6SrcAddr => opt(v6.map(|n| u128::from(n.src))),
        Ipv6DstAddr => opt(v6.map(|n| u128::from(n.dst))),
        TcpSrcPort => opt(tcp.map(|t| t.src_port as u128)),
        TcpDstPort => opt(tcp.map(|t| t.dst_port as u128)),
        TcpSeq => opt(tcp.map(|t| t.seq as u128)),
        TcpAck => opt(tcp.map(|t| t.ack as u128)),
        TcpDataOffset => opt(tcp.map(|t| t.data_offset as u128)),
        TcpReserved => opt(tcp.map(|t| t.reserved as u128)),
        TcpFlags => opt(tcp.map(|t| t.flags as u128)),
        TcpWindow => opt(tcp.map(|t| t.window as u128)),
        TcpChecksum => opt(tcp.map(|t| t.checksum as u128)),
        TcpUrgentPtr => opt(tcp.map(|t| t.urgent_ptr as u128)),
        TcpOptions => tcp.map_or(Absent, |t| Bytes(&t.options)),
        UdpSrcPort => opt(udp.map(|u| u.src_port as u128)),
        UdpDstPort => opt(udp.map(|u| u.dst_port as u128)),
        UdpLength => opt(udp.map(|u| u.length as u128)),
        UdpChecksum => opt(udp.map(|u| u.checksum as u128)),
        Payload => Bytes(&h.payload),
    }
}

/// Writes one packet slot. `None` is a padding slot.
fn encode_packet(h: Option<&PacketHeaders>, fields: &[(FieldId, &super::FieldSpec)], out: &mut [f32], fill: f32) {
    let Some(h) = h else {
        out.fill(fill);
        return;
    };
    for &(id, spec) in fields {
        let slot = &mut out[spec.offset..spec.offset + spec.bits];
        match extract(h, id) {
            FieldValue::Absent => slot.fill(fill),
            FieldValue::Uint(v) => {
                for (i, bit) in slot.iter_mut().enumerate() {
                    let shift = spec.bits - 1 - i;
                    *bit = if shift < 128 && (v >> shift) & 1 == 1 { 1.0 } else { 0.0 };
                }
            }
            FieldValue::Bytes(bytes) => {
                for (i, bit) in slot.iter_mut().enumerate() {
                    *bit = match bytes.get(i / 8) {
                        Some(b) => ((b >> (7 - i % 8)) & 1) as f32,
                        None => fill,
                    };
                }
            }
        }
    }
}

/// Encodes the first `packets_per_flow` packets of a flow under one schema.
///
/// Present bits become 0.0/1.0 (big-endian within each field); absent
/// fields, absent layers and padding slots take `fill`. The output length is
/// always `packets_per_flow * schema.total_bits_per_packet`.
pub fn encode_flow(flow: &FlowRecord, schema: &LayerSchema, packets_per_flow: usize, fill: f64) -> Vec<f32> {
    let width = schema.total_bits_per_packet;
    let mut out = vec![0.0f32; packets_per_flow * width];
    if width == 0 {
        return out;
    }
    let fields = schema.resolved();
    for (slot, chunk) in out.chunks_mut(width).enumerate() {
        encode_packet(flow.packets.get(slot), &fields, chunk, fill as f32);
    }
    out
}

/// Fields replaced by the fill value before learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub masked_fields: BTreeSet<(LayerId, String)>,
    pub fill_value: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl MaskSpec {
    pub fn none() -> Self {
        Self { masked_fields: BTreeSet::new(), fill_value: DEFAULT_FILL }
    }

    /// Addresses, IP identification, checksums and TCP sequence numbers.
    pub fn default_artifacts() -> Self {
        let entries: &[(LayerId, &str)] = &[
            (LayerId::Link, "eth_dst"),
            (LayerId::Link, "eth_src"),
            (LayerId::Network, "ipv4_src_addr"),
            (LayerId::Network, "ipv4_dst_addr"),
            (LayerId::Network, "ipv6_src_addr"),
            (LayerId::Network, "ipv6_dst_addr"),
            (LayerId::Network, "ipv4_identification"),
            (LayerId::Network, "ipv4_checksum"),
            (LayerId::Transport, "tcp_checksum"),
            (LayerId::Transport, "udp_checksum"),
            (LayerId::Transport, "tcp_seq"),
            (LayerId::Transport, "tcp_ack"),
        ];
        Self {
            masked_fields: entries.iter().map(|(l, n)| (*l, n.to_string())).collect(),
            fill_value: DEFAULT_FILL,
        }
    }

    pub fn with_ports(mut self) -> Self {
        for n in ["tcp_src_port", "tcp_dst_port", "udp_src_port", "udp_dst_port"] {
            self.masked_fields.insert((LayerId::Transport, n.to_string()));
        }
        self
    }

    /// Adds `LAYER:field` or a bare field name (field names are unique
    /// across the built-in schemas).
    pub fn add(&mut self, entry: &str, schemas: &[LayerSchema]) -> Result<(), ViewError> {
        let (layer, field) = match entry.split_once(':') {
            Some((l, f)) => (Some(l.parse::<LayerId>()?), f.trim()),
            None => (None, entry.trim()),
        };
        let owner = schemas
            .iter()
            .find(|s| layer.is_none_or(|l| l == s.layer) && s.field(field).is_some())
            .map(|s| s.layer);
        match owner {
            Some(l) => {
                self.masked_fields.insert((l, field.to_string()));
                Ok(())
            }
            None => Err(ViewError::UnknownField {
                layer: layer.unwrap_or(LayerId::Application),
                field: field.to_string(),
            }),
        }
    }

    /// Every masked field must exist in some schema.
    pub fn validate(&self, schemas: &[LayerSchema]) -> Result<(), ViewError> {
        for (layer, field) in &self.masked_fields {
            let ok = schemas.iter().any(|s| s.layer == *layer && s.field(field).is_some());
            if !ok {
                return Err(ViewError::UnknownField { layer: *layer, field: field.clone() });
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<String> {
        self.masked_fields.iter().map(|(l, f)| format!("{l}:{f}")).collect()
    }
}

/// Sets every bit of every masked field, in every packet slot, to the fill value.
pub fn apply_mask(view: &ViewMatrix, mask: &MaskSpec, schema: &LayerSchema) -> Result<ViewMatrix, ViewError> {
    let mut out = view.clone();
    let width = schema.total_bits_per_packet;
    if width == 0 {
        return Ok(out);
    }
    let mut spans = Vec::new();
    for (layer, field) in &mask.masked_fields {
        if *layer != schema.layer {
            continue;
        }
        let spec = schema
            .field(field)
            .ok_or_else(|| ViewError::UnknownField { layer: *layer, field: field.clone() })?;
        spans.push((spec.offset, spec.bits));
    }
    if view.cols() % width != 0 {
        return Err(ViewError::ShapeMismatch { expected: width, found: view.cols() });
    }
    let fill = mask.fill_value as f32;
    let cols = view.cols();
    for row in out.data_mut().chunks_mut(cols.max(1)) {
        for slot in row.chunks_mut(width) {
            for &(offset, bits) in &spans {
                slot[offset..offset + bits].fill(fill);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::craft::Ipv4FrameSpec;
    use crate::ingest::{parse_packet, RawPacket, Timestamp};
    use crate::views::schema::layer_schema;
    use std::net::Ipv4Addr;

    fn flow(specs: &[Ipv4FrameSpec]) -> FlowRecord {
        let packets: Vec<PacketHeaders> = specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let b = s.build();
                parse_packet(&RawPacket {
                    timestamp: Timestamp { seconds: i as u32, micros: 0 },
                    captured_length: b.len() as u32,
                    original_length: b.len() as u32,
                    link_bytes: b,
                })
            })
            .collect();
        FlowRecord {
            key: crate::ingest::flow_key(&packets[0]).unwrap(),
            packets,
            label: Some(0),
            source_file: "t".into(),
        }
    }

    fn tcp() -> Ipv4FrameSpec {
        Ipv4FrameSpec::tcp((Ipv4Addr::new(10, 0, 0, 1), 1234), (Ipv4Addr::new(10, 0, 0, 2), 443))
    }

    #[test]
    fn version_nibble_is_big_endian() {
        let s = layer_schema(LayerId::Network, 0);
        let v = encode_flow(&flow(&[tcp()]), &s, 1, DEFAULT_FILL);
        assert_eq!(&v[0..4], &[0.0, 1.0, 0.0, 0.0]);
        // IPv6 band absent
        assert!(v[160..480].iter().all(|&b| b == -1.0));
    }

    #[test]
    fn udp_packet_leaves_tcp_band_absent() {
        let udp = Ipv4FrameSpec::udp((Ipv4Addr::new(10, 0, 0, 1), 5000), (Ipv4Addr::new(10, 0, 0, 2), 53));
        let s = layer_schema(LayerId::Transport, 0);
        let v = encode_flow(&flow(&[udp]), &s, 1, DEFAULT_FILL);
        assert!(v[..480].iter().all(|&b| b == -1.0));
        assert!(v[480..].iter().all(|&b| b == 0.0 || b == 1.0));
    }

    #[test]
    fn short_flow_is_padded_and_long_flow_truncated() {
        let s = layer_schema(LayerId::Link, 0);
        let f = flow(&[tcp(), tcp()]);
        let v = encode_flow(&f, &s, 3, DEFAULT_FILL);
        assert_eq!(v.len(), 336);
        assert!(v[224..].iter().all(|&b| b == -1.0));
        assert!(v[..224].iter().all(|&b| b == 0.0 || b == 1.0));
        assert_eq!(encode_flow(&f, &s, 1, DEFAULT_FILL).len(), 112);
    }

    #[test]
    fn partial_options_and_payload_fill_missing_bytes() {
        let mut spec = tcp();
        if let crate::ingest::craft::TransportSpec::Tcp { options, .. } = &mut spec.transport {
            *options = vec![1, 1, 1, 0];
        }
        spec.payload = vec![0xff, 0x00];
        let f = flow(&[spec]);
        let t = layer_schema(LayerId::Transport, 0);
        let v = encode_flow(&f, &t, 1, DEFAULT_FILL);
        let opt = t.field("tcp_options").unwrap().offset;
        assert_eq!(&v[opt..opt + 8], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(v[opt + 32..opt + 320].iter().all(|&b| b == -1.0));
        let a = layer_schema(LayerId::Application, 4);
        let p = encode_flow(&f, &a, 1, DEFAULT_FILL);
        assert!(p[..8].iter().all(|&b| b == 1.0));
        assert!(p[8..16].iter().all(|&b| b == 0.0));
        assert!(p[16..].iter().all(|&b| b == -1.0));
    }

    #[test]
    fn unknown_mask_entry_is_rejected() {
        let schemas = crate::views::default_schemas(4);
        let mut m = MaskSpec::none();
        assert!(m.add("NETWORK:nope", &schemas).is_err());
        m.add("ipv4_ttl", &schemas).unwrap();
        assert!(m.masked_fields.contains(&(LayerId::Network, "ipv4_ttl".to_string())));
        let bad = MaskSpec {
            masked_fields: [(LayerId::Link, "tcp_seq".to_string())].into_iter().collect(),
            fill_value: -1.0,
        };
        assert!(bad.validate(&schemas).is_err());
        let view = ViewMatrix::new(LayerId::Link, 1, 112, vec![0.0; 112]).unwrap();
        assert!(matches!(apply_mask(&view, &bad, &schemas[0]), Err(ViewError::UnknownField { .. })));
    }
}
