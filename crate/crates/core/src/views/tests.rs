use std::net::Ipv4Addr;

use proptest::prelude::*;

use super::*;
use crate::ingest::craft::{Ipv4FrameSpec, TransportSpec};
use crate::ingest::{assemble_flows, parse_packet, FlowOptions, PacketHeaders, RawPacket, Timestamp};

fn headers(spec: &Ipv4FrameSpec, sec: u32) -> PacketHeaders {
    let b = spec.build();
    parse_packet(&RawPacket {
        timestamp: Timestamp { seconds: sec, micros: 0 },
        captured_length: b.len() as u32,
        original_length: b.len() as u32,
        link_bytes: b,
    })
}

const A: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 1);
const B: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 2);

fn two_flows() -> Vec<FlowRecord> {
    let pkts = vec![
        headers(&Ipv4FrameSpec::tcp((A, 1000), (B, 443)), 1),
        headers(&Ipv4FrameSpec::udp((A, 2000), (B, 53)), 2),
        headers(&Ipv4FrameSpec::tcp((B, 443), (A, 1000)), 3),
    ];
    assemble_flows(pkts, "fixture.pcap", Some(1), FlowOptions::default())
}

fn cfg(layers: &[LayerId]) -> ViewConfig {
    ViewConfig { layers: layers.to_vec(), packets_per_flow: 3, payload_bytes: 8, ..ViewConfig::default() }
}

#[test]
fn two_layers_two_flows() {
    let ds = build_views(&two_flows(), &cfg(&[LayerId::Network, LayerId::Transport])).unwrap();
    assert_eq!(ds.m(), 2);
    assert!(ds.views.iter().all(|v| v.rows() == 2));
    assert_eq!(ds.labels, vec![1, 1]);
    assert_eq!(ds.class_count, 2);
    assert_eq!(ds.flow_index[0].source, "fixture.pcap");
}

#[test]
fn all_layers_match_schema_arithmetic() {
    let ds = build_views(&two_flows(), &cfg(&LayerId::ALL)).unwrap();
    assert_eq!(ds.m(), 4);
    assert_eq!(ds.dims(), vec![3 * 112, 3 * 480, 3 * 544, 3 * 64]);
    assert!(ds.views.iter().all(|v| v.is_ternary()));
}

#[test]
fn zero_payload_drops_application_view() {
    let mut c = cfg(&LayerId::ALL);
    c.payload_bytes = 0;
    c.packets_per_flow = 1;
    let ds = build_views(&two_flows(), &c).unwrap();
    assert_eq!(ds.m(), 3);
    assert!(ds.views.iter().all(|v| v.layer != LayerId::Application));
}

#[test]
fn build_errors() {
    assert!(matches!(build_views(&two_flows(), &cfg(&[])), Err(ViewError::NoEnabledLayers)));
    assert!(matches!(build_views(&[], &cfg(&[LayerId::Link])), Err(ViewError::EmptyDataset)));
    let mut flows = two_flows();
    flows[1].label = None;
    assert!(matches!(build_views(&flows, &cfg(&[LayerId::Link])), Err(ViewError::Unlabeled(1))));
}

fn unmasked(layers: &[LayerId]) -> ViewConfig {
    ViewConfig { mask: MaskSpec::none(), ..cfg(layers) }
}

#[test]
fn address_mask_covers_64_bits_per_packet() {
    let ds = build_views(&two_flows(), &unmasked(&[LayerId::Network])).unwrap();
    let schema = &ds.schemas[0];
    let schemas = default_schemas(8);
    let mut m = MaskSpec::none();
    m.add("NETWORK:ipv4_src_addr", &schemas).unwrap();
    m.add("NETWORK:ipv4_dst_addr", &schemas).unwrap();
    let masked = apply_mask(&ds.views[0], &m, schema).unwrap();
    let changed_positions: Vec<usize> = (0..480)
        .filter(|&j| (0..2).all(|r| masked.row(r)[j] == -1.0) && ds.views[0].row(0)[j] != -1.0)
        .collect();
    assert_eq!(changed_positions.len(), 64);
    assert_eq!(changed_positions[0], 96);
    for slot in 0..3 {
        for j in 96..160 {
            assert_eq!(masked.row(0)[slot * 480 + j], -1.0);
        }
    }
}

#[test]
fn empty_mask_is_identity_and_full_mask_is_constant() {
    let ds = build_views(&two_flows(), &unmasked(&[LayerId::Link])).unwrap();
    let s = &ds.schemas[0];
    assert_eq!(apply_mask(&ds.views[0], &MaskSpec::none(), s).unwrap(), ds.views[0]);
    let mut all = MaskSpec::none();
    for f in &s.fields {
        all.masked_fields.insert((LayerId::Link, f.name.clone()));
    }
    let masked = apply_mask(&ds.views[0], &all, s).unwrap();
    assert!(masked.data().iter().all(|&v| v == -1.0));
}

#[test]
fn default_mask_hides_addresses() {
    let ds = build_views(&two_flows(), &cfg(&[LayerId::Network])).unwrap();
    let s = &ds.schemas[0];
    let src = s.field("ipv4_src_addr").unwrap();
    assert!(ds.views[0].row(0)[src.offset..src.offset + 32].iter().all(|&v| v == -1.0));
    let ttl = s.field("ipv4_ttl").unwrap();
    assert!(ds.views[0].row(0)[ttl.offset..ttl.offset + 8].iter().all(|&v| v != -1.0));
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build_views(&two_flows(), &cfg(&LayerId::ALL)).unwrap();
    export_views(&ds, dir.path()).unwrap();
    let back = import_views(dir.path()).unwrap();
    assert_eq!(back, ds);
    let bytes = std::fs::read(dir.path().join("view_0_L2.bin")).unwrap();
    assert_eq!(&bytes[..8], b"PACCVIEW");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
    assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 336);
    assert_eq!(u32::from_le_bytes(bytes[28..32].try_into().unwrap()), 0);
    assert_eq!(bytes.len(), 32 + 2 * 336 * 4);
}

#[test]
fn empty_dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let v = ViewMatrix::new(LayerId::Network, 0, 480, Vec::new()).unwrap();
    let ds = MultiviewDataset::from_views(vec![v], Vec::new(), 2).unwrap();
    export_views(&ds, dir.path()).unwrap();
    let back = import_views(dir.path()).unwrap();
    assert_eq!(back.n(), 0);
    assert_eq!(back.views[0].cols(), 480);
}

#[test]
fn wrong_magic_is_a_version_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build_views(&two_flows(), &cfg(&[LayerId::Link])).unwrap();
    export_views(&ds, dir.path()).unwrap();
    let p = dir.path().join("view_0_L2.bin");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] = b'X';
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(import_views(dir.path()), Err(ViewError::FormatVersionMismatch(_))));
}

#[test]
fn subset_and_fingerprint() {
    let ds = build_views(&two_flows(), &cfg(&[LayerId::Link, LayerId::Network])).unwrap();
    let sub = ds.subset(&[1]);
    assert_eq!(sub.n(), 1);
    assert_eq!(sub.views[1].row(0), ds.views[1].row(1));
    assert_ne!(sub.fingerprint(), ds.fingerprint());
    assert_eq!(ds.fingerprint(), ds.clone().fingerprint());
    let t = ds.views[0].batch(&[1, 0]);
    assert_eq!(t.shape(), [2, 336]);
    assert_eq!(t.get(0, 5), ds.views[0].row(1)[5] as f64);
}

fn arb_spec() -> impl Strategy<Value = Ipv4FrameSpec> {
    (
        any::<bool>(),
        any::<u16>(),
        any::<u16>(),
        any::<u8>(),
        any::<u8>(),
        any::<u16>(),
        prop::collection::vec(any::<u8>(), 0..12),
        prop::collection::vec(any::<u8>(), 0..20),
    )
        .prop_map(|(udp, sp, dp, ttl, tos, ident, opts, payload)| {
            let mut s = if udp { Ipv4FrameSpec::udp((A, sp), (B, dp)) } else { Ipv4FrameSpec::tcp((A, sp), (B, dp)) };
            s.ttl = ttl;
            s.tos = tos;
            s.identification = ident;
            if let TransportSpec::Tcp { options, .. } = &mut s.transport {
                *options = opts;
            }
            s.payload = payload;
            s
        })
}

fn flow_of(specs: &[Ipv4FrameSpec]) -> FlowRecord {
    let packets: Vec<PacketHeaders> = specs.iter().enumerate().map(|(i, s)| headers(s, i as u32)).collect();
    FlowRecord {
        key: crate::ingest::flow_key(&packets[0]).unwrap(),
        packets,
        label: Some(0),
        source_file: String::new(),
    }
}

proptest! {
    #[test]
    fn encoded_length_and_alphabet(specs in prop::collection::vec(arb_spec(), 1..6), ppf in 1usize..5) {
        let f = flow_of(&specs);
        for s in default_schemas(8) {
            let v = encode_flow(&f, &s, ppf, DEFAULT_FILL);
            prop_assert_eq!(v.len(), s.d_f(ppf));
            prop_assert!(v.iter().all(|&b| b == -1.0 || b == 0.0 || b == 1.0));
            let view = ViewMatrix::new(s.layer, 1, v.len(), v).unwrap();
            let masked = apply_mask(&view, &MaskSpec::default_artifacts().with_ports(), &s).unwrap();
            prop_assert!(masked.is_ternary());
        }
    }

    #[test]
    fn mask_is_idempotent(specs in prop::collection::vec(arb_spec(), 1..4)) {
        let f = flow_of(&specs);
        let mask = MaskSpec::default_artifacts();
        for s in default_schemas(4) {
            let v = encode_flow(&f, &s, 3, DEFAULT_FILL);
            let view = ViewMatrix::new(s.layer, 1, v.len(), v).unwrap();
            let once = apply_mask(&view, &mask, &s).unwrap();
            prop_assert_eq!(apply_mask(&once, &mask, &s).unwrap(), once);
        }
    }

    #[test]
    fn one_field_change_is_local(specs in prop::collection::vec(arb_spec(), 1..4), slot in 0usize..4, ttl in any::<u8>()) {
        let slot = slot % specs.len();
        let mut changed = specs.clone();
        changed[slot].ttl = ttl;
        let s = layer_schema(LayerId::Network, 0);
        let ppf = 4;
        let a = encode_flow(&flow_of(&specs), &s, ppf, DEFAULT_FILL);
        let b = encode_flow(&flow_of(&changed), &s, ppf, DEFAULT_FILL);
        let w = s.total_bits_per_packet;
        let ttl_f = s.field("ipv4_ttl").unwrap();
        let cs = s.field("ipv4_checksum").unwrap();
        for j in 0..a.len() {
            let in_slot = j / w == slot;
            let off = j % w;
            let in_ttl = off >= ttl_f.offset && off < ttl_f.offset + ttl_f.bits;
            // the crafted frame recomputes its header checksum
            let in_cs = off >= cs.offset && off < cs.offset + cs.bits;
            if !(in_slot && (in_ttl || in_cs)) {
                prop_assert_eq!(a[j], b[j]);
            }
        }
    }
}
