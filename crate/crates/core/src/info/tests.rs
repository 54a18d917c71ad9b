use std::net::Ipv4Addr;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ingest::craft::Ipv4FrameSpec;
use crate::ingest::{flow_key, parse_packet, FlowRecord, RawPacket, Timestamp};
use crate::views::{apply_mask, build_views, LayerId, MaskSpec, ViewConfig};

fn joint3() -> impl Strategy<Value = DiscreteJoint> {
    (1usize..=4, 1usize..=4, 1usize..=4).prop_flat_map(|(a, b, c)| {
        prop::collection::vec(0u64..6, a * b * c).prop_filter_map("empty", move |counts| {
            DiscreteJoint::new(vec![a, b, c], counts).ok()
        })
    })
}

// I(X;Y) via the entropy decomposition, independent of the cell-wise formula.
fn mi_h(j: &DiscreteJoint, x: &[usize], y: &[usize]) -> f64 {
    let hx = j.regroup(&[x]).unwrap().entropy();
    let hy = j.regroup(&[y]).unwrap().entropy();
    let hxy = j.regroup(&[x, y]).unwrap().entropy();
    hx + hy - hxy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimates_are_nonnegative(j in joint3()) {
        prop_assert!(mutual_information(&j.regroup(&[&[0], &[1]]).unwrap()).unwrap() >= -1e-12);
        prop_assert!(conditional_mi(&j).unwrap() >= -1e-12);
        prop_assert!(j.entropy() >= 0.0);
    }

    // axes: 0 = Z_i, 1 = Z_{-i}, 2 = Y
    #[test]
    fn interaction_decomposition(j in joint3()) {
        let i_zy = mutual_information(&j.regroup(&[&[0], &[2]]).unwrap()).unwrap();
        let i_oy = mutual_information(&j.regroup(&[&[1], &[2]]).unwrap()).unwrap();
        let i_both = mutual_information(&j.regroup(&[&[0, 1], &[2]]).unwrap()).unwrap();
        let i_zy_given_o = conditional_mi(&j.regroup(&[&[0], &[2], &[1]]).unwrap()).unwrap();
        let interaction = i_zy + i_oy - i_both;
        prop_assert!((i_zy - i_zy_given_o - interaction).abs() < 1e-10);
        prop_assert!((i_zy - mi_h(&j, &[0], &[2])).abs() < 1e-10);
    }

    // axes: 0 = Z^u, 1 = Z^s, 2 = Y
    #[test]
    fn chain_rule(j in joint3()) {
        let joint = mutual_information(&j.regroup(&[&[0, 1], &[2]]).unwrap()).unwrap();
        let u = mutual_information(&j.regroup(&[&[0], &[2]]).unwrap()).unwrap();
        let s_given_u = conditional_mi(&j.regroup(&[&[1], &[2], &[0]]).unwrap()).unwrap();
        prop_assert!((joint - (u + s_given_u)).abs() < 1e-10);
    }
}

fn labelled_flow(label: usize, rng: &mut ChaCha8Rng, i: u32) -> FlowRecord {
    let mut spec = Ipv4FrameSpec::tcp((Ipv4Addr::new(10, 0, (i >> 8) as u8, i as u8), 1024 + i as u16), (Ipv4Addr::new(10, 1, 0, 1), 443));
    spec.ttl = if label == 1 { 128 } else { 64 };
    spec.tos = rng.gen_range(0..4) << 2;
    spec.identification = rng.gen();
    let b = spec.build();
    let packets = vec![parse_packet(&RawPacket {
        timestamp: Timestamp { seconds: i, micros: 0 },
        captured_length: b.len() as u32,
        original_length: b.len() as u32,
        link_bytes: b,
    })];
    FlowRecord { key: flow_key(&packets[0]).unwrap(), packets, label: Some(label), source_file: "s".into() }
}

#[test]
fn masking_a_field_does_not_add_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let flows: Vec<FlowRecord> = (0..800).map(|i| labelled_flow((i % 2) as usize, &mut rng, i)).collect();
    let cfg = ViewConfig { layers: vec![LayerId::Network], packets_per_flow: 1, payload_bytes: 0, mask: MaskSpec::none(), ..ViewConfig::default() };
    let ds = build_views(&flows, &cfg).unwrap();
    let schema = &ds.schemas[0];
    let base = view_mi(&ds.views[0].to_tensor(), &ds.labels, 3, 8).unwrap();
    for f in &schema.fields {
        let mut m = MaskSpec::none();
        m.masked_fields.insert((LayerId::Network, f.name.clone()));
        let masked = apply_mask(&ds.views[0], &m, schema).unwrap();
        let mi = view_mi(&masked.to_tensor(), &ds.labels, 3, 8).unwrap();
        assert!(mi <= base + 0.02, "{}: {mi} > {base}", f.name);
    }
}
