//! Capture ingestion: pcap records to parsed headers to labelled flows.

pub mod craft;
mod flow;
mod manifest;
mod packet;
mod pcap;

use std::path::{Path, PathBuf};

pub use flow::{assemble_flows, flow_key, Endpoint, FlowKey, FlowOptions, FlowRecord};
pub use manifest::Manifest;
pub use packet::{
    parse_packet, EthernetHeader, Ipv4Header, Ipv6Header, LayerPresence, Malformed, NetworkHeader,
    PacketHeaders, ParsedLayer, TcpHeader, TransportHeader, UdpHeader, ETHERTYPE_IPV4, ETHERTYPE_IPV6,
    ETHERTYPE_VLAN, IPPROTO_TCP, IPPROTO_UDP,
};
pub use pcap::{parse_pcap, read_pcap, PcapWriter, RawPacket, Timestamp, LINKTYPE_ETHERNET, PCAP_MAGIC};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unsupported capture format (magic {0:#010x})")]
    BadMagic(u32),
    #[error("truncated capture at byte {offset}: need {needed} bytes, have {available}")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("record at byte {offset} claims captured length {captured} > original length {original}")]
    InvalidRecord { offset: usize, captured: u32, original: u32 },
    #[error("unsupported link type {0} (only Ethernet is supported)")]
    UnsupportedLinkType(u32),
    #[error("packet has no network layer")]
    NoNetworkLayer,
    #[error("manifest not found: {0}")]
    ManifestNotFound(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    File { path: String, source: Box<IngestError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads, parses and groups one capture file.
pub fn ingest_file(path: &Path, label: Option<usize>, options: FlowOptions) -> Result<Vec<FlowRecord>, IngestError> {
    let packets = read_pcap(path)?;
    let headers: Vec<PacketHeaders> = packets.iter().map(parse_packet).collect();
    Ok(assemble_flows(headers, &path.display().to_string(), label, options))
}

/// All `.pcap` files below `dir`, sorted by path.
pub fn list_captures(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "pcap") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Ingests every capture under `dir`, labelling each file from the manifest.
///
/// Files are parsed in parallel and treated independently (flows never span
/// files). The result is ordered by file path, then by the per-file flow order.
pub fn ingest_dir(dir: &Path, manifest: &Manifest, options: FlowOptions) -> Result<Vec<FlowRecord>, IngestError> {
    let files = list_captures(dir)?;
    let per_file: Vec<Result<Vec<FlowRecord>, IngestError>> = files
        .par_iter()
        .map(|f| {
            ingest_file(f, manifest.label_for(f, dir), options)
                .map_err(|e| IngestError::File { path: f.display().to_string(), source: Box::new(e) })
        })
        .collect();
    let mut flows = Vec::new();
    for r in per_file {
        flows.extend(r?);
    }
    Ok(flows)
}
