//! Ethernet / IPv4 / IPv6 / TCP / UDP header decoding.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::pcap::{RawPacket, Timestamp};

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86dd;
pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const IPPROTO_TCP: u8 = 6;
pub const IPPROTO_UDP: u8 = 17;

const ETHERNET_LEN: usize = 14;
const IPV6_LEN: usize = 40;
const UDP_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EthernetHeader {
    pub dst: [u8; 6],
    pub src: [u8; 6],
    /// Ethertype of the encapsulated protocol (after one VLAN tag, if any).
    pub ethertype: u16,
    pub vlan_tci: Option<u16>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ipv4Header {
    pub version: u8,
    pub ihl: u8,
    pub tos: u8,
    pub total_length: u16,
    pub identification: u16,
    pub flags: u8,
    pub fragment_offset: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub checksum: u16,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    /// Full header including options; length is `ihl * 4`.
    pub raw: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ipv6Header {
    pub version: u8,
    pub traffic_class: u8,
    pub flow_label: u32,
    pub payload_length: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
    pub raw: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkHeader {
    V4(Ipv4Header),
    V6(Ipv6Header),
}

impl NetworkHeader {
    pub fn src(&self) -> IpAddr {
        match self {
            NetworkHeader::V4(h) => IpAddr::V4(h.src),
            NetworkHeader::V6(h) => IpAddr::V6(h.src),
        }
    }

    pub fn dst(&self) -> IpAddr {
        match self {
            NetworkHeader::V4(h) => IpAddr::V4(h.dst),
            NetworkHeader::V6(h) => IpAddr::V6(h.dst),
        }
    }

    /// IPv4 protocol or IPv6 next header.
    pub fn protocol(&self) -> u8 {
        match self {
            NetworkHeader::V4(h) => h.protocol,
            NetworkHeader::V6(h) => h.next_header,
        }
    }

    pub fn raw(&self) -> &[u8] {
        match self {
            NetworkHeader::V4(h) => &h.raw,
            NetworkHeader::V6(h) => &h.raw,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TcpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    pub data_offset: u8,
    /// The three reserved bits.
    pub reserved: u8,
    /// NS, CWR, ECE, URG, ACK, PSH, RST, SYN, FIN (9 bits).
    pub flags: u16,
    pub window: u16,
    pub checksum: u16,
    pub urgent_ptr: u16,
    pub options: Vec<u8>,
    pub raw: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UdpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
    pub checksum: u16,
    pub raw: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportHeader {
    Tcp(TcpHeader),
    Udp(UdpHeader),
}

impl TransportHeader {
    pub fn ports(&self) -> (u16, u16) {
        match self {
            TransportHeader::Tcp(h) => (h.src_port, h.dst_port),
            TransportHeader::Udp(h) => (h.src_port, h.dst_port),
        }
    }

    pub fn raw(&self) -> &[u8] {
        match self {
            TransportHeader::Tcp(h) => &h.raw,
            TransportHeader::Udp(h) => &h.raw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParsedLayer {
    Link,
    Network,
    Transport,
}

/// Where decoding stopped early. The packet keeps every layer parsed before
/// this point and the unparsed remainder becomes payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Malformed {
    pub layer: ParsedLayer,
    pub declared: usize,
    pub available: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerPresence {
    pub link: bool,
    pub network: bool,
    pub transport: bool,
    pub application: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketHeaders {
    pub timestamp: Timestamp,
    pub link: Option<EthernetHeader>,
    pub network: Option<NetworkHeader>,
    pub transport: Option<TransportHeader>,
    pub payload: Vec<u8>,
    pub malformed: Option<Malformed>,
}

impl PacketHeaders {
    pub fn layer_presence(&self) -> LayerPresence {
        LayerPresence {
            link: self.link.is_some(),
            network: self.network.is_some(),
            transport: self.transport.is_some(),
            application: !self.payload.is_empty(),
        }
    }
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

/// Decodes as many layers as the frame allows.
///
/// Never fails: a header whose declared length exceeds the captured bytes
/// stops decoding, is recorded in [`PacketHeaders::malformed`], and leaves
/// the remaining bytes as payload.
pub fn parse_packet(pkt: &RawPacket) -> PacketHeaders {
    let bytes = pkt.link_bytes.as_slice();
    let mut out = PacketHeaders {
        timestamp: pkt.timestamp,
        link: None,
        network: None,
        transport: None,
        payload: Vec::new(),
        malformed: None,
    };

    let malformed = |layer, declared, available| Some(Malformed { layer, declared, available });

    if bytes.len() < ETHERNET_LEN {
        out.payload = bytes.to_vec();
        out.malformed = malformed(ParsedLayer::Link, ETHERNET_LEN, bytes.len());
        return out;
    }
    let mut ethertype = be16(&bytes[12..14]);
    let mut cursor = ETHERNET_LEN;
    let mut vlan_tci = None;
    if ethertype == ETHERTYPE_VLAN {
        if bytes.len() < cursor + 4 {
            out.payload = bytes.to_vec();
            out.malformed = malformed(ParsedLayer::Link, cursor + 4, bytes.len());
            return out;
        }
        vlan_tci = Some(be16(&bytes[cursor..cursor + 2]));
        ethertype = be16(&bytes[cursor + 2..cursor + 4]);
        cursor += 4;
    }
    out.link = Some(EthernetHeader {
        dst: bytes[0..6].try_into().unwrap(),
        src: bytes[6..12].try_into().unwrap(),
        ethertype,
        vlan_tci,
    });

    let rest = &bytes[cursor..];
    let (network, transport_bytes) = match ethertype {
        ETHERTYPE_IPV4 => match parse_ipv4(rest) {
            Ok(v) => v,
            Err(m) => {
                out.payload = rest.to_vec();
                out.malformed = Some(m);
                return out;
            }
        },
        ETHERTYPE_IPV6 => match parse_ipv6(rest) {
            Ok(v) => v,
            Err(m) => {
                out.payload = rest.to_vec();
                out.malformed = Some(m);
                return out;
            }
        },
        _ => {
            out.payload = rest.to_vec();
            return out;
        }
    };
    let protocol = network.protocol();
    out.network = Some(network);

    let parsed = match protocol {
        IPPROTO_TCP => parse_tcp(transport_bytes),
        IPPROTO_UDP => parse_udp(transport_bytes),
        _ => {
            out.payload = transport_bytes.to_vec();
            return out;
        }
    };
    match parsed {
        Ok((transport, header_len)) => {
            out.transport = Some(transport);
            out.payload = transport_bytes[header_len..].to_vec();
        }
        Err(m) => {
            out.payload = transport_bytes.to_vec();
            out.malformed = Some(m);
        }
    }
    out
}

/// Returns the header and the bytes it carries (bounded by total length).
fn parse_ipv4(b: &[u8]) -> Result<(NetworkHeader, &[u8]), Malformed> {
    let fail = |declared, available| Malformed { layer: ParsedLayer::Network, declared, available };
    if b.len() < 20 {
        return Err(fail(20, b.len()));
    }
    let ihl = b[0] & 0x0f;
    let header_len = ihl as usize * 4;
    if header_len < 20 || header_len > b.len() {
        return Err(fail(header_len.max(20), b.len()));
    }
    let total_length = be16(&b[2..4]);
    let flags_frag = be16(&b[6..8]);
    let hdr = Ipv4Header {
        version: b[0] >> 4,
        ihl,
        tos: b[1],
        total_length,
        identification: be16(&b[4..6]),
        flags: (flags_frag >> 13) as u8,
        fragment_offset: flags_frag & 0x1fff,
        ttl: b[8],
        protocol: b[9],
        checksum: be16(&b[10..12]),
        src: Ipv4Addr::new(b[12], b[13], b[14], b[15]),
        dst: Ipv4Addr::new(b[16], b[17], b[18], b[19]),
        raw: b[..header_len].to_vec(),
    };
    // trailing Ethernet padding is not part of the datagram
    let end = if (total_length as usize) >= header_len && (total_length as usize) <= b.len() {
        total_length as usize
    } else {
        b.len()
    };
    Ok((NetworkHeader::V4(hdr), &b[header_len..end]))
}

fn parse_ipv6(b: &[u8]) -> Result<(NetworkHeader, &[u8]), Malformed> {
    if b.len() < IPV6_LEN {
        return Err(Malformed { layer: ParsedLayer::Network, declared: IPV6_LEN, available: b.len() });
    }
    let first = be32(&b[0..4]);
    let payload_length = be16(&b[4..6]);
    let addr = |s: &[u8]| Ipv6Addr::from(<[u8; 16]>::try_from(s).unwrap());
    let hdr = Ipv6Header {
        version: (first >> 28) as u8,
        traffic_class: ((first >> 20) & 0xff) as u8,
        flow_label: first & 0x000f_ffff,
        payload_length,
        next_header: b[6],
        hop_limit: b[7],
        src: addr(&b[8..24]),
        dst: addr(&b[24..40]),
        raw: b[..IPV6_LEN].to_vec(),
    };
    let end = (IPV6_LEN + payload_length as usize).min(b.len());
    let end = if payload_length == 0 { b.len() } else { end };
    Ok((NetworkHeader::V6(hdr), &b[IPV6_LEN..end]))
}

fn parse_tcp(b: &[u8]) -> Result<(TransportHeader, usize), Malformed> {
    let fail = |declared, available| Malformed { layer: ParsedLayer::Transport, declared, available };
    if b.len() < 20 {
        return Err(fail(20, b.len()));
    }
    let data_offset = b[12] >> 4;
    let header_len = data_offset as usize * 4;
    if header_len < 20 || header_len > b.len() {
        return Err(fail(header_len.max(20), b.len()));
    }
    let off_flags = be16(&b[12..14]);
    let hdr = TcpHeader {
        src_port: be16(&b[0..2]),
        dst_port: be16(&b[2..4]),
        seq: be32(&b[4..8]),
        ack: be32(&b[8..12]),
        data_offset,
        reserved: ((off_flags >> 9) & 0x7) as u8,
        flags: off_flags & 0x1ff,
        window: be16(&b[14..16]),
        checksum: be16(&b[16..18]),
        urgent_ptr: be16(&b[18..20]),
        options: b[20..header_len].to_vec(),
        raw: b[..header_len].to_vec(),
    };
    Ok((TransportHeader::Tcp(hdr), header_len))
}

fn parse_udp(b: &[u8]) -> Result<(TransportHeader, usize), Malformed> {
    if b.len() < UDP_LEN {
        return Err(Malformed { layer: ParsedLayer::Transport, declared: UDP_LEN, available: b.len() });
    }
    let hdr = UdpHeader {
        src_port: be16(&b[0..2]),
        dst_port: be16(&b[2..4]),
        length: be16(&b[4..6]),
        checksum: be16(&b[6..8]),
        raw: b[..UDP_LEN].to_vec(),
    };
    Ok((TransportHeader::Udp(hdr), UDP_LEN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(bytes: Vec<u8>) -> RawPacket {
        RawPacket {
            timestamp: Timestamp::default(),
            captured_length: bytes.len() as u32,
            original_length: bytes.len() as u32,
            link_bytes: bytes,
        }
    }

    #[test]
    fn unknown_ethertype_leaves_network_absent() {
        let mut frame = vec![0x11; 12];
        frame.extend_from_slice(&[0x99, 0x99, 1, 2, 3]);
        let h = parse_packet(&raw(frame));
        assert_eq!(h.link.as_ref().unwrap().ethertype, 0x9999);
        assert!(h.network.is_none() && h.transport.is_none());
        assert_eq!(h.payload, vec![1, 2, 3]);
        assert!(h.malformed.is_none());
        let p = h.layer_presence();
        assert!(p.link && !p.network && !p.transport && p.application);
    }

    #[test]
    fn truncated_ip_header_keeps_link_layer() {
        let mut frame = vec![0; 12];
        frame.extend_from_slice(&[0x08, 0x00, 0x45, 0, 0, 40]);
        let h = parse_packet(&raw(frame));
        assert!(h.link.is_some());
        assert!(h.network.is_none());
        assert_eq!(h.malformed.as_ref().unwrap().layer, ParsedLayer::Network);
        assert_eq!(h.payload, vec![0x45, 0, 0, 40]);
    }

    #[test]
    fn tcp_data_offset_beyond_capture_is_malformed() {
        let mut frame = vec![0; 12];
        frame.extend_from_slice(&[0x08, 0x00]);
        let mut ip = vec![0x45, 0, 0, 40, 0, 0, 0, 0, 64, 6, 0, 0, 10, 0, 0, 1, 10, 0, 0, 2];
        let mut tcp = vec![0u8; 20];
        tcp[12] = 0xf0; // 60-byte header declared
        ip.extend_from_slice(&tcp);
        frame.extend_from_slice(&ip);
        let h = parse_packet(&raw(frame));
        assert!(h.network.is_some());
        assert!(h.transport.is_none());
        assert_eq!(h.malformed, Some(Malformed { layer: ParsedLayer::Transport, declared: 60, available: 20 }));
        assert_eq!(h.payload.len(), 20);
    }

    #[test]
    fn vlan_tag_is_unwrapped_once() {
        let mut frame = vec![0; 12];
        frame.extend_from_slice(&[0x81, 0x00, 0x00, 0x05, 0x12, 0x34, 0xde, 0xad]);
        let h = parse_packet(&raw(frame));
        let link = h.link.unwrap();
        assert_eq!(link.vlan_tci, Some(5));
        assert_eq!(link.ethertype, 0x1234);
        assert_eq!(h.payload, vec![0xde, 0xad]);
    }

    #[test]
    fn ipv6_udp_decodes() {
        let mut frame = vec![0; 12];
        frame.extend_from_slice(&[0x86, 0xdd]);
        let mut ip6 = vec![0x60, 0x12, 0x34, 0x56, 0, 10, 17, 64];
        ip6.extend_from_slice(&[0x20, 0x01, 0x0d, 0xb8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
        ip6.extend_from_slice(&[0x20, 0x01, 0x0d, 0xb8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2]);
        ip6.extend_from_slice(&[0x13, 0x88, 0x00, 0x35, 0, 10, 0xab, 0xcd, 7, 8]);
        frame.extend_from_slice(&ip6);
        let h = parse_packet(&raw(frame));
        let NetworkHeader::V6(n) = h.network.as_ref().unwrap() else { panic!("expected v6") };
        assert_eq!(n.traffic_class, 0x01);
        assert_eq!(n.flow_label, 0x23456);
        assert_eq!(n.hop_limit, 64);
        let TransportHeader::Udp(u) = h.transport.as_ref().unwrap() else { panic!("expected udp") };
        assert_eq!((u.src_port, u.dst_port, u.length, u.checksum), (5000, 53, 10, 0xabcd));
        assert_eq!(h.payload, vec![7, 8]);
    }
}
