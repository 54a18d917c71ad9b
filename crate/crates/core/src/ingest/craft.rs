//! Frame construction for fixtures and synthetic captures.

use std::net::Ipv4Addr;

use super::packet::{ETHERTYPE_IPV4, IPPROTO_TCP, IPPROTO_UDP};

#[derive(Clone, Debug)]
pub enum TransportSpec {
    Tcp {
        src_port: u16,
        dst_port: u16,
        seq: u32,
        ack: u32,
        flags: u16,
        window: u16,
        checksum: u16,
        options: Vec<u8>,
    },
    Udp {
        src_port: u16,
        dst_port: u16,
        checksum: u16,
    },
    /// Raw IP protocol number with no transport header.
    Other(u8),
}

#[derive(Clone, Debug)]
pub struct Ipv4FrameSpec {
    pub dst_mac: [u8; 6],
    pub src_mac: [u8; 6],
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub tos: u8,
    pub identification: u16,
    pub dont_fragment: bool,
    pub ttl: u8,
    pub transport: TransportSpec,
    pub payload: Vec<u8>,
}

impl Ipv4FrameSpec {
    pub fn tcp(src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16)) -> Self {
        Self {
            dst_mac: [0x02, 0, 0, 0, 0, 0x02],
            src_mac: [0x02, 0, 0, 0, 0, 0x01],
            src: src.0,
            dst: dst.0,
            tos: 0,
            identification: 0,
            dont_fragment: true,
            ttl: 64,
            transport: TransportSpec::Tcp {
                src_port: src.1,
                dst_port: dst.1,
                seq: 0,
                ack: 0,
                flags: 0x018,
                window: 65535,
                checksum: 0,
                options: Vec::new(),
            },
            payload: Vec::new(),
        }
    }

    pub fn udp(src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16)) -> Self {
        Self {
            transport: TransportSpec::Udp { src_port: src.1, dst_port: dst.1, checksum: 0 },
            ..Self::tcp(src, dst)
        }
    }

    /// Serialises to an Ethernet frame with a valid IPv4 header checksum.
    pub fn build(&self) -> Vec<u8> {
        let mut transport = Vec::new();
        let protocol = match &self.transport {
            TransportSpec::Tcp { src_port, dst_port, seq, ack, flags, window, checksum, options } => {
                let mut opts = options.clone();
                while opts.len() % 4 != 0 {
                    opts.push(0);
                }
                let data_offset = (20 + opts.len()) / 4;
                transport.extend_from_slice(&src_port.to_be_bytes());
                transport.extend_from_slice(&dst_port.to_be_bytes());
                transport.extend_from_slice(&seq.to_be_bytes());
                transport.extend_from_slice(&ack.to_be_bytes());
                let off_flags = ((data_offset as u16) << 12) | (flags & 0x1ff);
                transport.extend_from_slice(&off_flags.to_be_bytes());
                transport.extend_from_slice(&window.to_be_bytes());
                transport.extend_from_slice(&checksum.to_be_bytes());
                transport.extend_from_slice(&0u16.to_be_bytes());
                transport.extend_from_slice(&opts);
                IPPROTO_TCP
            }
            TransportSpec::Udp { src_port, dst_port, checksum } => {
                transport.extend_from_slice(&src_port.to_be_bytes());
                transport.extend_from_slice(&dst_port.to_be_bytes());
                transport.extend_from_slice(&((8 + self.payload.len()) as u16).to_be_bytes());
                transport.extend_from_slice(&checksum.to_be_bytes());
                IPPROTO_UDP
            }
            TransportSpec::Other(p) => *p,
        };
        let total_length = (20 + transport.len() + self.payload.len()) as u16;
        let mut ip = Vec::with_capacity(20);
        ip.push(0x45);
        ip.push(self.tos);
        ip.extend_from_slice(&total_length.to_be_bytes());
        ip.extend_from_slice(&self.identification.to_be_bytes());
        let flags: u16 = if self.dont_fragment { 0x4000 } else { 0 };
        ip.extend_from_slice(&flags.to_be_bytes());
        ip.push(self.ttl);
        ip.push(protocol);
        ip.extend_from_slice(&[0, 0]);
        ip.extend_from_slice(&self.src.octets());
        ip.extend_from_slice(&self.dst.octets());
        let csum = ipv4_checksum(&ip);
        ip[10..12].copy_from_slice(&csum.to_be_bytes());

        let mut frame = Vec::with_capacity(14 + total_length as usize);
        frame.extend_from_slice(&self.dst_mac);
        frame.extend_from_slice(&self.src_mac);
        frame.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        frame.extend_from_slice(&ip);
        frame.extend_from_slice(&transport);
        frame.extend_from_slice(&self.payload);
        frame
    }
}

/// Ones-complement sum over 16-bit words.
pub fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]) as u32)
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_of_reference_header() {
        // classic worked example header with checksum field zeroed
        let hdr = [
            0x45, 0x00, 0x00, 0x73, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11, 0x00, 0x00, 0xc0, 0xa8, 0x00, 0x01,
            0xc0, 0xa8, 0x00, 0xc7,
        ];
        assert_eq!(ipv4_checksum(&hdr), 0xb861);
    }
}
