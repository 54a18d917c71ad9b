//! Classic libpcap file reading and writing.
//!
//! Only the original format (magic `0xa1b2c3d4`, microsecond timestamps) is
//! understood, in either byte order. Link type must be Ethernet.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::IngestError;

pub const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
pub const PCAP_MAGIC_SWAPPED: u32 = 0xd4c3_b2a1;
pub const LINKTYPE_ETHERNET: u32 = 1;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub seconds: u32,
    pub micros: u32,
}

impl Timestamp {
    pub fn as_secs_f64(self) -> f64 {
        self.seconds as f64 + self.micros as f64 * 1e-6
    }
}

/// One captured frame as stored in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPacket {
    pub timestamp: Timestamp,
    pub captured_length: u32,
    pub original_length: u32,
    pub link_bytes: Vec<u8>,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let arr: [u8; 4] = b[..4].try_into().expect("4 bytes");
        match self {
            Endian::Little => u32::from_le_bytes(arr),
            Endian::Big => u32::from_be_bytes(arr),
        }
    }
}

pub fn read_pcap(path: impl AsRef<Path>) -> Result<Vec<RawPacket>, IngestError> {
    let bytes = fs::read(path.as_ref())?;
    parse_pcap(&bytes)
}

/// Decodes an in-memory capture.
pub fn parse_pcap(bytes: &[u8]) -> Result<Vec<RawPacket>, IngestError> {
    if bytes.len() < 4 {
        return Err(IngestError::Truncated { offset: 0, needed: GLOBAL_HEADER_LEN, available: bytes.len() });
    }
    let endian = match u32::from_le_bytes(bytes[..4].try_into().unwrap()) {
        PCAP_MAGIC => Endian::Little,
        PCAP_MAGIC_SWAPPED => Endian::Big,
        other => return Err(IngestError::BadMagic(other)),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(IngestError::Truncated { offset: 0, needed: GLOBAL_HEADER_LEN, available: bytes.len() });
    }
    let link_type = endian.u32(&bytes[20..24]);
    if link_type != LINKTYPE_ETHERNET {
        return Err(IngestError::UnsupportedLinkType(link_type));
    }

    let mut packets = Vec::new();
    let mut offset = GLOBAL_HEADER_LEN;
    while offset < bytes.len() {
        let available = bytes.len() - offset;
        if available < RECORD_HEADER_LEN {
            return Err(IngestError::Truncated { offset, needed: RECORD_HEADER_LEN, available });
        }
        let hdr = &bytes[offset..offset + RECORD_HEADER_LEN];
        let timestamp = Timestamp { seconds: endian.u32(&hdr[0..4]), micros: endian.u32(&hdr[4..8]) };
        let captured_length = endian.u32(&hdr[8..12]);
        let original_length = endian.u32(&hdr[12..16]);
        if captured_length > original_length {
            return Err(IngestError::InvalidRecord { offset, captured: captured_length, original: original_length });
        }
        let body_start = offset + RECORD_HEADER_LEN;
        let body_len = captured_length as usize;
        if bytes.len() - body_start < body_len {
            return Err(IngestError::Truncated {
                offset: body_start,
                needed: body_len,
                available: bytes.len() - body_start,
            });
        }
        packets.push(RawPacket {
            timestamp,
            captured_length,
            original_length,
            link_bytes: bytes[body_start..body_start + body_len].to_vec(),
        });
        offset = body_start + body_len;
    }
    Ok(packets)
}

/// Writes little-endian classic pcap files. Used for fixtures and synthetic traces.
pub struct PcapWriter<W: Write> {
    out: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        out.write_all(&PCAP_MAGIC.to_le_bytes())?;
        out.write_all(&2u16.to_le_bytes())?;
        out.write_all(&4u16.to_le_bytes())?;
        out.write_all(&0i32.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&65535u32.to_le_bytes())?;
        out.write_all(&LINKTYPE_ETHERNET.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write_frame(&mut self, timestamp: Timestamp, frame: &[u8]) -> std::io::Result<()> {
        self.out.write_all(&timestamp.seconds.to_le_bytes())?;
        self.out.write_all(&timestamp.micros.to_le_bytes())?;
        self.out.write_all(&(frame.len() as u32).to_le_bytes())?;
        self.out.write_all(&(frame.len() as u32).to_le_bytes())?;
        self.out.write_all(frame)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
