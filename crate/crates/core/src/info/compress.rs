//! Compression ratio as a redundancy proxy.

use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

pub const CODEC: &str = "deflate (flate2, default level)";

/// Packs ternary values four to a byte, MSB first: −1 → 10, 0 → 00, 1 → 01.
/// Returns `None` if any value is outside {−1, 0, 1}.
pub fn pack_ternary(values: &[f32]) -> Option<Vec<u8>> {
    let mut out = vec![0u8; values.len().div_ceil(4)];
    for (i, &v) in values.iter().enumerate() {
        let code = if v == 0.0 {
            0b00
        } else if v == 1.0 {
            0b01
        } else if v == -1.0 {
            0b10
        } else {
            return None;
        };
        out[i / 4] |= code << (6 - 2 * (i % 4));
    }
    Some(out)
}

/// Canonical byte stream: 2-bit packing for ternary data, little-endian f32 otherwise.
pub fn serialize_values(values: &[f32]) -> Vec<u8> {
    pack_ternary(values).unwrap_or_else(|| values.iter().flat_map(|v| v.to_le_bytes()).collect())
}

/// Raw serialized bytes over deflated bytes.
pub fn compression_ratio(values: &[f32]) -> f64 {
    let raw = serialize_values(values);
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&raw).expect("in-memory write");
    let compressed = enc.finish().expect("in-memory write");
    raw.len() as f64 / compressed.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn packing_layout() {
        assert_eq!(pack_ternary(&[-1.0, 0.0, 1.0, -1.0]).unwrap(), vec![0b1000_0110]);
        assert_eq!(pack_ternary(&[1.0]).unwrap(), vec![0b0100_0000]);
        assert!(pack_ternary(&[0.5]).is_none());
        assert_eq!(serialize_values(&[0.5]).len(), 4);
    }

    #[test]
    fn constant_beats_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let random: Vec<f32> = (0..100 * 560).map(|_| rng.gen_range(0..2) as f32).collect();
        let constant = vec![0.0f32; 100 * 560];
        assert!(compression_ratio(&constant) > compression_ratio(&random));
    }

    #[test]
    fn all_fill_matrix_compresses_heavily() {
        let r = compression_ratio(&vec![-1.0f32; 100 * 560]);
        // 14000 packed bytes deflate to 31
        assert!(r > 10.0, "{r}");
        assert_eq!(r, 14000.0 / 31.0);
    }

    #[test]
    fn row_order_changes_ratio_by_under_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, d) = (100, 560);
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..2) as f32).collect()).collect();
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let a = compression_ratio(&rows.concat());
        let b = compression_ratio(&shuffled.concat());
        assert!((a - b).abs() / a < 0.05);
    }
}
