//! Seeded synthetic datasets with known signal placement, and synthetic captures.

use std::fs::{self, File};
use std::io::BufWriter;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::craft::{Ipv4FrameSpec, TransportSpec};
use crate::ingest::{PcapWriter, Timestamp};
use crate::views::{LayerId, MultiviewDataset, ViewError, ViewMatrix};

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Row-major bit matrix under construction, padded with −1.
struct ViewBuilder {
    cols: usize,
    data: Vec<f32>,
}

impl ViewBuilder {
    fn new(rows: usize, cols: usize) -> Self {
        Self { cols, data: vec![-1.0; rows * cols] }
    }

    fn set(&mut self, r: usize, c: usize, bit: bool) {
        self.data[r * self.cols + c] = if bit { 1.0 } else { 0.0 };
    }

    /// `width` noisy copies of `bit`, starting at column `at`.
    fn repeat(&mut self, rng: &mut ChaCha8Rng, r: usize, at: usize, width: usize, bit: bool, flip: f64) -> usize {
        for c in at..at + width {
            let b = bit ^ rng.gen_bool(flip);
            self.set(r, c, b);
        }
        at + width
    }

    fn finish(self, layer: LayerId, rows: usize) -> Result<ViewMatrix, ViewError> {
        ViewMatrix::new(layer, rows, self.cols, self.data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharedPrivateSpec {
    pub n: usize,
    pub width: usize,
    /// Copies of each label-bearing bit.
    pub signal_copies: usize,
    /// Flip probability on label-bearing bits.
    pub signal_flip: f64,
    /// Per-view nuisance latents, each repeated `nuisance_copies` times.
    pub nuisance_latents: usize,
    pub nuisance_copies: usize,
    pub nuisance_flip: f64,
    /// Independent fair-coin columns.
    pub random_bits: usize,
}

impl Default for SharedPrivateSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            width: 96,
            signal_copies: 8,
            signal_flip: 0.2,
            nuisance_latents: 3,
            nuisance_copies: 16,
            nuisance_flip: 0.05,
            random_bits: 16,
        }
    }
}

/// Four views, four classes. A shared bit `s` appears in every view and a
/// private bit `u` only in view 0; the label is `2s + u`. Each view also
/// carries its own high-variance nuisance blocks, coin-flip columns and
/// constant −1 padding.
pub fn shared_private(spec: &SharedPrivateSpec, seed: u64) -> Result<MultiviewDataset, ViewError> {
    let used = 2 * spec.signal_copies + spec.nuisance_latents * spec.nuisance_copies + spec.random_bits;
    if used > spec.width {
        return Err(ViewError::InvalidData(format!("{used} informative columns exceed width {}", spec.width)));
    }
    let mut r = rng(seed, 1);
    let mut views: Vec<ViewBuilder> = (0..4).map(|_| ViewBuilder::new(spec.n, spec.width)).collect();
    let mut labels = Vec::with_capacity(spec.n);
    for row in 0..spec.n {
        let s = r.gen_bool(0.5);
        let u = r.gen_bool(0.5);
        labels.push(2 * s as usize + u as usize);
        for (i, v) in views.iter_mut().enumerate() {
            let mut at = v.repeat(&mut r, row, 0, spec.signal_copies, s, spec.signal_flip);
            if i == 0 {
                at = v.repeat(&mut r, row, at, spec.signal_copies, u, spec.signal_flip);
            }
            for _ in 0..spec.nuisance_latents {
                let z = r.gen_bool(0.5);
                at = v.repeat(&mut r, row, at, spec.nuisance_copies, z, spec.nuisance_flip);
            }
            for c in at..at + spec.random_bits {
                let b = r.gen_bool(0.5);
                v.set(row, c, b);
            }
        }
    }
    let views = views
        .into_iter()
        .zip(LayerId::ALL)
        .map(|(v, l)| v.finish(l, spec.n))
        .collect::<Result<Vec<_>, _>>()?;
    MultiviewDataset::from_views(views, labels, 4)
}

/// Two views, two classes, both views reveal the label through clean copy
/// columns next to coin-flip noise. Bayes accuracy is 1.
pub fn separable_two_view(n: usize, seed: u64) -> Result<MultiviewDataset, ViewError> {
    let mut r = rng(seed, 2);
    let (w0, w1) = (16, 12);
    let mut a = ViewBuilder::new(n, w0);
    let mut b = ViewBuilder::new(n, w1);
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let y = r.gen_bool(0.5);
        labels.push(y as usize);
        let at = a.repeat(&mut r, row, 0, 4, y, 0.0);
        for c in at..w0 - 2 {
            let bit = r.gen_bool(0.5);
            a.set(row, c, bit);
        }
        let at = b.repeat(&mut r, row, 0, 3, !y, 0.0);
        for c in at..w1 - 2 {
            let bit = r.gen_bool(0.5);
            b.set(row, c, bit);
        }
    }
    MultiviewDataset::from_views(
        vec![a.finish(LayerId::Network, n)?, b.finish(LayerId::Transport, n)?],
        labels,
        2,
    )
}

/// Two classes at `ratio`:1 with overlapping noisy evidence, so the minority
/// class is hard to recall without reweighting.
pub fn imbalanced(n: usize, ratio: usize, seed: u64) -> Result<MultiviewDataset, ViewError> {
    let mut r = rng(seed, 3);
    let width = 32;
    let mut views: Vec<ViewBuilder> = (0..2).map(|_| ViewBuilder::new(n, width)).collect();
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let y = row % (ratio + 1) == ratio;
        labels.push(y as usize);
        for v in views.iter_mut() {
            let at = v.repeat(&mut r, row, 0, 6, y, 0.2);
            for c in at..width - 4 {
                let bit = r.gen_bool(0.5);
                v.set(row, c, bit);
            }
        }
    }
    let views = views
        .into_iter()
        .zip([LayerId::Network, LayerId::Transport])
        .map(|(v, l)| v.finish(l, n))
        .collect::<Result<Vec<_>, _>>()?;
    MultiviewDataset::from_views(views, labels, 2)
}

/// Discrete codes for two views sharing `s` with private parts `u_i`, `u_j`.
#[derive(Clone, Debug)]
pub struct DiscreteSharedPrivate {
    pub shared: Vec<usize>,
    pub private_i: Vec<usize>,
    pub private_j: Vec<usize>,
    /// Joint code `s · |U| + u_i`.
    pub z_i: Vec<usize>,
    pub z_j: Vec<usize>,
}

pub fn discrete_shared_private(n: usize, shared: usize, private: usize, seed: u64) -> DiscreteSharedPrivate {
    let mut r = rng(seed, 4);
    let mut out = DiscreteSharedPrivate {
        shared: Vec::with_capacity(n),
        private_i: Vec::with_capacity(n),
        private_j: Vec::with_capacity(n),
        z_i: Vec::with_capacity(n),
        z_j: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let s = r.gen_range(0..shared);
        let ui = r.gen_range(0..private);
        let uj = r.gen_range(0..private);
        out.shared.push(s);
        out.private_i.push(ui);
        out.private_j.push(uj);
        out.z_i.push(s * private + ui);
        out.z_j.push(s * private + uj);
    }
    out
}

/// Two independent one-bit views and `y = a XOR b`, each bit written into
/// `width` columns.
pub fn xor_views(n: usize, width: usize, seed: u64) -> (crate::autograd::Tensor, crate::autograd::Tensor, Vec<usize>) {
    let mut r = rng(seed, 5);
    let mut xi = Vec::with_capacity(n * width);
    let mut xj = Vec::with_capacity(n * width);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: bool = r.gen_bool(0.5);
        let b: bool = r.gen_bool(0.5);
        xi.extend(std::iter::repeat(a as u8 as f64).take(width));
        xj.extend(std::iter::repeat(b as u8 as f64).take(width));
        y.push((a ^ b) as usize);
    }
    let t = |d| crate::autograd::Tensor::from_vec(n, width, d).expect("sizes agree");
    (t(xi), t(xj), y)
}

/// Writes one capture per class plus `manifest.csv` into `dir`. Classes
/// differ in transport, server port, TTL range, packet count and payload
/// prefix; addresses, client ports and payload tails are random.
pub fn write_synthetic_captures(dir: &Path, classes: usize, flows_per_class: usize, seed: u64) -> std::io::Result<PathBuf> {
    const SERVICES: [(bool, u16, &[u8]); 4] =
        [(true, 443, b"\x16\x03\x01"), (false, 53, b"\x12\x34\x01\x00"), (true, 80, b"GET /"), (false, 123, b"\x23\x00")];
    fs::create_dir_all(dir)?;
    let mut r = rng(seed, 6);
    let mut manifest = String::from("path,label_name\n");
    for c in 0..classes {
        let (tcp, port, prefix) = SERVICES[c % SERVICES.len()];
        let port = port + (c / SERVICES.len()) as u16 * 1000;
        let name = format!("class{c}.pcap");
        let mut w = PcapWriter::new(BufWriter::new(File::create(dir.join(&name))?))?;
        let mut clock = 1_600_000_000u32 + c as u32 * 100_000;
        for f in 0..flows_per_class {
            let client = Ipv4Addr::new(10, (c % 250) as u8, (f / 250) as u8, (f % 250) as u8 + 1);
            let server = Ipv4Addr::new(192, 168, r.gen_range(0..4), r.gen_range(1..255));
            let cport = r.gen_range(32768..61000);
            let packets = r.gen_range(2..6) + 2 * (c % 3);
            let ttl_base = 32 + 32 * (c % 4) as u8;
            for p in 0..packets {
                let outbound = p % 2 == 0;
                let (src, dst) = if outbound { ((client, cport), (server, port)) } else { ((server, port), (client, cport)) };
                let mut spec = if tcp { Ipv4FrameSpec::tcp(src, dst) } else { Ipv4FrameSpec::udp(src, dst) };
                spec.ttl = ttl_base + r.gen_range(0..8);
                spec.identification = r.gen();
                if let TransportSpec::Tcp { seq, ack, .. } = &mut spec.transport {
                    *seq = r.gen();
                    *ack = r.gen();
                }
                let mut payload = prefix.to_vec();
                let tail = r.gen_range(4..24);
                payload.extend((0..tail).map(|_| r.gen::<u8>()));
                spec.payload = payload;
                clock += 1;
                w.write_frame(Timestamp { seconds: clock, micros: (p as u32) * 1000 }, &spec.build())?;
            }
        }
        use std::io::Write;
        w.into_inner().flush()?;
        manifest.push_str(&format!("{name},class{c}\n"));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest)?;
    Ok(path)
}
