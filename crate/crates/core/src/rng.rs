//! Keyed random sub-streams.
//!
//! Every random quantity is drawn from its own ChaCha stream keyed by
//! `(root seed, key, draw index)`, where the key is a node name or another
//! stable label. Adding a node therefore leaves every other node's draws
//! untouched, and draw `k` can be regenerated on any worker without replaying
//! draws `0..k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    root: u64,
    draw: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        SeedStream { root, draw: 0 }
    }

    /// The stream positioned at draw `draw`.
    pub fn at(root: u64, draw: u64) -> Self {
        SeedStream { root, draw }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn draw_index(&self) -> u64 {
        self.draw
    }

    pub fn advance(&mut self) {
        self.draw += 1;
    }

    /// Generator for `key` at the current draw.
    pub fn rng_for(&self, key: &str) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.root.to_le_bytes());
        seed[8..16].copy_from_slice(&fnv1a(key.as_bytes()).to_le_bytes());
        seed[16..24].copy_from_slice(&self.draw.to_le_bytes());
        seed[24..].copy_from_slice(&(key.len() as u64).to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
