//! Philox4x32-10 streams, one per `(seed, path_index)`.
//!
//! The 64-bit seed is the Philox key and the path index occupies the high
//! half of the 128-bit counter, so every path owns an independent stream of
//! 2^64 blocks that can be created anywhere without shared state.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Ten rounds of Philox4x32 on one counter block.
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Sequential view of the stream belonging to one path.
#[derive(Debug, Clone)]
pub struct PathStream {
    key: [u32; 2],
    path: [u32; 2],
    block: u64,
    buf: [u32; 4],
    used: usize,
}

impl PathStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        PathStream {
            key: [seed as u32, (seed >> 32) as u32],
            path: [path_index as u32, (path_index >> 32) as u32],
            block: 0,
            buf: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        let ctr = [self.block as u32, (self.block >> 32) as u32, self.path[0], self.path[1]];
        self.buf = philox4x32(ctr, self.key);
        self.block += 1;
        self.used = 0;
    }

    /// Uniform on `(0, 1)` from 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate (ziggurat).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for PathStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        lo | (hi << 32)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let b = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&b[..chunk.len()]);
        }
    }
}
