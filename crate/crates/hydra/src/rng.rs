//! Counter-based random number streams (Philox 4x32-10).
//!
//! Every random decision in the crate is drawn from a [`RngStream`] keyed by
//! the run seed plus a list of integer tags (sentence id, decode index, beam
//! step, ...). Streams with different tags are statistically independent, and
//! a stream's output depends only on its key and how many values were drawn
//! from it — never on what other streams did. That is what makes decoding
//! reproducible across worker counts: workers own disjoint streams.

/// Philox 4x32 round multipliers and Weyl key increments.
const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mul_hi_lo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// One block of Philox 4x32 with 10 rounds.
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mul_hi_lo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mul_hi_lo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed and a tag list into a 64-bit stream key.
fn derive_key(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t;
        out = out.rotate_left(23) ^ splitmix64(&mut state);
    }
    out
}

/// A seedable, splittable random stream.
///
/// The stream key is fixed at construction; draws walk a 64-bit block
/// counter, so the n-th value of a stream is the same no matter when or
/// where it is computed.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u32; 2],
    block: u64,
    buf: [u32; 4],
    pos: usize,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64, tags: &[u64]) -> Self {
        let k = derive_key(seed, tags);
        RngStream {
            key: [k as u32, (k >> 32) as u32],
            block: 0,
            buf: [0; 4],
            pos: 4,
            draws: 0,
        }
    }

    /// Derives an independent child stream; the parent is unaffected.
    pub fn substream(&self, tags: &[u64]) -> Self {
        let base = ((self.key[1] as u64) << 32) | self.key[0] as u64;
        RngStream::new(base, tags)
    }

    fn refill(&mut self) {
        self.buf = philox4x32(
            [self.block as u32, (self.block >> 32) as u32, 0, 0],
            self.key,
        );
        self.block += 1;
        self.pos = 0;
    }

    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    /// One logical draw. All public sampling helpers consume exactly one.
    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        self.draws += 1;
        (hi << 32) | lo
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in [0, n). One draw, multiply-shift reduction.
    pub fn uniform_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "uniform_index over empty range");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Number of logical draws made so far.
    pub fn draw_count(&self) -> u64 {
        self.draws
    }

    /// Fisher-Yates shuffle (n-1 draws for a slice of length n).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_index(i + 1);
            items.swap(i, j);
        }
    }
}
