//! Deterministic random source.
//!
//! Every artifact this crate writes (images, datasets, model files) must be
//! reproducible byte-for-byte from its seeds, in any implementation language,
//! so the generator is pinned here rather than delegated to a library crate.
//! The scheme has two pieces:
//!
//! * **SplitMix64** for seed mixing. `mix64` is the finalizer
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!   z *= 0x94D049BB133111EB; z ^= z >> 31` (all wrapping), and the sequence
//!   advances by the golden-ratio increment `0x9E3779B97F4A7C15`.
//! * **xoshiro256\*\*** for streams. State is four 64-bit words, never all
//!   zero; output is `rotl(s1 * 5, 7) * 9` followed by the linear state
//!   update `t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
//!   s3 = rotl(s3, 45)`.
//!
//! Derived draws, all fixed:
//!
//! * `Stream::from_seed(s)` fills the four state words with four successive
//!   SplitMix64 outputs starting from state `s`.
//! * uniform in `[0, 1)`: top 53 bits, `(next_u64 >> 11) as f64 * 2^-53`.
//! * unit normal: Box–Muller using exactly two uniforms per draw,
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.
//! * index in `[0, n)`: `next_u64 % n` (the modulo bias is irrelevant at the
//!   `n` used here and keeps the rule trivially portable).
//! * Fisher–Yates shuffle: for `i` from `len-1` down to `1`,
//!   swap `i` with `index(i + 1)`.

/// Golden-ratio increment of the SplitMix64 sequence.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective 64-bit mix.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Advance a SplitMix64 state and return the next output.
#[inline]
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    mix64(*state)
}

/// Seed for image `image_index` of recipe `recipe_index` in a dataset.
///
/// A pure function of its arguments, so generation order and thread count
/// cannot change the result. Indices are taken modulo 2^32 (datasets are
/// nowhere near that large).
#[inline]
pub fn image_seed(master_seed: u64, recipe_index: u64, image_index: u64) -> u64 {
    let key = (recipe_index << 32) ^ (image_index & 0xFFFF_FFFF);
    mix64(master_seed ^ mix64(key ^ GOLDEN_GAMMA))
}

/// Derive an independent stream seed from a base seed and a purpose tag.
///
/// Used where one user-facing seed must feed several unrelated draws (e.g.
/// the train/test split and the batch order of a training run).
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// xoshiro256** stream.
#[derive(Clone, Debug)]
pub struct Stream {
    s: [u64; 4],
}

impl Stream {
    /// Expand a 64-bit seed into the full state via SplitMix64.
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
        ];
        Stream { s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller; consumes exactly two uniforms.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `[0, n)`. Panics if `n == 0`.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index needs n > 0");
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_index(i + 1);
            xs.swap(i, j);
        }
    }
}
