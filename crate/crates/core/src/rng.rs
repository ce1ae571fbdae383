//! Counter-based, splittable random streams.
//!
//! A [`StreamKey`] names a stream; [`StreamKey::derive`] splits it into child
//! streams addressed by an integer (tree index, individual index, resample
//! index, ...). The `i`-th output of a stream is a keyed hash of `i`, so the
//! numbers a task consumes depend only on its address, never on which worker
//! ran it or in which order.

use rand_core::{impls, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const DERIVE_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 / Stafford "mix13" finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a tag, used to turn names into stream addresses.
pub fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    /// Root key for a user-supplied seed.
    pub fn from_seed(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6A09_E667_F3BC_C908))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Child stream number `index`.
    #[inline]
    pub fn derive(self, index: u64) -> Self {
        StreamKey(mix64(self.0.rotate_left(23) ^ mix64(index ^ DERIVE_SALT)))
    }

    /// Child stream addressed by a name, e.g. `"resample"`.
    pub fn derive_tag(self, tag: &str) -> Self {
        self.derive(tag_hash(tag))
    }

    /// Generator positioned at the start of this stream.
    #[inline]
    pub fn rng(self) -> CounterRng {
        CounterRng::new(self)
    }
}

/// Generator whose `i`-th 64-bit output is `mix64(key ^ mix64(i·φ))`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: StreamKey) -> Self {
        CounterRng { key: key.0, counter: 0 }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let k = StreamKey::from_seed(42).derive(7);
        let a: Vec<u64> = (0..5).map({
            let mut r = k.rng();
            move |_| r.next_u64()
        }).collect();
        let mut r = k.rng();
        let b: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sibling_streams_differ() {
        let root = StreamKey::from_seed(1);
        assert_ne!(root.derive(0), root.derive(1));
        assert_ne!(root.derive(0).rng().next_u64(), root.derive(1).rng().next_u64());
        assert_ne!(root.derive_tag("resample"), root.derive_tag("proxy"));
    }

    #[test]
    fn uniform_moments() {
        let mut r = StreamKey::from_seed(3).rng();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| uniform01(&mut r)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        // SE of the mean is 1/sqrt(12 n) ~ 6.5e-4
        assert!((m - 0.5).abs() < 4.0 * 6.5e-4, "mean {m}");
        assert!((v - 1.0 / 12.0).abs() < 2e-3, "var {v}");
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn bit_balance() {
        let mut r = StreamKey::from_seed(11).rng();
        let n = 100_000u32;
        let mut ones = [0u32; 64];
        for _ in 0..n {
            let x = r.next_u64();
            for (b, c) in ones.iter_mut().enumerate() {
                *c += ((x >> b) & 1) as u32;
            }
        }
        // each bit is Binomial(n, 1/2): sd ~ 158
        for c in ones {
            assert!((f64::from(c) - f64::from(n) / 2.0).abs() < 5.0 * 158.2);
        }
    }
}
