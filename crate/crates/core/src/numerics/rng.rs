/// Deterministic SplitMix64 generator.
///
/// The stream is fixed: state advances by the golden-ratio increment
/// `0x9E37_79B9_7F4A_7C15` and each output is the Stafford "mix13" finalizer
/// of the new state. Floats take the top 53 bits. Seeded runs therefore
/// reproduce across platforms and releases of this crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[low, high)`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }

    /// Uniform integer in `[0, bound)` by rejection, so no modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Independent child generator; the parent advances by one draw.
    pub fn split(&mut self) -> Rng {
        Rng::new(mix64(self.next_u64() ^ GOLDEN_GAMMA))
    }
}

/// Derives a stream seed from a base seed and a stream label.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)))
}
