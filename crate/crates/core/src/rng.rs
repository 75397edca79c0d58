//! Counter-based random number generation.
//!
//! Every draw is a pure function of a 64-bit key and a counter, so draws for
//! different rollouts, steps and dimensions can be generated in any order (or
//! concurrently) and still reproduce bitwise. Keys are derived from a master
//! seed through labeled streams, which keeps training noise, evaluation noise
//! and weight initialization statistically disjoint.
//!
//! The mixer is the SplitMix64 finalizer (Vigna), applied to the key xored
//! with an odd-multiplied counter. Non-cryptographic, but plenty for Monte
//! Carlo sampling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function: bijective, strong bit diffusion.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child key from a parent key and a field (stream label, rollout
/// index, epoch number, ...). Chaining `child` calls builds a key path.
#[inline]
pub fn child(key: u64, field: u64) -> u64 {
    mix(key ^ field.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}

/// Stream labels hung off the master seed. Keeping them in one place makes
/// seed-derivation collisions impossible to write by accident.
pub mod stream {
    pub const WEIGHTS_INIT: u64 = 1;
    pub const TRAIN_SCENARIOS: u64 = 2;
    pub const EVAL_SCENARIOS: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const CHECKS: u64 = 5;
}

/// Uniform draw in the open interval (0, 1) at `counter` under `key`.
#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    let bits = mix(key ^ counter.wrapping_mul(GOLDEN).wrapping_add(1));
    // 53 high bits, offset by half a ulp: never exactly 0 or 1.
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw at `counter` under `key` (Box-Muller, cosine branch).
#[inline]
pub fn normal(key: u64, counter: u64) -> f64 {
    let u1 = uniform(key, 2 * counter);
    let u2 = uniform(key, 2 * counter + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Exponential draw with rate `lambda` (mean `1/lambda`) at `counter`.
#[inline]
pub fn exponential(key: u64, counter: u64, lambda: f64) -> f64 {
    -uniform(key, counter).ln() / lambda
}

/// A keyed counter stream for call sites that want sequential draws
/// (weight initialization, bootstrap resampling).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Stream rooted at `master` under a label from [`stream`].
    pub fn from_master(master: u64, label: u64) -> Self {
        CounterRng::new(child(master, label))
    }

    pub fn next_uniform(&mut self) -> f64 {
        let v = uniform(self.key, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_normal(&mut self) -> f64 {
        let v = normal(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform integer in `[0, bound)` by 64-bit multiply-shift.
    pub fn next_index(&mut self, bound: usize) -> usize {
        let bits = mix(self.key ^ self.counter.wrapping_mul(GOLDEN).wrapping_add(1));
        self.counter += 1;
        ((bits as u128 * bound as u128) >> 64) as usize
    }
}
