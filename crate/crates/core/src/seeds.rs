//! Sub-seed derivation. Training and evaluation demand streams come from
//! disjoint halves of the `u64` space: training seeds have the top bit clear,
//! evaluation seeds have it set.

const EVAL_BIT: u64 = 1 << 63;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag)
}

/// Seed for network initialization and exploration noise.
pub fn agent(seed: u64) -> u64 {
    derive(seed, 0xA6E7)
}

/// Seed for the customer demand seen during training.
pub fn training_demand(seed: u64) -> u64 {
    derive(seed, 0xD3AD) & !EVAL_BIT
}

/// Seed for the `episode`-th evaluation episode of a run.
pub fn evaluation_demand(seed: u64, episode: u64) -> u64 {
    derive(derive(seed, 0xE7A1), episode) | EVAL_BIT
}

pub fn is_evaluation(seed: u64) -> bool {
    seed & EVAL_BIT != 0
}
