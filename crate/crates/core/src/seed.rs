//! Deterministic seed derivation for independent random streams.
//!
//! Every stochastic quantity in the pipeline (noise draws, multipath taps,
//! position jitter, fold shuffles, bootstrap resamples) gets its own RNG,
//! seeded from the master seed plus a label-and-index path that identifies the
//! stream. Streams are therefore independent of evaluation order: adding a
//! device or generating scenarios in a different order never changes the draws
//! of an existing stream.
//!
//! Derivation is FNV-1a over the path bytes with a splitmix64 finalizer. We
//! deliberately avoid `std::collections::hash_map::DefaultHasher`, whose
//! output is randomized per process and would break run-to-run determinism.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Accumulates a seed-derivation path and produces a 64-bit seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedPath {
    state: u64,
}

impl SeedPath {
    /// Starts a derivation path from the master seed.
    pub fn new(master_seed: u64) -> Self {
        Self { state: FNV_OFFSET }.with_u64(master_seed)
    }

    /// Appends a label component (e.g. `"noise"` or a device id).
    pub fn with_str(mut self, label: &str) -> Self {
        for &b in label.as_bytes() {
            self.state = (self.state ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        // Terminate the label so ("ab","c") and ("a","bc") derive differently.
        self.state = (self.state ^ 0xff).wrapping_mul(FNV_PRIME);
        self
    }

    /// Appends a numeric component (position index, sample index, ...).
    pub fn with_u64(mut self, value: u64) -> Self {
        for &b in &value.to_le_bytes() {
            self.state = (self.state ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        self
    }

    /// Finalizes the path into a seed with good bit dispersion.
    pub fn seed(self) -> u64 {
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}
