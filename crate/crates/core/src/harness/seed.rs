//! Per-replication seed derivation.
//!
//! `seed_m = mix(mix(mix(mix(master) ^ tag) ^ budget) ^ m)` where `mix` is the
//! SplitMix64 step (add the golden-ratio increment, then the 64-bit
//! finalizer). Replication seeds depend only on their own coordinates, so a
//! run with `2M` replications repeats the first `M` of a run with `M`.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Cell tag: design tag (1..=4) in the low byte, proposal index above it.
pub fn cell_tag(design_tag: u64, proposal_index: usize) -> u64 {
    design_tag | ((proposal_index as u64) << 8)
}

pub fn replication_seed(master: u64, tag: u64, budget: usize, m: usize) -> u64 {
    let s = splitmix64(master);
    let s = splitmix64(s ^ tag);
    let s = splitmix64(s ^ budget as u64);
    splitmix64(s ^ m as u64)
}
