/// Mixes a base seed with a list of tags (user id, epoch, split, ...) into an
/// independent 64-bit seed. SplitMix64 finalizer per tag.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base ^ 0x5851_f42d_4c95_7f2d;
    for &tag in tags {
        state = mix(state.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(mix(tag)));
    }
    mix(state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
