//! Deterministic derivation of per-round and per-client RNG streams from a
//! single master seed, so parallel execution cannot change results.

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a string, for stable client-id hashing.
fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for the round-level RNG (client subset selection).
pub fn round_seed(master: u64, round: u64) -> u64 {
    mix64(master ^ mix64(round.wrapping_add(1)))
}

/// Seed for one client's local-training RNG within a round.
pub fn client_seed(master: u64, round: u64, client_id: &str) -> u64 {
    mix64(round_seed(master, round) ^ hash_str(client_id))
}
