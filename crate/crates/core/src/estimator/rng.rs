//! Seed-derived random streams.
//!
//! Sample index `i` always belongs to block `i / BLOCK_LEN`, and block `b`
//! draws from ChaCha8 stream `b` of the run seed. Any partition of blocks
//! across workers therefore sees the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per independent stream.
pub const BLOCK_LEN: u64 = 1 << 14;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Half-open sample ranges of each block covering `0..points`.
pub fn blocks(points: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
    let count = points.div_ceil(BLOCK_LEN);
    (0..count).map(move |b| (b, (points - b * BLOCK_LEN).min(BLOCK_LEN)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let draw = |block| {
            let mut r = block_rng(5, block);
            (0..4).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(0), draw(0));
        assert_ne!(draw(0), draw(1));
    }

    #[test]
    fn blocks_cover_points() {
        let total: u64 = blocks(3 * BLOCK_LEN + 7).map(|(_, n)| n).sum();
        assert_eq!(total, 3 * BLOCK_LEN + 7);
        assert_eq!(blocks(BLOCK_LEN).count(), 1);
    }
}
