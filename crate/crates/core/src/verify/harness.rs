//! Deterministic fan-out of Monte Carlo work.
//!
//! Work is cut into fixed-size chunks and chunk `i` of a suite tagged `tag`
//! draws from the ChaCha stream `(tag << 32) | i` of the master seed. The
//! chunking never depends on the number of workers, so results are
//! bit-identical whatever pool they run on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::Result;

pub const CHUNK: usize = 8192;

pub fn stream_rng(seed: u64, tag: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 32) | index as u64);
    rng
}

/// Runs `draw` `total` times across chunks and returns the outputs in draw
/// order.
pub fn par_draws<T, F>(seed: u64, tag: u32, total: usize, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = stream_rng(seed, tag, ci as u32);
            let len = CHUNK.min(total - ci * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}
