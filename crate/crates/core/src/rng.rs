//! Named, independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the ChaCha stream `name` of `master_seed`. Different names give
/// independent streams; the same `(seed, name)` always gives the same stream.
pub fn stream(master_seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// The streams an environment consumes.
#[derive(Debug, Clone)]
pub struct EnvRng {
    /// Per-device fading and distances.
    pub channel: ChaCha8Rng,
    /// CPU frequency draws.
    pub cpu: ChaCha8Rng,
    pub sinr: ChaCha8Rng,
    /// Per-episode packet size and user requirements.
    pub episode: ChaCha8Rng,
}

impl EnvRng {
    pub fn from_seed(master_seed: u64) -> Self {
        Self {
            channel: stream(master_seed, "channel"),
            cpu: stream(master_seed, "cpu"),
            sinr: stream(master_seed, "sinr"),
            episode: stream(master_seed, "episode"),
        }
    }
}
