//! Seeded random streams.
//!
//! Every mechanism draws from its own ChaCha8 stream derived from one 64-bit
//! seed, so changing how often one stage draws (for example disabling
//! learning) never shifts the numbers seen by another stage. ChaCha is a pure
//! integer generator; its output is identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Environment = 1,
    Perception = 2,
    Routing = 3,
    Selection = 4,
    Outcomes = 5,
    Evolution = 6,
}

/// Build the generator for one named substream of `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The per-run bundle of engine substreams.
#[derive(Debug, Clone)]
pub struct EngineStreams {
    pub environment: ChaCha8Rng,
    pub perception: ChaCha8Rng,
    pub routing: ChaCha8Rng,
    pub selection: ChaCha8Rng,
    pub outcomes: ChaCha8Rng,
}

impl EngineStreams {
    pub fn new(seed: u64) -> Self {
        EngineStreams {
            environment: substream(seed, Stream::Environment),
            perception: substream(seed, Stream::Perception),
            routing: substream(seed, Stream::Routing),
            selection: substream(seed, Stream::Selection),
            outcomes: substream(seed, Stream::Outcomes),
        }
    }
}
