use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Labeled substream of a root seed.
///
/// The root seed keys a ChaCha8 generator and the label path selects its 64-bit
/// stream number, so draws depend only on `(seed, path)` and never on scheduling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    path: Vec<String>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    pub fn child(&self, label: impl std::fmt::Display) -> Self {
        let mut path = self.path.clone();
        path.push(label.to_string());
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn indexed(&self, label: &str, i: u64) -> Self {
        self.child(format!("{}#{}", label, i))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    pub fn stream_id(&self) -> u64 {
        let mut h = FNV_OFFSET;
        for label in &self.path {
            for b in label.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
            // Separator so that ("ab","c") and ("a","bc") differ.
            h ^= 0xff;
            h = h.wrapping_mul(FNV_PRIME);
        }
        splitmix(h ^ (self.path.len() as u64))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id());
        r
    }
}
