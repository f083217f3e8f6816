//! Counter-based derivation of per-role rng streams from one master seed.
//!
//! Every source of randomness in a run gets its own ChaCha stream whose
//! seed is a splitmix64 hash of `(master, role, a, b)`. Streams are
//! disjoint by construction and independent of scheme orchestration, which
//! is what makes scheme-reduction identities hold bitwise: a stream that a
//! scheme never draws from cannot influence the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream roles. The two index slots mean different things per role and
/// are zero when unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Network initialization; `a` is the network id (0 actor, 1 critic1,
    /// 2 critic2).
    Init,
    /// Per-actor-slot environment reset seeds; `a` is the slot index.
    EnvSeed,
    /// Per-actor-slot action noise (uniform warmup and exploration);
    /// `a` is the slot index.
    ActionNoise,
    /// Per-learner minibatch indices and target smoothing noise;
    /// `a` is the learner index.
    Sampling,
    /// The chief's state batches for distance estimation.
    Chief,
    /// Evaluation episodes; `a` is the evaluation index, `b` the episode.
    /// Shared by every learner so populations are scored on common
    /// episodes.
    Eval,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Init => 0x01,
            Role::EnvSeed => 0x02,
            Role::ActionNoise => 0x03,
            Role::Sampling => 0x04,
            Role::Chief => 0x05,
            Role::Eval => 0x06,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The 64-bit stream seed for `(master, role, a, b)`.
pub fn derive_seed(master: u64, role: Role, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(role.tag()));
    h = splitmix64(h ^ splitmix64(a));
    splitmix64(h ^ splitmix64(b))
}

/// A fresh ChaCha stream for the role.
pub fn stream(master: u64, role: Role, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, role, a, b))
}
