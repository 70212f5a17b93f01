//! Twisted-conjugacy authentication over 2x2 matrices of truncated
//! polynomials, together with the coefficient-tree cryptanalysis used to
//! probe it.
//!
//! The platform is the multiplicative semigroup of 2x2 matrices over
//! F2[x]/(x^n). A key pair publishes endomorphisms phi, psi and matrices
//! w, t with t = psi(s^T) w phi(s); the private key s witnesses that
//! relation, and a k-round commit/challenge/respond session proves
//! possession of some witness without revealing it.
//!
//! Module map:
//!
//! - [`f2poly`]: the coefficient ring F2[x]/(x^n) and its endomorphisms.
//! - [`mat2`]: the 2x2 matrix semigroup over that ring.
//! - [`protocol`]: keys, the three-pass round, sessions, and the
//!   challenge-guessing forger used as the soundness baseline.
//! - [`attack`]: the degree-by-degree solution-tree key recovery, its
//!   exhaustive-search oracle, and planted-instance experiment drivers.
//! - [`wire`]: canonical byte encodings, message framing, and the key,
//!   transcript, and attack-report file formats.
//!
//! Nothing here is constant-time and no side-channel resistance is claimed;
//! the crate exists to study the scheme's functional and cryptanalytic
//! behavior.

pub mod attack;
pub mod f2poly;
pub mod mat2;
pub mod protocol;
pub mod wire;

pub use attack::{
    AttackConfig, AttackError, AttackInstance, AttackOutcome, AttackRun, PartialSolution,
    TrialResult,
};
pub use f2poly::{AlgebraError, ConstTerm, Endo, TruncPoly};
pub use mat2::Mat2;
pub use wire::{AttackRecord, Frame, FrameTag, Message, RecordOutcome, WireError};
pub use protocol::{
    Challenge, Commitment, PrivateKey, ProtocolError, PublicKey, Response, SessionConfig,
    Transcript, Verdict,
};

use rand_chacha::ChaCha12Rng;

/// The crate's one seeded generator: ChaCha12 keyed from a little-endian
/// u64. Every `--seed` flag, test fixture, and reproducibility contract in
/// this workspace routes through here, so transcripts and key files stay
/// byte-stable across versions.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    use rand::SeedableRng;
    ChaCha12Rng::seed_from_u64(seed)
}
