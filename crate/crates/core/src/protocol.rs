//! The three-pass authentication scheme.
//!
//! Key generation publishes two endomorphisms phi, psi and two matrices w, t
//! related by the twisted-conjugacy equation t = psi(s^T) w phi(s), where the
//! matrix s is the private key. A round goes commit / challenge / respond:
//! the prover commits to u = psi(r^T) t phi(r) for fresh secret randomness r,
//! the verifier sends a random bit c, and the prover reveals either r (c = 0,
//! checked against t) or s r (c = 1, checked against w). Either branch alone
//! is forgeable, so a session repeats the round k times and accepts only if
//! every round does, pushing a challenge-guessing forger down to 2^-k.
//!
//! Everything is exact algebra over F2; verification is bitwise equality.
//! Malformed input (mismatched truncation orders, a reused round state) is
//! reported as an error, deliberately distinct from an honest reject verdict.

use rand::Rng;
use thiserror::Error;

use crate::f2poly::{AlgebraError, ConstTerm, Endo, TruncPoly};
use crate::mat2::Mat2;

/// Errors from protocol state handling, distinct from honest rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    /// A prover round state was used for a second response.
    #[error("prover round state already consumed")]
    StateConsumed,
    #[error("bad session config: {0}")]
    BadConfig(&'static str),
}

/// Public key: the endomorphism pair and the matrix pair (w, t) with
/// t = psi(s^T) w phi(s) for the private s.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PublicKey {
    phi: Endo,
    psi: Endo,
    w: Mat2,
    t: Mat2,
}

impl PublicKey {
    /// Assembles a public key, checking that all four components share one
    /// truncation order. The endomorphism constant-term rule is enforced by
    /// the `Endo` type itself.
    pub fn new(phi: Endo, psi: Endo, w: Mat2, t: Mat2) -> Result<Self, ProtocolError> {
        let n = w.n();
        for other in [phi.n(), psi.n(), t.n()] {
            if other != n {
                return Err(AlgebraError::OrderMismatch { left: n, right: other }.into());
            }
        }
        Ok(PublicKey { phi, psi, w, t })
    }

    pub fn phi(&self) -> &Endo {
        &self.phi
    }

    pub fn psi(&self) -> &Endo {
        &self.psi
    }

    pub fn w(&self) -> &Mat2 {
        &self.w
    }

    pub fn t(&self) -> &Mat2 {
        &self.t
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    /// The map at the heart of the scheme: psi(v^T) * base * phi(v).
    ///
    /// Keygen uses it with base = w to derive t; the verifier uses it with
    /// base = t (challenge 0) or base = w (challenge 1).
    pub fn twisted_conjugate(&self, base: &Mat2, v: &Mat2) -> Result<Mat2, ProtocolError> {
        let left = self.psi.apply_mat(&v.transpose())?;
        let right = self.phi.apply_mat(v)?;
        Ok(left.mul(base)?.mul(&right)?)
    }
}

/// Private key: the matrix s. Keygen samples every entry with constant term
/// 1; imported or forged keys are taken as-is, since any matrix satisfying
/// the public relation authenticates regardless of how it was found.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PrivateKey {
    s: Mat2,
}

impl PrivateKey {
    pub fn from_mat(s: Mat2) -> Self {
        PrivateKey { s }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.s
    }
}

/// First message of a round: u = psi(r^T) t phi(r).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Commitment {
    pub u: Mat2,
}

/// The verifier's random bit.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Challenge {
    c: bool,
}

impl Challenge {
    pub fn from_bit(c: bool) -> Self {
        Challenge { c }
    }

    pub fn bit(self) -> bool {
        self.c
    }
}

/// Third message of a round: v = r or v = s r depending on the challenge.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Response {
    pub v: Mat2,
}

/// The prover's secret round randomness, held between commit and respond.
///
/// Consumed by the response; a second respond call on the same state is a
/// protocol-misuse error. This value never leaves the process: the wire
/// module has no codec for it.
#[derive(Debug)]
pub struct ProverRoundState {
    r: Option<Mat2>,
}

/// Session shape: k rounds at truncation order n.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SessionConfig {
    pub k: usize,
    pub n: usize,
}

impl SessionConfig {
    pub fn new(k: usize, n: usize) -> Result<Self, ProtocolError> {
        if k < 1 {
            return Err(ProtocolError::BadConfig("round count k must be at least 1"));
        }
        if n < 1 {
            return Err(ProtocolError::BadConfig("truncation order n must be at least 1"));
        }
        Ok(SessionConfig { k, n })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

/// One completed round, all three messages in order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoundRecord {
    pub commitment: Commitment,
    pub challenge: Challenge,
    pub response: Response,
}

/// Everything both parties saw: the k rounds and the final verdict.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    pub verdict: Verdict,
}

/// Samples a key pair at truncation order n, endomorphisms included.
///
/// Draw order is normative for seeded reproducibility: s, then w (both with
/// every constant term forced to 1), then phi's polynomial, then psi's (both
/// with constant term forced to 0); t is computed, not drawn.
pub fn keygen<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (PublicKey, PrivateKey) {
    sample_keys(n, n, n, rng)
}

/// Like [`keygen`], but the endomorphism polynomials are drawn with `endo_n`
/// coefficient slots and then reduced mod x^n. With endo_n > n the extra
/// slots are discarded (they consume rng output but cannot influence the
/// ring); with endo_n < n the high coefficients are zero.
///
/// This reproduces evaluation setups where the endomorphism degree bound
/// differs from the matrix one.
pub fn keygen_with_endo_order<R: Rng + ?Sized>(
    n: usize,
    endo_n: usize,
    rng: &mut R,
) -> (PublicKey, PrivateKey) {
    sample_keys(n, endo_n, n, rng)
}

/// Shared sampling core: matrices drawn at `mat_n` slots, endomorphism
/// polynomials at `endo_n` slots, everything then carried to the working
/// ring F2[x]/(x^ring_n) (zero-extended or reduced) before t is computed.
pub(crate) fn sample_keys<R: Rng + ?Sized>(
    mat_n: usize,
    endo_n: usize,
    ring_n: usize,
    rng: &mut R,
) -> (PublicKey, PrivateKey) {
    let s = Mat2::random(mat_n, ConstTerm::One, rng).resized(ring_n);
    let w = Mat2::random(mat_n, ConstTerm::One, rng).resized(ring_n);
    let phi_p = TruncPoly::random(endo_n, ConstTerm::Zero, rng).resized(ring_n);
    let psi_p = TruncPoly::random(endo_n, ConstTerm::Zero, rng).resized(ring_n);
    let phi = Endo::new(phi_p).expect("constant term forced to zero");
    let psi = Endo::new(psi_p).expect("constant term forced to zero");
    // every component now shares ring_n, so the algebra cannot fail
    let left = psi.apply_mat(&s.transpose()).unwrap();
    let right = phi.apply_mat(&s).unwrap();
    let t = left.mul(&w).unwrap().mul(&right).unwrap();
    (PublicKey { phi, psi, w, t }, PrivateKey { s })
}

/// Commit with explicit round randomness. Exposed so tests and transcripts
/// can inject r; honest provers use [`prover_commit`].
pub fn prover_commit_with(
    public: &PublicKey,
    r: Mat2,
) -> Result<(Commitment, ProverRoundState), ProtocolError> {
    let u = public.twisted_conjugate(public.t(), &r)?;
    Ok((Commitment { u }, ProverRoundState { r: Some(r) }))
}

/// First pass: draw fresh secret r (all coefficients free) and commit to
/// u = psi(r^T) t phi(r).
pub fn prover_commit<R: Rng + ?Sized>(
    public: &PublicKey,
    rng: &mut R,
) -> (Commitment, ProverRoundState) {
    let r = Mat2::random(public.n(), ConstTerm::Free, rng);
    prover_commit_with(public, r).expect("freshly drawn r matches the key's order")
}

/// Second pass, verifier side: a fair bit.
///
/// Taken as the low bit of one `next_u32` draw, so the challenge stream is
/// pinned to the documented generator, not to a distribution implementation.
pub fn verifier_challenge<R: Rng + ?Sized>(rng: &mut R) -> Challenge {
    Challenge::from_bit(rng.next_u32() & 1 == 1)
}

/// Third pass: reveal v = r (challenge 0) or v = s r (challenge 1),
/// consuming the round state.
pub fn prover_respond(
    private: &PrivateKey,
    state: &mut ProverRoundState,
    ch: Challenge,
) -> Result<Response, ProtocolError> {
    let r = state.r.take().ok_or(ProtocolError::StateConsumed)?;
    let v = if ch.bit() { private.s.mul(&r)? } else { r };
    Ok(Response { v })
}

/// Verifier's final check: u = psi(v^T) t phi(v) for challenge 0, or
/// u = psi(v^T) w phi(v) for challenge 1, as exact equality.
///
/// `Err` means the messages were malformed (wrong truncation order), which
/// callers must keep distinct from `Ok(Reject)`.
pub fn verifier_check(
    public: &PublicKey,
    com: &Commitment,
    ch: Challenge,
    resp: &Response,
) -> Result<Verdict, ProtocolError> {
    if com.u.n() != public.n() {
        return Err(AlgebraError::OrderMismatch { left: public.n(), right: com.u.n() }.into());
    }
    let base = if ch.bit() { public.w() } else { public.t() };
    let expected = public.twisted_conjugate(base, &resp.v)?;
    Ok(if expected == com.u { Verdict::Accept } else { Verdict::Reject })
}

/// Runs a full k-round session between an in-process honest prover and
/// verifier, each with its own randomness.
///
/// All k rounds execute regardless of intermediate verdicts; the session
/// accepts only if every round accepted. Malformed messages abort with an
/// error instead (impossible for honestly matched keys and config).
pub fn run_session<R1, R2>(
    public: &PublicKey,
    private: &PrivateKey,
    cfg: SessionConfig,
    prover_rng: &mut R1,
    verifier_rng: &mut R2,
) -> Result<Transcript, ProtocolError>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    if cfg.n != public.n() {
        return Err(ProtocolError::BadConfig("session order does not match the key"));
    }
    let mut rounds = Vec::with_capacity(cfg.k);
    let mut all_accept = true;
    for _ in 0..cfg.k {
        let (commitment, mut state) = prover_commit(public, prover_rng);
        let challenge = verifier_challenge(verifier_rng);
        let response = prover_respond(private, &mut state, challenge)?;
        let verdict = verifier_check(public, &commitment, challenge, &response)?;
        all_accept &= verdict.is_accept();
        rounds.push(RoundRecord { commitment, challenge, response });
    }
    let verdict = if all_accept { Verdict::Accept } else { Verdict::Reject };
    Ok(Transcript { rounds, verdict })
}

/// One round of the challenge-guessing forger, who holds no private key.
///
/// Guessing 0, it commits honestly to u = psi(r^T) t phi(r) and will reveal
/// r; guessing 1, it draws v first and back-computes u = psi(v^T) w phi(v).
/// Either way exactly one verification branch is prepared, so the prepared
/// response is fixed before the challenge arrives and the round succeeds
/// precisely when the verifier's bit matches the guess (up to the negligible
/// chance that the unprepared equation holds by accident).
pub fn forge_round<R: Rng + ?Sized>(
    public: &PublicKey,
    guess: Challenge,
    rng: &mut R,
) -> (Commitment, Response) {
    let m = Mat2::random(public.n(), ConstTerm::Free, rng);
    let base = if guess.bit() { public.w() } else { public.t() };
    let u = public
        .twisted_conjugate(base, &m)
        .expect("forger randomness matches the key's order");
    (Commitment { u }, Response { v: m })
}

/// Full k-round session for the guessing forger: each round draws a fresh
/// guess from the forger's rng, then answers the real challenge with the one
/// prepared response. Returns the transcript; per-round verdicts can be
/// recomputed from it with [`verifier_check`].
pub fn run_forger_session<R1, R2>(
    public: &PublicKey,
    cfg: SessionConfig,
    forger_rng: &mut R1,
    verifier_rng: &mut R2,
) -> Result<Transcript, ProtocolError>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    if cfg.n != public.n() {
        return Err(ProtocolError::BadConfig("session order does not match the key"));
    }
    let mut rounds = Vec::with_capacity(cfg.k);
    let mut all_accept = true;
    for _ in 0..cfg.k {
        let guess = verifier_challenge(forger_rng);
        let (commitment, response) = forge_round(public, guess, forger_rng);
        let challenge = verifier_challenge(verifier_rng);
        let verdict = verifier_check(public, &commitment, challenge, &response)?;
        all_accept &= verdict.is_accept();
        rounds.push(RoundRecord { commitment, challenge, response });
    }
    let verdict = if all_accept { Verdict::Accept } else { Verdict::Reject };
    Ok(Transcript { rounds, verdict })
}
