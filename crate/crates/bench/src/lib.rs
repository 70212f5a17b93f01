//! Shared fixtures for the criterion benches and a small aggregator for
//! attack report files (the line format exists so this crate can digest runs
//! without a structured-format dependency).

use tconj::protocol::{keygen, PrivateKey, PublicKey};
use tconj::wire::RecordOutcome;
use tconj::{seeded_rng, AttackRecord, ConstTerm, TruncPoly};

/// A pair of free polynomials and one zero-constant-term substitution target,
/// all at order n, drawn from a fixed seed so runs are comparable.
pub struct PolyFixture {
    pub a: TruncPoly,
    pub b: TruncPoly,
    pub g: TruncPoly,
}

pub fn poly_fixture(n: usize) -> PolyFixture {
    let mut rng = seeded_rng(0x5eed);
    PolyFixture {
        a: TruncPoly::random(n, ConstTerm::Free, &mut rng),
        b: TruncPoly::random(n, ConstTerm::Free, &mut rng),
        g: TruncPoly::random(n, ConstTerm::Zero, &mut rng),
    }
}

/// A deterministic key pair for protocol-round timing.
pub fn key_fixture(n: usize) -> (PublicKey, PrivateKey) {
    keygen(n, &mut seeded_rng(0x5eed + 1))
}

/// Digest of an attack report: outcome counts, timing median, and how deep
/// and wide the trees got.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSummary {
    pub trials: usize,
    pub forged: usize,
    pub exhausted: usize,
    pub width_exceeded: usize,
    pub median_millis: u64,
    pub deepest_completed_level: usize,
    pub widest_level: usize,
}

pub fn summarize(records: &[AttackRecord]) -> ReportSummary {
    let mut summary = ReportSummary {
        trials: records.len(),
        forged: 0,
        exhausted: 0,
        width_exceeded: 0,
        median_millis: 0,
        deepest_completed_level: 0,
        widest_level: 0,
    };
    let mut times: Vec<u64> = Vec::with_capacity(records.len());
    for record in records {
        match record.outcome {
            RecordOutcome::Forged { .. } => summary.forged += 1,
            RecordOutcome::Exhausted { .. } => summary.exhausted += 1,
            RecordOutcome::WidthExceeded { .. } => summary.width_exceeded += 1,
        }
        summary.deepest_completed_level =
            summary.deepest_completed_level.max(record.widths.len());
        summary.widest_level =
            summary.widest_level.max(record.widths.iter().copied().max().unwrap_or(0));
        times.push(record.millis);
    }
    times.sort_unstable();
    if !times.is_empty() {
        summary.median_millis = times[times.len() / 2];
    }
    summary
}
