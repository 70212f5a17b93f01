//! Key recovery by degree-by-degree tree search.
//!
//! The public relation t = psi(s^T) w phi(s) is a system of 4n boolean
//! equations (one per matrix entry per coefficient degree) in the 4n unknown
//! coefficient bits of s. Because the endomorphisms substitute polynomials
//! with zero constant term, the system is triangular by degree: the degree-d
//! equations involve only unknowns of degree <= d. It is quadratic, not
//! linear, in those unknowns (the two images of s multiply each other), so
//! instead of elimination the attack walks degrees from the constant term
//! up, keeping the set of all partial assignments consistent so far. That
//! set is a tree level; if it stays narrow all the way to degree n-1, every
//! survivor is a working private key, whether or not it equals the planted
//! one. A width cap turns runaway levels into a reported failure.
//!
//! Two interchangeable engines implement the walk. Both enumerate a node's
//! 16 children through the same affine form of the degree-d residual (the
//! new bits enter linearly through the constant matrices of the cached
//! products; the quadratic term exists only at degree 0), and they differ
//! only in how the parent product is obtained: re-evaluated per level for
//! tiny rings, where explosive unbounded trees make node weight matter, or
//! carried incrementally for real parameter sizes. `extend_level` is the
//! plain specification form, kept as the conformance oracle for both.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use thiserror::Error;

use crate::f2poly::{AlgebraError, TruncPoly};
use crate::mat2::Mat2;
use crate::protocol::{sample_keys, PrivateKey, PublicKey};

/// Errors from attack preparation and the search operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    /// A partial solution's depth is outside 1..=n for the given key.
    #[error("depth {depth} out of range for truncation order {n}")]
    DepthOutOfRange { depth: usize, n: usize },
    /// extend_level was handed partial solutions of differing depths.
    #[error("partial solutions do not share one depth")]
    MixedDepths,
    /// Exhaustive search was asked for more candidate bits than its bound.
    #[error("exhaustive search over {bits} bits exceeds the 24-bit bound")]
    SearchTooLarge { bits: usize },
    #[error("bad attack config: {0}")]
    BadConfig(&'static str),
}

/// Experiment parameters: how instances are generated and how far the tree
/// may grow.
///
/// `n` is the number of coefficient slots of the unknown private matrix (and
/// of w); `endo_n` the number of slots the endomorphism polynomials are
/// drawn with; `ring_n` the truncation order everything is carried to before
/// t is computed. The defaults make all three equal. Keeping them apart
/// expresses the two readings of an evaluation setup where endomorphisms
/// use a larger degree bound than the matrices: either reduce the
/// endomorphism polynomials into the matrices' ring (`endo_n` > `ring_n` =
/// `n`), or work in the larger ring and zero-extend the matrices (`ring_n` =
/// `endo_n` > `n`). With `n` below `ring_n`, tree levels at degree `n` and
/// above assign no new bits and only check consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackConfig {
    pub n: usize,
    pub endo_n: usize,
    pub ring_n: usize,
    pub width_cap: usize,
}

impl AttackConfig {
    /// Cap value meaning "never report WidthExceeded". Sensible only where
    /// exhaustive search would be, since tree width can reach 16^n.
    pub const UNBOUNDED: usize = usize::MAX;

    /// Equal orders everywhere and the default width cap of 16384.
    pub fn new(n: usize) -> Self {
        AttackConfig { n, endo_n: n, ring_n: n, width_cap: 16384 }
    }

    pub fn with_endo_order(mut self, endo_n: usize) -> Self {
        self.endo_n = endo_n;
        self
    }

    pub fn with_ring_order(mut self, ring_n: usize) -> Self {
        self.ring_n = ring_n;
        self
    }

    pub fn with_width_cap(mut self, cap: usize) -> Self {
        self.width_cap = cap;
        self
    }

    fn validate(&self) -> Result<(), AttackError> {
        if self.n < 1 || self.endo_n < 1 || self.ring_n < 1 {
            return Err(AttackError::BadConfig("orders must be at least 1"));
        }
        if self.width_cap < 1 {
            return Err(AttackError::BadConfig("width cap must be at least 1"));
        }
        if self.n > self.ring_n {
            return Err(AttackError::BadConfig("unknown slots exceed the ring order"));
        }
        Ok(())
    }
}

/// A generated experiment instance: the public key under attack, plus the
/// planted private key kept aside for evaluation. No search path reads the
/// planted key; it exists so experiments can verify outcomes.
#[derive(Debug, Clone)]
pub struct AttackInstance {
    public: PublicKey,
    planted: Option<PrivateKey>,
}

impl AttackInstance {
    /// Wraps a key of unknown provenance (nothing planted).
    pub fn from_public(public: PublicKey) -> Self {
        AttackInstance { public, planted: None }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn planted(&self) -> Option<&PrivateKey> {
        self.planted.as_ref()
    }
}

/// Generates a planted instance: sample a key pair under `cfg`'s orders and
/// publish its public half. The private half is retained for evaluation
/// only.
pub fn plant_instance<R: Rng + ?Sized>(
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<AttackInstance, AttackError> {
    cfg.validate()?;
    let (public, planted) = sample_keys(cfg.n, cfg.endo_n, cfg.ring_n, rng);
    Ok(AttackInstance { public, planted: Some(planted) })
}

/// A search node: the four coefficient bits of the candidate matrix for
/// each degree below `depth`, packed one nibble per degree (bit 0 = a,
/// bit 1 = b, bit 2 = c, bit 3 = d, row-major).
///
/// Ordering is lexicographic on the nibble sequence; every set of partial
/// solutions this module returns is sorted that way.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartialSolution {
    levels: Vec<u8>,
}

impl PartialSolution {
    /// The depth-0 root: nothing assigned yet.
    pub fn empty() -> Self {
        PartialSolution { levels: Vec::new() }
    }

    /// Number of assigned degrees.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The four bits assigned at degree `d`.
    pub fn nibble(&self, d: usize) -> u8 {
        self.levels[d]
    }

    /// A copy with the four degree-`depth` bits appended.
    pub fn extended(&self, nibble: u8) -> Self {
        debug_assert!(nibble < 16);
        let mut levels = Vec::with_capacity(self.levels.len() + 1);
        levels.extend_from_slice(&self.levels);
        levels.push(nibble);
        PartialSolution { levels }
    }

    /// The first `depth` levels of this assignment.
    pub fn prefix(&self, depth: usize) -> Self {
        assert!(depth <= self.depth());
        PartialSolution { levels: self.levels[..depth].to_vec() }
    }

    /// The assigned coefficients of a matrix's entries, degrees 0..depth-1.
    pub fn from_mat(m: &Mat2, depth: usize) -> Self {
        assert!(depth <= m.n());
        PartialSolution { levels: (0..depth).map(|d| m.coeff_nibble(d)).collect() }
    }

    /// Zero-filled completion: the matrix over F2[x]/(x^n) whose low
    /// coefficients are this assignment and whose higher ones are zero.
    /// Requires n >= depth.
    pub fn to_mat(&self, n: usize) -> Mat2 {
        assert!(n >= self.depth(), "completion order below assigned depth");
        let words = n.div_ceil(64);
        let mut entries = vec![vec![0u64; words]; 4];
        for (d, &nib) in self.levels.iter().enumerate() {
            for (e, entry) in entries.iter_mut().enumerate() {
                if nib >> e & 1 == 1 {
                    entry[d / 64] |= 1u64 << (d % 64);
                }
            }
        }
        let mut it = entries.into_iter().map(|w| TruncPoly::from_words(n, w));
        let (a, b, c, d) = (
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        );
        Mat2::new(a, b, c, d).expect("entries share one order by construction")
    }
}

// ---- 2x2 bit-matrix helpers (nibble encoding as in Mat2::coeff_nibble) ----

/// Product of two 2x2 bit matrices packed as nibbles.
fn bm_mul(x: u8, y: u8) -> u8 {
    let (xa, xb, xc, xd) = (x & 1, x >> 1 & 1, x >> 2 & 1, x >> 3 & 1);
    let (ya, yb, yc, yd) = (y & 1, y >> 1 & 1, y >> 2 & 1, y >> 3 & 1);
    (xa & ya ^ xb & yc)
        | (xa & yb ^ xb & yd) << 1
        | (xc & ya ^ xd & yc) << 2
        | (xc & yb ^ xd & yd) << 3
}

/// Transpose of a packed 2x2 bit matrix: swap the off-diagonal bits.
fn bm_t(x: u8) -> u8 {
    x & 0b1001 | (x & 0b0010) << 1 | (x & 0b0100) >> 1
}

/// Bit matrix times polynomial matrix: entry (i,j) = sum over k of
/// s[i,k] * m[k,j].
fn bm_mul_left(s: u8, m: &Mat2) -> Mat2 {
    let pick = |row_bit_a: u8, row_bit_b: u8, top: &TruncPoly, bot: &TruncPoly| {
        let mut acc = TruncPoly::zero(m.n());
        if row_bit_a == 1 {
            acc = acc.add(top).unwrap();
        }
        if row_bit_b == 1 {
            acc = acc.add(bot).unwrap();
        }
        acc
    };
    let (sa, sb, sc, sd) = (s & 1, s >> 1 & 1, s >> 2 & 1, s >> 3 & 1);
    Mat2::new(
        pick(sa, sb, m.a(), m.c()),
        pick(sa, sb, m.b(), m.d()),
        pick(sc, sd, m.a(), m.c()),
        pick(sc, sd, m.b(), m.d()),
    )
    .expect("entries share m's order")
}

/// Polynomial matrix times bit matrix: entry (i,j) = sum over k of
/// m[i,k] * s[k,j].
fn bm_mul_right(m: &Mat2, s: u8) -> Mat2 {
    let pick = |col_bit_a: u8, col_bit_c: u8, left: &TruncPoly, right: &TruncPoly| {
        let mut acc = TruncPoly::zero(m.n());
        if col_bit_a == 1 {
            acc = acc.add(left).unwrap();
        }
        if col_bit_c == 1 {
            acc = acc.add(right).unwrap();
        }
        acc
    };
    let (sa, sb, sc, sd) = (s & 1, s >> 1 & 1, s >> 2 & 1, s >> 3 & 1);
    Mat2::new(
        pick(sa, sc, m.a(), m.b()),
        pick(sb, sd, m.a(), m.b()),
        pick(sa, sc, m.c(), m.d()),
        pick(sb, sd, m.c(), m.d()),
    )
    .expect("entries share m's order")
}

/// Scalar polynomial times matrix, entrywise.
fn scale(m: &Mat2, p: &TruncPoly) -> Mat2 {
    Mat2::new(
        m.a().mul(p).unwrap(),
        m.b().mul(p).unwrap(),
        m.c().mul(p).unwrap(),
        m.d().mul(p).unwrap(),
    )
    .expect("entries share one order")
}

/// The product psi(m^T) w phi(m) evaluated from scratch.
fn twisted_image(public: &PublicKey, m: &Mat2) -> Result<Mat2, AlgebraError> {
    let left = public.psi().apply_mat(&m.transpose())?;
    let right = public.phi().apply_mat(m)?;
    left.mul(public.w())?.mul(&right)
}

/// Residual of the partial assignment at its topmost assigned degree: the
/// four degree-(depth-1) coefficient bits of psi(s~^T) w phi(s~) - t, where
/// s~ is the zero-filled completion, ordered (a, b, c, d).
///
/// Triangularity makes this well defined: with zero-constant-term
/// endomorphisms, the degree-(depth-1) coefficients of the product do not
/// depend on how the assignment is completed. All zeros means the
/// assignment is consistent at this degree.
pub fn residual_coeffs(
    public: &PublicKey,
    partial: &PartialSolution,
) -> Result<[bool; 4], AttackError> {
    let depth = partial.depth();
    if depth < 1 || depth > public.n() {
        return Err(AttackError::DepthOutOfRange { depth, n: public.n() });
    }
    let product = twisted_image(public, &partial.to_mat(public.n()))?;
    let nib = product.coeff_nibble(depth - 1) ^ public.t().coeff_nibble(depth - 1);
    Ok([nib & 1 == 1, nib >> 1 & 1 == 1, nib >> 2 & 1 == 1, nib >> 3 & 1 == 1])
}

/// Result of extending one tree level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelOutcome {
    /// The surviving assignments at depth d+1, deduplicated and sorted.
    Extended(Vec<PartialSolution>),
    /// More than `cap` assignments survived; `level` is their depth.
    WidthExceeded { level: usize, width: usize },
}

/// One tree step in its plain specification form: every live assignment is
/// extended by all 16 possible nibbles for the next degree, survivors are
/// those whose new residual is zero, and the deduplicated, sorted survivor
/// set is returned unless it outgrows `cap`.
///
/// All inputs must share one depth d < n. An empty input yields an empty
/// output (a dead tree stays dead). The search engines in [`tree_attack`]
/// produce level-for-level identical sets; this form exists as their
/// conformance oracle and for callers that want to drive the walk manually.
pub fn extend_level(
    public: &PublicKey,
    live: &[PartialSolution],
    cap: usize,
) -> Result<LevelOutcome, AttackError> {
    let Some(first) = live.first() else {
        return Ok(LevelOutcome::Extended(Vec::new()));
    };
    let depth = first.depth();
    if live.iter().any(|p| p.depth() != depth) {
        return Err(AttackError::MixedDepths);
    }
    if depth >= public.n() {
        return Err(AttackError::DepthOutOfRange { depth: depth + 1, n: public.n() });
    }
    let expand = |parent: &PartialSolution| -> Result<Vec<PartialSolution>, AttackError> {
        let mut out = Vec::new();
        for nib in 0..16u8 {
            let child = parent.extended(nib);
            if residual_coeffs(public, &child)? == [false; 4] {
                out.push(child);
            }
        }
        Ok(out)
    };
    let per_parent: Vec<Vec<PartialSolution>> = if live.len() >= 64 {
        live.par_iter().map(expand).collect::<Result<_, _>>()?
    } else {
        live.iter().map(expand).collect::<Result<_, _>>()?
    };
    let mut survivors: Vec<PartialSolution> = per_parent.into_iter().flatten().collect();
    survivors.sort_unstable();
    survivors.dedup();
    if survivors.len() > cap {
        return Ok(LevelOutcome::WidthExceeded { level: depth + 1, width: survivors.len() });
    }
    Ok(LevelOutcome::Extended(survivors))
}

/// How a tree run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackOutcome {
    /// Every degree level was completed with survivors: each listed matrix
    /// satisfies the public relation and forges. Sorted canonically; any
    /// single element suffices, and the list is the complete solution set
    /// (under the configured unknown-degree bound) when the cap was never
    /// binding.
    Forged { solutions: Vec<Mat2> },
    /// The tree died: no assignment was consistent at `level`.
    Exhausted { level: usize },
    /// The survivor set at `level` outgrew the width cap.
    WidthExceeded { level: usize, width: usize },
}

impl AttackOutcome {
    /// A forging key if the run produced any.
    pub fn forgery(&self) -> Option<&Mat2> {
        match self {
            AttackOutcome::Forged { solutions } => solutions.first(),
            _ => None,
        }
    }
}

impl fmt::Display for AttackOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackOutcome::Forged { solutions } => {
                write!(f, "forged ({} solution(s))", solutions.len())
            }
            AttackOutcome::Exhausted { level } => write!(f, "exhausted at level {level}"),
            AttackOutcome::WidthExceeded { level, width } => {
                write!(f, "width {width} exceeded cap at level {level}")
            }
        }
    }
}

/// A tree run's outcome plus its per-level width profile: `widths[i]` is the
/// survivor count after completing degree i. Levels after the reported
/// failure point are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackRun {
    pub outcome: AttackOutcome,
    pub widths: Vec<usize>,
}

/// Runs the degree-by-degree tree search against a public key.
///
/// `cfg.ring_n` must equal the key's truncation order, and `cfg.n` sets the
/// unknown's coefficient slots: degrees below `cfg.n` branch 16 ways,
/// degrees from `cfg.n` up assign nothing and only check consistency of the
/// already-fixed low part. Levels proceed in ascending degree until the
/// whole ring order is covered (Forged), a level has no survivors
/// (Exhausted), or a level outgrows `cfg.width_cap` (WidthExceeded).
pub fn tree_attack(public: &PublicKey, cfg: &AttackConfig) -> Result<AttackRun, AttackError> {
    cfg.validate()?;
    if cfg.ring_n != public.n() {
        return Err(AttackError::BadConfig("config ring order does not match the key"));
    }
    if public.n() <= EVAL_ENGINE_MAX_ORDER {
        tree_attack_eval(public, cfg)
    } else {
        tree_attack_cached(public, cfg)
    }
}

/// Ring orders up to this bound use the re-evaluating engine; unbounded-cap
/// oracle runs live there, and its nodes carry no per-node product caches,
/// which keeps exponential levels affordable in memory.
const EVAL_ENGINE_MAX_ORDER: usize = 16;

/// The affine pieces shared by every child of one parent at degree d.
///
/// Adding the nibble S at degree d changes the product by
///   psi_pow(d) * (S^T B) + phi_pow(d) * (A S) + psi_pow(d) phi_pow(d) * (S^T w S),
/// where A = psi(s~^T) w and B = w phi(s~) for the parent's completion s~.
/// Only the degree-d coefficient of that change matters for the child's
/// residual, and it collapses to constant-matrix arithmetic: the first two
/// terms contribute alpha * (A0 S) and beta * (S^T B0) with alpha, beta the
/// degree-d coefficients of the endomorphism powers (1 at d = 0, else the
/// respective degree-1 coefficient, since pow(d) = p1^d x^d + higher), and
/// the quadratic term survives truncation only at d = 0.
struct ChildFilter {
    base: u8,
    a0: u8,
    b0: u8,
    w0: u8,
    alpha: bool,
    beta: bool,
    quadratic: bool,
}

impl ChildFilter {
    fn residual(&self, nib: u8) -> u8 {
        let mut r = self.base;
        if self.alpha {
            r ^= bm_mul(self.a0, nib);
        }
        if self.beta {
            r ^= bm_mul(bm_t(nib), self.b0);
        }
        if self.quadratic {
            r ^= bm_mul(bm_mul(bm_t(nib), self.w0), nib);
        }
        r
    }

    fn surviving_nibbles(&self, branching: bool) -> impl Iterator<Item = u8> + '_ {
        let limit = if branching { 16 } else { 1 };
        (0..limit).filter(|&nib| self.residual(nib) == 0)
    }
}

fn endo_coeff1(public: &PublicKey) -> (bool, bool) {
    (public.phi().poly().coeff(1), public.psi().poly().coeff(1))
}

/// Tiny-ring engine: nodes are bare partial assignments; each level
/// re-evaluates every parent's product once and filters its children with
/// the shared affine form.
fn tree_attack_eval(public: &PublicKey, cfg: &AttackConfig) -> Result<AttackRun, AttackError> {
    let n = public.n();
    let (phi1, psi1) = endo_coeff1(public);
    let w0 = public.w().coeff_nibble(0);
    let mut live = vec![PartialSolution::empty()];
    let mut widths = Vec::with_capacity(n);
    for d in 0..n {
        let t_d = public.t().coeff_nibble(d);
        let expand = |parent: &PartialSolution| -> Vec<PartialSolution> {
            let m = parent.to_mat(n);
            let product = twisted_image(public, &m).expect("orders match by construction");
            let m0 = m.coeff_nibble(0);
            let filter = ChildFilter {
                base: product.coeff_nibble(d) ^ t_d,
                a0: bm_mul(bm_t(m0), w0),
                b0: bm_mul(w0, m0),
                w0,
                alpha: d == 0 || phi1,
                beta: d == 0 || psi1,
                quadratic: d == 0,
            };
            filter
                .surviving_nibbles(d < cfg.n)
                .map(|nib| parent.extended(nib))
                .collect()
        };
        let per_parent: Vec<Vec<PartialSolution>> = if live.len() >= 256 {
            live.par_iter().map(expand).collect()
        } else {
            live.iter().map(expand).collect()
        };
        live = per_parent.into_iter().flatten().collect();
        debug_assert!(live.windows(2).all(|w| w[0] < w[1]), "levels stay sorted and distinct");
        if live.is_empty() {
            return Ok(AttackRun {
                outcome: AttackOutcome::Exhausted { level: d + 1 },
                widths,
            });
        }
        if live.len() > cfg.width_cap {
            return Ok(AttackRun {
                outcome: AttackOutcome::WidthExceeded { level: d + 1, width: live.len() },
                widths,
            });
        }
        widths.push(live.len());
    }
    let solutions = live.iter().map(|p| p.to_mat(n)).collect();
    Ok(AttackRun { outcome: AttackOutcome::Forged { solutions }, widths })
}

/// A cached search node: the partial assignment together with the three
/// products that let children be filtered and updated without re-evaluating
/// compositions: a = psi(s~^T) w, b = w phi(s~), m = psi(s~^T) w phi(s~).
struct CachedNode {
    partial: PartialSolution,
    a: Mat2,
    b: Mat2,
    m: Mat2,
}

/// Full-size engine: per-node product caches make each level's work
/// proportional to the survivor count times a constant number of polynomial
/// multiplications, independent of how many levels came before.
fn tree_attack_cached(public: &PublicKey, cfg: &AttackConfig) -> Result<AttackRun, AttackError> {
    let n = public.n();
    let (phi1, psi1) = endo_coeff1(public);
    let w0 = public.w().coeff_nibble(0);
    // p^d mod x^n for both endomorphism polynomials, d = 0..n-1
    let mut phi_pow = Vec::with_capacity(n);
    let mut psi_pow = Vec::with_capacity(n);
    phi_pow.push(TruncPoly::one(n));
    psi_pow.push(TruncPoly::one(n));
    for d in 1..n {
        phi_pow.push(phi_pow[d - 1].mul(public.phi().poly())?);
        psi_pow.push(psi_pow[d - 1].mul(public.psi().poly())?);
    }
    let mut live = vec![CachedNode {
        partial: PartialSolution::empty(),
        a: Mat2::zero(n),
        b: Mat2::zero(n),
        m: Mat2::zero(n),
    }];
    let mut widths = Vec::with_capacity(n);
    for d in 0..n {
        let t_d = public.t().coeff_nibble(d);
        let cross = phi_pow[d].mul(&psi_pow[d])?;
        let expand = |parent: &CachedNode| -> Vec<CachedNode> {
            let filter = ChildFilter {
                base: parent.m.coeff_nibble(d) ^ t_d,
                a0: parent.a.coeff_nibble(0),
                b0: parent.b.coeff_nibble(0),
                w0,
                alpha: d == 0 || phi1,
                beta: d == 0 || psi1,
                quadratic: d == 0,
            };
            filter
                .surviving_nibbles(d < cfg.n)
                .map(|nib| {
                    let partial = parent.partial.extended(nib);
                    if nib == 0 {
                        // the completion is unchanged, so the caches are too
                        return CachedNode {
                            partial,
                            a: parent.a.clone(),
                            b: parent.b.clone(),
                            m: parent.m.clone(),
                        };
                    }
                    let st_w = bm_mul_left(bm_t(nib), public.w());
                    let w_s = bm_mul_right(public.w(), nib);
                    let a = parent.a.xor(&scale(&st_w, &psi_pow[d]));
                    let b = parent.b.xor(&scale(&w_s, &phi_pow[d]));
                    let m = parent
                        .m
                        .xor(&scale(&bm_mul_left(bm_t(nib), &parent.b), &psi_pow[d]))
                        .xor(&scale(&bm_mul_right(&parent.a, nib), &phi_pow[d]))
                        .xor(&scale(&bm_mul_right(&st_w, nib), &cross));
                    CachedNode { partial, a, b, m }
                })
                .collect()
        };
        let per_parent: Vec<Vec<CachedNode>> = if live.len() >= 256 {
            live.par_iter().map(expand).collect()
        } else {
            live.iter().map(expand).collect()
        };
        live = per_parent.into_iter().flatten().collect();
        #[cfg(debug_assertions)]
        if let Some(node) = live.first() {
            // spot-check the incremental caches against a fresh evaluation
            let fresh = twisted_image(public, &node.partial.to_mat(n)).unwrap();
            debug_assert_eq!(fresh, node.m, "cached product drifted at level {}", d + 1);
        }
        if live.is_empty() {
            return Ok(AttackRun {
                outcome: AttackOutcome::Exhausted { level: d + 1 },
                widths,
            });
        }
        if live.len() > cfg.width_cap {
            return Ok(AttackRun {
                outcome: AttackOutcome::WidthExceeded { level: d + 1, width: live.len() },
                widths,
            });
        }
        widths.push(live.len());
    }
    let solutions = live.iter().map(|node| node.partial.to_mat(n)).collect();
    Ok(AttackRun { outcome: AttackOutcome::Forged { solutions }, widths })
}

/// Exhaustively enumerates all 2^(4n) candidate matrices and returns every
/// one satisfying the public relation, in the same canonical order the tree
/// engines use. The independent correctness oracle for the tree; refuses
/// searches beyond 24 candidate bits.
pub fn brute_force_solve(public: &PublicKey) -> Result<Vec<Mat2>, AttackError> {
    let n = public.n();
    let bits = 4 * n;
    if bits > 24 {
        return Err(AttackError::SearchTooLarge { bits });
    }
    let total: u32 = 1 << bits;
    let survivors: Vec<u32> = (0..total)
        .into_par_iter()
        .filter(|&mask| {
            let candidate = mask_to_partial(mask, n).to_mat(n);
            let image = twisted_image(public, &candidate).expect("orders match");
            image == *public.t()
        })
        .collect();
    let mut partials: Vec<PartialSolution> =
        survivors.iter().map(|&mask| mask_to_partial(mask, n)).collect();
    partials.sort_unstable();
    Ok(partials.iter().map(|p| p.to_mat(n)).collect())
}

fn mask_to_partial(mask: u32, n: usize) -> PartialSolution {
    let mut p = PartialSolution::empty();
    for d in 0..n {
        p = p.extended((mask >> (4 * d) & 0xF) as u8);
    }
    p
}

/// Does the candidate satisfy the public relation t = psi(s'^T) w phi(s')?
/// Any matrix that does can impersonate the key holder.
pub fn forge_check(public: &PublicKey, candidate: &Mat2) -> Result<bool, AttackError> {
    Ok(twisted_image(public, candidate)? == *public.t())
}

/// One planted experiment: outcome, width profile, timing, and whether every
/// claimed solution was re-verified against the public relation.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    pub run: AttackRun,
    pub millis: u64,
    pub solutions_verified: bool,
}

/// Plants an instance from `seed` (via the crate's documented generator) and
/// runs the tree on it, re-checking any forged solutions.
pub fn run_planted_trial(cfg: &AttackConfig, seed: u64) -> Result<TrialResult, AttackError> {
    let mut rng = crate::seeded_rng(seed);
    let instance = plant_instance(cfg, &mut rng)?;
    let start = Instant::now();
    let run = tree_attack(instance.public(), cfg)?;
    let millis = start.elapsed().as_millis() as u64;
    let solutions_verified = match &run.outcome {
        AttackOutcome::Forged { solutions } => solutions
            .iter()
            .map(|s| forge_check(instance.public(), s))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .all(|ok| ok),
        _ => true,
    };
    Ok(TrialResult { seed, run, millis, solutions_verified })
}

/// Witnesses that the coefficient constraint system is quadratic rather
/// than linear in the unknown bits: hunts for an instance, depth, and pair
/// of partial assignments where the residual violates additivity,
/// residual(p + q) != residual(p) + residual(q) + residual(0).
///
/// A linear system would satisfy that identity everywhere (the residual of
/// an affine map is affine); the cross products of low-degree bits break it
/// here. Returns true as soon as a violation is found within `trials`
/// random instances at order `n`.
pub fn additivity_violation_exists(n: usize, trials: usize, seed: u64) -> bool {
    let mut rng = crate::seeded_rng(seed);
    let cfg = AttackConfig::new(n);
    for _ in 0..trials {
        let instance = match plant_instance(&cfg, &mut rng) {
            Ok(i) => i,
            Err(_) => return false,
        };
        let depth = 1 + (rng.next_u32() as usize) % n;
        let draw = |rng: &mut rand_chacha::ChaCha12Rng| {
            let mut p = PartialSolution::empty();
            for _ in 0..depth {
                p = p.extended((rng.next_u32() & 0xF) as u8);
            }
            p
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let mut sum = PartialSolution::empty();
        for d in 0..depth {
            sum = sum.extended(p.nibble(d) ^ q.nibble(d));
        }
        let zero = mask_to_partial(0, depth);
        let res = |x: &PartialSolution| {
            residual_coeffs(instance.public(), x).expect("depth within range")
        };
        let (rp, rq, rs, rz) = (res(&p), res(&q), res(&sum), res(&zero));
        let violated = (0..4).any(|i| rs[i] != (rp[i] ^ rq[i] ^ rz[i]));
        if violated {
            return true;
        }
    }
    false
}
