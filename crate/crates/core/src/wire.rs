//! Bit-exact serialization: value codecs, message framing, and the file
//! formats for keys, transcripts, and attack reports.
//!
//! Every binary codec is canonical and strict: equal values encode to equal
//! bytes, decoders consume their input exactly, and anything else (unknown
//! tags, length mismatches, nonzero padding bits, out-of-range bytes) is a
//! typed error, never a panic. The framing layer wraps each message in a
//! one-byte tag and a little-endian length, and doubles as the on-disk
//! format: a key file is a single frame, a transcript file is the session's
//! frames in order, ending with a verdict frame.
//!
//! Attack experiment results use a line-oriented `key=value` text format
//! instead, so downstream tooling can aggregate them with nothing fancier
//! than a line splitter; [`AttackRecord`] round-trips through it exactly.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::attack::AttackOutcome;
use crate::f2poly::{AlgebraError, Endo, TruncPoly};
use crate::mat2::Mat2;
use crate::protocol::{
    Challenge, Commitment, PublicKey, Response, RoundRecord, Transcript, Verdict,
};

/// Frames larger than this are rejected before their payload is read, so a
/// corrupt length field cannot trigger a giant allocation. Every legitimate
/// message at practical truncation orders is far below it.
pub const MAX_FRAME_LEN: usize = 1 << 24;

/// Decoding and transport failures.
#[derive(Debug, Error)]
pub enum WireError {
    /// The input ended before the value it declared was complete.
    #[error("input ends inside a value")]
    Truncated,
    /// A strict whole-input decoder found bytes after the value.
    #[error("{0} unconsumed byte(s) after the value")]
    TrailingBytes(usize),
    #[error("unknown frame tag {0:#04x}")]
    UnknownTag(u8),
    /// The payload length does not match what the tag requires.
    #[error("payload length does not match the message type")]
    LengthMismatch,
    /// Bits set beyond the declared truncation order.
    #[error("nonzero padding bits beyond the truncation order")]
    NonzeroPadding,
    /// Polynomials of truncation order zero do not exist.
    #[error("truncation order must be at least 1")]
    ZeroOrder,
    #[error("challenge byte must be 0x00 or 0x01, got {0:#04x}")]
    BadChallenge(u8),
    #[error("verdict byte must be 0x00 or 0x01, got {0:#04x}")]
    BadVerdict(u8),
    /// Components of one value disagree on the truncation order.
    #[error("mismatched truncation orders inside one value")]
    OrderMismatch,
    #[error("invalid public key: {0}")]
    BadPublicKey(&'static str),
    #[error("frame length {0} exceeds the frame size cap")]
    FrameTooLarge(u32),
    #[error("malformed transcript: {0}")]
    BadTranscript(&'static str),
    #[error("malformed attack report: {0}")]
    BadReport(String),
    #[error("invalid hex: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<AlgebraError> for WireError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::OrderMismatch { .. } => WireError::OrderMismatch,
            AlgebraError::NonzeroConstantTerm => {
                WireError::BadPublicKey("endomorphism constant term must be zero")
            }
        }
    }
}

// ---- cursor over a byte slice ---------------------------------------------

/// Sequential reader used by all composable decoders; the strict public
/// entry points call [`Cursor::finish`] to enforce exact consumption.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(len).ok_or(WireError::Truncated)?;
        if end > self.buf.len() {
            return Err(WireError::Truncated);
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn take_u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn take_u32_le(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn finish(self) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::TrailingBytes(self.remaining()));
        }
        Ok(())
    }
}

// ---- polynomials -----------------------------------------------------------

/// Byte length of an encoded polynomial of order n (header plus packed bits).
fn poly_wire_len(n: usize) -> usize {
    4 + n.div_ceil(8)
}

/// Encodes a polynomial as a 4-byte little-endian truncation order followed
/// by ceil(n/8) bytes; bit i of the stream (byte i/8, bit i%8, LSB first) is
/// the coefficient of x^i, and padding bits above x^(n-1) are zero.
pub fn encode_poly(p: &TruncPoly) -> Vec<u8> {
    let n = p.n();
    let mut out = Vec::with_capacity(poly_wire_len(n));
    out.extend_from_slice(&(n as u32).to_le_bytes());
    let words = p.words();
    for byte_idx in 0..n.div_ceil(8) {
        let word = words[byte_idx / 8];
        out.push((word >> (8 * (byte_idx % 8))) as u8);
    }
    out
}

fn take_poly(cur: &mut Cursor<'_>) -> Result<TruncPoly, WireError> {
    let n = cur.take_u32_le()? as usize;
    if n == 0 {
        return Err(WireError::ZeroOrder);
    }
    // the length check precedes any allocation, so a forged huge order is
    // rejected by the cursor before it can cost memory
    let bytes = cur.take(n.div_ceil(8))?;
    if !n.is_multiple_of(8) {
        let pad_mask = 0xFFu8 << (n % 8);
        if bytes[n / 8] & pad_mask != 0 {
            return Err(WireError::NonzeroPadding);
        }
    }
    let mut words = vec![0u64; n.div_ceil(64)];
    for (byte_idx, &b) in bytes.iter().enumerate() {
        words[byte_idx / 8] |= (b as u64) << (8 * (byte_idx % 8));
    }
    Ok(TruncPoly::from_words(n, words))
}

/// Strict inverse of [`encode_poly`]: the slice must hold exactly one
/// polynomial, with zero padding bits.
pub fn decode_poly(bytes: &[u8]) -> Result<TruncPoly, WireError> {
    let mut cur = Cursor::new(bytes);
    let p = take_poly(&mut cur)?;
    cur.finish()?;
    Ok(p)
}

// ---- matrices and keys ------------------------------------------------------

/// Encodes the four entries a, b, c, d in row-major order, each as
/// [`encode_poly`].
pub fn encode_mat(m: &Mat2) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * poly_wire_len(m.n()));
    for entry in m.entries() {
        out.extend_from_slice(&encode_poly(entry));
    }
    out
}

fn take_mat(cur: &mut Cursor<'_>) -> Result<Mat2, WireError> {
    let a = take_poly(cur)?;
    let b = take_poly(cur)?;
    let c = take_poly(cur)?;
    let d = take_poly(cur)?;
    Ok(Mat2::new(a, b, c, d)?)
}

/// Strict inverse of [`encode_mat`]; entries must agree on the order.
pub fn decode_mat(bytes: &[u8]) -> Result<Mat2, WireError> {
    let mut cur = Cursor::new(bytes);
    let m = take_mat(&mut cur)?;
    cur.finish()?;
    Ok(m)
}

/// Encodes phi's polynomial, psi's polynomial, w, and t, in that order.
pub fn encode_public_key(pk: &PublicKey) -> Vec<u8> {
    let mut out = encode_poly(pk.phi().poly());
    out.extend_from_slice(&encode_poly(pk.psi().poly()));
    out.extend_from_slice(&encode_mat(pk.w()));
    out.extend_from_slice(&encode_mat(pk.t()));
    out
}

fn take_public_key(cur: &mut Cursor<'_>) -> Result<PublicKey, WireError> {
    let phi_p = take_poly(cur)?;
    let psi_p = take_poly(cur)?;
    let w = take_mat(cur)?;
    let t = take_mat(cur)?;
    let phi = Endo::new(phi_p)?;
    let psi = Endo::new(psi_p)?;
    PublicKey::new(phi, psi, w, t).map_err(|_| WireError::OrderMismatch)
}

/// Strict inverse of [`encode_public_key`]; validates the endomorphism
/// constant terms and the shared truncation order.
pub fn decode_public_key(bytes: &[u8]) -> Result<PublicKey, WireError> {
    let mut cur = Cursor::new(bytes);
    let pk = take_public_key(&mut cur)?;
    cur.finish()?;
    Ok(pk)
}

/// A private key is its matrix s.
pub fn encode_private_key(sk: &crate::protocol::PrivateKey) -> Vec<u8> {
    encode_mat(sk.matrix())
}

pub fn decode_private_key(bytes: &[u8]) -> Result<crate::protocol::PrivateKey, WireError> {
    Ok(crate::protocol::PrivateKey::from_mat(decode_mat(bytes)?))
}

// ---- framing ----------------------------------------------------------------

/// Message kind discriminant, one byte on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameTag {
    Commitment = 0x01,
    Challenge = 0x02,
    Response = 0x03,
    Verdict = 0x04,
    PublicKey = 0x05,
    PrivateKey = 0x06,
    AttackReport = 0x07,
}

impl FrameTag {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(FrameTag::Commitment),
            0x02 => Some(FrameTag::Challenge),
            0x03 => Some(FrameTag::Response),
            0x04 => Some(FrameTag::Verdict),
            0x05 => Some(FrameTag::PublicKey),
            0x06 => Some(FrameTag::PrivateKey),
            0x07 => Some(FrameTag::AttackReport),
            _ => None,
        }
    }

    pub fn byte(self) -> u8 {
        self as u8
    }
}

/// One wire unit: a tag byte, a 4-byte little-endian payload length, and the
/// payload itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: FrameTag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: FrameTag, payload: Vec<u8>) -> Self {
        Frame { tag, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.push(self.tag.byte());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    fn take(cur: &mut Cursor<'_>) -> Result<Frame, WireError> {
        let tag_byte = cur.take_u8()?;
        let tag = FrameTag::from_byte(tag_byte).ok_or(WireError::UnknownTag(tag_byte))?;
        let len = cur.take_u32_le()?;
        if len as usize > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(len));
        }
        let payload = cur.take(len as usize)?.to_vec();
        Ok(Frame { tag, payload })
    }

    /// Strict whole-slice decode: exactly one frame, nothing after it.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        let mut cur = Cursor::new(bytes);
        let frame = Frame::take(&mut cur)?;
        cur.finish()?;
        Ok(frame)
    }

    /// Reads one frame from a stream. A clean end of input at a frame
    /// boundary yields `Ok(None)`; end of input anywhere inside a frame is
    /// [`WireError::Truncated`].
    pub fn read_from<R: Read + ?Sized>(reader: &mut R) -> Result<Option<Frame>, WireError> {
        let mut tag_byte = [0u8; 1];
        loop {
            match reader.read(&mut tag_byte) {
                Ok(0) => return Ok(None),
                Ok(_) => break,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let tag =
            FrameTag::from_byte(tag_byte[0]).ok_or(WireError::UnknownTag(tag_byte[0]))?;
        let mut len_bytes = [0u8; 4];
        read_exact_or_truncated(reader, &mut len_bytes)?;
        let len = u32::from_le_bytes(len_bytes);
        if len as usize > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(len));
        }
        let mut payload = vec![0u8; len as usize];
        read_exact_or_truncated(reader, &mut payload)?;
        Ok(Some(Frame { tag, payload }))
    }

    pub fn write_to<W: Write + ?Sized>(&self, writer: &mut W) -> Result<(), WireError> {
        writer.write_all(&self.encode())?;
        Ok(())
    }
}

fn read_exact_or_truncated<R: Read + ?Sized>(
    reader: &mut R,
    buf: &mut [u8],
) -> Result<(), WireError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WireError::Truncated
        } else {
            WireError::Io(e)
        }
    })
}

// ---- messages ----------------------------------------------------------------

/// A fully decoded frame: the typed payload for each tag.
#[derive(Debug, Clone)]
pub enum Message {
    Commitment(Commitment),
    Challenge(Challenge),
    Response(Response),
    Verdict(Verdict),
    PublicKey(PublicKey),
    PrivateKey(crate::protocol::PrivateKey),
    AttackReport(Vec<AttackRecord>),
}

impl Message {
    pub fn tag(&self) -> FrameTag {
        match self {
            Message::Commitment(_) => FrameTag::Commitment,
            Message::Challenge(_) => FrameTag::Challenge,
            Message::Response(_) => FrameTag::Response,
            Message::Verdict(_) => FrameTag::Verdict,
            Message::PublicKey(_) => FrameTag::PublicKey,
            Message::PrivateKey(_) => FrameTag::PrivateKey,
            Message::AttackReport(_) => FrameTag::AttackReport,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let payload = match self {
            Message::Commitment(c) => encode_mat(&c.u),
            Message::Challenge(ch) => vec![ch.bit() as u8],
            Message::Response(r) => encode_mat(&r.v),
            Message::Verdict(v) => vec![v.is_accept() as u8],
            Message::PublicKey(pk) => encode_public_key(pk),
            Message::PrivateKey(sk) => encode_private_key(sk),
            Message::AttackReport(records) => encode_report(records).into_bytes(),
        };
        Frame::new(self.tag(), payload)
    }

    pub fn from_frame(frame: &Frame) -> Result<Message, WireError> {
        let payload = frame.payload.as_slice();
        Ok(match frame.tag {
            FrameTag::Commitment => Message::Commitment(Commitment { u: decode_mat(payload)? }),
            FrameTag::Challenge => Message::Challenge(decode_challenge_payload(payload)?),
            FrameTag::Response => Message::Response(Response { v: decode_mat(payload)? }),
            FrameTag::Verdict => Message::Verdict(decode_verdict_payload(payload)?),
            FrameTag::PublicKey => Message::PublicKey(decode_public_key(payload)?),
            FrameTag::PrivateKey => Message::PrivateKey(decode_private_key(payload)?),
            FrameTag::AttackReport => {
                let text = std::str::from_utf8(payload)
                    .map_err(|_| WireError::BadReport("payload is not UTF-8".into()))?;
                Message::AttackReport(decode_report(text)?)
            }
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_frame().encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        Message::from_frame(&Frame::decode(bytes)?)
    }
}

/// Writes one message as a frame.
pub fn write_message<W: Write + ?Sized>(writer: &mut W, msg: &Message) -> Result<(), WireError> {
    msg.to_frame().write_to(writer)
}

/// Reads and decodes one frame; `Ok(None)` means clean end of input.
pub fn read_message<R: Read + ?Sized>(reader: &mut R) -> Result<Option<Message>, WireError> {
    match Frame::read_from(reader)? {
        None => Ok(None),
        Some(frame) => Ok(Some(Message::from_frame(&frame)?)),
    }
}

fn decode_challenge_payload(payload: &[u8]) -> Result<Challenge, WireError> {
    if payload.len() != 1 {
        return Err(WireError::LengthMismatch);
    }
    match payload[0] {
        0x00 => Ok(Challenge::from_bit(false)),
        0x01 => Ok(Challenge::from_bit(true)),
        other => Err(WireError::BadChallenge(other)),
    }
}

fn decode_verdict_payload(payload: &[u8]) -> Result<Verdict, WireError> {
    if payload.len() != 1 {
        return Err(WireError::LengthMismatch);
    }
    match payload[0] {
        0x00 => Ok(Verdict::Reject),
        0x01 => Ok(Verdict::Accept),
        other => Err(WireError::BadVerdict(other)),
    }
}

// ---- transcripts ---------------------------------------------------------------

/// A transcript on disk is the session's frames in order: commitment,
/// challenge, response for each round, then one verdict frame.
pub fn encode_transcript(tr: &Transcript) -> Vec<u8> {
    let mut out = Vec::new();
    for round in &tr.rounds {
        out.extend_from_slice(&Message::Commitment(round.commitment.clone()).encode());
        out.extend_from_slice(&Message::Challenge(round.challenge).encode());
        out.extend_from_slice(&Message::Response(round.response.clone()).encode());
    }
    out.extend_from_slice(&Message::Verdict(tr.verdict).encode());
    out
}

/// Strict inverse of [`encode_transcript`]: frames must appear in round
/// order, end with exactly one verdict, and leave nothing unconsumed.
pub fn decode_transcript(bytes: &[u8]) -> Result<Transcript, WireError> {
    let mut cur = Cursor::new(bytes);
    let mut rounds = Vec::new();
    loop {
        let frame = Frame::take(&mut cur)?;
        match Message::from_frame(&frame)? {
            Message::Verdict(verdict) => {
                cur.finish()
                    .map_err(|_| WireError::BadTranscript("frames after the verdict"))?;
                return Ok(Transcript { rounds, verdict });
            }
            Message::Commitment(commitment) => {
                let ch_frame = Frame::take(&mut cur)?;
                let Message::Challenge(challenge) = Message::from_frame(&ch_frame)? else {
                    return Err(WireError::BadTranscript("commitment not followed by challenge"));
                };
                let resp_frame = Frame::take(&mut cur)?;
                let Message::Response(response) = Message::from_frame(&resp_frame)? else {
                    return Err(WireError::BadTranscript("challenge not followed by response"));
                };
                rounds.push(RoundRecord { commitment, challenge, response });
            }
            _ => return Err(WireError::BadTranscript("unexpected frame kind")),
        }
    }
}

// ---- attack report records --------------------------------------------------------

/// Outcome summary carried by a report line; solution matrices themselves
/// stay out of the record, only their count travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordOutcome {
    Forged { solutions: usize },
    Exhausted { level: usize },
    WidthExceeded { level: usize, width: usize },
}

impl From<&AttackOutcome> for RecordOutcome {
    fn from(o: &AttackOutcome) -> Self {
        match o {
            AttackOutcome::Forged { solutions } => {
                RecordOutcome::Forged { solutions: solutions.len() }
            }
            AttackOutcome::Exhausted { level } => RecordOutcome::Exhausted { level: *level },
            AttackOutcome::WidthExceeded { level, width } => {
                RecordOutcome::WidthExceeded { level: *level, width: *width }
            }
        }
    }
}

/// One attack experiment as a single text line of space-separated
/// `key=value` pairs, in fixed order:
///
/// ```text
/// seed=7 n=100 endo_n=150 ring_n=100 width_cap=16384 outcome=width_exceeded level=7 width=21504 widths=4,16,64,256,1024,4096 millis=918
/// ```
///
/// `outcome` is `forged` (followed by `solutions=`), `exhausted` (followed
/// by `level=`), or `width_exceeded` (followed by `level=` and `width=`).
/// An unbounded cap serializes as `width_cap=unbounded`, and an empty width
/// profile as a bare `widths=`. The format is strict: [`AttackRecord::from_line`]
/// accepts exactly what [`AttackRecord::to_line`] produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackRecord {
    pub seed: u64,
    pub n: usize,
    pub endo_n: usize,
    pub ring_n: usize,
    pub width_cap: usize,
    pub outcome: RecordOutcome,
    pub widths: Vec<usize>,
    pub millis: u64,
}

impl AttackRecord {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "seed={} n={} endo_n={} ring_n={} width_cap={}",
            self.seed,
            self.n,
            self.endo_n,
            self.ring_n,
            cap_to_str(self.width_cap),
        );
        match self.outcome {
            RecordOutcome::Forged { solutions } => {
                line.push_str(&format!(" outcome=forged solutions={solutions}"));
            }
            RecordOutcome::Exhausted { level } => {
                line.push_str(&format!(" outcome=exhausted level={level}"));
            }
            RecordOutcome::WidthExceeded { level, width } => {
                line.push_str(&format!(" outcome=width_exceeded level={level} width={width}"));
            }
        }
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        line.push_str(&format!(" widths={} millis={}", widths.join(","), self.millis));
        line
    }

    pub fn from_line(line: &str) -> Result<AttackRecord, WireError> {
        let mut fields = LineFields::new(line);
        let seed = fields.next_parsed("seed")?;
        let n = fields.next_parsed("n")?;
        let endo_n = fields.next_parsed("endo_n")?;
        let ring_n = fields.next_parsed("ring_n")?;
        let width_cap = str_to_cap(fields.next_value("width_cap")?)?;
        let outcome = match fields.next_value("outcome")? {
            "forged" => RecordOutcome::Forged { solutions: fields.next_parsed("solutions")? },
            "exhausted" => RecordOutcome::Exhausted { level: fields.next_parsed("level")? },
            "width_exceeded" => RecordOutcome::WidthExceeded {
                level: fields.next_parsed("level")?,
                width: fields.next_parsed("width")?,
            },
            other => return Err(bad_report(format!("unknown outcome {other:?}"))),
        };
        let widths_value = fields.next_value("widths")?;
        let widths = if widths_value.is_empty() {
            Vec::new()
        } else {
            widths_value
                .split(',')
                .map(|w| parse_canonical(w, "widths"))
                .collect::<Result<_, _>>()?
        };
        let millis = fields.next_parsed("millis")?;
        fields.finish()?;
        Ok(AttackRecord { seed, n, endo_n, ring_n, width_cap, outcome, widths, millis })
    }
}

fn cap_to_str(cap: usize) -> String {
    if cap == usize::MAX {
        "unbounded".to_string()
    } else {
        cap.to_string()
    }
}

fn str_to_cap(s: &str) -> Result<usize, WireError> {
    if s == "unbounded" {
        Ok(usize::MAX)
    } else {
        let cap = parse_canonical(s, "width_cap")?;
        if cap == usize::MAX {
            // the unbounded cap has exactly one spelling
            return Err(bad_report("maximal width_cap must be spelled unbounded".into()));
        }
        Ok(cap)
    }
}

fn bad_report(msg: String) -> WireError {
    WireError::BadReport(msg)
}

/// Parses a decimal numeral in canonical form only: digits, no sign, no
/// leading zeros. `str::parse` alone would accept `+5` and `007`, which
/// decode fine but re-encode differently, breaking the canonical-form
/// guarantee.
fn parse_canonical<T: std::str::FromStr>(s: &str, key: &str) -> Result<T, WireError> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit())
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return Err(bad_report(format!("bad value for {key}: {s:?}")));
    }
    s.parse().map_err(|_| bad_report(format!("value out of range for {key}: {s:?}")))
}

/// Strict `key=value` token walker for report lines.
struct LineFields<'a> {
    tokens: std::str::Split<'a, char>,
}

impl<'a> LineFields<'a> {
    fn new(line: &'a str) -> Self {
        LineFields { tokens: line.split(' ') }
    }

    fn next_value(&mut self, key: &str) -> Result<&'a str, WireError> {
        let token = self
            .tokens
            .next()
            .ok_or_else(|| bad_report(format!("missing field {key}")))?;
        token
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| bad_report(format!("expected {key}=..., got {token:?}")))
    }

    fn next_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, WireError> {
        parse_canonical(self.next_value(key)?, key)
    }

    fn finish(mut self) -> Result<(), WireError> {
        match self.tokens.next() {
            None => Ok(()),
            Some(extra) => Err(bad_report(format!("unexpected trailing field {extra:?}"))),
        }
    }
}

/// One line per record, each terminated by a newline.
pub fn encode_report(records: &[AttackRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Strict inverse of [`encode_report`]: every line must parse, and a
/// nonempty report must end with a newline, so decoding accepts exactly the
/// canonical form [`encode_report`] emits.
pub fn decode_report(text: &str) -> Result<Vec<AttackRecord>, WireError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| bad_report("missing trailing newline".into()))?;
    body.split('\n').map(AttackRecord::from_line).collect()
}

// ---- hex text form -----------------------------------------------------------------

/// Lowercase hex of a binary encoding, for pipe-friendly CLI output.
pub fn to_hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

pub fn from_hex(text: &str) -> Result<Vec<u8>, WireError> {
    Ok(hex::decode(text.trim())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2poly::ConstTerm;
    use crate::protocol::{keygen, run_session, PrivateKey, SessionConfig};

    fn rng(seed: u64) -> rand_chacha::ChaCha12Rng {
        crate::seeded_rng(seed)
    }

    // ---- polynomial codec -------------------------------------------------

    #[test]
    fn poly_examples_are_frozen() {
        let p = TruncPoly::from_support(8, &[0, 2]);
        assert_eq!(encode_poly(&p), vec![0x08, 0x00, 0x00, 0x00, 0x05]);
        assert_eq!(decode_poly(&[0x08, 0x00, 0x00, 0x00, 0x05]).unwrap(), p);

        let zero = TruncPoly::zero(3);
        assert_eq!(encode_poly(&zero), vec![0x03, 0x00, 0x00, 0x00, 0x00]);
        assert_eq!(decode_poly(&[0x03, 0x00, 0x00, 0x00, 0x00]).unwrap(), zero);
    }

    #[test]
    fn poly_pad_bits_must_be_zero() {
        // order 3 leaves bits 3..8 of the byte as padding
        let err = decode_poly(&[0x03, 0x00, 0x00, 0x00, 0x08]).unwrap_err();
        assert!(matches!(err, WireError::NonzeroPadding));
    }

    #[test]
    fn poly_malformed_inputs_are_typed_errors() {
        assert!(matches!(decode_poly(&[]), Err(WireError::Truncated)));
        assert!(matches!(decode_poly(&[0x08, 0x00]), Err(WireError::Truncated)));
        assert!(matches!(
            decode_poly(&[0x00, 0x00, 0x00, 0x00]),
            Err(WireError::ZeroOrder)
        ));
        assert!(matches!(
            decode_poly(&[0x09, 0x00, 0x00, 0x00, 0x01]),
            Err(WireError::Truncated)
        ));
        assert!(matches!(
            decode_poly(&[0x08, 0x00, 0x00, 0x00, 0x05, 0xAA]),
            Err(WireError::TrailingBytes(1))
        ));
        // a huge claimed order fails on length, long before any allocation
        assert!(matches!(
            decode_poly(&[0xFF, 0xFF, 0xFF, 0xFF, 0x01]),
            Err(WireError::Truncated)
        ));
    }

    #[test]
    fn poly_round_trips_across_orders() {
        let mut r = rng(1);
        for n in [1usize, 2, 7, 8, 9, 63, 64, 65, 127, 128, 129, 300] {
            for _ in 0..20 {
                let p = TruncPoly::random(n, ConstTerm::Free, &mut r);
                let bytes = encode_poly(&p);
                assert_eq!(bytes.len(), poly_wire_len(n));
                assert_eq!(decode_poly(&bytes).unwrap(), p);
            }
        }
    }

    // ---- matrix and key codecs ---------------------------------------------

    #[test]
    fn mat_round_trips_and_rejects_mixed_orders() {
        let mut r = rng(2);
        for n in [1usize, 64, 65, 300] {
            let m = Mat2::random(n, ConstTerm::Free, &mut r);
            assert_eq!(decode_mat(&encode_mat(&m)).unwrap(), m);
        }
        // splice two encodings so the entries disagree on the order
        let m4 = Mat2::random(4, ConstTerm::Free, &mut r);
        let m5 = Mat2::random(5, ConstTerm::Free, &mut r);
        let mut spliced = Vec::new();
        spliced.extend_from_slice(&encode_poly(m4.a()));
        spliced.extend_from_slice(&encode_poly(m4.b()));
        spliced.extend_from_slice(&encode_poly(m4.c()));
        spliced.extend_from_slice(&encode_poly(m5.d()));
        assert!(matches!(decode_mat(&spliced), Err(WireError::OrderMismatch)));
    }

    #[test]
    fn key_codecs_round_trip_and_validate() {
        let (public, private) = keygen(33, &mut rng(3));
        let pk_bytes = encode_public_key(&public);
        assert_eq!(decode_public_key(&pk_bytes).unwrap(), public);
        let sk_bytes = encode_private_key(&private);
        assert_eq!(decode_private_key(&sk_bytes).unwrap().matrix(), private.matrix());

        // setting the constant bit of phi's polynomial breaks the
        // substitution rule and must be rejected
        let mut bad = pk_bytes.clone();
        bad[4] |= 1;
        assert!(matches!(
            decode_public_key(&bad),
            Err(WireError::BadPublicKey(_))
        ));
    }

    // ---- frames --------------------------------------------------------------

    #[test]
    fn frame_round_trips_and_rejects_garbage() {
        let frame = Frame::new(FrameTag::Challenge, vec![0x01]);
        let bytes = frame.encode();
        assert_eq!(bytes, vec![0x02, 0x01, 0x00, 0x00, 0x00, 0x01]);
        assert_eq!(Frame::decode(&bytes).unwrap(), frame);

        assert!(matches!(
            Frame::decode(&[0x08, 0x00, 0x00, 0x00, 0x00]),
            Err(WireError::UnknownTag(0x08))
        ));
        assert!(matches!(
            Frame::decode(&[0x02, 0x05, 0x00, 0x00, 0x00, 0x01]),
            Err(WireError::Truncated)
        ));
        assert!(matches!(
            Frame::decode(&[0x02, 0x01, 0x00, 0x00, 0x00, 0x01, 0xFF]),
            Err(WireError::TrailingBytes(1))
        ));
        let huge = [0x02, 0xFF, 0xFF, 0xFF, 0xFF];
        assert!(matches!(Frame::decode(&huge), Err(WireError::FrameTooLarge(_))));
    }

    #[test]
    fn frame_stream_reading_handles_boundaries() {
        let f1 = Frame::new(FrameTag::Challenge, vec![0x00]);
        let f2 = Frame::new(FrameTag::Verdict, vec![0x01]);
        let mut stream = f1.encode();
        stream.extend_from_slice(&f2.encode());

        let mut reader = io::Cursor::new(stream.clone());
        assert_eq!(Frame::read_from(&mut reader).unwrap(), Some(f1));
        assert_eq!(Frame::read_from(&mut reader).unwrap(), Some(f2));
        assert_eq!(Frame::read_from(&mut reader).unwrap(), None);

        // end of input inside a frame is truncation, not a clean stop
        let mut cut = io::Cursor::new(stream[..7].to_vec());
        assert!(Frame::read_from(&mut cut).unwrap().is_some());
        assert!(matches!(Frame::read_from(&mut cut), Err(WireError::Truncated)));
    }

    // ---- messages ---------------------------------------------------------------

    #[test]
    fn challenge_payload_is_one_strict_byte() {
        let ok = Frame::new(FrameTag::Challenge, vec![0x00]);
        assert!(matches!(
            Message::from_frame(&ok).unwrap(),
            Message::Challenge(ch) if !ch.bit()
        ));
        let bad_value = Frame::new(FrameTag::Challenge, vec![0x02]);
        assert!(matches!(
            Message::from_frame(&bad_value),
            Err(WireError::BadChallenge(0x02))
        ));
        let bad_len = Frame::new(FrameTag::Challenge, vec![0x00, 0x00]);
        assert!(matches!(
            Message::from_frame(&bad_len),
            Err(WireError::LengthMismatch)
        ));
    }

    #[test]
    fn verdict_payload_is_one_strict_byte() {
        let ok = Frame::new(FrameTag::Verdict, vec![0x01]);
        assert!(matches!(
            Message::from_frame(&ok).unwrap(),
            Message::Verdict(Verdict::Accept)
        ));
        let bad = Frame::new(FrameTag::Verdict, vec![0x17]);
        assert!(matches!(
            Message::from_frame(&bad),
            Err(WireError::BadVerdict(0x17))
        ));
    }

    #[test]
    fn typed_messages_round_trip() {
        let mut r = rng(4);
        let (public, private) = keygen(17, &mut r);
        let u = Mat2::random(17, ConstTerm::Free, &mut r);
        let v = Mat2::random(17, ConstTerm::Free, &mut r);
        let messages = vec![
            Message::Commitment(Commitment { u }),
            Message::Challenge(Challenge::from_bit(true)),
            Message::Response(Response { v }),
            Message::Verdict(Verdict::Reject),
            Message::PublicKey(public.clone()),
            Message::PrivateKey(private.clone()),
            Message::AttackReport(vec![AttackRecord {
                seed: 9,
                n: 8,
                endo_n: 8,
                ring_n: 8,
                width_cap: 16384,
                outcome: RecordOutcome::Exhausted { level: 3 },
                widths: vec![4, 16],
                millis: 12,
            }]),
        ];
        for msg in messages {
            let bytes = msg.encode();
            let back = Message::decode(&bytes).unwrap();
            assert_eq!(back.encode(), bytes, "canonical re-encoding for {:?}", msg.tag());
        }
    }

    // ---- transcripts ---------------------------------------------------------------

    #[test]
    fn transcripts_round_trip_byte_identically() {
        let (public, private) = keygen(19, &mut rng(5));
        let cfg = SessionConfig::new(6, 19).unwrap();
        let mut prover_rng = rng(6);
        let mut verifier_rng = rng(7);
        let transcript =
            run_session(&public, &private, cfg, &mut prover_rng, &mut verifier_rng).unwrap();
        assert!(transcript.verdict.is_accept());

        let bytes = encode_transcript(&transcript);
        let decoded = decode_transcript(&bytes).unwrap();
        assert_eq!(decoded, transcript);
        assert_eq!(encode_transcript(&decoded), bytes);
    }

    #[test]
    fn transcript_decoding_is_strict_about_shape() {
        let (public, private) = keygen(9, &mut rng(8));
        let cfg = SessionConfig::new(2, 9).unwrap();
        let transcript =
            run_session(&public, &private, cfg, &mut rng(9), &mut rng(10)).unwrap();
        let bytes = encode_transcript(&transcript);

        // no verdict at the end: truncation
        let verdict_len = Message::Verdict(Verdict::Accept).encode().len();
        let missing_verdict = &bytes[..bytes.len() - verdict_len];
        assert!(matches!(decode_transcript(missing_verdict), Err(WireError::Truncated)));

        // frames after the verdict are rejected
        let mut extended = bytes.clone();
        extended.extend_from_slice(&Message::Verdict(Verdict::Accept).encode());
        assert!(matches!(
            decode_transcript(&extended),
            Err(WireError::BadTranscript(_))
        ));

        // a response in a commitment slot is a shape error
        let mut reordered = Vec::new();
        let v = transcript.rounds[0].response.v.clone();
        reordered.extend_from_slice(&Message::Response(Response { v }).encode());
        reordered.extend_from_slice(&bytes);
        assert!(matches!(
            decode_transcript(&reordered),
            Err(WireError::BadTranscript(_))
        ));
    }

    // ---- report records ---------------------------------------------------------------

    #[test]
    fn report_lines_are_frozen_and_round_trip() {
        let record = AttackRecord {
            seed: 7,
            n: 100,
            endo_n: 150,
            ring_n: 100,
            width_cap: 16384,
            outcome: RecordOutcome::WidthExceeded { level: 7, width: 21504 },
            widths: vec![4, 16, 64, 256, 1024, 4096],
            millis: 918,
        };
        let line = "seed=7 n=100 endo_n=150 ring_n=100 width_cap=16384 \
                    outcome=width_exceeded level=7 width=21504 \
                    widths=4,16,64,256,1024,4096 millis=918";
        assert_eq!(record.to_line(), line);
        assert_eq!(AttackRecord::from_line(line).unwrap(), record);

        let forged = AttackRecord {
            seed: 1,
            n: 4,
            endo_n: 4,
            ring_n: 4,
            width_cap: usize::MAX,
            outcome: RecordOutcome::Forged { solutions: 3 },
            widths: vec![4, 16, 8, 3],
            millis: 0,
        };
        let line2 = "seed=1 n=4 endo_n=4 ring_n=4 width_cap=unbounded \
                     outcome=forged solutions=3 widths=4,16,8,3 millis=0";
        assert_eq!(forged.to_line(), line2);
        assert_eq!(AttackRecord::from_line(line2).unwrap(), forged);

        let empty_widths = AttackRecord {
            seed: 0,
            n: 2,
            endo_n: 2,
            ring_n: 2,
            width_cap: 5,
            outcome: RecordOutcome::Exhausted { level: 1 },
            widths: vec![],
            millis: 2,
        };
        let line3 = empty_widths.to_line();
        assert!(line3.contains(" widths= millis="));
        assert_eq!(AttackRecord::from_line(&line3).unwrap(), empty_widths);
    }

    #[test]
    fn report_parsing_rejects_sloppy_lines() {
        for bad in [
            "",
            "seed=1",
            "seed=x n=4 endo_n=4 ring_n=4 width_cap=5 outcome=exhausted level=1 widths= millis=2",
            "n=4 seed=1 endo_n=4 ring_n=4 width_cap=5 outcome=exhausted level=1 widths= millis=2",
            "seed=1 n=4 endo_n=4 ring_n=4 width_cap=5 outcome=died level=1 widths= millis=2",
            "seed=1 n=4 endo_n=4 ring_n=4 width_cap=5 outcome=exhausted level=1 widths= millis=2 extra=9",
            "seed=1 n=4 endo_n=4 ring_n=4 width_cap=5 outcome=exhausted level=1 widths=1,,2 millis=2",
            "seed=1  n=4 endo_n=4 ring_n=4 width_cap=5 outcome=exhausted level=1 widths= millis=2",
        ] {
            assert!(
                AttackRecord::from_line(bad).is_err(),
                "line should be rejected: {bad:?}"
            );
        }
    }

    #[test]
    fn reports_concatenate_by_line() {
        let a = AttackRecord {
            seed: 1,
            n: 4,
            endo_n: 4,
            ring_n: 4,
            width_cap: 10,
            outcome: RecordOutcome::Forged { solutions: 1 },
            widths: vec![1, 1, 1, 1],
            millis: 3,
        };
        let mut b = a.clone();
        b.seed = 2;
        b.outcome = RecordOutcome::Exhausted { level: 2 };
        b.widths = vec![2];
        let text = encode_report(&[a.clone(), b.clone()]);
        assert_eq!(text.matches('\n').count(), 2);
        assert_eq!(decode_report(&text).unwrap(), vec![a, b]);
        assert_eq!(decode_report("").unwrap(), Vec::new());
        assert!(decode_report("seed=1\n\n").is_err());
    }

    // ---- hex ---------------------------------------------------------------------------

    #[test]
    fn hex_round_trips() {
        let bytes = vec![0x00, 0x01, 0xAB, 0xFF];
        let text = to_hex(&bytes);
        assert_eq!(text, "0001abff");
        assert_eq!(from_hex(&text).unwrap(), bytes);
        assert_eq!(from_hex("0001abff\n").unwrap(), bytes);
        assert!(from_hex("zz").is_err());
        assert!(from_hex("abc").is_err());
    }

    // ---- private key round trip sanity ---------------------------------------------------

    #[test]
    fn decoded_private_keys_still_authenticate() {
        let (public, private) = keygen(21, &mut rng(11));
        let bytes = encode_private_key(&private);
        let restored: PrivateKey = decode_private_key(&bytes).unwrap();
        let cfg = SessionConfig::new(5, 21).unwrap();
        let transcript =
            run_session(&public, &restored, cfg, &mut rng(12), &mut rng(13)).unwrap();
        assert!(transcript.verdict.is_accept());
    }
}
