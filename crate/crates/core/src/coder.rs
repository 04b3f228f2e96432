//! Binary arithmetic coder: turns the sequential length models into real,
//! decodable bitstreams.
//!
//! The redundancy analysis elsewhere in the crate works with Shannon-ideal
//! (non-integer) lengths; this module is the existence proof that those
//! lengths are realizable. A 62-bit-state arithmetic coder driven by the
//! model's conditional distributions emits at most ⌈ideal length⌉ + 2 bits
//! for any sequence, and the decoder reconstructs the sequence exactly.
//!
//! Correctness hinges on the encoder and decoder seeing *bit-identical*
//! model state, so conditional distributions are quantized to fixed-point
//! counts (32 fractional bits, every symbol floored to one count) by a
//! deterministic rule shared by both sides. Float probabilities never touch
//! the coding interval arithmetic.
//!
//! Ideal-θ, Jeffreys-mixture, and two-stage models are sequentially
//! decodable (a two-stage stream starts with the `m` grid-index bits); the
//! conditional two-stage model is not sequential and is rejected here.

use serde::{Deserialize, Serialize};

use crate::codecs::{build_grid, ml_estimate, EstimateGrid, LengthModel};
use crate::family::{ParamFamily, ParamVector, SequenceSample};
use crate::{Error, FamilyKind, Result};

/// Coding interval register width. The interval never shrinks below
/// 2^60, which keeps every 1-count fixed-point symbol representable.
const STATE_BITS: u32 = 62;
const STATE_FULL: u64 = 1 << STATE_BITS;
const STATE_HALF: u64 = STATE_FULL >> 1;
const STATE_QUARTER: u64 = STATE_FULL >> 2;
const STATE_THREE_QUARTERS: u64 = 3 * STATE_QUARTER;

/// Fixed-point probability resolution: counts sum to exactly 2^32.
const PROB_BITS: u32 = 32;
const PROB_TOTAL: u64 = 1 << PROB_BITS;

const CONTAINER_MAGIC: &[u8; 4] = b"URLB";
const CONTAINER_VERSION: u8 = 1;

// ---------------------------------------------------------------------------
// Bit I/O (MSB-first within bytes)
// ---------------------------------------------------------------------------

/// A bit-exact encoded stream: byte buffer plus the number of valid bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl Bitstream {
    /// Wraps raw bytes carrying `bit_len` valid bits (MSB-first).
    pub fn from_bytes(bytes: Vec<u8>, bit_len: usize) -> Result<Bitstream> {
        if bytes.len() != (bit_len + 7) / 8 {
            return Err(Error::MalformedStream(format!(
                "{} bytes cannot hold exactly {bit_len} bits",
                bytes.len()
            )));
        }
        Ok(Bitstream { bytes, bit_len })
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    fn finish(self) -> Bitstream {
        Bitstream {
            bytes: self.bytes,
            bit_len: self.len,
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: usize,
    pos: usize,
    /// Bits served past the end of the stream (phantom zeros). Arithmetic
    /// termination legitimately consumes up to `STATE_BITS` of them; more
    /// means the stream was truncated.
    phantom: u64,
}

impl<'a> BitReader<'a> {
    fn new(stream: &'a Bitstream) -> Self {
        BitReader {
            bytes: &stream.bytes,
            bit_len: stream.bit_len,
            pos: 0,
            phantom: 0,
        }
    }

    fn next(&mut self) -> bool {
        if self.pos < self.bit_len {
            let bit = self.bytes[self.pos / 8] & (0x80 >> (self.pos % 8)) != 0;
            self.pos += 1;
            bit
        } else {
            self.phantom += 1;
            false
        }
    }

    fn read_bits(&mut self, width: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.next());
        }
        v
    }
}

// ---------------------------------------------------------------------------
// Fixed-point model quantization
// ---------------------------------------------------------------------------

/// Cumulative fixed-point counts: `cum[0] = 0`, `cum[k] = 2^32`, every
/// symbol at least one count. Identical on encoder and decoder by
/// construction (same floats in, same integer ops).
fn quantize_cum(probs: &[f64]) -> Vec<u64> {
    let k = probs.len() as u64;
    let avail = (PROB_TOTAL - k) as f64;
    let mut counts: Vec<u64> = probs
        .iter()
        .map(|&p| 1 + (p.max(0.0) * avail).floor() as u64)
        .collect();
    let sum: u64 = counts.iter().sum();
    let deficit = PROB_TOTAL - sum;
    if deficit > 0 {
        // Hand the rounding remainder to the most likely symbol.
        let argmax = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        counts[argmax] += deficit;
    }
    let mut cum = Vec::with_capacity(probs.len() + 1);
    let mut acc = 0u64;
    cum.push(0);
    for c in counts {
        acc += c;
        cum.push(acc);
    }
    cum
}

// ---------------------------------------------------------------------------
// Sequential predictors
// ---------------------------------------------------------------------------

/// Sequential conditional-probability state for the decodable models.
enum Predictor<'a> {
    Ideal {
        theta: &'a ParamVector,
        prev: Option<u16>,
    },
    KtMemoryless {
        counts: Vec<u64>,
        t: u64,
    },
    KtMarkov {
        k: usize,
        trans: Vec<u64>,
        row_tot: Vec<u64>,
        prev: Option<u16>,
    },
}

impl<'a> Predictor<'a> {
    fn for_model(model: &'a LengthModel, two_stage_idx: Option<usize>) -> Result<Predictor<'a>> {
        match model {
            LengthModel::IdealTheta(t) => Ok(Predictor::Ideal {
                theta: t,
                prev: None,
            }),
            LengthModel::TwoStage(grid) => {
                let idx = two_stage_idx.expect("two-stage predictor needs a grid index");
                Ok(Predictor::Ideal {
                    theta: grid.point(idx),
                    prev: None,
                })
            }
            LengthModel::JeffreysMixture(f) => match f.kind() {
                FamilyKind::Memoryless => Ok(Predictor::KtMemoryless {
                    counts: vec![0; f.k()],
                    t: 0,
                }),
                FamilyKind::Markov1 => Ok(Predictor::KtMarkov {
                    k: f.k(),
                    trans: vec![0; f.k() * f.k()],
                    row_tot: vec![0; f.k()],
                    prev: None,
                }),
            },
            LengthModel::CondTwoStage(..) => Err(Error::InvalidArgument(
                "conditional two-stage lengths are not sequentially decodable; \
                 encode with the two-stage or mixture model"
                    .into(),
            )),
        }
    }

    fn dist(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Predictor::Ideal { theta, prev } => {
                for s in 0..theta.k() as u16 {
                    out.push(theta.prob(*prev, s));
                }
            }
            Predictor::KtMemoryless { counts, t } => {
                let half_k = counts.len() as f64 / 2.0;
                let denom = *t as f64 + half_k;
                for &c in counts {
                    out.push((c as f64 + 0.5) / denom);
                }
            }
            Predictor::KtMarkov {
                k,
                trans,
                row_tot,
                prev,
            } => {
                let half_k = *k as f64 / 2.0;
                match prev {
                    None => out.extend(std::iter::repeat(0.5 / half_k).take(*k)),
                    Some(r) => {
                        let r = *r as usize;
                        let denom = row_tot[r] as f64 + half_k;
                        for s in 0..*k {
                            out.push((trans[r * k + s] as f64 + 0.5) / denom);
                        }
                    }
                }
            }
        }
    }

    fn advance(&mut self, sym: u16) {
        match self {
            Predictor::Ideal { prev, .. } => *prev = Some(sym),
            Predictor::KtMemoryless { counts, t } => {
                counts[sym as usize] += 1;
                *t += 1;
            }
            Predictor::KtMarkov {
                k, trans, row_tot, prev, ..
            } => {
                if let Some(r) = prev {
                    trans[*r as usize * *k + sym as usize] += 1;
                    row_tot[*r as usize] += 1;
                }
                *prev = Some(sym);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Arithmetic coding core
// ---------------------------------------------------------------------------

struct ArithEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl ArithEncoder {
    fn new(out: BitWriter) -> Self {
        ArithEncoder {
            low: 0,
            high: STATE_FULL - 1,
            pending: 0,
            out,
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, cum_lo: u64, cum_hi: u64) {
        let span = (self.high - self.low + 1) as u128;
        self.high = self.low + (span * cum_hi as u128 / PROB_TOTAL as u128) as u64 - 1;
        self.low += (span * cum_lo as u128 / PROB_TOTAL as u128) as u64;
        loop {
            if self.high < STATE_HALF {
                self.emit(false);
            } else if self.low >= STATE_HALF {
                self.emit(true);
                self.low -= STATE_HALF;
                self.high -= STATE_HALF;
            } else if self.low >= STATE_QUARTER && self.high < STATE_THREE_QUARTERS {
                self.pending += 1;
                self.low -= STATE_QUARTER;
                self.high -= STATE_QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    fn finish(mut self) -> Bitstream {
        // Two-bit termination: one disambiguating bit plus the carried
        // pending bits selects a point inside the final interval.
        self.pending += 1;
        let bit = self.low >= STATE_QUARTER;
        self.emit(bit);
        self.out.finish()
    }
}

struct ArithDecoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    reader: BitReader<'a>,
}

impl<'a> ArithDecoder<'a> {
    fn new(mut reader: BitReader<'a>) -> Self {
        let value = reader.read_bits(STATE_BITS);
        ArithDecoder {
            low: 0,
            high: STATE_FULL - 1,
            value,
            reader,
        }
    }

    fn decode(&mut self, cum: &[u64]) -> u16 {
        let span = (self.high - self.low + 1) as u128;
        let target =
            (((self.value - self.low + 1) as u128 * PROB_TOTAL as u128 - 1) / span) as u64;
        let sym = cum.partition_point(|&c| c <= target) - 1;
        let (cum_lo, cum_hi) = (cum[sym], cum[sym + 1]);
        self.high = self.low + (span * cum_hi as u128 / PROB_TOTAL as u128) as u64 - 1;
        self.low += (span * cum_lo as u128 / PROB_TOTAL as u128) as u64;
        loop {
            if self.high < STATE_HALF {
                // nothing to subtract
            } else if self.low >= STATE_HALF {
                self.low -= STATE_HALF;
                self.high -= STATE_HALF;
                self.value -= STATE_HALF;
            } else if self.low >= STATE_QUARTER && self.high < STATE_THREE_QUARTERS {
                self.low -= STATE_QUARTER;
                self.high -= STATE_QUARTER;
                self.value -= STATE_QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | u64::from(self.reader.next());
        }
        sym as u16
    }
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

/// Encodes a sequence under a sequentially decodable model.
///
/// Two-stage streams begin with the `m` grid-index bits of the quantized ML
/// estimate, then the arithmetic code of the sequence under that estimate.
/// Total length is at most `⌈model.length_bits(x)⌉ + 2`.
pub fn encode(x: &SequenceSample, model: &LengthModel) -> Result<Bitstream> {
    if x.family() != model.family() {
        return Err(Error::InvalidArgument(
            "sequence and model families differ".into(),
        ));
    }
    let mut writer = BitWriter::default();
    let idx = match model {
        LengthModel::TwoStage(grid) => {
            let (idx, _) = ml_estimate(x, grid);
            writer.push_bits(idx as u64, grid.m());
            Some(idx)
        }
        _ => None,
    };
    let mut predictor = Predictor::for_model(model, idx)?;
    let mut enc = ArithEncoder::new(writer);
    let mut probs = Vec::with_capacity(x.family().k());
    for (position, &sym) in x.symbols().iter().enumerate() {
        predictor.dist(&mut probs);
        if probs[sym as usize] <= 0.0 {
            return Err(Error::ZeroProbability {
                symbol: sym,
                position,
            });
        }
        let cum = quantize_cum(&probs);
        enc.encode(cum[sym as usize], cum[sym as usize + 1]);
        predictor.advance(sym);
    }
    Ok(enc.finish())
}

/// Decodes `n` symbols from a stream produced by [`encode`] with the same
/// model. Detects streams truncated beyond the legal termination margin.
pub fn decode(stream: &Bitstream, model: &LengthModel, n: usize) -> Result<SequenceSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut reader = BitReader::new(stream);
    let idx = match model {
        LengthModel::TwoStage(grid) => Some(reader.read_bits(grid.m()) as usize),
        _ => None,
    };
    let mut predictor = Predictor::for_model(model, idx)?;
    let mut dec = ArithDecoder::new(reader);
    let mut probs = Vec::with_capacity(model.family().k());
    let mut symbols = Vec::with_capacity(n);
    for _ in 0..n {
        predictor.dist(&mut probs);
        let cum = quantize_cum(&probs);
        let sym = dec.decode(&cum);
        if dec.reader.phantom > STATE_BITS as u64 {
            return Err(Error::MalformedStream(
                "stream exhausted before all symbols were decoded".into(),
            ));
        }
        predictor.advance(sym);
        symbols.push(sym);
    }
    SequenceSample::new(model.family(), symbols)
}

// ---------------------------------------------------------------------------
// Container format
// ---------------------------------------------------------------------------

/// Self-describing header: family, model kind, and the model's parameters
/// (fixed probabilities for ideal-θ, grid resolution for two-stage).
#[derive(Serialize, Deserialize)]
struct ContainerHeader {
    kind: FamilyKind,
    k: usize,
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v != 0 {
            out.push(byte | 0x80);
        } else {
            out.push(byte);
            break;
        }
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut acc = 0u64;
    let mut shift = 0u32;
    loop {
        let &byte = bytes
            .get(*pos)
            .ok_or_else(|| Error::MalformedStream("truncated varint".into()))?;
        *pos += 1;
        if shift >= 64 || (shift == 63 && byte > 1) {
            return Err(Error::MalformedStream("varint overflows u64".into()));
        }
        acc |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(acc);
        }
        shift += 7;
    }
}

/// Encodes into the self-describing container:
/// `"URLB" ∥ version ∥ header-length ∥ header JSON ∥ n ∥ bit-length ∥ payload`
/// (varint integers, MSB-first payload bits).
///
/// Two-stage containers record only `m`; the decoder rebuilds the canonical
/// grid, so models wrapping custom grids are not representable here.
pub fn encode_container(x: &SequenceSample, model: &LengthModel) -> Result<Vec<u8>> {
    let header = ContainerHeader {
        kind: x.family().kind(),
        k: x.family().k(),
        model: model.kind().as_str().to_string(),
        probs: match model {
            LengthModel::IdealTheta(t) => Some(t.probs().to_vec()),
            _ => None,
        },
        m: match model {
            LengthModel::TwoStage(g) => Some(g.m()),
            _ => None,
        },
    };
    if let LengthModel::CondTwoStage(..) = model {
        return Err(Error::InvalidArgument(
            "conditional two-stage lengths are not sequentially decodable; \
             encode with the two-stage or mixture model"
                .into(),
        ));
    }
    let stream = encode(x, model)?;
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header_json.len() + stream.as_bytes().len());
    out.extend_from_slice(CONTAINER_MAGIC);
    out.push(CONTAINER_VERSION);
    write_varint(&mut out, header_json.len() as u64);
    out.extend_from_slice(&header_json);
    write_varint(&mut out, x.n() as u64);
    write_varint(&mut out, stream.bit_len() as u64);
    out.extend_from_slice(stream.as_bytes());
    Ok(out)
}

/// Parses a container, rebuilds the model it names, and decodes the
/// sequence. Returns both.
pub fn decode_container(bytes: &[u8]) -> Result<(SequenceSample, LengthModel)> {
    if bytes.len() < 5 || &bytes[0..4] != CONTAINER_MAGIC {
        return Err(Error::MalformedStream("missing URLB magic".into()));
    }
    if bytes[4] != CONTAINER_VERSION {
        return Err(Error::MalformedStream(format!(
            "unsupported container version {}",
            bytes[4]
        )));
    }
    let mut pos = 5usize;
    let header_len = read_varint(bytes, &mut pos)? as usize;
    let header_end = pos
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::MalformedStream("truncated header".into()))?;
    let header: ContainerHeader = serde_json::from_slice(&bytes[pos..header_end])
        .map_err(|e| Error::MalformedStream(format!("bad header JSON: {e}")))?;
    pos = header_end;
    let n = read_varint(bytes, &mut pos)?;
    let bit_len = read_varint(bytes, &mut pos)? as usize;
    if n == 0 || n > u64::from(u32::MAX) {
        return Err(Error::MalformedStream(format!("implausible n = {n}")));
    }
    let payload_len = (bit_len + 7) / 8;
    if bytes.len() - pos != payload_len {
        return Err(Error::MalformedStream(format!(
            "payload holds {} bytes, header promises {payload_len}",
            bytes.len() - pos
        )));
    }
    let family = ParamFamily::new(header.kind, header.k)
        .map_err(|e| Error::MalformedStream(format!("bad family: {e}")))?;
    let model = match header.model.as_str() {
        "ideal" => {
            let probs = header
                .probs
                .ok_or_else(|| Error::MalformedStream("ideal model without probs".into()))?;
            LengthModel::IdealTheta(
                ParamVector::new(family, probs)
                    .map_err(|e| Error::MalformedStream(format!("bad parameters: {e}")))?,
            )
        }
        "2p" => {
            let m = header
                .m
                .ok_or_else(|| Error::MalformedStream("two-stage model without m".into()))?;
            LengthModel::TwoStage(rebuild_grid(&family, m)?)
        }
        "mixture" => LengthModel::JeffreysMixture(family),
        other => {
            return Err(Error::MalformedStream(format!(
                "model '{other}' is not decodable from a container"
            )))
        }
    };
    let stream = Bitstream::from_bytes(bytes[pos..].to_vec(), bit_len)?;
    let x = decode(&stream, &model, n as usize)?;
    Ok((x, model))
}

fn rebuild_grid(family: &ParamFamily, m: u32) -> Result<EstimateGrid> {
    build_grid(family, m).map_err(|e| Error::MalformedStream(format!("bad grid spec: {e}")))
}
