//! Lossless block coding of binary decision vectors and the normalized bit
//! cost that drives the capacity-constrained threshold updates.
//!
//! The vector is cut into blocks of `m` entries. All `2^m` blocks are ranked
//! by increasing number of zeros (ties broken by lexicographic order, `0 < 1`),
//! and the block of rank `r` is assigned the `r`-th shortest codeword, counting
//! the empty codeword, then the two 1-bit words, the four 2-bit words and so
//! on. The codeword of rank `r` therefore has `floor(log2(r + 1))` bits, the
//! all-ones block costs nothing and the all-zeros block costs exactly `m` bits.
//!
//! The normalized cost of a vector of length `L` is the total codeword length
//! divided by `L`, which lies in `[0, 1]`.
//!
//! Codewords of different lengths are not prefix-free, so the payload
//! container frames each block with a 4-bit length field:
//!
//! ```text
//! 0xC7 | m: u8 | L: u32 (little-endian) | { len: 4 bits | codeword: len bits }*
//! ```
//!
//! Bits are packed most-significant first and the final byte is zero-padded.
//! Framing bits are not part of the cost.

use crate::error::{Error, Result};
use crate::metrics::HardPrediction;

pub const DEFAULT_BLOCK_SIZE: usize = 10;

/// Largest block size representable with a 4-bit length field.
pub const MAX_BLOCK_SIZE: usize = 15;

pub const PAYLOAD_MAGIC: u8 = 0xC7;

const HEADER_LEN: usize = 6;

fn binomial(n: usize, k: usize) -> u32 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc as u32
}

/// Rank of the block whose entries are the bits of `value`, first entry in the
/// most significant position. Computed directly in the combinatorial number
/// system: all blocks with fewer zeros come first, then the lexicographic
/// index among blocks with the same zero count.
fn enumerative_rank(value: u32, m: usize) -> u32 {
    let zeros = m - value.count_ones() as usize;
    let mut rank: u32 = (0..zeros).map(|j| binomial(m, j)).sum();
    let mut zeros_left = zeros;
    for i in 0..m {
        let bit = (value >> (m - 1 - i)) & 1;
        let remaining = m - 1 - i;
        if bit == 1 {
            if zeros_left > 0 {
                // Every completion with a 0 at this position sorts first.
                rank += binomial(remaining, zeros_left - 1);
            }
        } else {
            zeros_left -= 1;
        }
    }
    rank
}

/// Number of codeword bits assigned to rank `r`: `floor(log2(r + 1))`.
pub fn codeword_length_of(rank: u32) -> u32 {
    (rank + 1).ilog2()
}

/// Immutable rank and codeword tables for one block size.
#[derive(Debug, Clone)]
pub struct BlockCodec {
    block_size: usize,
    rank_by_value: Vec<u32>,
    value_by_rank: Vec<u32>,
    bits_by_value: Vec<u8>,
}

impl Default for BlockCodec {
    fn default() -> Self {
        Self::new(DEFAULT_BLOCK_SIZE).expect("default block size is valid")
    }
}

impl BlockCodec {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 || block_size > MAX_BLOCK_SIZE {
            return Err(Error::BlockSize(block_size, MAX_BLOCK_SIZE));
        }
        let n = 1usize << block_size;
        let rank_by_value: Vec<u32> = (0..n as u32)
            .map(|v| enumerative_rank(v, block_size))
            .collect();
        let mut value_by_rank = vec![0u32; n];
        for (value, &rank) in rank_by_value.iter().enumerate() {
            value_by_rank[rank as usize] = value as u32;
        }
        let bits_by_value = rank_by_value
            .iter()
            .map(|&r| codeword_length_of(r) as u8)
            .collect();
        Ok(Self {
            block_size,
            rank_by_value,
            value_by_rank,
            bits_by_value,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Number of distinct blocks, `2^m`.
    pub fn table_len(&self) -> usize {
        self.rank_by_value.len()
    }

    fn pack(&self, block: &[bool]) -> u32 {
        block.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
    }

    fn unpack(&self, value: u32, out: &mut Vec<bool>) {
        let m = self.block_size;
        out.extend((0..m).map(|i| (value >> (m - 1 - i)) & 1 == 1));
    }

    pub fn rank_of_block(&self, block: &[bool]) -> Result<u32> {
        if block.len() != self.block_size {
            return Err(Error::BlockLength {
                expected: self.block_size,
                found: block.len(),
            });
        }
        Ok(self.rank_by_value[self.pack(block) as usize])
    }

    /// The block holding rank `rank`.
    pub fn block_of_rank(&self, rank: u32) -> Result<Vec<bool>> {
        let value = *self
            .value_by_rank
            .get(rank as usize)
            .ok_or(Error::RankOutOfRange {
                rank,
                block_size: self.block_size,
            })?;
        let mut out = Vec::with_capacity(self.block_size);
        self.unpack(value, &mut out);
        Ok(out)
    }

    pub fn codeword_length(&self, rank: u32) -> Result<u32> {
        if rank as usize >= self.table_len() {
            return Err(Error::RankOutOfRange {
                rank,
                block_size: self.block_size,
            });
        }
        Ok(codeword_length_of(rank))
    }

    fn check_divisible(&self, len: usize) -> Result<()> {
        if len == 0 || !len.is_multiple_of(self.block_size) {
            return Err(Error::NotDivisible {
                len,
                block_size: self.block_size,
            });
        }
        Ok(())
    }

    /// Total codeword bits for `prediction`, without building the payload.
    pub fn codeword_bits(&self, prediction: &HardPrediction) -> Result<u64> {
        self.check_divisible(prediction.len())?;
        Ok(prediction
            .as_slice()
            .chunks_exact(self.block_size)
            .map(|block| self.bits_by_value[self.pack(block) as usize] as u64)
            .sum())
    }

    /// Normalized cost `B = codeword bits / L`, in `[0, 1]`.
    pub fn cost(&self, prediction: &HardPrediction) -> Result<f64> {
        Ok(self.codeword_bits(prediction)? as f64 / prediction.len() as f64)
    }

    pub fn encode(&self, prediction: &HardPrediction) -> Result<(EncodedPayload, f64)> {
        self.check_divisible(prediction.len())?;
        let len = u32::try_from(prediction.len())
            .map_err(|_| Error::Payload("vector longer than u32::MAX".into()))?;
        let mut writer = BitWriter::default();
        let mut codeword_bits = 0u64;
        for block in prediction.as_slice().chunks_exact(self.block_size) {
            let rank = self.rank_by_value[self.pack(block) as usize];
            let bits = codeword_length_of(rank);
            writer.push(bits, 4);
            writer.push(rank + 1 - (1 << bits), bits);
            codeword_bits += bits as u64;
        }
        let mut bytes = Vec::with_capacity(HEADER_LEN + writer.bytes.len());
        bytes.push(PAYLOAD_MAGIC);
        bytes.push(self.block_size as u8);
        bytes.extend_from_slice(&len.to_le_bytes());
        bytes.extend_from_slice(&writer.finish());
        let cost = codeword_bits as f64 / prediction.len() as f64;
        Ok((EncodedPayload { bytes }, cost))
    }

    pub fn decode(&self, payload: &EncodedPayload) -> Result<HardPrediction> {
        let (block_size, len) = payload.header()?;
        if block_size != self.block_size {
            return Err(Error::Payload(format!(
                "payload block size {block_size} does not match codec block size {}",
                self.block_size
            )));
        }
        self.check_divisible(len)
            .map_err(|e| Error::Payload(e.to_string()))?;
        let mut reader = BitReader::new(&payload.bytes[HEADER_LEN..]);
        let mut out = Vec::with_capacity(len);
        for block in 0..len / self.block_size {
            let bits = reader
                .take(4)
                .ok_or_else(|| Error::Payload(format!("truncated length field in block {block}")))?;
            if bits as usize > self.block_size {
                return Err(Error::Payload(format!(
                    "block {block} declares {bits} codeword bits, more than the block size"
                )));
            }
            let word = reader
                .take(bits)
                .ok_or_else(|| Error::Payload(format!("truncated codeword in block {block}")))?;
            let rank = (1u32 << bits) - 1 + word;
            let value = *self.value_by_rank.get(rank as usize).ok_or_else(|| {
                Error::Payload(format!("block {block} decodes to out-of-range rank {rank}"))
            })?;
            self.unpack(value, &mut out);
        }
        reader.finish()?;
        Ok(HardPrediction::new(out))
    }
}

/// A framed, bit-packed codeword stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPayload {
    bytes: Vec<u8>,
}

impl EncodedPayload {
    /// Wraps raw bytes after checking the fixed header.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let payload = Self { bytes };
        payload.header()?;
        Ok(payload)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    /// Block size recorded in the header.
    pub fn block_size(&self) -> usize {
        self.bytes[1] as usize
    }

    /// Decoded vector length recorded in the header.
    pub fn len(&self) -> usize {
        u32::from_le_bytes(self.bytes[2..6].try_into().unwrap()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn header(&self) -> Result<(usize, usize)> {
        if self.bytes.len() < HEADER_LEN {
            return Err(Error::Payload("truncated header".into()));
        }
        if self.bytes[0] != PAYLOAD_MAGIC {
            return Err(Error::Payload(format!(
                "bad magic byte {:#04x}",
                self.bytes[0]
            )));
        }
        let m = self.bytes[1] as usize;
        if m == 0 || m > MAX_BLOCK_SIZE {
            return Err(Error::Payload(format!("invalid block size {m}")));
        }
        Ok((m, self.len()))
    }
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    current: u8,
    filled: u32,
}

impl BitWriter {
    fn push(&mut self, value: u32, bits: u32) {
        for i in (0..bits).rev() {
            self.current = (self.current << 1) | ((value >> i) & 1) as u8;
            self.filled += 1;
            if self.filled == 8 {
                self.bytes.push(self.current);
                self.current = 0;
                self.filled = 0;
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.current << (8 - self.filled));
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, bits: u32) -> Option<u32> {
        if self.pos + bits as usize > self.bytes.len() * 8 {
            return None;
        }
        let mut value = 0u32;
        for _ in 0..bits {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            value = (value << 1) | bit as u32;
            self.pos += 1;
        }
        Some(value)
    }

    /// Only zero padding inside the final byte may follow the last block.
    fn finish(self) -> Result<()> {
        let used_bytes = self.pos.div_ceil(8);
        if used_bytes != self.bytes.len() {
            return Err(Error::Payload(format!(
                "{} trailing bytes after the last block",
                self.bytes.len() - used_bytes
            )));
        }
        if !self.pos.is_multiple_of(8) {
            let last = self.bytes[used_bytes - 1];
            if last & (0xFFu8 >> (self.pos % 8)) != 0 {
                return Err(Error::Payload("non-zero padding bits".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    /// Sort-based reference: list every block as a string, order by zero
    /// count then lexicographically, return the position of each block.
    fn sorted_oracle(m: usize) -> Vec<(String, usize)> {
        let mut all: Vec<String> = (0..1u32 << m)
            .map(|v| format!("{v:0m$b}"))
            .collect();
        all.sort_by(|a, b| {
            let za = a.bytes().filter(|&c| c == b'0').count();
            let zb = b.bytes().filter(|&c| c == b'0').count();
            za.cmp(&zb).then_with(|| a.cmp(b))
        });
        all.into_iter().enumerate().map(|(r, s)| (s, r)).collect()
    }

    #[test]
    fn rank_examples_m10() {
        let codec = BlockCodec::default();
        assert_eq!(codec.rank_of_block(&block("1111111111")).unwrap(), 0);
        assert_eq!(codec.rank_of_block(&block("0000000000")).unwrap(), 1023);
        assert_eq!(codec.rank_of_block(&block("0111111111")).unwrap(), 1);
        assert!(matches!(
            codec.rank_of_block(&block("011")),
            Err(Error::BlockLength { expected: 10, found: 3 })
        ));
    }

    #[test]
    fn codeword_length_examples() {
        let codec = BlockCodec::default();
        assert_eq!(codec.codeword_length(0).unwrap(), 0);
        assert_eq!(codec.codeword_length(1023).unwrap(), 10);
        assert_eq!(codec.codeword_length(2).unwrap(), 1);
        assert_eq!(codec.codeword_length(1).unwrap(), 1);
        assert_eq!(codec.codeword_length(3).unwrap(), 2);
        assert!(codec.codeword_length(1024).is_err());
    }

    #[test]
    fn rank_matches_sort_oracle() {
        for m in 1..=12 {
            let codec = BlockCodec::new(m).unwrap();
            for (s, r) in sorted_oracle(m) {
                assert_eq!(codec.rank_of_block(&block(&s)).unwrap() as usize, r, "m={m} {s}");
                assert_eq!(codec.block_of_rank(r as u32).unwrap(), block(&s));
            }
        }
    }

    #[test]
    fn m2_table() {
        let codec = BlockCodec::new(2).unwrap();
        let rows: Vec<_> = ["11", "01", "10", "00"]
            .iter()
            .map(|s| {
                let r = codec.rank_of_block(&block(s)).unwrap();
                (r, codec.codeword_length(r).unwrap())
            })
            .collect();
        assert_eq!(rows, vec![(0, 0), (1, 1), (2, 1), (3, 2)]);
    }

    #[test]
    fn cost_extremes() {
        let codec = BlockCodec::default();
        let (_, c) = codec.encode(&HardPrediction::all_ones(10_000)).unwrap();
        assert_eq!(c, 0.0);
        let (_, c) = codec.encode(&HardPrediction::all_zeros(10_000)).unwrap();
        assert_eq!(c, 1.0);
        let u = HardPrediction::new(block("0111111111"));
        let (_, c) = codec.encode(&u).unwrap();
        assert_eq!(c, 0.1);
        assert_eq!(codec.cost(&u).unwrap(), 0.1);
    }

    #[test]
    fn encode_rejects_indivisible_length() {
        let codec = BlockCodec::default();
        assert!(matches!(
            codec.encode(&HardPrediction::all_ones(15)),
            Err(Error::NotDivisible { len: 15, block_size: 10 })
        ));
        assert!(codec.cost(&HardPrediction::all_ones(0)).is_err());
    }

    #[test]
    fn payload_layout() {
        let codec = BlockCodec::new(2).unwrap();
        // blocks 11 | 10 | 00 -> (len 0) | (len 1, word 1) | (len 2, word 0)
        let u = HardPrediction::new(block("111000"));
        let (payload, cost) = codec.encode(&u).unwrap();
        assert_eq!(cost, 3.0 / 6.0);
        let bytes = payload.as_bytes();
        assert_eq!(&bytes[..6], &[0xC7, 2, 6, 0, 0, 0]);
        // 0000 0001 1 0010 00 -> 00000001 10010000
        assert_eq!(&bytes[6..], &[0b0000_0001, 0b1001_0000]);
        assert_eq!(codec.decode(&payload).unwrap(), u);
    }

    #[test]
    fn roundtrip_extremes() {
        let codec = BlockCodec::default();
        for u in [HardPrediction::all_ones(100), HardPrediction::all_zeros(100)] {
            let (p, _) = codec.encode(&u).unwrap();
            assert_eq!(codec.decode(&p).unwrap(), u);
        }
    }

    #[test]
    fn decode_rejects_malformed() {
        let codec = BlockCodec::default();
        let u = HardPrediction::new((0..40).map(|i| i % 3 == 0).collect());
        let (payload, _) = codec.encode(&u).unwrap();
        let bytes = payload.into_bytes();

        let mut bad = bytes.clone();
        bad[0] = 0x00;
        assert!(EncodedPayload::from_bytes(bad).is_err());

        assert!(EncodedPayload::from_bytes(bytes[..4].to_vec()).is_err());

        let truncated = EncodedPayload::from_bytes(bytes[..bytes.len() - 1].to_vec()).unwrap();
        assert!(matches!(codec.decode(&truncated), Err(Error::Payload(_))));

        let mut trailing = bytes.clone();
        trailing.push(0);
        let trailing = EncodedPayload::from_bytes(trailing).unwrap();
        assert!(codec.decode(&trailing).is_err());

        let mut other_m = bytes.clone();
        other_m[1] = 5;
        assert!(codec.decode(&EncodedPayload::from_bytes(other_m).unwrap()).is_err());

        // length field 15 exceeds m = 10
        let mut oversized = bytes[..6].to_vec();
        oversized.extend_from_slice(&[0xF0, 0, 0, 0]);
        assert!(codec.decode(&EncodedPayload::from_bytes(oversized).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_identity(bits in proptest::collection::vec(any::<bool>(), 1..40), m in 1usize..=12) {
            let codec = BlockCodec::new(m).unwrap();
            let len = bits.len() * m;
            let u = HardPrediction::new(bits.iter().cycle().take(len).copied().collect());
            let (payload, cost) = codec.encode(&u).unwrap();
            prop_assert!((0.0..=1.0).contains(&cost));
            prop_assert_eq!(codec.decode(&payload).unwrap(), u);
        }

        #[test]
        fn flipping_one_to_zero_never_lowers_cost(bits in proptest::collection::vec(any::<bool>(), 30), idx in 0usize..30) {
            let codec = BlockCodec::default();
            let mut flipped = bits.clone();
            flipped[idx] = false;
            let before = codec.codeword_bits(&HardPrediction::new(bits)).unwrap();
            let after = codec.codeword_bits(&HardPrediction::new(flipped)).unwrap();
            prop_assert!(after >= before);
        }
    }

    #[test]
    fn cost_is_zero_or_one_only_at_extremes() {
        let codec = BlockCodec::default();
        for v in 0u32..1024 {
            let b: Vec<bool> = (0..10).map(|i| (v >> (9 - i)) & 1 == 1).collect();
            let c = codec.cost(&HardPrediction::new(b)).unwrap();
            assert_eq!(c == 0.0, v == 1023);
            assert_eq!(c == 1.0, v == 0);
        }
    }
}
