//! Coefficient stream: zig-zag scan, zero run-lengths and Exp-Golomb codes.
//!
//! Each 8×8 block is coded as `ue(nonzero_count)` followed by one
//! `ue(zero_run) se(level)` pair per nonzero coefficient in zig-zag order.
//! Trailing zeros are implicit.

use crate::{Error, Result};

/// Zig-zag scan order of an 8×8 block (row-major indices).
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append the low `n` bits of `value`, most significant first (`n` ≤ 32).
    pub fn put(&mut self, value: u32, n: u32) {
        debug_assert!(n <= 32);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | u64::from(value) & ((1u64 << n) - 1);
        self.nbits += n;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.bytes.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1u64 << self.nbits) - 1;
    }

    /// Unsigned Exp-Golomb.
    pub fn put_ue(&mut self, v: u32) {
        let x = u64::from(v) + 1;
        let len = 64 - x.leading_zeros();
        self.put(0, len - 1);
        // `len` may be 33 for v = u32::MAX
        if len > 32 {
            self.put((x >> 32) as u32, len - 32);
            self.put(x as u32, 32);
        } else {
            self.put(x as u32, len);
        }
    }

    /// Signed Exp-Golomb: 1, −1, 2, −2, … map to 1, 2, 3, 4, …
    pub fn put_se(&mut self, v: i32) {
        let mapped = if v > 0 {
            (v as u32) * 2 - 1
        } else {
            v.unsigned_abs() * 2
        };
        self.put_ue(mapped);
    }

    pub fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 + u64::from(self.nbits)
    }

    /// Flush, zero-padding the last byte.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put(0, pad);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn bit(&mut self) -> Result<u32> {
        let byte = self
            .bytes
            .get((self.pos / 8) as usize)
            .ok_or_else(|| Error::Format("coefficient stream ended early".into()))?;
        let b = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(u32::from(b))
    }

    pub fn get(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | u64::from(self.bit()?);
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let mut zeros = 0;
        while self.bit()? == 0 {
            zeros += 1;
            if zeros > 32 {
                return Err(Error::Format("invalid Exp-Golomb prefix".into()));
            }
        }
        let rest = self.get(zeros)?;
        u32::try_from((1u64 << zeros) + rest - 1)
            .map_err(|_| Error::Format("Exp-Golomb value overflow".into()))
    }

    pub fn get_se(&mut self) -> Result<i32> {
        let m = self.get_ue()?;
        Ok(if m % 2 == 1 {
            m.div_ceil(2) as i32
        } else {
            -((m / 2) as i32)
        })
    }
}

/// Code a sequence of quantized 8×8 blocks (row-major coefficient order).
pub fn encode_blocks(blocks: &[[i32; 64]], w: &mut BitWriter) {
    for block in blocks {
        let nonzero = block.iter().filter(|&&v| v != 0).count();
        w.put_ue(nonzero as u32);
        let mut run = 0u32;
        for &idx in &ZIGZAG {
            let v = block[idx];
            if v == 0 {
                run += 1;
            } else {
                w.put_ue(run);
                w.put_se(v);
                run = 0;
            }
        }
    }
}

pub fn decode_blocks(bytes: &[u8], count: usize) -> Result<Vec<[i32; 64]>> {
    let mut r = BitReader::new(bytes);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut block = [0i32; 64];
        let nonzero = r.get_ue()? as usize;
        let mut pos = 0usize;
        for _ in 0..nonzero {
            pos += r.get_ue()? as usize;
            if pos >= 64 {
                return Err(Error::Format("run-length past end of block".into()));
            }
            block[ZIGZAG[pos]] = r.get_se()?;
            pos += 1;
        }
        out.push(block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_is_a_permutation() {
        let mut seen = [false; 64];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
        // walks anti-diagonals
        for w in ZIGZAG.windows(2) {
            let (r0, c0) = (w[0] / 8, w[0] % 8);
            let (r1, c1) = (w[1] / 8, w[1] % 8);
            assert!(r0.abs_diff(r1) <= 1 && c0.abs_diff(c1) <= 1);
        }
    }

    #[test]
    fn exp_golomb_codewords() {
        let mut w = BitWriter::new();
        for v in [0, 1, 2, 3] {
            w.put_ue(v);
        }
        // 1 010 011 00100 -> 1010 0110 0100 (+pad)
        assert_eq!(w.bit_len(), 12);
        assert_eq!(w.finish(), vec![0b1010_0110, 0b0100_0000]);
        let mut w = BitWriter::new();
        w.put_se(1);
        w.put_se(-1);
        // se(1)=ue(1)=010, se(-1)=ue(2)=011
        assert_eq!(w.finish(), vec![0b0100_1100]);
    }

    #[test]
    fn all_zero_block_costs_one_bit() {
        let mut w = BitWriter::new();
        encode_blocks(&[[0; 64]], &mut w);
        assert_eq!(w.bit_len(), 1);
    }

    proptest! {
        #[test]
        fn blocks_round_trip(raw in proptest::collection::vec(
            proptest::collection::vec(prop_oneof![3 => Just(0i32), 1 => -3000i32..3000], 64), 1..5)
        ) {
            let blocks: Vec<[i32; 64]> = raw.iter().map(|b| b.as_slice().try_into().unwrap()).collect();
            let mut w = BitWriter::new();
            encode_blocks(&blocks, &mut w);
            let bytes = w.finish();
            prop_assert_eq!(decode_blocks(&bytes, blocks.len()).unwrap(), blocks);
        }

        #[test]
        fn zeroing_a_coefficient_never_grows_the_stream(
            raw in proptest::collection::vec(prop_oneof![2 => Just(0i32), 1 => -50i32..50], 64),
            which in 0usize..64,
        ) {
            let block: [i32; 64] = raw.as_slice().try_into().unwrap();
            let mut smaller = block;
            smaller[which] = 0;
            let mut a = BitWriter::new();
            encode_blocks(&[block], &mut a);
            let mut b = BitWriter::new();
            encode_blocks(&[smaller], &mut b);
            prop_assert!(b.bit_len() <= a.bit_len());
        }
    }
}
