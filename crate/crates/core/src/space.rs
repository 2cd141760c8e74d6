//! Product-space signatures for mixed symmetric/rectangular arguments.
//!
//! A mapping may act on a single rectangular matrix, a single symmetric
//! matrix, or a product of such blocks. The signature records the block
//! layout and fixes how a matrix tuple flattens into one spectral-value
//! vector: symmetric blocks contribute their eigenvalues, rectangular
//! blocks their singular values, concatenated in block order.

use crate::error::{Error, Result};

/// One factor of a product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Symmetric matrices of the given order.
    Sym(usize),
    /// Rectangular matrices with `rows <= cols`. `rows == 0` is allowed and
    /// denotes a degenerate factor that contributes nothing to the spectral
    /// vector (its matrices are `0 x cols`).
    Rect(usize, usize),
}

impl BlockKind {
    /// Number of spectral values this block contributes.
    pub fn spectral_len(&self) -> usize {
        match *self {
            BlockKind::Sym(m) => m,
            BlockKind::Rect(m, _) => m,
        }
    }
}

/// Ordered block layout of a product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSignature {
    blocks: Vec<BlockKind>,
}

impl SpaceSignature {
    /// Builds a signature from explicit blocks. Symmetric blocks must come
    /// before rectangular ones, symmetric orders must be positive, and every
    /// rectangular block needs `rows <= cols`.
    pub fn new(blocks: Vec<BlockKind>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Shape("signature needs at least one block".into()));
        }
        let mut seen_rect = false;
        for (i, b) in blocks.iter().enumerate() {
            match *b {
                BlockKind::Sym(m) => {
                    if seen_rect {
                        return Err(Error::Shape(format!(
                            "symmetric block {i} follows a rectangular block"
                        )));
                    }
                    if m == 0 {
                        return Err(Error::Shape(format!("symmetric block {i} has order 0")));
                    }
                }
                BlockKind::Rect(m, n) => {
                    seen_rect = true;
                    if m > n {
                        return Err(Error::Shape(format!(
                            "rectangular block {i} has {m} rows > {n} cols; transpose first"
                        )));
                    }
                }
            }
        }
        Ok(SpaceSignature { blocks })
    }

    /// Single rectangular block `m x n` with `m <= n`.
    pub fn rect(m: usize, n: usize) -> Result<Self> {
        SpaceSignature::new(vec![BlockKind::Rect(m, n)])
    }

    /// Single symmetric block of order `m`.
    pub fn sym(m: usize) -> Result<Self> {
        SpaceSignature::new(vec![BlockKind::Sym(m)])
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total length of the flattened spectral-value vector.
    pub fn spectral_len(&self) -> usize {
        self.blocks.iter().map(|b| b.spectral_len()).sum()
    }

    /// Half-open range of spectral indices owned by block `k`.
    pub fn spectral_range(&self, k: usize) -> Result<std::ops::Range<usize>> {
        if k >= self.blocks.len() {
            return Err(Error::Index(format!(
                "block {k} out of range for {} blocks",
                self.blocks.len()
            )));
        }
        let start: usize = self.blocks[..k].iter().map(|b| b.spectral_len()).sum();
        Ok(start..start + self.blocks[k].spectral_len())
    }

    /// True when the signature is a single rectangular block.
    pub fn is_single_rect(&self) -> bool {
        self.blocks.len() == 1 && matches!(self.blocks[0], BlockKind::Rect(_, _))
    }

    /// True when the signature is a single symmetric block.
    pub fn is_single_sym(&self) -> bool {
        self.blocks.len() == 1 && matches!(self.blocks[0], BlockKind::Sym(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_ranges() {
        let sig = SpaceSignature::new(vec![
            BlockKind::Sym(2),
            BlockKind::Sym(3),
            BlockKind::Rect(2, 5),
        ])
        .unwrap();
        assert_eq!(sig.spectral_len(), 7);
        assert_eq!(sig.spectral_range(0).unwrap(), 0..2);
        assert_eq!(sig.spectral_range(1).unwrap(), 2..5);
        assert_eq!(sig.spectral_range(2).unwrap(), 5..7);
        assert!(sig.spectral_range(3).is_err());
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(SpaceSignature::new(vec![]).is_err());
        assert!(SpaceSignature::new(vec![BlockKind::Rect(3, 2)]).is_err());
        assert!(SpaceSignature::new(vec![BlockKind::Sym(0)]).is_err());
        assert!(
            SpaceSignature::new(vec![BlockKind::Rect(2, 3), BlockKind::Sym(2)]).is_err(),
            "symmetric blocks must precede rectangular blocks"
        );
    }

    #[test]
    fn degenerate_rect_block_is_allowed() {
        let sig = SpaceSignature::new(vec![BlockKind::Rect(0, 4)]).unwrap();
        assert_eq!(sig.spectral_len(), 0);
        assert!(sig.is_single_rect());
    }

    #[test]
    fn single_block_helpers() {
        assert!(SpaceSignature::rect(2, 3).unwrap().is_single_rect());
        assert!(SpaceSignature::sym(4).unwrap().is_single_sym());
        assert!(!SpaceSignature::sym(4).unwrap().is_single_rect());
    }
}
