//! Column-major bit storage for binary covariates. Logic trees evaluate over
//! whole columns at once with word-wide AND/OR.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n_rows: usize,
    words: usize,
    cols: Vec<Vec<u64>>,
}

pub fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Mask of valid bits in the final word of an `n`-bit vector.
pub fn tail_mask(n: usize) -> u64 {
    match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

pub fn pack(values: impl IntoIterator<Item = bool>, n: usize) -> Vec<u64> {
    let mut out = vec![0u64; words_for(n)];
    for (i, v) in values.into_iter().enumerate() {
        if v {
            out[i / 64] |= 1u64 << (i % 64);
        }
    }
    out
}

pub fn unpack(bits: &[u64], n: usize) -> Vec<bool> {
    (0..n).map(|i| get_bit(bits, i)).collect()
}

#[inline]
pub fn get_bit(bits: &[u64], i: usize) -> bool {
    (bits[i / 64] >> (i % 64)) & 1 == 1
}

pub fn count_ones(bits: &[u64]) -> usize {
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

impl BitMatrix {
    /// Build from per-column boolean vectors, each of length `n_rows`.
    pub fn from_columns(n_rows: usize, columns: &[Vec<bool>]) -> Self {
        let cols = columns
            .iter()
            .map(|c| {
                debug_assert_eq!(c.len(), n_rows);
                pack(c.iter().copied(), n_rows)
            })
            .collect();
        Self {
            n_rows,
            words: words_for(n_rows),
            cols,
        }
    }

    /// Build from per-row boolean vectors (samples).
    pub fn from_rows(rows: &[Vec<bool>], n_cols: usize) -> Self {
        let n_rows = rows.len();
        let mut cols = vec![vec![0u64; words_for(n_rows)]; n_cols];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v {
                    cols[j][i / 64] |= 1u64 << (i % 64);
                }
            }
        }
        Self {
            n_rows,
            words: words_for(n_rows),
            cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn n_words(&self) -> usize {
        self.words
    }

    pub fn column(&self, j: usize) -> &[u64] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        get_bit(&self.cols[j], i)
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        (0..self.n_cols()).map(|j| self.get(i, j)).collect()
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let n = rows.len();
        let cols = self
            .cols
            .iter()
            .map(|c| pack(rows.iter().map(|&i| get_bit(c, i)), n))
            .collect();
        Self {
            n_rows: n,
            words: words_for(n),
            cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_and_tail() {
        let v: Vec<bool> = (0..130).map(|i| i % 3 == 0).collect();
        let packed = pack(v.iter().copied(), v.len());
        assert_eq!(packed.len(), 3);
        assert_eq!(unpack(&packed, v.len()), v);
        assert_eq!(count_ones(&packed), 44);
        assert_eq!(tail_mask(130), 0b11);
        assert_eq!(tail_mask(128), u64::MAX);
    }

    #[test]
    fn rows_and_columns_agree() {
        let rows = vec![vec![true, false], vec![false, false], vec![true, true]];
        let m = BitMatrix::from_rows(&rows, 2);
        let c = BitMatrix::from_columns(3, &[vec![true, false, true], vec![false, false, true]]);
        assert_eq!(m, c);
        assert_eq!(m.row(2), vec![true, true]);
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), vec![true, true]);
        assert_eq!(s.row(1), vec![true, false]);
    }
}
