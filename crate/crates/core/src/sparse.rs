//! Compressed sparse row matrices with deterministic column order.

use std::io::Write;
use std::path::Path;

use faer::Mat;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from per-row entry lists. Duplicate columns are summed, exact
    /// zeros dropped, columns sorted.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                assert!((c as usize) < ncols, "column {c} out of range {ncols}");
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c as u32, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of stored entries, `nnz / (nrows ncols)`.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.nrows as f64 * self.ncols as f64)
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|r| self.row_nnz(r)).max().unwrap_or(0)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, val) = self.row(r);
        match idx.binary_search(&(c as u32)) {
            Ok(k) => val[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (idx, val) = self.row(r);
            idx.iter().zip(val).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (idx, val) = self.row(r);
                idx.iter().zip(val).map(|(&c, v)| v * x[c as usize]).sum()
            })
            .collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha A + beta B`.
    pub fn add(&self, alpha: f64, other: &Csr, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|r| {
                let (ia, va) = self.row(r);
                let (ib, vb) = other.row(r);
                ia.iter().zip(va).map(|(&c, &v)| (c, alpha * v)).chain(ib.iter().zip(vb).map(|(&c, &v)| (c, beta * v))).collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// Adds `alpha * self` into a dense matrix.
    pub fn add_to_dense(&self, alpha: f64, dense: &mut Mat<f64>) {
        for (r, c, v) in self.iter() {
            dense[(r, c)] += alpha * v;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        self.add_to_dense(1.0, &mut m);
        m
    }

    /// Writes `(row: u64, col: u64, value: f64)` little-endian records.
    pub fn dump_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (r, c, v) in self.iter() {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(c as u64).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`Csr::dump_triplets`].
    pub fn load_triplets(path: impl AsRef<Path>, nrows: usize, ncols: usize) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let trip: Vec<(usize, usize, f64)> = bytes
            .chunks_exact(24)
            .map(|ch| {
                let r = u64::from_le_bytes(ch[0..8].try_into().unwrap()) as usize;
                let c = u64::from_le_bytes(ch[8..16].try_into().unwrap()) as usize;
                let v = f64::from_le_bytes(ch[16..24].try_into().unwrap());
                (r, c, v)
            })
            .collect();
        Ok(Self::from_triplets(nrows, ncols, &trip))
    }
}

/// `A (x) B` for small dense factors, keeping only nonzero products.
pub fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Csr {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let rows = (0..ar * br)
        .map(|r| {
            let (i, k) = (r / br, r % br);
            let mut row = Vec::new();
            for j in 0..ac {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                for l in 0..bc {
                    let v = aij * b[(k, l)];
                    if v != 0.0 {
                        row.push(((j * bc + l) as u32, v));
                    }
                }
            }
            row
        })
        .collect();
    Csr::from_rows(ac * bc, rows)
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[Csr]) -> Csr {
    let ncols: usize = blocks.iter().map(Csr::ncols).sum();
    let mut rows = Vec::new();
    let mut offset = 0u32;
    for b in blocks {
        for r in 0..b.nrows() {
            let (idx, val) = b.row(r);
            rows.push(idx.iter().zip(val).map(|(&c, &v)| (c + offset, v)).collect());
        }
        offset += b.ncols() as u32;
    }
    Csr::from_rows(ncols, rows)
}
