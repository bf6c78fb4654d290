//! Computational/leakage split of a Hilbert space and the Q superoperator.

use crate::error::{Error, Result};
use crate::ops::{r, Mat};

/// Which diagonal block of the partition to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Comp,
    Leak,
}

/// N levels, the first Q of which form the computational subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertPartition {
    n_total: usize,
    n_comp: usize,
    labels: Vec<String>,
}

impl HilbertPartition {
    pub fn new(n_total: usize, n_comp: usize, labels: Vec<String>) -> Result<Self> {
        if n_comp == 0 || n_comp > n_total {
            return Err(Error::Partition(format!("need 1 <= Q <= N, got Q = {n_comp}, N = {n_total}")));
        }
        if labels.len() != n_total {
            return Err(Error::Partition(format!("{} labels for {} levels", labels.len(), n_total)));
        }
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(Error::Partition(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { n_total, n_comp, labels })
    }

    /// Partition with labels "0", "1", ….
    pub fn numbered(n_total: usize, n_comp: usize) -> Result<Self> {
        Self::new(n_total, n_comp, (0..n_total).map(|k| k.to_string()).collect())
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_comp(&self, k: usize) -> bool {
        k < self.n_comp
    }

    /// True when (i, j) lies inside the leakage–leakage block.
    pub fn is_leak_leak(&self, i: usize, j: usize) -> bool {
        i >= self.n_comp && j >= self.n_comp
    }

    fn check(&self, op: &Mat) -> Result<()> {
        if op.nrows() != self.n_total || op.ncols() != self.n_total {
            return Err(Error::Dimension { expected: self.n_total, found: op.nrows() });
        }
        Ok(())
    }
}

/// Q(M) = M − P_leak M P_leak.
pub fn q_superop(op: &Mat, p: &HilbertPartition) -> Result<Mat> {
    p.check(op)?;
    Ok(q_apply(op, p.n_comp))
}

/// Unchecked Q for hot loops.
pub fn q_apply(op: &Mat, n_comp: usize) -> Mat {
    let mut out = op.clone();
    let n = op.nrows();
    for i in n_comp..n {
        for j in n_comp..n {
            out[(i, j)] = r(0.0);
        }
    }
    out
}

/// P M P for the chosen block, zero elsewhere.
pub fn block_project(op: &Mat, p: &HilbertPartition, which: Block) -> Result<Mat> {
    p.check(op)?;
    let q = p.n_comp;
    let inside = |k: usize| match which {
        Block::Comp => k < q,
        Block::Leak => k >= q,
    };
    Ok(Mat::from_fn(op.nrows(), op.ncols(), |i, j| {
        if inside(i) && inside(j) {
            op[(i, j)]
        } else {
            r(0.0)
        }
    }))
}

/// The Q×Q computational block as its own matrix.
pub fn comp_block(op: &Mat, n_comp: usize) -> Mat {
    op.view((0, 0), (n_comp, n_comp)).into_owned()
}

/// Off-diagonal (computational ↔ leakage) part.
pub fn cross_part(op: &Mat, n_comp: usize) -> Mat {
    let n = op.nrows();
    Mat::from_fn(n, n, |i, j| if (i < n_comp) != (j < n_comp) { op[(i, j)] } else { r(0.0) })
}
