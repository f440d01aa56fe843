//! Row-partitioned forward operators and the two model problems.

mod integral;
mod matrix;
mod norm;
mod radon;

pub use integral::{build_integral_operator, exact_sparse_signal, kernel, sample_sparse_signal};
pub use matrix::{write_vector_csv, Matrix};

use matrix::SparseRows;
pub use norm::{
    boyd_operator_norm, boyd_operator_norm_history, boyd_operator_norm_multistart, NormEstimate,
};
pub use radon::{build_radon_operator, sparse_disk_phantom, RadonGeometry, PHANTOM_DISKS};

use crate::error::{Error, Result};

/// Blocks with at most this fraction of nonzeros also get a compressed-row copy.
const SPARSE_DENSITY: f64 = 0.3;

/// Forward operator split into row blocks `A_0, …, A_{N-1}` sharing the input dimension.
///
/// Products go through a compressed-row copy when a block is sparse enough
/// (the tomography blocks are), otherwise through the dense rows.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    blocks: Vec<Matrix>,
    sparse: Vec<Option<SparseRows>>,
    input_dim: usize,
}

impl BlockOperator {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let input_dim = blocks
            .first()
            .ok_or_else(|| Error::Config("a block operator needs at least one block".into()))?
            .cols();
        for b in &blocks {
            Error::check_len(input_dim, b.cols())?;
        }
        let sparse = blocks
            .iter()
            .map(|b| SparseRows::compress(b, SPARSE_DENSITY))
            .collect();
        Ok(Self {
            blocks,
            sparse,
            input_dim,
        })
    }

    pub fn single(full: Matrix) -> Self {
        let input_dim = full.cols();
        let sparse = vec![SparseRows::compress(&full, SPARSE_DENSITY)];
        Self {
            blocks: vec![full],
            sparse,
            input_dim,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.iter().map(Matrix::rows).sum()
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> Result<&Matrix> {
        self.blocks.get(i).ok_or(Error::Index {
            index: i,
            len: self.blocks.len(),
        })
    }

    /// `A_i x`.
    pub fn apply(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.block(i)?.rows()];
        self.apply_into(i, x, &mut out)?;
        Ok(out)
    }

    /// `out = A_i x`.
    pub fn apply_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let b = self.block(i)?;
        Error::check_len(self.input_dim, x.len())?;
        Error::check_len(b.rows(), out.len())?;
        match &self.sparse[i] {
            Some(s) => s.matvec_into(x, out),
            None => b.matvec_into(x, out),
        }
        Ok(())
    }

    /// `A_iᵀ ys`.
    pub fn apply_adjoint(&self, i: usize, ys: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.input_dim];
        self.add_adjoint_scaled(i, ys, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += scale · A_iᵀ ys`.
    pub fn add_adjoint_scaled(
        &self,
        i: usize,
        ys: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let b = self.block(i)?;
        Error::check_len(b.rows(), ys.len())?;
        Error::check_len(self.input_dim, out.len())?;
        match &self.sparse[i] {
            Some(s) => s.add_transpose_scaled(ys, scale, out),
            None => b.add_transpose_scaled(ys, scale, out),
        }
        Ok(())
    }

    /// Block outputs concatenated in block order.
    pub fn apply_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.input_dim, x.len())?;
        let mut out = Vec::with_capacity(self.output_dim());
        for (i, b) in self.blocks.iter().enumerate() {
            let start = out.len();
            out.resize(start + b.rows(), 0.0);
            self.apply_into(i, x, &mut out[start..])?;
        }
        Ok(out)
    }

    /// Stacks the blocks back into one matrix, in block order.
    pub fn concatenated(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .flat_map(|b| (0..b.rows()).map(move |i| b.row(i).to_vec()))
            .collect();
        Matrix::from_rows(&rows).expect("blocks share the column count")
    }
}

/// Indices of the rows that go into block `j` when `rows` rows are dealt into `n_batches` blocks.
pub fn batch_row_indices(rows: usize, n_batches: usize, j: usize) -> Vec<usize> {
    (j..rows).step_by(n_batches).collect()
}

fn check_partition(rows: usize, n_batches: usize) -> Result<()> {
    if n_batches == 0 || !rows.is_multiple_of(n_batches) {
        return Err(Error::Config(format!(
            "number of batches {n_batches} must divide the row count {rows}"
        )));
    }
    Ok(())
}

/// Block `j` takes rows `j, j + N_b, j + 2N_b, …` of `full`.
pub fn partition_rows(full: &Matrix, n_batches: usize) -> Result<BlockOperator> {
    check_partition(full.rows(), n_batches)?;
    let blocks = (0..n_batches)
        .map(|j| full.select_rows(&batch_row_indices(full.rows(), n_batches, j)))
        .collect();
    BlockOperator::new(blocks)
}

/// Splits a data vector with the same interleaving as [`partition_rows`].
pub fn partition_vector(y: &[f64], n_batches: usize) -> Result<Vec<Vec<f64>>> {
    check_partition(y.len(), n_batches)?;
    Ok((0..n_batches)
        .map(|j| {
            batch_row_indices(y.len(), n_batches, j)
                .into_iter()
                .map(|i| y[i])
                .collect()
        })
        .collect())
}

/// Per-block data `y_i` together with the noise level of the full vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    blocks: Vec<Vec<f64>>,
    noise_level: f64,
}

impl ObservationSet {
    pub fn new(blocks: Vec<Vec<f64>>, noise_level: f64) -> Result<Self> {
        if !(noise_level.is_finite() && noise_level >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise level {noise_level} must be finite and ≥ 0"
            )));
        }
        if blocks.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "observations contain non-finite entries".into(),
            ));
        }
        Ok(Self {
            blocks,
            noise_level,
        })
    }

    /// Exact data (`δ = 0`) partitioned like the operator rows.
    pub fn exact(y: &[f64], n_batches: usize) -> Result<Self> {
        Self::new(partition_vector(y, n_batches)?, 0.0)
    }

    pub fn noisy(y: &[f64], n_batches: usize, noise_level: f64) -> Result<Self> {
        Self::new(partition_vector(y, n_batches)?, noise_level)
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> Result<&[f64]> {
        self.blocks.get(i).map(Vec::as_slice).ok_or(Error::Index {
            index: i,
            len: self.blocks.len(),
        })
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn concatenated(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    /// Checks that every data block matches the row count of its operator block.
    pub fn check_against(&self, op: &BlockOperator) -> Result<()> {
        Error::check_len(op.n_blocks(), self.blocks.len())?;
        for (b, y) in op.blocks().iter().zip(&self.blocks) {
            Error::check_len(b.rows(), y.len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::matrix::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn apply_examples() {
        let op = BlockOperator::single(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap());
        assert_eq!(op.apply(0, &[1.0, 1.0]).unwrap(), vec![3.0]);
        let id = BlockOperator::single(Matrix::identity(3));
        assert_eq!(id.apply(0, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            id.apply(1, &[1.0, 2.0, 3.0]),
            Err(Error::Index { index: 1, len: 1 })
        ));
        assert!(id.apply(0, &[1.0]).is_err());
    }

    #[test]
    fn apply_matches_naive_loop() {
        let a = random_matrix(4, 3, 7);
        let x = [0.3, -1.2, 2.5];
        let got = BlockOperator::single(a.clone()).apply(0, &x).unwrap();
        for (i, g) in got.iter().enumerate() {
            let s: f64 = x.iter().enumerate().map(|(j, v)| a.get(i, j) * v).sum();
            assert!((g - s).abs() <= 1e-15 * s.abs().max(1.0));
        }
    }

    #[test]
    fn adjoint_examples() {
        let op = BlockOperator::single(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap());
        assert_eq!(op.apply_adjoint(0, &[1.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(op.apply_adjoint(0, &[0.0]).unwrap(), vec![0.0, 0.0]);

        let a = random_matrix(5, 4, 11);
        let op = BlockOperator::single(a);
        let u = [0.1, -0.4, 0.9, 1.3, -2.0];
        let x = [1.0, 0.5, -0.25, 2.0];
        let lhs = dot(&op.apply_adjoint(0, &u).unwrap(), &x);
        let rhs = dot(&u, &op.apply(0, &x).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn partition_examples() {
        let full = Matrix::from_fn(6, 2, |i, j| (10 * i + j) as f64);
        let op = partition_rows(&full, 2).unwrap();
        assert_eq!(op.block(0).unwrap(), &full.select_rows(&[0, 2, 4]));
        assert_eq!(op.block(1).unwrap(), &full.select_rows(&[1, 3, 5]));

        let single = partition_rows(&full, 1).unwrap();
        assert_eq!(single.block(0).unwrap(), &full);

        let rows = partition_rows(&full, 6).unwrap();
        for i in 0..6 {
            assert_eq!(rows.block(i).unwrap().row(0), full.row(i));
        }
        assert!(matches!(partition_rows(&full, 4), Err(Error::Config(_))));
        assert!(partition_rows(&full, 0).is_err());
    }

    #[test]
    fn observations_follow_row_partition() {
        let y = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let obs = ObservationSet::exact(&y, 3).unwrap();
        assert_eq!(
            obs.blocks(),
            &[vec![0.0, 3.0], vec![1.0, 4.0], vec![2.0, 5.0]]
        );
        assert_eq!(obs.noise_level(), 0.0);
        assert!(ObservationSet::noisy(&y, 3, -1.0).is_err());
    }
}
