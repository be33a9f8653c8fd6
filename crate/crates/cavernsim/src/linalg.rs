//! Sparse symmetric solver infrastructure: reverse Cuthill-McKee ordering
//! and a skyline (envelope) Cholesky factorization.
//!
//! FEM stiffness matrices from 2D meshes have small bandwidth after RCM
//! reordering, so an envelope LL^T factorization is both simple and fast.
//! The factorization is computed once per run and reused for every
//! right-hand side of the time loop.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular or not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Symmetric matrix in skyline storage: for each row `i` the contiguous
/// entries from `first_col[i]` up to the diagonal.
#[derive(Debug, Clone)]
pub struct SymSkyline {
    n: usize,
    first_col: Vec<usize>,
    row_start: Vec<usize>,
    vals: Vec<f64>,
}

impl SymSkyline {
    /// Allocate storage for the given adjacency pattern (neighbor lists,
    /// self-loops not required).
    pub fn from_pattern(neighbors: &[Vec<usize>]) -> Self {
        let n = neighbors.len();
        let mut first_col = (0..n).collect::<Vec<_>>();
        for (i, nbrs) in neighbors.iter().enumerate() {
            for &j in nbrs {
                if j < first_col[i] {
                    first_col[i] = j;
                }
                if i < first_col[j] {
                    first_col[j] = i;
                }
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        for i in 0..n {
            row_start.push(acc);
            acc += i - first_col[i] + 1;
        }
        row_start.push(acc);
        SymSkyline {
            n,
            first_col,
            row_start,
            vals: vec![0.0; acc],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= self.first_col[i] && j <= i);
        self.row_start[i] + (j - self.first_col[i])
    }

    /// Add `v` to entry (i, j). Only the lower triangle is stored; the
    /// caller passes each symmetric pair once (any order of i, j).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.vals[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first_col[r] {
            0.0
        } else {
            self.vals[self.idx(r, c)]
        }
    }

    /// y = A x, using the symmetric profile.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let f = self.first_col[i];
            let base = self.row_start[i];
            let mut acc = 0.0;
            for (k, j) in (f..i).enumerate() {
                let v = self.vals[base + k];
                acc += v * x[j];
                y[j] += v * x[i];
            }
            acc += self.vals[base + (i - f)] * x[i];
            y[i] += acc;
        }
    }

    /// In-place LL^T factorization over the envelope.
    pub fn factorize(mut self) -> Result<SkylineCholesky, LinalgError> {
        let n = self.n;
        for i in 0..n {
            let fi = self.first_col[i];
            for j in fi..=i {
                let fj = self.first_col[j];
                let lo = fi.max(fj);
                let mut sum = self.vals[self.idx(i, j)];
                // dot of rows i and j over their common profile
                let bi = self.row_start[i] + (lo - fi);
                let bj = self.row_start[j] + (lo - fj);
                let len = j - lo;
                for k in 0..len {
                    sum -= self.vals[bi + k] * self.vals[bj + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    let k = self.idx(i, i);
                    self.vals[k] = sum.sqrt();
                } else {
                    let d = self.vals[self.idx(j, j)];
                    let k = self.idx(i, j);
                    self.vals[k] = sum / d;
                }
            }
        }
        Ok(SkylineCholesky { l: self })
    }
}

/// Cholesky factor in skyline storage.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    l: SymSkyline,
}

impl SkylineCholesky {
    pub fn n(&self) -> usize {
        self.l.n
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let f = self.l.first_col[i];
            let base = self.l.row_start[i];
            let mut acc = x[i];
            for (k, j) in (f..i).enumerate() {
                acc -= self.l.vals[base + k] * x[j];
            }
            x[i] = acc / self.l.vals[base + (i - f)];
        }
        // backward: L^T x = y, column sweep
        for i in (0..n).rev() {
            let f = self.l.first_col[i];
            let base = self.l.row_start[i];
            x[i] /= self.l.vals[base + (i - f)];
            let xi = x[i];
            for (k, j) in (f..i).enumerate() {
                x[j] -= self.l.vals[base + k] * xi;
            }
        }
        x
    }
}

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
/// Disconnected components are handled by restarting from the lowest-degree
/// unvisited vertex.
pub fn rcm_order(neighbors: &[Vec<usize>]) -> Vec<usize> {
    let n = neighbors.len();
    let degree: Vec<usize> = neighbors.iter().map(|v| v.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    loop {
        let start = match (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
        {
            Some(s) => s,
            None => break,
        };
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = neighbors[u]
                .iter()
                .copied()
                .filter(|&v| !visited[v])
                .collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_skyline(a: &[Vec<f64>]) -> SymSkyline {
        let n = a.len();
        let mut nbrs = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..i {
                if a[i][j] != 0.0 {
                    nbrs[i].push(j);
                }
            }
        }
        let mut m = SymSkyline::from_pattern(&nbrs);
        for i in 0..n {
            for j in 0..=i {
                if a[i][j] != 0.0 {
                    m.add(i, j, a[i][j]);
                }
            }
        }
        m
    }

    #[test]
    fn solves_small_spd_system() {
        // A = [[4,1,0],[1,3,1],[0,1,2]], b = A * [1,2,3]
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let m = dense_to_skyline(&a);
        let xref = [1.0, 2.0, 3.0];
        let mut b = vec![0.0; 3];
        m.mul_vec(&xref, &mut b);
        let chol = m.factorize().unwrap();
        let x = chol.solve(&b);
        for (xi, ri) in x.iter().zip(xref.iter()) {
            assert!((xi - ri).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let m = dense_to_skyline(&a);
        assert!(m.factorize().is_err());
    }

    #[test]
    fn mul_vec_matches_dense_product() {
        let a = vec![
            vec![5.0, 1.0, 0.0, 2.0],
            vec![1.0, 6.0, 1.0, 0.0],
            vec![0.0, 1.0, 7.0, 1.0],
            vec![2.0, 0.0, 1.0, 8.0],
        ];
        let m = dense_to_skyline(&a);
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut y = vec![0.0; 4];
        m.mul_vec(&x, &mut y);
        for i in 0..4 {
            let want: f64 = (0..4).map(|j| a[i][j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn rcm_produces_valid_permutation() {
        // path graph 0-1-2-3-4 plus isolated 5
        let nbrs = vec![vec![1], vec![0, 2], vec![1, 3], vec![2, 4], vec![3], vec![]];
        let p = rcm_order(&nbrs);
        let mut seen = p.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }
}
