//! Banded storage and direct LU solution of banded systems.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major, with `kl` extra
//! super-diagonals reserved for the fill-in produced by row interchanges.

use crate::error::{invalid, Error, Result};

/// Relative threshold below which a pivot is treated as zero.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Leading dimension, `2·kl + ku + 1`.
    ld: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.kl + self.ku + i - j
    }

    /// Entry `(i, j)`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// Sets entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            self.in_band(i, j),
            "({i}, {j}) outside band {}/{}",
            self.kl,
            self.ku
        );
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            self.in_band(i, j),
            "({i}, {j}) outside band {}/{}",
            self.kl,
            self.ku
        );
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    /// `add` for callers that guarantee `(i, j)` is inside the band.
    #[inline]
    pub(crate) fn add_in_band(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(self.in_band(i, j));
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    /// Resets every entry, including the fill region, to zero.
    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    /// Column range of the band in row `i`.
    #[inline]
    pub fn row_columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(invalid(format!(
                "vector length {} does not match matrix dimension {}",
                x.len(),
                self.n
            )));
        }
        Ok((0..self.n)
            .map(|i| {
                self.row_columns(i)
                    .map(|j| self.data[self.offset(i, j)] * x[j])
                    .sum()
            })
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Row-interchange policy for [`factorize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pivoting {
    /// Partial pivoting restricted to the band.
    #[default]
    Partial,
    /// No interchanges; mirrors a plain banded Thomas sweep.
    None,
}

/// LU factors of a banded matrix, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct BandedFactorization {
    lu: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedFactorization {
    pub fn dim(&self) -> usize {
        self.lu.n
    }
}

pub fn factorize(a: BandedMatrix) -> Result<BandedFactorization> {
    factorize_with(a, Pivoting::Partial)
}

pub fn factorize_with(mut a: BandedMatrix, pivoting: Pivoting) -> Result<BandedFactorization> {
    let mut pivots = Vec::with_capacity(a.n);
    lu_in_place(&mut a, &mut pivots, pivoting)?;
    Ok(BandedFactorization { lu: a, pivots })
}

/// Overwrites `a` with its LU factors; row interchanges go to `pivots`.
pub(crate) fn lu_in_place(
    a: &mut BandedMatrix,
    pivots: &mut Vec<usize>,
    pivoting: Pivoting,
) -> Result<()> {
    let n = a.n;
    let kl = a.kl;
    let ku_fill = a.kl + a.ku;
    let threshold = PIVOT_RTOL * a.max_abs();
    pivots.clear();
    let ld = a.ld;
    let data = &mut a.data;
    // Row i, column j with j - ku_fill <= i <= j + kl.
    let idx = |i: usize, j: usize| j * ld + ku_fill + i - j;

    // Rightmost column touched by U so far; fill only grows past `ku` after interchanges.
    let mut ju = 0;
    for j in 0..n {
        let km = kl.min(n - 1 - j);

        let mut p = j;
        if pivoting == Pivoting::Partial {
            let mut best = data[idx(j, j)].abs();
            for r in (j + 1)..=(j + km) {
                let v = data[idx(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
        }
        let pivot = data[idx(p, j)];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularMatrix { row: j, pivot });
        }
        pivots.push(p);
        ju = ju.max((p + a.ku).min(n - 1));
        let last_col = ju;
        if p != j {
            for c in j..=last_col {
                data.swap(idx(j, c), idx(p, c));
            }
        }

        let inv = 1.0 / data[idx(j, j)];
        let col_j = idx(j + 1, j);
        for v in &mut data[col_j..col_j + km] {
            *v *= inv;
        }
        for c in (j + 1)..=last_col {
            let f = data[idx(j, c)];
            if f != 0.0 {
                // Rows j+1 ..= j+km of columns j and c are contiguous in storage.
                let col_c = idx(j + 1, c);
                let (head, tail) = data.split_at_mut(col_c);
                for (t, l) in tail[..km].iter_mut().zip(&head[col_j..col_j + km]) {
                    *t -= l * f;
                }
            }
        }
    }
    Ok(())
}

pub fn solve(f: &BandedFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    solve_in_place(f, &mut x)?;
    Ok(x)
}

pub fn solve_in_place(f: &BandedFactorization, x: &mut [f64]) -> Result<()> {
    lu_solve(&f.lu, &f.pivots, x)
}

pub(crate) fn lu_solve(lu: &BandedMatrix, pivots: &[usize], x: &mut [f64]) -> Result<()> {
    let n = lu.n;
    if x.len() != n {
        return Err(invalid(format!(
            "right-hand side length {} does not match dimension {n}",
            x.len()
        )));
    }
    let kl = lu.kl;
    let ku_fill = lu.kl + lu.ku;
    let ld = lu.ld;
    let data = &lu.data;
    let idx = |i: usize, j: usize| j * ld + ku_fill + i - j;

    for j in 0..n {
        let p = pivots[j];
        if p != j {
            x.swap(j, p);
        }
        let xj = x[j];
        let km = kl.min(n - 1 - j);
        if xj != 0.0 && km > 0 {
            let col = idx(j + 1, j);
            for (xr, l) in x[j + 1..=j + km].iter_mut().zip(&data[col..col + km]) {
                *xr -= l * xj;
            }
        }
    }
    for j in (0..n).rev() {
        x[j] /= data[idx(j, j)];
        let xj = x[j];
        let top = j.saturating_sub(ku_fill);
        if xj != 0.0 && top < j {
            let col = idx(top, j);
            for (xr, u) in x[top..j].iter_mut().zip(&data[col..col + (j - top)]) {
                *xr -= u * xj;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Dense Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in (k + 1)..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn random_banded(rng: &mut impl Rng, n: usize, kl: usize, ku: usize) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in m.row_columns(i) {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
        num / den.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_solve_is_exact() {
        let f = factorize(BandedMatrix::identity(7, 3, 3)).unwrap();
        let rhs = vec![1.0, -2.0, 3.5, 0.0, 1e-3, 7.0, -0.25];
        assert_eq!(solve(&f, &rhs).unwrap(), rhs);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let f = factorize(random_banded(&mut rng, 12, 3, 3)).unwrap();
        assert!(solve(&f, &[0.0; 12]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_unit_vectors() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let a = random_banded(&mut rng, 16, 3, 3);
        let f = factorize(a.clone()).unwrap();
        for k in 0..16 {
            let mut e = vec![0.0; 16];
            e[k] = 1.0;
            let x = solve(&f, &a.matvec(&e).unwrap()).unwrap();
            for (i, v) in x.iter().enumerate() {
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_solves_are_identical() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let f = factorize(random_banded(&mut rng, 20, 3, 3)).unwrap();
        let rhs: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = solve(&f, &rhs).unwrap();
        let x2 = solve(&f, &rhs).unwrap();
        assert_eq!(x1, x2);
    }

    #[test]
    fn eight_by_eight_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let a = random_banded(&mut rng, 8, 3, 3);
        let rhs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve(&factorize(a.clone()).unwrap(), &rhs).unwrap();
        let y = dense_solve(a.to_dense(), rhs);
        assert!(rel_diff(&x, &y) < 1e-12);
    }

    #[test]
    fn random_systems_match_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(100);
        for _ in 0..100 {
            let n = rng.gen_range(4..=64);
            let mut a = random_banded(&mut rng, n, 3, 3);
            // Keep the conditioning moderate.
            for i in 0..n {
                a.add(i, i, 4.0 * rng.gen_range(-1.0f64..1.0).signum());
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve(&factorize(a.clone()).unwrap(), &rhs).unwrap();
            let y = dense_solve(a.to_dense(), rhs.clone());
            assert!(rel_diff(&x, &y) < 1e-10);
            let r = a.matvec(&x).unwrap();
            assert!(rel_diff(&r, &rhs) < 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs an interchange.
        let mut a = BandedMatrix::zeros(5, 3, 3);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        for i in 2..5 {
            a.set(i, i, 2.0);
        }
        let f = factorize(a.clone()).unwrap();
        let x = solve(&f, &[3.0, 4.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(x, vec![4.0, 3.0, 1.0, 1.0, 1.0]);
        match factorize_with(a, Pivoting::None) {
            Err(Error::SingularMatrix { row, .. }) => assert_eq!(row, 0),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandedMatrix::identity(6, 3, 3);
        a.set(4, 4, 0.0);
        match factorize(a) {
            Err(Error::SingularMatrix { row, .. }) => assert_eq!(row, 4),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn pivot_free_agrees_on_dominant_systems() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mut a = random_banded(&mut rng, 30, 3, 3);
        for i in 0..30 {
            a.add(i, i, 10.0);
        }
        let rhs: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve(&factorize(a.clone()).unwrap(), &rhs).unwrap();
        let y = solve(&factorize_with(a, Pivoting::None).unwrap(), &rhs).unwrap();
        assert!(rel_diff(&x, &y) < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let f = factorize(BandedMatrix::identity(4, 1, 1)).unwrap();
        assert!(solve(&f, &[1.0, 2.0]).is_err());
        assert!(BandedMatrix::identity(4, 1, 1).matvec(&[1.0]).is_err());
    }

    #[test]
    fn entries_outside_band_read_zero() {
        let mut a = BandedMatrix::zeros(10, 3, 3);
        a.set(5, 2, 1.0);
        a.set(2, 5, 2.0);
        assert_eq!(a.get(6, 2), 0.0);
        assert_eq!(a.get(2, 6), 0.0);
        assert_eq!(a.get(5, 2), 1.0);
        assert_eq!(a.get(2, 5), 2.0);
    }

    #[test]
    #[should_panic]
    fn writing_outside_band_panics() {
        BandedMatrix::zeros(10, 3, 3).set(0, 4, 1.0);
    }
}
