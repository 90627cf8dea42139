//! LDLᵀ factorization of symmetric positive definite pentadiagonal matrices.

use crate::Scalar;

/// Symmetric matrix with bandwidth 2: `diag[i] = A[i][i]`, `off1[i] = A[i][i+1]`,
/// `off2[i] = A[i][i+2]`.
#[derive(Debug, Clone)]
pub(crate) struct Pentadiagonal<T> {
    pub diag: Vec<T>,
    pub off1: Vec<T>,
    pub off2: Vec<T>,
}

impl<T: Scalar> Pentadiagonal<T> {
    /// `D Dᵀ` for the (m+2)-point second-difference operator.
    pub fn second_difference_gram(m: usize) -> Self {
        Self {
            diag: vec![T::lit(6.0); m],
            off1: vec![T::lit(-4.0); m.saturating_sub(1)],
            off2: vec![T::one(); m.saturating_sub(2)],
        }
    }

    /// Principal submatrix of `D Dᵀ` on the sorted index set `rows`. Stays pentadiagonal
    /// in the compressed indexing because `|rows[i] - rows[j]| >= |i - j|`.
    pub fn second_difference_gram_subset(rows: &[usize]) -> Self {
        let gram = |gap: usize| match gap {
            0 => T::lit(6.0),
            1 => T::lit(-4.0),
            2 => T::one(),
            _ => T::zero(),
        };
        let k = rows.len();
        Self {
            diag: vec![T::lit(6.0); k],
            off1: rows.windows(2).map(|w| gram(w[1] - w[0])).collect(),
            off2: rows.windows(3).map(|w| gram(w[2] - w[0])).collect(),
        }
    }

    pub fn add_to_diagonal(&mut self, extra: &[T]) {
        for (d, &e) in self.diag.iter_mut().zip(extra) {
            *d += e;
        }
    }

    pub fn factor(&self) -> Option<LdlFactor<T>> {
        let m = self.diag.len();
        let mut d = vec![T::zero(); m];
        let mut l1 = vec![T::zero(); m];
        let mut l2 = vec![T::zero(); m];
        for i in 0..m {
            let mut di = self.diag[i];
            if i >= 2 {
                l2[i] = self.off2[i - 2] / d[i - 2];
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if i >= 1 {
                let mut a = self.off1[i - 1];
                if i >= 2 {
                    a -= l2[i] * d[i - 2] * l1[i - 1];
                }
                l1[i] = a / d[i - 1];
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if !(di.is_finite() && di > T::zero()) {
                return None;
            }
            d[i] = di;
        }
        Some(LdlFactor { d, l1, l2 })
    }
}

/// Unit lower-triangular `L` (two subdiagonals) and diagonal `D`.
#[derive(Debug, Clone)]
pub(crate) struct LdlFactor<T> {
    d: Vec<T>,
    l1: Vec<T>,
    l2: Vec<T>,
}

impl<T: Scalar> LdlFactor<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = self.d.len();
        debug_assert_eq!(b.len(), m);
        for i in 1..m {
            let mut v = b[i] - self.l1[i] * b[i - 1];
            if i >= 2 {
                v -= self.l2[i] * b[i - 2];
            }
            b[i] = v;
        }
        for (bi, &di) in b.iter_mut().zip(&self.d) {
            *bi /= di;
        }
        for i in (0..m).rev() {
            let mut v = b[i];
            if i + 1 < m {
                v -= self.l1[i + 1] * b[i + 1];
            }
            if i + 2 < m {
                v -= self.l2[i + 2] * b[i + 2];
            }
            b[i] = v;
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(p: &Pentadiagonal<f64>) -> Vec<Vec<f64>> {
        let m = p.diag.len();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            a[i][i] = p.diag[i];
            if i + 1 < m {
                a[i][i + 1] = p.off1[i];
                a[i + 1][i] = p.off1[i];
            }
            if i + 2 < m {
                a[i][i + 2] = p.off2[i];
                a[i + 2][i] = p.off2[i];
            }
        }
        a
    }

    fn check_solve(p: &Pentadiagonal<f64>) {
        let m = p.diag.len();
        let b: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let x = p.factor().unwrap().solve(&b);
        let a = dense(p);
        for i in 0..m {
            let ax: f64 = (0..m).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-9, "row {i}: {ax} vs {}", b[i]);
        }
    }

    #[test]
    fn solves_gram_systems() {
        for m in 1..12 {
            check_solve(&Pentadiagonal::second_difference_gram(m));
        }
        let mut p = Pentadiagonal::second_difference_gram(40);
        p.add_to_diagonal(&vec![0.5; 40]);
        check_solve(&p);
    }

    #[test]
    fn subset_gram_matches_dense_submatrix() {
        let rows = [0usize, 1, 3, 4, 7, 9, 10];
        let full = dense(&Pentadiagonal::second_difference_gram(11));
        let sub = Pentadiagonal::<f64>::second_difference_gram_subset(&rows);
        let sub_dense = dense(&sub);
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &rj) in rows.iter().enumerate() {
                assert_eq!(sub_dense[i][j], full[ri][rj]);
            }
        }
        check_solve(&sub);
    }

    #[test]
    fn rejects_indefinite() {
        let p = Pentadiagonal {
            diag: vec![1.0, -1.0],
            off1: vec![0.0],
            off2: vec![],
        };
        assert!(p.factor().is_none());
    }
}
