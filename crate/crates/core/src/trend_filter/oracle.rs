//! Slow reference solvers used to check [`super::solve_tf`].
//!
//! Both work on the dual box QP with plain loops, sharing no code with the production
//! solver. They are meant for short signals (a few hundred points at most).

use crate::Scalar;

fn apply_d<T: Scalar>(x: &[T]) -> Vec<T> {
    (0..x.len() - 2)
        .map(|j| x[j] - T::lit(2.0) * x[j + 1] + x[j + 2])
        .collect()
}

fn apply_dt<T: Scalar>(u: &[T], n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let mut acc = T::zero();
            if i < u.len() {
                acc += u[i];
            }
            if i >= 1 && i - 1 < u.len() {
                acc -= T::lit(2.0) * u[i - 1];
            }
            if i >= 2 && i - 2 < u.len() {
                acc += u[i - 2];
            }
            acc
        })
        .collect()
}

fn primal<T: Scalar>(y: &[T], u: &[T]) -> Vec<T> {
    let dtu = apply_dt(u, y.len());
    y.iter().zip(dtu).map(|(&a, b)| a - b).collect()
}

fn clip<T: Scalar>(v: T, lambda: T) -> T {
    v.max(-lambda).min(lambda)
}

/// `D(y − Dᵀu)`, the negated dual gradient.
fn residual<T: Scalar>(y: &[T], u: &[T]) -> Vec<T> {
    apply_d(&primal(y, u))
}

/// Projected gradient on the dual with step `1/16`:
/// `u ← clip(u − (DDᵀu − Dy)/16, ±λ)`, `iters` times from `u = 0`. Returns `θ = y − Dᵀu`.
///
/// Converges slowly on long signals; the second-difference Gram matrix has condition
/// number growing like `n⁴`.
pub fn oracle_solve<T: Scalar>(y: &[T], lambda: T, iters: usize) -> Vec<T> {
    assert!(y.len() >= 3, "oracle needs at least 3 points");
    let eta = T::lit(1.0 / 16.0);
    let mut u = vec![T::zero(); y.len() - 2];
    for _ in 0..iters {
        let r = residual(y, &u);
        for (uj, rj) in u.iter_mut().zip(r) {
            *uj = clip(*uj + eta * rj, lambda);
        }
    }
    primal(y, &u)
}

/// Dual objective gap for feasible `u`.
pub fn dual_gap<T: Scalar>(y: &[T], u: &[T], lambda: T) -> T {
    residual(y, u)
        .iter()
        .zip(u)
        .map(|(&r, &uj)| lambda * r.abs() - uj * r)
        .sum()
}

/// Same projected-gradient step with Nesterov momentum and gradient-based restarts.
///
/// Stops once the duality gap is at most `gap_tol` (checked every 25 iterations) or after
/// `max_iters`. Since `½‖θ − θ*‖² ≤ gap`, the gap bounds the distance to the true fit.
/// Returns `θ` and the final gap.
pub fn oracle_solve_accelerated<T: Scalar>(
    y: &[T],
    lambda: T,
    max_iters: usize,
    gap_tol: T,
) -> (Vec<T>, T) {
    assert!(y.len() >= 3, "oracle needs at least 3 points");
    let eta = T::lit(1.0 / 16.0);
    let m = y.len() - 2;
    let mut u = vec![T::zero(); m];
    let mut look = u.clone();
    let mut t = T::one();
    let mut gap = dual_gap(y, &u, lambda);
    for k in 0..max_iters {
        if k % 25 == 0 {
            gap = dual_gap(y, &u, lambda);
            if gap <= gap_tol {
                break;
            }
        }
        let r = residual(y, &look);
        let next: Vec<T> = look
            .iter()
            .zip(&r)
            .map(|(&v, &rj)| clip(v + eta * rj, lambda))
            .collect();
        // restart when the momentum direction opposes the gradient step
        let restart = look
            .iter()
            .zip(&next)
            .zip(&u)
            .map(|((&l, &nx), &prev)| (l - nx) * (nx - prev))
            .sum::<T>()
            > T::zero();
        let t_next = if restart {
            T::one()
        } else {
            (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0)
        };
        let momentum = if restart {
            T::zero()
        } else {
            (t - T::one()) / t_next
        };
        look = next
            .iter()
            .zip(&u)
            .map(|(&nx, &prev)| nx + momentum * (nx - prev))
            .collect();
        u = next;
        t = t_next;
    }
    gap = gap.min(dual_gap(y, &u, lambda));
    (primal(y, &u), gap)
}
