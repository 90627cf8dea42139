//! Dual solver for order-1 ℓ1 trend filtering.
//!
//! The dual is the box-constrained QP
//!
//! ```text
//! minimize ½‖y − Dᵀu‖²   subject to ‖u‖∞ ≤ λ
//! ```
//!
//! with primal recovery `θ = y − Dᵀu`. A primal-dual interior-point method on the dual
//! gets close to the optimum; the active set read off that point is then refined by a
//! primal-dual active-set loop that solves the reduced KKT system exactly. Every
//! returned point carries the duality gap `Σⱼ λ|(Dθ)ⱼ| − uⱼ(Dθ)ⱼ` as its certificate.

use crate::Scalar;

use super::banded::{LdlFactor, Pentadiagonal};

/// `D x` with rows `[1, −2, 1]`; length `x.len() − 2`.
pub(crate) fn second_diff<T: Scalar>(x: &[T]) -> Vec<T> {
    x.windows(3).map(|w| w[0] - w[1] - w[1] + w[2]).collect()
}

/// `Dᵀ u` for a length-`n` signal.
pub(crate) fn second_diff_adjoint<T: Scalar>(u: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (j, &uj) in u.iter().enumerate() {
        out[j] += uj;
        out[j + 1] -= uj + uj;
        out[j + 2] += uj;
    }
    out
}

/// `D Dᵀ u`, evaluated with the pentadiagonal stencil `[1, −4, 6, −4, 1]`.
pub(crate) fn gram_apply<T: Scalar>(u: &[T]) -> Vec<T> {
    let m = u.len();
    let at = |i: isize| -> T {
        if i < 0 || i as usize >= m {
            T::zero()
        } else {
            u[i as usize]
        }
    };
    (0..m as isize)
        .map(|j| {
            at(j - 2) + at(j + 2) - T::lit(4.0) * (at(j - 1) + at(j + 1)) + T::lit(6.0) * at(j)
        })
        .collect()
}

/// Duality gap of a dual-feasible `u` paired with `θ = y − Dᵀu`, given `r = Dθ`.
pub(crate) fn duality_gap<T: Scalar>(u: &[T], r: &[T], lambda: T) -> T {
    u.iter()
        .zip(r)
        .map(|(&uj, &rj)| lambda * rj.abs() - uj * rj)
        .sum::<T>()
        .max(T::zero())
}

/// Sign pattern of a dual point: 0 free, ±1 pinned at ±λ.
pub(crate) type ActiveSet = Vec<i8>;

#[derive(Debug, Clone)]
pub(crate) struct DualPoint<T> {
    pub u: Vec<T>,
    pub theta: Vec<T>,
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
    pub active: ActiveSet,
}

/// Per-signal state reused across several λ values.
pub(crate) struct Problem<'a, T> {
    y: &'a [T],
    dy: Vec<T>,
    gram: LdlFactor<T>,
    /// Unconstrained dual optimum `(DDᵀ)⁻¹Dy`.
    free_optimum: Vec<T>,
    eps_gap: T,
    knot_scale: T,
    max_iter: usize,
}

impl<'a, T: Scalar> Problem<'a, T> {
    pub fn new(y: &'a [T], eps_gap: T, knot_scale: T, max_iter: usize) -> Self {
        let dy = second_diff(y);
        let gram = Pentadiagonal::second_difference_gram(dy.len())
            .factor()
            .expect("D Dᵀ is positive definite");
        let free_optimum = gram.solve(&dy);
        Self {
            y,
            dy,
            gram,
            free_optimum,
            eps_gap,
            knot_scale,
            max_iter,
        }
    }

    /// `‖(DDᵀ)⁻¹Dy‖∞`: smallest λ at which the fit is the least-squares line.
    pub fn lambda_max(&self) -> T {
        self.free_optimum
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    fn m(&self) -> usize {
        self.dy.len()
    }

    fn point(
        &self,
        mut u: Vec<T>,
        lambda: T,
        iterations: usize,
        active: ActiveSet,
    ) -> DualPoint<T> {
        for v in u.iter_mut() {
            *v = v.max(-lambda).min(lambda);
        }
        let dtu = second_diff_adjoint(&u, self.y.len());
        let theta: Vec<T> = self.y.iter().zip(&dtu).map(|(&a, &b)| a - b).collect();
        let r = second_diff(&theta);
        let gap = duality_gap(&u, &r, lambda);
        DualPoint {
            u,
            theta,
            gap,
            iterations,
            converged: gap <= self.eps_gap,
            active,
        }
    }

    /// Solves at `lambda`, trying an active-set warm start first when one is given.
    pub fn solve(&self, lambda: T, warm: Option<&ActiveSet>) -> DualPoint<T> {
        let m = self.m();
        if lambda <= T::zero() {
            return self.point(vec![T::zero(); m], T::zero(), 0, vec![0; m]);
        }
        if self.lambda_max() <= lambda {
            return self.point(self.free_optimum.clone(), lambda, 0, vec![0; m]);
        }
        if let Some(active) = warm {
            if let Some((u, active, rounds)) = self.refine(lambda, active.clone(), 25) {
                let p = self.point(u, lambda, rounds, active);
                if p.converged {
                    return p;
                }
            }
        }
        self.interior_point(lambda)
    }

    fn tol_dual(&self, lambda: T) -> T {
        lambda * T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
    }

    fn tol_residual(&self) -> T {
        self.knot_scale * T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
    }

    /// Primal-dual active-set iteration on a sign pattern. Returns the KKT point once no
    /// constraint is violated.
    fn refine(
        &self,
        lambda: T,
        mut active: ActiveSet,
        max_rounds: usize,
    ) -> Option<(Vec<T>, ActiveSet, usize)> {
        let m = self.m();
        let tol_u = self.tol_dual(lambda);
        let tol_r = self.tol_residual();
        for round in 1..=max_rounds {
            let mut u: Vec<T> = active
                .iter()
                .map(|&s| lambda * T::lit(f64::from(s)))
                .collect();
            let free: Vec<usize> = (0..m).filter(|&j| active[j] == 0).collect();
            if !free.is_empty() {
                let pinned = gram_apply(&u);
                let rhs: Vec<T> = free.iter().map(|&j| self.dy[j] - pinned[j]).collect();
                let factor = Pentadiagonal::second_difference_gram_subset(&free).factor()?;
                let sol = factor.solve(&rhs);
                for (&j, v) in free.iter().zip(sol) {
                    u[j] = v;
                }
            }
            let gu = gram_apply(&u);
            let mut changed = false;
            for j in 0..m {
                // r = Dθ = Dy − DDᵀu
                let r = self.dy[j] - gu[j];
                match active[j] {
                    0 if u[j].abs() > lambda + tol_u => {
                        active[j] = if u[j] > T::zero() { 1 } else { -1 };
                        changed = true;
                    }
                    s if s != 0 && T::lit(f64::from(s)) * r < -tol_r => {
                        active[j] = 0;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Some((u, active, round));
            }
        }
        None
    }

    /// Primal-dual interior-point method on the dual box QP, finished by [`Self::refine`].
    fn interior_point(&self, lambda: T) -> DualPoint<T> {
        let m = self.m();
        let n = self.y.len();
        let one = T::one();
        let (alpha, beta, mu_factor) = (T::lit(0.01), T::lit(0.5), T::lit(2.0));
        let max_line_search = 20;

        let mut z = vec![T::zero(); m];
        let mut mu1 = vec![one; m];
        let mut mu2 = vec![one; m];
        let mut t = T::lit(1e-10);
        let mut step = T::infinity();
        let mut dobj = T::zero();
        let mut best: Option<DualPoint<T>> = None;

        for iter in 0..self.max_iter {
            let f1: Vec<T> = z.iter().map(|&v| v - lambda).collect();
            let f2: Vec<T> = z.iter().map(|&v| -v - lambda).collect();
            let dtz = second_diff_adjoint(&z, n);
            let ddtz = second_diff(&dtz);
            let w: Vec<T> = (0..m).map(|j| self.dy[j] - (mu1[j] - mu2[j])).collect();

            let dtz_sq: T = dtz.iter().map(|&v| v * v).sum();
            let pobj1 = T::lit(0.5) * dot(&w, &self.gram.solve(&w))
                + lambda * mu1.iter().zip(&mu2).map(|(&a, &b)| a + b).sum::<T>();
            let pobj2 = T::lit(0.5) * dtz_sq
                + lambda * (0..m).map(|j| (self.dy[j] - ddtz[j]).abs()).sum::<T>();
            let pobj = pobj1.min(pobj2);
            dobj = dobj.max(-T::lit(0.5) * dtz_sq + dot(&self.dy, &z));
            let gap = pobj - dobj;

            if gap <= self.eps_gap {
                let active = (0..m)
                    .map(|j| {
                        let r = self.dy[j] - ddtz[j];
                        if lambda - z[j].abs() < r.abs() {
                            if z[j] > T::zero() {
                                1
                            } else {
                                -1
                            }
                        } else {
                            0
                        }
                    })
                    .collect();
                if let Some((u, active, _)) = self.refine(lambda, active, 25) {
                    let p = self.point(u, lambda, iter, active);
                    if p.converged {
                        return p;
                    }
                }
                let p = self.point(z.clone(), lambda, iter, vec![0; m]);
                if p.converged {
                    return p;
                }
                best = Some(p);
            }

            if step >= T::lit(0.2) {
                t = (T::lit(2.0) * T::from_index(m) * mu_factor / gap).max(T::lit(1.2) * t);
            }
            let inv_t = one / t;

            let mut system = Pentadiagonal::second_difference_gram(m);
            let extra: Vec<T> = (0..m).map(|j| -mu1[j] / f1[j] - mu2[j] / f2[j]).collect();
            system.add_to_diagonal(&extra);
            let Some(factor) = system.factor() else {
                break;
            };
            let rhs: Vec<T> = (0..m)
                .map(|j| -ddtz[j] + self.dy[j] + inv_t / f1[j] - inv_t / f2[j])
                .collect();
            let dz = factor.solve(&rhs);
            let dmu1: Vec<T> = (0..m)
                .map(|j| -(mu1[j] + (inv_t + dz[j] * mu1[j]) / f1[j]))
                .collect();
            let dmu2: Vec<T> = (0..m)
                .map(|j| -(mu2[j] + (inv_t - dz[j] * mu2[j]) / f2[j]))
                .collect();

            let residual_norm = |z: &[T], mu1: &[T], mu2: &[T], f1: &[T], f2: &[T]| -> T {
                let dd = gram_apply(z);
                let mut acc = T::zero();
                for j in 0..m {
                    let dual = dd[j] - self.dy[j] + mu1[j] - mu2[j];
                    let c1 = -mu1[j] * f1[j] - inv_t;
                    let c2 = -mu2[j] * f2[j] - inv_t;
                    acc += dual * dual + c1 * c1 + c2 * c2;
                }
                acc.sqrt()
            };
            let current = residual_norm(&z, &mu1, &mu2, &f1, &f2);

            step = one;
            for j in 0..m {
                if dmu1[j] < T::zero() {
                    step = step.min(T::lit(0.99) * (-mu1[j] / dmu1[j]));
                }
                if dmu2[j] < T::zero() {
                    step = step.min(T::lit(0.99) * (-mu2[j] / dmu2[j]));
                }
            }

            let mut accepted = None;
            for _ in 0..max_line_search {
                let nz: Vec<T> = (0..m).map(|j| z[j] + step * dz[j]).collect();
                let nmu1: Vec<T> = (0..m).map(|j| mu1[j] + step * dmu1[j]).collect();
                let nmu2: Vec<T> = (0..m).map(|j| mu2[j] + step * dmu2[j]).collect();
                let nf1: Vec<T> = nz.iter().map(|&v| v - lambda).collect();
                let nf2: Vec<T> = nz.iter().map(|&v| -v - lambda).collect();
                let strictly_feasible = nf1.iter().chain(&nf2).all(|&f| f < T::zero());
                if strictly_feasible
                    && residual_norm(&nz, &nmu1, &nmu2, &nf1, &nf2)
                        <= (one - alpha * step) * current
                {
                    accepted = Some((nz, nmu1, nmu2));
                    break;
                }
                step = beta * step;
            }
            match accepted {
                Some((nz, nmu1, nmu2)) => {
                    z = nz;
                    mu1 = nmu1;
                    mu2 = nmu2;
                }
                // Line search stalled: precision is exhausted at this λ.
                None => break,
            }
        }

        let fallback = self.point(z, lambda, self.max_iter, vec![0; m]);
        match best {
            Some(b) if b.gap <= fallback.gap => b,
            _ => fallback,
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
