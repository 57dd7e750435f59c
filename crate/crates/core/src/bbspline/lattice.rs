//! Barycentric index lattices and the Bernstein recurrences shared by
//! evaluation and basis-row construction.

/// Number of Bernstein polynomials of degree `d` on a triangle.
#[inline]
pub const fn dim(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Position of the multi-index `(i, j, d-i-j)` in the lexicographic order
/// with `i` decreasing, then `j` decreasing.
#[inline]
pub const fn idx(d: usize, i: usize, j: usize) -> usize {
    (d - i) * (d - i + 1) / 2 + (d - i - j)
}

/// All multi-indices of degree `d` in storage order.
pub fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push([i, j, d - i - j]);
        }
    }
    out
}

/// One step of coefficient reduction from degree `d` to `d-1`:
/// `c'_β = a₁ c_{β+e₁} + a₂ c_{β+e₂} + a₃ c_{β+e₃}`.
///
/// With `a` = barycentric coordinates this is a de Casteljau step; with `a`
/// = the directional derivative of the barycentric coordinates it is a
/// (scaled) derivative.
pub fn reduce(c: &[f64], d: usize, a: [f64; 3]) -> Vec<f64> {
    debug_assert_eq!(c.len(), dim(d));
    let mut out = Vec::with_capacity(dim(d - 1));
    for i in (0..d).rev() {
        for j in (0..d - i).rev() {
            out.push(
                a[0] * c[idx(d, i + 1, j)] + a[1] * c[idx(d, i, j + 1)] + a[2] * c[idx(d, i, j)],
            );
        }
    }
    out
}

/// Adjoint of [`reduce`]: lifts weights of degree `d` to `d+1` by
/// `w'_γ = Σ_{γ_i > 0} a_i w_{γ-e_i}`.
pub fn raise(w: &[f64], d: usize, a: [f64; 3]) -> Vec<f64> {
    debug_assert_eq!(w.len(), dim(d));
    let e = d + 1;
    let mut out = Vec::with_capacity(dim(e));
    for i in (0..=e).rev() {
        for j in (0..=e - i).rev() {
            let k = e - i - j;
            let mut v = 0.0;
            if i > 0 {
                v += a[0] * w[idx(d, i - 1, j)];
            }
            if j > 0 {
                v += a[1] * w[idx(d, i, j - 1)];
            }
            if k > 0 {
                v += a[2] * w[idx(d, i, j)];
            }
            out.push(v);
        }
    }
    out
}

/// All Bernstein basis values of degree `d` at barycentric point `lambda`.
pub fn bernstein(d: usize, lambda: [f64; 3]) -> Vec<f64> {
    let mut w = vec![1.0];
    for k in 0..d {
        w = raise(&w, k, lambda);
    }
    w
}

/// Falling factorial `d (d-1) ... (d-n+1)`.
#[inline]
pub fn falling(d: usize, n: usize) -> f64 {
    (0..n).map(|k| (d - k) as f64).product()
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_enumeration() {
        for d in 0..12 {
            let mi = multi_indices(d);
            assert_eq!(mi.len(), dim(d));
            for (pos, [i, j, k]) in mi.iter().copied().enumerate() {
                assert_eq!(i + j + k, d);
                assert_eq!(idx(d, i, j), pos);
            }
        }
    }

    #[test]
    fn bernstein_matches_closed_form() {
        let lam: [f64; 3] = [0.2, 0.3, 0.5];
        let d = 5;
        let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
        for (pos, [i, j, k]) in multi_indices(d).into_iter().enumerate() {
            let exact = fact(d) / (fact(i) * fact(j) * fact(k))
                * lam[0].powi(i as i32)
                * lam[1].powi(j as i32)
                * lam[2].powi(k as i32);
            assert!((bernstein(d, lam)[pos] - exact).abs() < 1e-14);
        }
        let s: f64 = bernstein(9, lam).iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn raise_is_adjoint_of_reduce() {
        let d = 6;
        let a = [0.7, -0.2, 1.3];
        let c: Vec<f64> = (0..dim(d)).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..dim(d - 1)).map(|i| (i as f64 * 0.91).cos()).collect();
        let lhs: f64 = reduce(&c, d, a).iter().zip(&w).map(|(x, y)| x * y).sum();
        let rhs: f64 = raise(&w, d - 1, a).iter().zip(&c).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 2), 45.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(falling(8, 2), 56.0);
    }
}
