//! Finite-difference stencils, quadrature and small least-squares fits.

/// Fornberg weights for derivatives 0..=m at `x0` from nodes `xs`.
/// Returns `w[k][j]`, the weight of node `j` in the `k`-th derivative.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of samples `u` over a (possibly nonuniform)
/// grid `x`, using a `width`-point stencil (odd), shifted inward at the ends.
pub fn derivatives(x: &[f64], u: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    assert_eq!(n, u.len());
    assert!(width % 2 == 1 && n >= width);
    let half = width / 2;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(half).min(n - width);
        let w = fornberg(x[i], &x[lo..lo + width], 2);
        let (mut a, mut b) = (0.0, 0.0);
        for j in 0..width {
            a += w[1][j] * u[lo + j];
            b += w[2][j] * u[lo + j];
        }
        d1[i] = a;
        d2[i] = b;
    }
    (d1, d2)
}

/// Derivatives with a grid stride: uses every `stride`-th neighbour, keeping
/// the evaluation points. Used for refinement studies.
pub fn derivatives_strided(x: &[f64], u: &[f64], width: usize, stride: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = (width / 2) * stride;
    let mut d1 = vec![f64::NAN; n];
    let mut d2 = vec![f64::NAN; n];
    for i in half..n.saturating_sub(half) {
        let idx: Vec<usize> = (0..width).map(|j| i - half + j * stride).collect();
        let xs: Vec<f64> = idx.iter().map(|&j| x[j]).collect();
        let w = fornberg(x[i], &xs, 2);
        let (mut a, mut b) = (0.0, 0.0);
        for (k, &j) in idx.iter().enumerate() {
            a += w[1][k] * u[j];
            b += w[2][k] * u[j];
        }
        d1[i] = a;
        d2[i] = b;
    }
    (d1, d2)
}

/// Composite trapezoid rule.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

/// Cumulative integral; each interval integrates the quadratic through
/// three neighbouring samples.
pub fn cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        }
        return out;
    }
    for i in 1..n {
        let lo = if i + 1 < n { i - 1 } else { i - 2 };
        let xs = &x[lo..lo + 3];
        let ys = &y[lo..lo + 3];
        out[i] = out[i - 1] + quad_integral(xs, ys, x[i - 1], x[i]);
    }
    out
}

fn quad_integral(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    // Two-point Gauss rule on the Lagrange interpolant, exact for quadratics.
    let lagrange = |t: f64| -> f64 {
        (0..3)
            .map(|j| {
                let mut v = ys[j];
                for k in 0..3 {
                    if k != j {
                        v *= (t - xs[k]) / (xs[j] - xs[k]);
                    }
                }
                v
            })
            .sum()
    };
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g = half / 3f64.sqrt();
    half * (lagrange(mid - g) + lagrange(mid + g))
}

/// Ordinary least squares for `y ≈ X β` via normal equations with Gaussian
/// elimination (tiny systems only). Returns coefficients and residual
/// standard errors of each coefficient.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = rows.first()?.len();
    let n = rows.len();
    if n <= m {
        return None;
    }
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..m {
            b[i] += r[i] * yi;
            for j in 0..m {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    let inv = invert(&a)?;
    let beta: Vec<f64> = (0..m).map(|i| (0..m).map(|j| inv[i][j] * b[j]).sum()).collect();
    let rss: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, &yi)| {
            let p: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yi - p).powi(2)
        })
        .sum();
    let s2 = rss / (n - m) as f64;
    let se = (0..m).map(|i| (s2 * inv[i][i]).max(0.0).sqrt()).collect();
    Some((beta, se))
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for i in 0..m {
            if i != col {
                let factor = aug[i][col];
                if factor != 0.0 {
                    for j in 0..2 * m {
                        aug[i][j] -= factor * aug[col][j];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[m..].to_vec()).collect())
}

/// Slope of log|y| against log x with its standard error.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&xi| vec![1.0, xi.ln()]).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    if ly.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let (b, se) = least_squares(&rows, &ly)?;
    Some((b[1], se[1]))
}

/// Time-derivative weights at offset 0 for the stencil offsets `k·dt`.
pub fn stencil_weights(offsets: &[f64]) -> Vec<f64> {
    fornberg(0.0, offsets, 1)[1].clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_five_point() {
        let w = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let expect1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let expect2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - expect1[j]).abs() < 1e-14);
            assert!((w[2][j] - expect2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_of_polynomial_on_nonuniform_grid() {
        let x: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64 * 0.1).powf(1.3)).collect();
        let u: Vec<f64> = x.iter().map(|v| v * v * v - 2.0 * v).collect();
        let (d1, d2) = derivatives(&x, &u, 5);
        for i in 0..x.len() {
            assert!((d1[i] - (3.0 * x[i] * x[i] - 2.0)).abs() < 1e-9);
            assert!((d2[i] - 6.0 * x[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cumulative_quadratics_exact() {
        let x: Vec<f64> = (0..11).map(|i| (i as f64).sqrt()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v + 1.0).collect();
        let c = cumulative(&x, &y);
        let last = *x.last().unwrap();
        assert!((c[10] - (last.powi(3) + last)).abs() < 1e-12, "{}", c[10] - (last.powi(3) + last));
    }

    #[test]
    fn loglog_recovers_power() {
        let x: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-2.5)).collect();
        let (p, se) = loglog_slope(&x, &y).unwrap();
        assert!((p + 2.5).abs() < 1e-10 && se < 1e-8);
    }
}
