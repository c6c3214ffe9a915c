//! Quadrature rules on the reference triangle and on intervals.

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A quadrature rule on the reference triangle {(0,0),(1,0),(0,1)} given by
/// barycentric points and weights summing to one (area-normalized).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Three-point rule exact for quadratics (edge midpoints).
    pub fn degree2() -> Self {
        TriangleRule {
            bary: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Six-point rule exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let (a, b) = (0.108103018168070, 0.445948490915965);
        let (c, d) = (0.816847572980459, 0.091576213509771);
        let (wa, wc) = (0.223381589678011, 0.109951743655322);
        TriangleRule {
            bary: vec![[a, b, b], [b, a, b], [b, b, a], [c, d, d], [d, c, d], [d, d, c]],
            weights: vec![wa, wa, wa, wc, wc, wc],
        }
    }

    /// Seven-point rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let t = 1.0 / 3.0;
        let (a, b) = (0.059715871789770, 0.470142064105115);
        let (c, d) = (0.797426985353087, 0.101286507323456);
        let (w0, wa, wc) = (0.225, 0.132394152788506, 0.125939180544827);
        TriangleRule {
            bary: vec![[t, t, t], [a, b, b], [b, a, b], [b, b, a], [c, d, d], [d, c, d], [d, d, c]],
            weights: vec![w0, wa, wa, wa, wc, wc, wc],
        }
    }

    /// Collapsed tensor Gauss rule with n×n points, exact for degree 2n − 2.
    pub fn collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut bary = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = 0.5 * (x[i] + 1.0);
            for j in 0..n {
                let v = 0.5 * (x[j] + 1.0);
                let l1 = u;
                let l2 = (1.0 - u) * v;
                bary.push([1.0 - l1 - l2, l1, l2]);
                // Jacobian (1 − u) and reference area 1/2.
                weights.push(0.25 * w[i] * w[j] * (1.0 - u) * 2.0);
            }
        }
        TriangleRule { bary, weights }
    }

    /// Rule selected by polynomial degree.
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0..=2 => Self::degree2(),
            3..=4 => Self::degree4(),
            5 => Self::degree5(),
            d => Self::collapsed(d / 2 + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &TriangleRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        0.5 * rule
            .bary
            .iter()
            .zip(&rule.weights)
            .map(|(b, w)| w * f(b[1], b[2]))
            .sum::<f64>()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rules_exactness() {
        // ∫ x^a y^b over the reference triangle = a! b! / (a + b + 2)!.
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        for (rule, deg) in [
            (TriangleRule::degree2(), 2u32),
            (TriangleRule::degree4(), 4),
            (TriangleRule::degree5(), 5),
            (TriangleRule::collapsed(6), 10),
        ] {
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let q = integrate(&rule, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((q - exact).abs() < 1e-12, "deg {} a {} b {}", deg, a, b);
                }
            }
        }
    }
}
