//! Zonal spherical harmonics: Legendre polynomials of `cos(theta)`.

/// `P_nu(cos theta)` by the standard three-term recurrence, stable on
/// `[-1, 1]` for all degrees used here.
pub fn zonal_basis(nu: usize, theta: f64) -> f64 {
    legendre(nu, theta.cos())
}

/// `P_n(x)` for `x in [-1, 1]`.
pub fn legendre(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p_prev = 1.0;
            let mut p = x;
            for k in 1..n {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = next;
            }
            p
        }
    }
}

/// Evaluates `P_0(x) .. P_max(x)` in one sweep.
pub fn legendre_all(max_degree: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    out.push(x);
    for k in 1..max_degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Derivative `P_n'(x)` away from the endpoints, used by the quadrature
/// Newton iteration.
fn legendre_prime(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let pn = legendre(n, x);
    let pn1 = legendre(n - 1, x);
    (n as f64) * (x * pn - pn1) / (x * x - 1.0)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess, then Newton
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let f = legendre(n, x);
            let fp = legendre_prime(n, x);
            let dx = f / fp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let fp = legendre_prime(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * fp * fp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_values() {
        for theta in [0.0, 0.3, 1.0, std::f64::consts::PI] {
            assert_eq!(zonal_basis(0, theta), 1.0);
            assert!((zonal_basis(1, theta) - theta.cos()).abs() < 1e-15);
        }
        // P2(1) = (3 - 1)/2 = 1
        assert!((zonal_basis(2, 0.0) - 1.0).abs() < 1e-14);
        // P2(x) = (3x^2 - 1)/2
        let x: f64 = 0.4;
        assert!((legendre(2, x) - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
        // P3(x) = (5x^3 - 3x)/2
        assert!((legendre(3, x) - (5.0 * x * x * x - 3.0 * x) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_identities_high_degree() {
        for n in [10usize, 57, 299] {
            assert!((legendre(n, 1.0) - 1.0).abs() < 1e-12);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((legendre(n, -1.0) - sign).abs() < 1e-12);
            // |P_n| <= 1 on [-1, 1]
            for i in 0..=50 {
                let x = -1.0 + 2.0 * i as f64 / 50.0;
                assert!(legendre(n, x).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn batch_matches_single() {
        let mut buf = Vec::new();
        legendre_all(25, 0.37, &mut buf);
        for (n, v) in buf.iter().enumerate() {
            assert!((v - legendre(n, 0.37)).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // exact for degree <= 15: check moments of x^k
        for k in 0..=15usize {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-13, "moment {k}: {got} vs {exact}");
        }
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
