//! Small numeric kernels: Gauss-Legendre quadrature, a cyclic Jacobi
//! eigensolver for symmetric matrices, compensated summation, and running
//! mean/CI statistics. Everything here is allocation-light and `no_std`.

use alloc::vec;
use alloc::vec::Vec;

/// Two-sided z value for a 99% confidence interval.
pub const Z99: f64 = 2.575_829_303_548_901;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence; the rule
/// integrates polynomials up to degree 2n-1 exactly.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        for _ in 0..60 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if libm::fabs(dx) < 1e-15 {
                break;
            }
        }
        // polish once more so the weight uses a consistent derivative
        let (p, dp) = legendre_with_derivative(n, x);
        x -= p / dp;
        let deriv = legendre_with_derivative(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = 0.0;
    for j in 0..n {
        let p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
    }
    let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
    (p0, dp)
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels`
/// equal subintervals and `nodes` points per panel.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    nodes: usize,
    panels: usize,
) -> f64 {
    assert!(panels >= 1);
    let (xs, ws) = gauss_legendre_nodes(nodes);
    let width = (b - a) / panels as f64;
    let mut total = KahanSum::new();
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let scale = 0.5 * width;
        for (x, w) in xs.iter().zip(ws.iter()) {
            total.add(scale * w * f(mid + scale * x));
        }
    }
    total.value()
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
///
/// Intended for the small (k <= ~16) matrices produced by the Hessian
/// checks; returns the eigenvalues in ascending order.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    for row in matrix {
        assert_eq!(row.len(), n, "matrix must be square");
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0, |acc, &x| acc + x * x);
    let tol = 1e-30 * scale.max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    eigs
}

/// Kahan compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Welford running mean / variance, used for Monte Carlo confidence bands.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n-1 denominator); 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.n as f64)
        }
    }

    /// Half-width of the two-sided CI at the given z value.
    pub fn ci_halfwidth(&self, z: f64) -> f64 {
        z * self.std_err()
    }
}

/// Double-double value: an unevaluated sum `hi + lo` with |lo| <= ulp(hi)/2.
///
/// Used where an identity must be verified well below f64 round-off, e.g.
/// the Gram reconstruction of the exploit-phase Hessian.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let e = libm::fma(a, b, -p);
    Dd { hi: p, lo: e }
}

impl Dd {
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Dd) -> Dd {
        let s = two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        two_sum(s.hi, lo)
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    pub fn mul(self, other: Dd) -> Dd {
        let p = two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        two_sum(p.hi, lo)
    }

    /// Square root refined by one Newton step in double-double.
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::from_f64(0.0);
        }
        let y = libm::sqrt(self.hi);
        let y_dd = Dd::from_f64(y);
        let residual = self.sub(y_dd.mul(y_dd));
        let correction = residual.hi / (2.0 * y);
        two_sum(y, correction)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        // n-node Gauss-Legendre is exact through degree 2n-1
        for n in 2..=10 {
            let deg = 2 * n - 1;
            let exact = 1.0 / (deg as f64 + 1.0);
            let got = integrate(|x| libm::pow(x, deg as f64), 0.0, 1.0, n, 1);
            assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_matches_single_panel() {
        let f = |x: f64| libm::exp(-x) * (1.0 + x * x);
        let one = integrate(f, 0.0, 1.0, 16, 1);
        let four = integrate(f, 0.0, 1.0, 8, 4);
        assert_abs_diff_eq!(one, four, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_matches_hand_eigenvalues() {
        let m = vec![vec![6.0, 3.0], vec![3.0, 6.0]];
        let eigs = symmetric_eigenvalues(&m);
        assert_abs_diff_eq!(eigs[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 9.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_diagonal_passthrough() {
        let m = vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ];
        let eigs = symmetric_eigenvalues(&m);
        assert_eq!(eigs, vec![-1.0, 0.5, 2.0]);
    }

    #[test]
    fn dd_sqrt_squares_back() {
        let x = Dd::from_f64(2.0);
        let r = x.sqrt();
        let back = r.mul(r).sub(x);
        assert!(libm::fabs(back.to_f64()) < 1e-30);
    }

    #[test]
    fn running_stats_known_values() {
        let mut s = RunningStats::new();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.push(x);
        }
        assert_abs_diff_eq!(s.mean(), 2.5);
        assert_abs_diff_eq!(s.variance(), 5.0 / 3.0, epsilon = 1e-15);
    }
}
