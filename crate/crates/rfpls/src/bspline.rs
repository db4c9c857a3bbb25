//! Clamped B-spline bases: evaluation by the span-local Cox–de Boor scheme,
//! and Gram matrices of basis inner products with their symmetric square
//! roots.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RfplsError};
use crate::funcdata::Grid;
use crate::linalg::{sym_eigen, sym_sqrt_pair};

/// A clamped B-spline basis of `num_basis` functions of the given order
/// (order = polynomial degree + 1) on a closed interval, with equally spaced
/// interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsplineBasis {
    order: usize,
    num_basis: usize,
    domain: (f64, f64),
    interior_knots: Vec<f64>,
    /// Full knot vector: `order` copies of each boundary around the interior
    /// knots. Stored so evaluation never rebuilds it.
    knots: Vec<f64>,
}

impl BsplineBasis {
    pub fn new(num_basis: usize, order: usize, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        if order < 1 {
            return Err(RfplsError::invalid("spline order must be at least 1"));
        }
        if num_basis < order {
            return Err(RfplsError::invalid(format!(
                "need at least as many basis functions as the order; got {num_basis} < {order}"
            )));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(RfplsError::invalid("basis domain must be finite with lower < upper"));
        }
        let n_interior = num_basis - order;
        let step = (b - a) / (n_interior as f64 + 1.0);
        let interior_knots: Vec<f64> = (1..=n_interior).map(|i| a + step * i as f64).collect();
        let mut knots = Vec::with_capacity(num_basis + order);
        knots.extend(std::iter::repeat(a).take(order));
        knots.extend(interior_knots.iter().copied());
        knots.extend(std::iter::repeat(b).take(order));
        Ok(BsplineBasis {
            order,
            num_basis,
            domain,
            interior_knots,
            knots,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    fn check_in_domain(&self, x: f64) -> Result<f64> {
        let (a, b) = self.domain;
        let tol = 1e-12 * (b - a).abs();
        if x < a - tol || x > b + tol || !x.is_finite() {
            return Err(RfplsError::numerical(format!(
                "point {x} lies outside the basis domain [{a}, {b}]"
            )));
        }
        Ok(x.clamp(a, b))
    }

    /// Index `mu` of the knot span containing `x`, restricted to spans of
    /// positive width; `x = b` maps to the last span.
    fn find_span(&self, x: f64) -> usize {
        let last = self.num_basis - 1;
        if x >= self.domain.1 {
            return last;
        }
        // Knots are sorted; search within the valid span range.
        let mut lo = self.order - 1;
        let mut hi = last;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// All `num_basis` basis functions at a single point.
    pub fn evaluate(&self, x: f64) -> Result<Array1<f64>> {
        let x = self.check_in_domain(x)?;
        let span = self.find_span(x);
        let degree = self.order - 1;
        // Span-local triangular recurrence: only the `order` functions with
        // support over this span are nonzero.
        let mut local = vec![0.0; self.order];
        let mut left = vec![0.0; self.order];
        let mut right = vec![0.0; self.order];
        local[0] = 1.0;
        for j in 1..=degree {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = local[r] / (right[r + 1] + left[j - r]);
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        let mut out = Array1::zeros(self.num_basis);
        for (offset, v) in local.iter().enumerate() {
            out[span - degree + offset] = *v;
        }
        Ok(out)
    }

    /// Basis evaluated on a whole grid; row `j` holds the basis functions at
    /// grid point `j`.
    pub fn evaluate_matrix(&self, grid: &Grid) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((grid.len(), self.num_basis));
        for (j, &x) in grid.points().iter().enumerate() {
            let row = self.evaluate(x)?;
            out.row_mut(j).assign(&row);
        }
        Ok(out)
    }

    /// Gram matrix of pairwise basis inner products over the domain, with its
    /// symmetric square root and inverse square root.
    ///
    /// Integration is Gauss–Legendre per knot span with `order` nodes, exact
    /// for the degree-`2(order-1)` polynomial products of basis functions.
    pub fn gram(&self) -> Result<GramMatrix> {
        let k = self.num_basis;
        let (nodes, weights) = gauss_legendre(self.order);
        let mut matrix = Array2::zeros((k, k));
        for span in (self.order - 1)..self.num_basis {
            let lo = self.knots[span];
            let hi = self.knots[span + 1];
            if hi <= lo {
                continue;
            }
            let half = (hi - lo) / 2.0;
            let mid = (hi + lo) / 2.0;
            for (node, weight) in nodes.iter().zip(weights.iter()) {
                let x = mid + half * node;
                let vals = self.evaluate(x)?;
                let w = weight * half;
                // Only the `order` span-local functions are nonzero at x.
                let first = span + 1 - self.order;
                for i in first..=span {
                    for j in first..=span {
                        matrix[[i, j]] += w * vals[i] * vals[j];
                    }
                }
            }
        }
        GramMatrix::from_matrix(matrix)
    }
}

/// Inner-product matrix of a basis with its symmetric square root and the
/// inverse of that root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramMatrix {
    pub matrix: Array2<f64>,
    pub sqrt: Array2<f64>,
    pub inv_sqrt: Array2<f64>,
}

impl GramMatrix {
    /// Builds the square-root pair from a symmetric positive-definite matrix.
    /// Eigenvalues are floored at `1e-12 * lambda_max` to guard nearly
    /// singular inputs.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let (values, _) = sym_eigen(&matrix)?;
        let k = values.len();
        if values[0] <= 0.0 {
            return Err(RfplsError::numerical(format!(
                "Gram matrix is not positive definite (eigenvalue range [{:.3e}, {:.3e}])",
                values[0],
                values[k - 1]
            )));
        }
        let (sqrt, inv_sqrt) = sym_sqrt_pair(&matrix)?;
        Ok(GramMatrix {
            matrix,
            sqrt,
            inv_sqrt,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial; exact for polynomials of degree
/// `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and its derivative by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            if n == 1 {
                // P_1(x) = x: the root is exactly 0.
                x = 0.0;
                dp = 1.0;
                break;
            }
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = if n == 1 { 2.0 } else { 2.0 / ((1.0 - x * x) * dp * dp) };
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
