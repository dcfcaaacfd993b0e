use nalgebra::{DMatrix, DVector};

/// Singular values at or below this fraction of the largest are treated as
/// zero, both for the pseudo-inverse and for the null-space basis.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// SVD of an m×n matrix with a full n×n right-singular basis.
///
/// Computed by one-sided Jacobi rotations, which stay accurate on exactly
/// rank-deficient inputs.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Left singular vectors, m×n, columns sorted by σ; zero where σ is.
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    /// Right singular vectors, n×n, columns sorted by σ.
    v: DMatrix<f64>,
    rows: usize,
    rank: usize,
}

const MAX_SWEEPS: usize = 80;

/// Orthogonalize the columns of `a` by plane rotations applied on the right,
/// returning the rotated columns `A·V` and `V`.
fn jacobi(mut a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut v = DMatrix::identity(n, n);
    // Columns this small are rounding noise of a rank-deficient matrix;
    // rotating them against each other never settles.
    let negligible = (f64::EPSILON * a.norm() * (n.max(1) as f64)).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if alpha <= negligible
                    || beta <= negligible
                    || gamma == 0.0
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for k in 0..m.nrows() {
                        let (x, y) = (m[(k, i)], m[(k, j)]);
                        m[(k, i)] = c * x - s * y;
                        m[(k, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

impl Decomposition {
    pub fn new(b: &DMatrix<f64>) -> Self {
        let (m, n) = b.shape();
        let (av, v_raw) = jacobi(b.clone());
        let norms: Vec<f64> = (0..n).map(|j| av.column(j).norm()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));

        let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
        let u = DMatrix::from_fn(m, n, |r, c| {
            let s = norms[order[c]];
            if s > 0.0 { av[(r, order[c])] / s } else { 0.0 }
        });
        let v = DMatrix::from_fn(n, n, |r, c| v_raw[(r, order[c])]);
        let sigma_max = sigma.first().copied().unwrap_or(0.0);
        let rank = sigma.iter().filter(|&&s| s > RANK_TOLERANCE * sigma_max && s > 0.0).count();
        Self { u, sigma, v, rows: m, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// `B⁺ · rhs`
    pub fn solve_least_norm(&self, rhs: &DVector<f64>) -> DVector<f64> {
        assert_eq!(rhs.len(), self.rows, "right-hand side length");
        let n = self.v.nrows();
        let mut x = DVector::zeros(n);
        for i in 0..self.rank {
            let coeff = self.u.column(i).dot(rhs) / self.sigma[i];
            x.axpy(coeff, &self.v.column(i), 1.0);
        }
        x
    }

    /// Orthonormal n×(n − rank) basis of the null space.
    pub fn null_basis(&self) -> DMatrix<f64> {
        let n = self.v.nrows();
        self.v.columns(self.rank, n - self.rank).into_owned()
    }
}

/// Minimum-norm minimizer of `‖B·x − rhs‖`.
pub fn least_norm(b: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    Decomposition::new(b).solve_least_norm(rhs)
}

/// Orthonormal basis of `null(B)`.
pub fn null_basis(b: &DMatrix<f64>) -> DMatrix<f64> {
    Decomposition::new(b).null_basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_passes_through() {
        let rhs = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]);
        assert!((least_norm(&DMatrix::identity(6, 6), &rhs) - &rhs).amax() < 1e-12);
        assert_eq!(null_basis(&DMatrix::identity(6, 6)).ncols(), 0);
    }

    #[test]
    fn symmetric_split() {
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = least_norm(&b, &DVector::from_vec(vec![2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let n = null_basis(&b);
        assert_eq!(n.ncols(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n[(0, 0)].abs() - s).abs() < 1e-12);
        assert!((n[(0, 0)] + n[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn random_wide_matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let b = DMatrix::from_fn(6, 11, |_, _| rng.random_range(-1.0..1.0));
            let x_true = DVector::from_fn(11, |_, _| rng.random_range(-1.0..1.0));
            let rhs = &b * &x_true;
            let dec = Decomposition::new(&b);
            let x = dec.solve_least_norm(&rhs);
            let n = dec.null_basis();
            assert_eq!(n.ncols(), 5);
            assert!((&b * &x - &rhs).amax() < 1e-9);
            assert!((n.transpose() * &x).amax() < 1e-9);
            assert!((&b * &n).amax() < 1e-9);
            assert!((n.transpose() * &n - DMatrix::identity(5, 5)).amax() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_and_tall() {
        // rank 2, 6×4
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let r = DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = l * r;
        let dec = Decomposition::new(&b);
        assert_eq!(dec.rank(), 2);
        assert!((&b * dec.null_basis()).amax() < 1e-12);
        // square nonsingular
        let sq = DMatrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else { 0.1 });
        assert_eq!(null_basis(&sq).ncols(), 0);
        // all zero
        assert_eq!(Decomposition::new(&DMatrix::zeros(6, 3)).rank(), 0);
    }

    #[test]
    fn rank_deficient_least_norm_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..2000 {
            let n = rng.random_range(2..=5);
            let l = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-2.0..2.0));
            let r = DMatrix::from_fn(2, n, |_, _| rng.random_range(-2.0..2.0));
            let b = l * r;
            let rhs = &b * DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let dec = Decomposition::new(&b);
            assert_eq!(dec.rank(), 2);
            let x = dec.solve_least_norm(&rhs);
            assert!((&b * &x - &rhs).amax() < 1e-12, "{}", (&b * &x - &rhs).amax());
            assert!((dec.null_basis().transpose() * &x).amax() < 1e-12);
        }
    }
}
