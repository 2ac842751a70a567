//! Graph Fourier analysis: eigenbases, the GFT and its inverse, the twin
//! transform on Cartesian product graphs, generalized translation, and
//! spectral filtering.
//!
//! A node signal `f` expands in the orthonormal Laplacian eigenbasis as
//! `f_hat = U^T f`; eigenvalues play the role of frequencies. On a Cartesian
//! product graph the same expansion factorizes into the twin transform
//! `F_hat = U1^T F U2` over the two factor bases.
//!
//! One caveat carries through everything here: when eigenvalues repeat, the
//! eigenbasis (and so the GFT itself) is not unique. The basis returned by
//! [`eigendecompose`] is made reproducible by a sign convention, and tests of
//! filtering behaviour are stated against spectral maps `h(lambda)` that are
//! constant on multiplicity groups, which makes them basis-independent.

mod eigen;

pub use eigen::{
    deflated_spectrum, eigendecompose, power_iteration, PowerIterationResult, DEFAULT_POWER_EPS,
    DEFAULT_POWER_MAX_ITERS, MAX_JACOBI_SWEEPS,
};

use ndarray::{Array1, Array2};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Jacobi sweep limit reached after {sweeps} sweeps")]
    JacobiNoConvergence { sweeps: usize },

    #[error("power iteration hit the {0}-iteration cap (eigengap too small?)")]
    PowerMaxIterations(usize),

    #[error("power iteration produced a zero vector (start orthogonal to dominant eigenspace?)")]
    PowerZeroVector,

    #[error("start vector has norm {0}, expected unit norm")]
    NotUnitNorm(f64),

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Orthonormal eigenbasis of a symmetric matrix.
///
/// Eigenvalues are ascending; column `k` of `u` is the eigenvector for
/// `eigenvalues[k]`. Indices whose eigenvalues agree within the grouping
/// tolerance are collected into multiplicity groups; any spectral map that is
/// constant on each group acts independently of the basis choice inside it.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    u: Array2<f64>,
    multiplicity_groups: Vec<Range<usize>>,
}

impl SpectralBasis {
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, u: Array2<f64>, group_tol: f64) -> Self {
        let mut groups = Vec::new();
        let n = eigenvalues.len();
        let mut start = 0;
        for k in 1..=n {
            if k == n || (eigenvalues[k] - eigenvalues[k - 1]).abs() > group_tol {
                groups.push(start..k);
                start = k;
            }
        }
        SpectralBasis { eigenvalues, u, multiplicity_groups: groups }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    /// Largest eigenvalue (the spectral radius for a Laplacian basis).
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn multiplicity_groups(&self) -> &[Range<usize>] {
        &self.multiplicity_groups
    }

    /// `max |U^T U - I|`; a diagnostic for orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.u.t().dot(&self.u);
        let n = self.n();
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[[i, j]] - target).abs());
            }
        }
        defect
    }
}

/// Graph Fourier transform: `f_hat[k] = sum_i f(i) u_k(i) = (U^T f)[k]`.
pub fn gft(basis: &SpectralBasis, f: &Array1<f64>) -> Result<Array1<f64>, SpectralError> {
    if f.len() != basis.n() {
        return Err(SpectralError::DimensionMismatch { expected: basis.n(), got: f.len() });
    }
    Ok(basis.u.t().dot(f))
}

/// Inverse GFT: `f(i) = sum_k f_hat[k] u_k(i) = (U f_hat)(i)`.
pub fn igft(basis: &SpectralBasis, f_hat: &Array1<f64>) -> Result<Array1<f64>, SpectralError> {
    if f_hat.len() != basis.n() {
        return Err(SpectralError::DimensionMismatch { expected: basis.n(), got: f_hat.len() });
    }
    Ok(basis.u.dot(f_hat))
}

/// Twin GFT of a two-dimensional signal on a Cartesian product graph:
/// `F_hat = U1^T F U2`. Entry `(k1, k2)` is the coefficient at frequency
/// `lambda1[k1] + lambda2[k2]`. Real arithmetic throughout; the conjugation
/// in the complex statement is the identity here.
pub fn twin_gft(
    b1: &SpectralBasis,
    b2: &SpectralBasis,
    f: &Array2<f64>,
) -> Result<Array2<f64>, SpectralError> {
    check_twin_dims(b1, b2, f)?;
    Ok(b1.u.t().dot(f).dot(&b2.u))
}

/// Inverse twin GFT: `F = U1 F_hat U2^T`.
pub fn twin_igft(
    b1: &SpectralBasis,
    b2: &SpectralBasis,
    f_hat: &Array2<f64>,
) -> Result<Array2<f64>, SpectralError> {
    check_twin_dims(b1, b2, f_hat)?;
    Ok(b1.u.dot(f_hat).dot(&b2.u.t()))
}

fn check_twin_dims(b1: &SpectralBasis, b2: &SpectralBasis, f: &Array2<f64>) -> Result<(), SpectralError> {
    if f.nrows() != b1.n() {
        return Err(SpectralError::DimensionMismatch { expected: b1.n(), got: f.nrows() });
    }
    if f.ncols() != b2.n() {
        return Err(SpectralError::DimensionMismatch { expected: b2.n(), got: f.ncols() });
    }
    Ok(())
}

/// Generalized translation of a spectral kernel to node `i`:
/// `T_i(g)(.) = sqrt(n) * sum_l u_l(.) u_l(i) g_hat(lambda_l)`.
pub fn translate(
    basis: &SpectralBasis,
    g_hat: &Array1<f64>,
    i: usize,
) -> Result<Array1<f64>, SpectralError> {
    let n = basis.n();
    if g_hat.len() != n {
        return Err(SpectralError::DimensionMismatch { expected: n, got: g_hat.len() });
    }
    if i >= n {
        return Err(SpectralError::IndexOutOfRange { index: i, n });
    }
    let row_i = basis.u.row(i);
    let scaled = Array1::from_shape_fn(n, |l| row_i[l] * g_hat[l]);
    Ok(basis.u.dot(&scaled) * (n as f64).sqrt())
}

/// Apply the spectral filter `h` to each column of `x`:
/// `x' = U h(Lambda) U^T x`.
pub fn spectral_filter_apply(
    basis: &SpectralBasis,
    h: impl Fn(f64) -> f64,
    x: &Array2<f64>,
) -> Result<Array2<f64>, SpectralError> {
    if x.nrows() != basis.n() {
        return Err(SpectralError::DimensionMismatch { expected: basis.n(), got: x.nrows() });
    }
    let mut spectrum = basis.u.t().dot(x);
    for (k, mut row) in spectrum.rows_mut().into_iter().enumerate() {
        let gain = h(basis.eigenvalues[k]);
        row.mapv_inplace(|v| v * gain);
    }
    Ok(basis.u.dot(&spectrum))
}

/// Vector form of [`spectral_filter_apply`].
pub fn spectral_filter_apply_vec(
    basis: &SpectralBasis,
    h: impl Fn(f64) -> f64,
    x: &Array1<f64>,
) -> Result<Array1<f64>, SpectralError> {
    let matrix = x.clone().insert_axis(ndarray::Axis(1));
    let filtered = spectral_filter_apply(basis, h, &matrix)?;
    Ok(filtered.index_axis(ndarray::Axis(1), 0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{kronecker_product, Graph};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle_basis(n: usize) -> SpectralBasis {
        eigendecompose(&Graph::cycle(n).unwrap().laplacian()).unwrap()
    }

    #[test]
    fn gft_of_constant_signal_concentrates_at_zero_frequency() {
        let basis = cycle_basis(5);
        let c = 2.5;
        let f = Array1::from_elem(5, c);
        let f_hat = gft(&basis, &f).unwrap();
        assert!((f_hat[0] - c * 5f64.sqrt()).abs() < 1e-9);
        for k in 1..5 {
            assert!(f_hat[k].abs() < 1e-9);
        }
    }

    #[test]
    fn gft_of_eigenvector_is_unit_coefficient() {
        let basis = cycle_basis(6);
        let f = basis.u().column(3).to_owned();
        let f_hat = gft(&basis, &f).unwrap();
        for k in 0..6 {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((f_hat[k] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn igft_trivial_cases() {
        let basis = cycle_basis(4);
        let zero = Array1::<f64>::zeros(4);
        assert_eq!(igft(&basis, &zero).unwrap(), zero);
        let mut e2 = Array1::zeros(4);
        e2[2] = 1.0;
        let back = igft(&basis, &e2).unwrap();
        for i in 0..4 {
            assert!((back[i] - basis.u()[[i, 2]]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let basis = cycle_basis(4);
        assert!(matches!(
            gft(&basis, &Array1::zeros(3)),
            Err(SpectralError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn twin_gft_of_rank_one_eigenpair_is_a_single_coefficient() {
        let b1 = cycle_basis(4);
        let b2 = eigendecompose(&Graph::path(3).unwrap().laplacian()).unwrap();
        let (a, b) = (2, 1);
        let f = {
            let ua = b1.u().column(a).to_owned().insert_axis(ndarray::Axis(1));
            let ub = b2.u().column(b).to_owned().insert_axis(ndarray::Axis(0));
            ua.dot(&ub)
        };
        let f_hat = twin_gft(&b1, &b2, &f).unwrap();
        for k1 in 0..4 {
            for k2 in 0..3 {
                let want = if (k1, k2) == (a, b) { 1.0 } else { 0.0 };
                assert!((f_hat[[k1, k2]] - want).abs() < 1e-9);
            }
        }
        // Zero in, zero out.
        let zero = Array2::<f64>::zeros((4, 3));
        assert_eq!(twin_gft(&b1, &b2, &zero).unwrap(), zero);
    }

    #[test]
    fn twin_gft_matches_product_graph_gft_built_from_kronecker_eigenvectors() {
        // Vectorizing F lexicographically and expanding in the basis
        // {u1_k1 (x) u2_k2} must reproduce vec(F_hat).
        let g1 = Graph::path(3).unwrap();
        let g2 = Graph::cycle(4).unwrap();
        let b1 = eigendecompose(&g1.laplacian()).unwrap();
        let b2 = eigendecompose(&g2.laplacian()).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
        let f_hat = twin_gft(&b1, &b2, &f).unwrap();

        let f_vec = Array1::from_iter(f.iter().copied());
        for k1 in 0..3 {
            for k2 in 0..4 {
                let u1 = b1.u().column(k1).to_owned().insert_axis(ndarray::Axis(1));
                let u2 = b2.u().column(k2).to_owned().insert_axis(ndarray::Axis(1));
                let kron = kronecker_product(u1.view(), u2.view()).unwrap();
                let coeff = kron.column(0).dot(&f_vec);
                assert!((coeff - f_hat[[k1, k2]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn twin_round_trip_and_rank_one_synthesis() {
        let b1 = eigendecompose(&Graph::path(5).unwrap().laplacian()).unwrap();
        let b2 = eigendecompose(&Graph::path(7).unwrap().laplacian()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = Array2::from_shape_fn((5, 7), |_| rng.gen_range(-2.0..2.0));
        let back = twin_igft(&b1, &b2, &twin_gft(&b1, &b2, &f).unwrap()).unwrap();
        for (x, y) in f.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-9);
        }

        let mut single = Array2::zeros((5, 7));
        single[[2, 3]] = 1.0;
        let f = twin_igft(&b1, &b2, &single).unwrap();
        for i1 in 0..5 {
            for i2 in 0..7 {
                let want = b1.u()[[i1, 2]] * b2.u()[[i2, 3]];
                assert!((f[[i1, i2]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translate_with_all_pass_kernel_gives_node_indicator() {
        let basis = cycle_basis(6);
        let g_hat = Array1::from_elem(6, 1.0 / 6f64.sqrt());
        for i in 0..6 {
            let t = translate(&basis, &g_hat, i).unwrap();
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t[j] - want).abs() < 1e-9, "T_{i} at {j}");
            }
        }
    }

    #[test]
    fn translate_of_dc_only_kernel_is_constant() {
        let basis = cycle_basis(5);
        let mut g_hat = Array1::zeros(5);
        g_hat[0] = 0.7;
        let i = 2;
        let t = translate(&basis, &g_hat, i).unwrap();
        let expected = 5f64.sqrt() * basis.u()[[i, 0]] * 0.7 / 5f64.sqrt();
        // u_0 is constant 1/sqrt(5); every entry equals sqrt(5)*u_0(i)*g_hat*u_0(j).
        for j in 0..5 {
            let want = expected * 5f64.sqrt() * basis.u()[[j, 0]];
            assert!((t[j] - want).abs() < 1e-9);
        }
        assert!(t.iter().all(|&x| (x - t[0]).abs() < 1e-9));
    }

    #[test]
    fn translate_checks_node_index() {
        let basis = cycle_basis(4);
        assert!(matches!(
            translate(&basis, &Array1::zeros(4), 4),
            Err(SpectralError::IndexOutOfRange { index: 4, n: 4 })
        ));
    }

    #[test]
    fn identity_filter_is_identity() {
        let basis = cycle_basis(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((8, 3), |_| rng.gen_range(-1.0..1.0));
        let filtered = spectral_filter_apply(&basis, |_| 1.0, &x).unwrap();
        for (a, b) in x.iter().zip(filtered.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn filtering_an_eigenvector_scales_it() {
        let basis = cycle_basis(6);
        let k = 4;
        let x = basis.u().column(k).to_owned();
        let h = |l: f64| 0.5 * l * l - 1.0;
        let filtered = spectral_filter_apply_vec(&basis, h, &x).unwrap();
        let gain = h(basis.eigenvalues()[k]);
        for i in 0..6 {
            assert!((filtered[i] - gain * x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_spectral_map_reproduces_laplacian_action() {
        let g = Graph::from_edges(5, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (4, 0, 0.25)]).unwrap();
        let l = g.laplacian();
        let basis = eigendecompose(&l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((5, 2), |_| rng.gen_range(-1.0..1.0));
        let filtered = spectral_filter_apply(&basis, |l| l, &x).unwrap();
        let direct = l.as_array().dot(&x);
        for (a, b) in filtered.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kronecker_sum_eigenvalues_are_pairwise_sums() {
        let g1 = Graph::path(4).unwrap();
        let g2 = Graph::cycle(3).unwrap();
        let b1 = eigendecompose(&g1.laplacian()).unwrap();
        let b2 = eigendecompose(&g2.laplacian()).unwrap();
        let sum = g1.laplacian().kronecker_sum(&g2.laplacian()).unwrap();
        let combined = eigendecompose(&sum).unwrap();

        let mut expected: Vec<f64> = b1
            .eigenvalues()
            .iter()
            .flat_map(|&l1| b2.eigenvalues().iter().map(move |&l2| l1 + l2))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in combined.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    /// Complex DFT oracle for circulant filtering on a cycle graph: the GFT
    /// on C_N agrees with the classical discrete Fourier transform, so
    /// filtering by h(lambda) must match frequency-domain multiplication
    /// with h(2 - 2cos(2 pi k / N)).
    pub(crate) fn dft_filter_oracle(h: impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let nf = n as f64;
        let mut spectrum: Vec<(f64, f64)> = Vec::with_capacity(n);
        for k in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &xj) in x.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * j) as f64 / nf;
                re += xj * angle.cos();
                im += xj * angle.sin();
            }
            let lambda = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / nf).cos();
            let gain = h(lambda);
            spectrum.push((re * gain, im * gain));
        }
        (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for (k, &(re, im)) in spectrum.iter().enumerate() {
                    let angle = 2.0 * std::f64::consts::PI * (k * j) as f64 / nf;
                    acc += re * angle.cos() - im * angle.sin();
                }
                acc / nf
            })
            .collect()
    }

    #[test]
    fn cycle_filtering_matches_dft_oracle() {
        let n = 8;
        let basis = cycle_basis(n);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = |l: f64| (-0.7 * l).exp() + 0.1 * l;
        let filtered = spectral_filter_apply_vec(&basis, h, &Array1::from_vec(x.clone())).unwrap();
        let oracle = dft_filter_oracle(h, &x);
        for (a, b) in filtered.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn translation_on_cycle_behaves_like_circular_shift_through_filtering() {
        // Basis-independent form: filtering with a smooth kernel h and then
        // reading row i equals the DFT oracle output at i, for every i, so
        // the translated kernels are circular shifts of one another.
        let n = 8;
        let basis = cycle_basis(n);
        let h = |l: f64| 1.0 / (1.0 + l);
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let filtered = spectral_filter_apply_vec(&basis, h, &Array1::from_vec(x.clone())).unwrap();
        let oracle = dft_filter_oracle(h, &x);
        for i in 0..n {
            assert!((filtered[i] - oracle[i]).abs() < 1e-8);
        }
        // The oracle of a shifted delta is the shifted oracle.
        let mut shifted = vec![0.0; n];
        shifted[3] = 1.0;
        let filtered_shift = spectral_filter_apply_vec(&basis, h, &Array1::from_vec(shifted.clone())).unwrap();
        let oracle_shift = dft_filter_oracle(h, &shifted);
        for i in 0..n {
            assert!((filtered_shift[i] - oracle_shift[i]).abs() < 1e-8);
            assert!((oracle_shift[(i + 3) % n] - oracle[i]).abs() < 1e-8);
        }
    }

    fn arb_connected_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (2..=max_n, any::<u64>()).prop_map(move |(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            // Random spanning tree keeps it connected.
            for i in 1..n {
                let j = rng.gen_range(0..i);
                edges.push((j, i, rng.gen_range(0.1..2.0)));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if edges.iter().all(|&(a, b, _)| (a, b) != (i, j)) && rng.gen_bool(0.2) {
                        edges.push((i, j, rng.gen_range(0.1..2.0)));
                    }
                }
            }
            Graph::from_edges(n, &edges).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn parseval_and_round_trip(g in arb_connected_graph(16), seed in any::<u64>()) {
            let basis = eigendecompose(&g.laplacian()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = Array1::from_shape_fn(g.n(), |_| rng.gen_range(-3.0..3.0));
            let f_hat = gft(&basis, &f).unwrap();
            let back = igft(&basis, &f_hat).unwrap();

            let norm_f = f.dot(&f).sqrt();
            let norm_hat = f_hat.dot(&f_hat).sqrt();
            prop_assert!((norm_f - norm_hat).abs() < 1e-9);
            for (a, b) in f.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn laplacian_bases_have_nonnegative_spectra(g in arb_connected_graph(10)) {
            let basis = eigendecompose(&g.laplacian()).unwrap();
            prop_assert!(basis.eigenvalues()[0] >= -1e-10);
            prop_assert!(basis.eigenvalues()[0].abs() <= 1e-9);
            for pair in basis.eigenvalues().windows(2) {
                prop_assert!(pair[0] <= pair[1] + 1e-12);
            }
        }
    }
}
