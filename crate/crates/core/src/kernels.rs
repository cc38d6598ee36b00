//! Covariance functions over objective-augmented inputs.
//!
//! Every multi-output kernel here is separable: an input kernel on `[0,1]^D`
//! multiplied by an `O x O` task block. Gram matrices over a point set are laid
//! out objective-major: row `o * N + n` holds point `n` paired with objective `o`.

use std::cell::Cell;

use nalgebra::DMatrix;

use crate::error::{invalid, Result, SmogError};
use crate::linalg::min_eigenvalue;

const SQRT5: f64 = 2.236_067_977_499_79;

thread_local! {
    static CROSS_OBJECTIVE_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of kernel entries with distinct objectives computed on this thread.
pub fn cross_objective_evaluations() -> u64 {
    CROSS_OBJECTIVE_EVALS.with(|c| c.get())
}

pub fn reset_cross_objective_evaluations() {
    CROSS_OBJECTIVE_EVALS.with(|c| c.set(0));
}

fn count_cross(n: u64) {
    CROSS_OBJECTIVE_EVALS.with(|c| c.set(c.get() + n));
}

/// Matérn-5/2 ARD hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Matern52Params {
    lengthscales: Vec<f64>,
    inv_lengthscales: Vec<f64>,
    outputscale: f64,
}

impl Matern52Params {
    pub fn new(lengthscales: Vec<f64>, outputscale: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return invalid("matern52 needs at least one lengthscale");
        }
        if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return invalid(format!("lengthscales must be positive, got {lengthscales:?}"));
        }
        if !(outputscale.is_finite() && outputscale > 0.0) {
            return invalid(format!("outputscale must be positive, got {outputscale}"));
        }
        let inv_lengthscales = lengthscales.iter().map(|l| 1.0 / l).collect();
        Ok(Self { lengthscales, inv_lengthscales, outputscale })
    }

    /// Unit outputscale, every lengthscale equal to `ls`.
    pub fn isotropic(dim: usize, ls: f64) -> Result<Self> {
        Self::new(vec![ls; dim], 1.0)
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn outputscale(&self) -> f64 {
        self.outputscale
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Unchecked evaluation; callers guarantee matching lengths.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], x2: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((a, b), il) in x.iter().zip(x2).zip(&self.inv_lengthscales) {
            let d = (a - b) * il;
            r2 += d * d;
        }
        let r = r2.sqrt();
        self.outputscale * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
    }

    /// `N x N` Gram over a point set.
    pub fn gram(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.outputscale;
            for j in 0..i {
                let v = self.eval(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// `outputscale * (1 + √5 r + 5r²/3) * exp(-√5 r)` with `r` the
/// lengthscale-scaled Euclidean distance.
pub fn matern52(x: &[f64], x2: &[f64], params: &Matern52Params) -> Result<f64> {
    if x.len() != params.dim() || x2.len() != params.dim() {
        return invalid(format!(
            "matern52 dimension mismatch: {} and {} vs {} lengthscales",
            x.len(),
            x2.len(),
            params.dim()
        ));
    }
    Ok(params.eval(x, x2))
}

/// Per-objective scales and one shared correlation for all objective pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EquicorrelatedTaskParams {
    sigma: Vec<f64>,
    rho: f64,
}

impl EquicorrelatedTaskParams {
    pub fn new(sigma: Vec<f64>, rho: f64) -> Result<Self> {
        if sigma.is_empty() {
            return invalid("equicorrelated task block needs at least one objective");
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return invalid(format!("task scales must be positive, got {sigma:?}"));
        }
        // rho = 0 is admitted as the diagonal limit used by the independent reductions.
        if !(0.0..1.0).contains(&rho) {
            return invalid(format!("rho must lie in [0, 1), got {rho}"));
        }
        Ok(Self { sigma, rho })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn objectives(&self) -> usize {
        self.sigma.len()
    }

    #[inline]
    pub(crate) fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.sigma[i] * self.sigma[i]
        } else {
            self.rho * self.sigma[i] * self.sigma[j]
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let o = self.objectives();
        DMatrix::from_fn(o, o, |i, j| self.entry(i, j))
    }
}

/// `σ_i²` on the diagonal, `ρ σ_i σ_j` off it.
pub fn task_covariance(i: usize, j: usize, params: &EquicorrelatedTaskParams) -> Result<f64> {
    let o = params.objectives();
    if i >= o || j >= o {
        return invalid(format!("objective index ({i}, {j}) out of range for {o} objectives"));
    }
    Ok(params.entry(i, j))
}

/// Splits the task block into `diag(d) + s sᵀ` with `d = (1-ρ)σ²`, `s = √ρ σ`.
pub fn decompose_diag_rank1(params: &EquicorrelatedTaskParams) -> (Vec<f64>, Vec<f64>) {
    let diag = params.sigma.iter().map(|s| (1.0 - params.rho) * s * s).collect();
    let spike = params.sigma.iter().map(|s| params.rho.sqrt() * s).collect();
    (diag, spike)
}

/// A general symmetric PSD `O x O` coregionalization block.
#[derive(Clone, Debug, PartialEq)]
pub struct CoregionalizationBlock {
    matrix: DMatrix<f64>,
}

impl CoregionalizationBlock {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return invalid("coregionalization block must be square and non-empty");
        }
        let scale = matrix.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return invalid(format!("coregionalization block not symmetric (max asymmetry {asym:e})"));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -1e-8 {
            return invalid(format!("coregionalization block not PSD (min eigenvalue {min_eig:e})"));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl From<&EquicorrelatedTaskParams> for CoregionalizationBlock {
    fn from(p: &EquicorrelatedTaskParams) -> Self {
        Self { matrix: p.matrix() }
    }
}

/// A search point paired with an objective index.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedInput {
    pub x: Vec<f64>,
    pub objective: usize,
}

impl AugmentedInput {
    pub fn new(x: Vec<f64>, objective: usize) -> Result<Self> {
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid(format!("augmented input outside the unit box: {x:?}"));
        }
        Ok(Self { x, objective })
    }

    /// Objective-major stacking of `points x objectives`.
    pub fn stack(points: &[Vec<f64>], objectives: usize) -> Vec<AugmentedInput> {
        (0..objectives)
            .flat_map(|o| points.iter().map(move |x| AugmentedInput { x: x.clone(), objective: o }))
            .collect()
    }
}

/// `k_X(a.x, b.x) * K_T[a.objective, b.objective]`.
pub fn multi_output_kernel(
    a: &AugmentedInput,
    b: &AugmentedInput,
    input_params: &Matern52Params,
    task_params: &EquicorrelatedTaskParams,
) -> Result<f64> {
    let kx = matern52(&a.x, &b.x, input_params)?;
    let kt = task_covariance(a.objective, b.objective, task_params)?;
    if a.objective != b.objective {
        count_cross(1);
    }
    Ok(kx * kt)
}

/// Multi-output kernels over objective-augmented inputs.
#[derive(Clone, Debug, PartialEq)]
pub enum MultiOutputKernel {
    /// Shared input kernel times the equicorrelated task block.
    Separable { input: Matern52Params, task: EquicorrelatedTaskParams },
    /// Shared input kernel times an arbitrary PSD task block.
    Coregionalized { input: Matern52Params, block: CoregionalizationBlock },
    /// One input kernel per objective, no cross-objective covariance.
    Independent { inputs: Vec<Matern52Params> },
}

impl MultiOutputKernel {
    pub fn separable(input: Matern52Params, task: EquicorrelatedTaskParams) -> Result<Self> {
        Ok(Self::Separable { input, task })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Separable { input, .. } | Self::Coregionalized { input, .. } => input.dim(),
            Self::Independent { inputs } => inputs[0].dim(),
        }
    }

    pub fn objectives(&self) -> usize {
        match self {
            Self::Separable { task, .. } => task.objectives(),
            Self::Coregionalized { block, .. } => block.matrix.nrows(),
            Self::Independent { inputs } => inputs.len(),
        }
    }

    /// True when no covariance flows between distinct objectives.
    pub fn is_objective_diagonal(&self) -> bool {
        match self {
            Self::Separable { task, .. } => task.rho == 0.0 || task.objectives() == 1,
            Self::Coregionalized { block, .. } => {
                let m = &block.matrix;
                (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
            }
            Self::Independent { .. } => true,
        }
    }

    pub fn validate(&self, a: &AugmentedInput) -> Result<()> {
        if a.x.len() != self.dim() {
            return invalid(format!("input has dimension {} but kernel expects {}", a.x.len(), self.dim()));
        }
        if a.objective >= self.objectives() {
            return invalid(format!(
                "objective {} out of range for {} objectives",
                a.objective,
                self.objectives()
            ));
        }
        Ok(())
    }

    /// Checked evaluation at a pair of augmented inputs.
    pub fn eval(&self, a: &AugmentedInput, b: &AugmentedInput) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(self.eval_raw(&a.x, a.objective, &b.x, b.objective))
    }

    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], o: usize, x2: &[f64], o2: usize) -> f64 {
        match self {
            Self::Separable { input, task } => {
                if o != o2 {
                    count_cross(1);
                }
                input.eval(x, x2) * task.entry(o, o2)
            }
            Self::Coregionalized { input, block } => {
                if o != o2 {
                    count_cross(1);
                }
                input.eval(x, x2) * block.matrix[(o, o2)]
            }
            Self::Independent { inputs } => {
                if o == o2 {
                    inputs[o].eval(x, x2)
                } else {
                    0.0
                }
            }
        }
    }

    fn task_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Self::Separable { task, .. } => Some(task.matrix()),
            Self::Coregionalized { block, .. } => Some(block.matrix.clone()),
            Self::Independent { .. } => None,
        }
    }

    /// Objective-major `NO x NO` Gram over every (point, objective) pair.
    pub fn gram_points(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let o = self.objectives();
        let mut k = DMatrix::zeros(n * o, n * o);
        match self {
            Self::Separable { input, .. } | Self::Coregionalized { input, .. } => {
                let kx = input.gram(xs);
                let b = self.task_matrix().expect("shared input kernel has a task block");
                for p in 0..o {
                    for q in 0..o {
                        if p != q {
                            count_cross((n * n) as u64);
                        }
                        let s = b[(p, q)];
                        k.view_mut((p * n, q * n), (n, n)).copy_from(&(&kx * s));
                    }
                }
            }
            Self::Independent { inputs } => {
                for (p, ip) in inputs.iter().enumerate() {
                    k.view_mut((p * n, p * n), (n, n)).copy_from(&ip.gram(xs));
                }
            }
        }
        k
    }

    /// Objective-major `NO x Q` cross-covariance between a point set and a query list.
    pub fn cross_points(&self, xs: &[Vec<f64>], query: &[AugmentedInput]) -> DMatrix<f64> {
        let n = xs.len();
        let o = self.objectives();
        let mut k = DMatrix::zeros(n * o, query.len());
        for (c, q) in query.iter().enumerate() {
            match self {
                Self::Independent { inputs } => {
                    let ip = &inputs[q.objective];
                    for (i, x) in xs.iter().enumerate() {
                        k[(q.objective * n + i, c)] = ip.eval(x, &q.x);
                    }
                }
                Self::Separable { input, .. } | Self::Coregionalized { input, .. } => {
                    for (i, x) in xs.iter().enumerate() {
                        let kx = input.eval(x, &q.x);
                        for p in 0..o {
                            k[(p * n + i, c)] = kx * self.task_scalar(p, q.objective);
                        }
                    }
                }
            }
        }
        k
    }

    #[inline]
    fn task_scalar(&self, p: usize, q: usize) -> f64 {
        if p != q {
            count_cross(1);
        }
        match self {
            Self::Separable { task, .. } => task.entry(p, q),
            Self::Coregionalized { block, .. } => block.matrix[(p, q)],
            Self::Independent { .. } => unreachable!("independent kernels have no task block"),
        }
    }

    /// `Q x Q'` Gram between two augmented lists.
    pub fn gram_aug(&self, a: &[AugmentedInput], b: &[AugmentedInput]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| {
            self.eval_raw(&a[i].x, a[i].objective, &b[j].x, b[j].objective)
        })
    }
}

/// True iff every eigenvalue of the symmetric `matrix` is at least `-tol`.
pub fn psd_check(matrix: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if matrix.nrows() != matrix.ncols() {
        return Err(SmogError::InvalidArgument(format!(
            "psd_check of non-square {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.nrows() == 0 {
        return Ok(true);
    }
    Ok(min_eigenvalue(matrix) >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // (1 + √5 + 5/3) e^{-√5}, evaluated in extended precision.
    const MATERN_AT_ONE: f64 = 0.523_994_108_831_820_3;

    #[test]
    fn matern_closed_form_at_unit_distance() {
        let p = Matern52Params::new(vec![1.0], 1.0).unwrap();
        let v = matern52(&[0.0], &[1.0], &p).unwrap();
        assert!((v - MATERN_AT_ONE).abs() < 1e-15, "{v}");
    }

    #[test]
    fn matern_at_zero_distance_is_outputscale() {
        let p = Matern52Params::new(vec![0.3, 2.0], 1.7).unwrap();
        assert_eq!(matern52(&[0.2, 0.4], &[0.2, 0.4], &p).unwrap(), 1.7);
    }

    #[test]
    fn matern_decays_monotonically() {
        let p = Matern52Params::new(vec![0.5], 2.0).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let v = matern52(&[0.0], &[i as f64 * 0.1], &p).unwrap();
            assert!(v <= last);
            last = v;
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn matern_rejects_dimension_mismatch() {
        let p = Matern52Params::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(matern52(&[0.0], &[0.0, 1.0], &p).is_err());
        assert!(Matern52Params::new(vec![0.0], 1.0).is_err());
        assert!(Matern52Params::new(vec![1.0], -1.0).is_err());
    }

    #[test]
    fn task_covariance_examples() {
        let p = EquicorrelatedTaskParams::new(vec![2.0, 1.0], 0.3).unwrap();
        assert_eq!(task_covariance(0, 0, &p).unwrap(), 4.0);
        let p = EquicorrelatedTaskParams::new(vec![1.0, 2.0], 0.5).unwrap();
        assert_eq!(task_covariance(0, 1, &p).unwrap(), 1.0);
        assert_eq!(task_covariance(1, 0, &p).unwrap(), 1.0);
        assert!(task_covariance(2, 0, &p).is_err());
        let p0 = EquicorrelatedTaskParams::new(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(p0.matrix(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        assert!(EquicorrelatedTaskParams::new(vec![1.0], 1.0).is_err());
    }

    #[test]
    fn diag_rank1_examples() {
        let p = EquicorrelatedTaskParams::new(vec![1.0, 1.0], 0.5).unwrap();
        let (d, s) = decompose_diag_rank1(&p);
        assert_eq!(d, vec![0.5, 0.5]);
        assert!((s[0] - 0.5f64.sqrt()).abs() < 1e-15 && (s[1] - 0.5f64.sqrt()).abs() < 1e-15);

        let p = EquicorrelatedTaskParams::new(vec![1.0, 2.0], 0.25).unwrap();
        let (d, s) = decompose_diag_rank1(&p);
        let rebuilt = DMatrix::from_fn(2, 2, |i, j| if i == j { d[i] } else { 0.0 } + s[i] * s[j]);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 4.0]);
        assert!((rebuilt - expect).amax() < 1e-12);

        let p = EquicorrelatedTaskParams::new(vec![3.0, 2.0], 1e-300).unwrap();
        let (_, s) = decompose_diag_rank1(&p);
        assert!(s.iter().all(|v| v.abs() < 1e-140));
    }

    #[test]
    fn decomposition_reconstructs_for_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let o = rng.random_range(1..6);
            let sigma: Vec<f64> = (0..o).map(|_| rng.random_range(0.05..5.0)).collect();
            let p = EquicorrelatedTaskParams::new(sigma, rng.random_range(0.0..0.999)).unwrap();
            let (d, s) = decompose_diag_rank1(&p);
            let m = p.matrix();
            for i in 0..o {
                for j in 0..o {
                    let r = if i == j { d[i] } else { 0.0 } + s[i] * s[j];
                    assert!((r - m[(i, j)]).abs() <= 1e-12 * m[(i, j)].abs().max(1.0));
                }
            }
            // equicorrelation
            for i in 0..o {
                for j in 0..o {
                    if i != j {
                        let c = task_covariance(i, j, &p).unwrap() / (p.sigma()[i] * p.sigma()[j]);
                        assert!((c - p.rho()).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn multi_output_examples() {
        let ip = Matern52Params::new(vec![0.4, 0.7], 1.5).unwrap();
        let tp = EquicorrelatedTaskParams::new(vec![2.0, 0.5], 0.6).unwrap();
        let a = AugmentedInput::new(vec![0.1, 0.9], 0).unwrap();
        let b = AugmentedInput::new(vec![0.1, 0.9], 1).unwrap();
        assert!((multi_output_kernel(&a, &a, &ip, &tp).unwrap() - 1.5 * 4.0).abs() < 1e-15);
        assert!((multi_output_kernel(&a, &b, &ip, &tp).unwrap() - 1.5 * 0.6 * 2.0 * 0.5).abs() < 1e-15);
        let bad = AugmentedInput { x: vec![0.1, 0.9], objective: 2 };
        assert!(multi_output_kernel(&a, &bad, &ip, &tp).is_err());
        assert!(AugmentedInput::new(vec![1.2], 0).is_err());
    }

    #[test]
    fn gram_layout_matches_pointwise_eval() {
        let k = MultiOutputKernel::Separable {
            input: Matern52Params::new(vec![0.3, 0.5], 1.2).unwrap(),
            task: EquicorrelatedTaskParams::new(vec![1.0, 0.7, 1.3], 0.4).unwrap(),
        };
        let xs = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.3]];
        let g = k.gram_points(&xs);
        let aug = AugmentedInput::stack(&xs, 3);
        let g2 = k.gram_aug(&aug, &aug);
        assert!((&g - &g2).amax() < 1e-15);
        let c = k.cross_points(&xs, &aug);
        assert!((&g - &c).amax() < 1e-15);
    }

    #[test]
    fn independent_kernel_counts_no_cross_terms() {
        let k = MultiOutputKernel::Independent {
            inputs: vec![Matern52Params::isotropic(1, 0.3).unwrap(), Matern52Params::isotropic(1, 0.6).unwrap()],
        };
        reset_cross_objective_evaluations();
        let xs = vec![vec![0.1], vec![0.4]];
        let aug = AugmentedInput::stack(&xs, 2);
        let _ = k.gram_points(&xs);
        let _ = k.cross_points(&xs, &aug);
        let _ = k.gram_aug(&aug, &aug);
        assert_eq!(cross_objective_evaluations(), 0);
    }

    #[test]
    fn psd_check_examples() {
        assert!(psd_check(&DMatrix::identity(3, 3), 1e-8).unwrap());
        assert!(!psd_check(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 1e-8).unwrap());
        assert!(psd_check(&DMatrix::zeros(4, 4), 1e-8).unwrap());
        assert!(psd_check(&DMatrix::zeros(2, 3), 1e-8).is_err());
    }

    fn arb_setup() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>, f64, Vec<Vec<f64>>)> {
        (1usize..4, 1usize..4, 1usize..33).prop_flat_map(|(d, o, n)| {
            (
                prop::collection::vec(0.05f64..3.0, d),
                0.1f64..3.0,
                prop::collection::vec(0.1f64..3.0, o),
                0.0f64..0.99,
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matern_is_symmetric(x in prop::collection::vec(-3.0f64..3.0, 3),
                               y in prop::collection::vec(-3.0f64..3.0, 3),
                               ls in prop::collection::vec(0.01f64..5.0, 3)) {
            let p = Matern52Params::new(ls, 1.3).unwrap();
            prop_assert_eq!(matern52(&x, &y, &p).unwrap(), matern52(&y, &x, &p).unwrap());
        }

        #[test]
        fn multi_output_gram_is_psd((ls, os, sigma, rho, xs) in arb_setup()) {
            let o = sigma.len();
            let k = MultiOutputKernel::Separable {
                input: Matern52Params::new(ls, os).unwrap(),
                task: EquicorrelatedTaskParams::new(sigma, rho).unwrap(),
            };
            let g = k.gram_points(&xs);
            prop_assert_eq!(g.nrows(), xs.len() * o);
            prop_assert!(psd_check(&g, 1e-8).unwrap());
        }
    }
}
