use super::*;
use crate::kernels::{EquicorrelatedTaskParams, Matern52Params};
use crate::linalg::{relative_error, relative_error_vec, with_base_jitter, JITTER_LADDER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn separable(ls: Vec<f64>, sigma: Vec<f64>, rho: f64) -> MultiOutputKernel {
    MultiOutputKernel::Separable {
        input: Matern52Params::new(ls, 1.0).unwrap(),
        task: EquicorrelatedTaskParams::new(sigma, rho).unwrap(),
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (MultiOutputKernel, NoiseModel, MultiOutputDataset, Vec<AugmentedInput>) {
    let d = rng.random_range(1..4);
    let o = rng.random_range(1..4);
    let n = rng.random_range(1..13);
    let ls = (0..d).map(|_| rng.random_range(0.1..1.5)).collect();
    let sigma = (0..o).map(|_| rng.random_range(0.3..2.0)).collect();
    let kernel = separable(ls, sigma, rng.random_range(0.0..0.95));
    let noise = if rng.random_bool(0.5) {
        NoiseModel::Global(rng.random_range(0.01..0.5))
    } else {
        NoiseModel::PerObjective((0..o).map(|_| rng.random_range(0.01..0.5)).collect())
    };
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let ys: Vec<Vec<f64>> = (0..n).map(|_| (0..o).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let data = MultiOutputDataset::new(d, o, xs, ys).unwrap();
    let q: Vec<AugmentedInput> = (0..rng.random_range(1..6))
        .map(|_| AugmentedInput::new((0..d).map(|_| rng.random::<f64>()).collect(), rng.random_range(0..o)).unwrap())
        .collect();
    (kernel, noise, data, q)
}

/// Brute-force Gaussian conditioning: entrywise Gram, explicit inverse.
fn dense_oracle(
    kernel: &MultiOutputKernel,
    noise: &NoiseModel,
    data: &MultiOutputDataset,
    q: &[AugmentedInput],
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let train = AugmentedInput::stack(data.inputs(), data.objectives());
    let n = train.len();
    let mut a = DMatrix::from_fn(n, n, |i, j| kernel.eval(&train[i], &train[j]).unwrap());
    for (i, t) in train.iter().enumerate() {
        a[(i, i)] += noise.for_objective(t.objective);
    }
    let a = with_base_jitter(&a);
    let inv = a.clone().lu().try_inverse().unwrap();
    let y = data.stacked_outputs();
    let kqx = DMatrix::from_fn(q.len(), n, |i, j| kernel.eval(&q[i], &train[j]).unwrap());
    let kqq = DMatrix::from_fn(q.len(), q.len(), |i, j| kernel.eval(&q[i], &q[j]).unwrap());
    let mean = &kqx * &inv * &y;
    let cov = kqq - &kqx * &inv * kqx.transpose();
    let det = a.lu().determinant();
    let lml = -0.5 * (y.transpose() * &inv * &y)[(0, 0)]
        - 0.5 * det.ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    (mean, cov, lml)
}

#[test]
fn posterior_and_lml_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (k, noise, data, q) = random_instance(&mut rng);
        let gp = FittedGP::condition(k.clone(), noise.clone(), data.clone(), false).unwrap();
        let post = gp.posterior(&q).unwrap();
        let (m, c, lml) = dense_oracle(&k, &noise, &data, &q);
        assert!(relative_error_vec(&post.mean, &m) < 1e-8);
        assert!(relative_error(&post.covariance, &c) < 1e-8);
        assert!((gp.log_marginal_likelihood() - lml).abs() <= 1e-8 * lml.abs().max(1.0));
    }
}

#[test]
fn empty_conditioning_is_the_prior() {
    let k = separable(vec![0.3], vec![1.5, 0.5], 0.4);
    let gp = FittedGP::condition(k.clone(), NoiseModel::Global(0.1), MultiOutputDataset::empty(1, 2), true).unwrap();
    let q = AugmentedInput::stack(&[vec![0.2], vec![0.7]], 2);
    let post = gp.posterior(&q).unwrap();
    assert_eq!(post.mean, DVector::zeros(4));
    assert!((&post.covariance - k.gram_aug(&q, &q)).amax() < 1e-15);
    assert_eq!(gp.log_marginal_likelihood(), 0.0);
}

#[test]
fn near_noiseless_interpolation() {
    let k = separable(vec![0.3], vec![1.0], 0.0);
    let data = MultiOutputDataset::new(1, 1, vec![vec![0.4]], vec![vec![1.7]]).unwrap();
    let gp = FittedGP::condition(k, NoiseModel::Global(1e-6), data, false).unwrap();
    let post = gp.posterior(&[AugmentedInput::new(vec![0.4], 0).unwrap()]).unwrap();
    assert!((post.mean[0] - 1.7).abs() < 1e-3);
}

#[test]
fn two_point_posterior_matches_explicit_inverse() {
    let p = Matern52Params::new(vec![0.5], 1.3).unwrap();
    let k = MultiOutputKernel::Independent { inputs: vec![p.clone()] };
    let (x1, x2, xq) = (0.1, 0.6, 0.35);
    let (y1, y2, s2) = (0.8, -0.4, 0.05);
    let data = MultiOutputDataset::new(1, 1, vec![vec![x1], vec![x2]], vec![vec![y1], vec![y2]]).unwrap();
    let gp = FittedGP::condition(k, NoiseModel::Global(s2), data, false).unwrap();

    let kf = |a: f64, b: f64| crate::kernels::matern52(&[a], &[b], &p).unwrap();
    let j = 1.0 + JITTER_LADDER[0];
    let a = (kf(x1, x1) + s2) * j;
    let c = (kf(x2, x2) + s2) * j;
    let b = kf(x1, x2);
    let det = a * c - b * b;
    let (k1, k2) = (kf(xq, x1), kf(xq, x2));
    let w1 = (c * k1 - b * k2) / det;
    let w2 = (a * k2 - b * k1) / det;
    let mean = w1 * y1 + w2 * y2;
    let var = kf(xq, xq) - (k1 * w1 + k2 * w2);

    let post = gp.posterior(&[AugmentedInput::new(vec![xq], 0).unwrap()]).unwrap();
    assert!((post.mean[0] - mean).abs() < 1e-12);
    assert!((post.covariance[(0, 0)] - var).abs() < 1e-12);
}

#[test]
fn far_queries_revert_to_prior() {
    let k = separable(vec![0.02], vec![1.2], 0.0);
    let data = MultiOutputDataset::new(1, 1, vec![vec![0.0]], vec![vec![3.0]]).unwrap();
    let gp = FittedGP::condition(k, NoiseModel::Global(0.01), data, false).unwrap();
    let post = gp.posterior(&[AugmentedInput::new(vec![1.0], 0).unwrap()]).unwrap();
    assert!(post.mean[0].abs() < 1e-6);
    assert!((post.covariance[(0, 0)] - 1.44).abs() < 1e-6 * 1.44);
}

#[test]
fn repeated_queries_duplicate_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (k, noise, data, _) = random_instance(&mut rng);
    let gp = FittedGP::condition(k, noise, data.clone(), true).unwrap();
    let q = AugmentedInput::new(vec![0.5; data.dim()], 0).unwrap();
    let post = gp.posterior(&[q.clone(), q]).unwrap();
    assert!((post.mean[0] - post.mean[1]).abs() < 1e-12);
    assert!((post.covariance[(0, 0)] - post.covariance[(1, 1)]).abs() < 1e-12);
    assert!((post.covariance[(0, 1)] - post.covariance[(0, 0)]).abs() < 1e-12);
}

#[test]
fn posterior_variance_never_exceeds_prior_at_training_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let (k, noise, data, _) = random_instance(&mut rng);
        let gp = FittedGP::condition(k.clone(), noise, data.clone(), false).unwrap();
        let q = AugmentedInput::stack(data.inputs(), data.objectives());
        let post = gp.posterior(&q).unwrap();
        let prior = k.gram_aug(&q, &q);
        for i in 0..q.len() {
            assert!(post.covariance[(i, i)] <= prior[(i, i)] + 1e-8);
        }
    }
}

#[test]
fn univariate_lml_matches_gaussian_density() {
    let (v, s2, y) = (1.7, 0.2, 0.9);
    let k = MultiOutputKernel::Independent { inputs: vec![Matern52Params::new(vec![0.4], v).unwrap()] };
    let data = MultiOutputDataset::new(1, 1, vec![vec![0.3]], vec![vec![y]]).unwrap();
    let gp = FittedGP::condition(k, NoiseModel::Global(s2), data.clone(), false).unwrap();
    let tot: f64 = (v + s2) * (1.0 + JITTER_LADDER[0]);
    let expect = -0.5 * (y * y / tot + (2.0 * std::f64::consts::PI * tot).ln());
    assert!((gp.log_marginal_likelihood() - expect).abs() < 1e-13);

    let neg = data.map_outputs(|r| r.iter().map(|v| -v).collect());
    assert_eq!(log_marginal_likelihood(&gp, &neg).unwrap(), gp.log_marginal_likelihood());
}

#[test]
fn lml_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let (k, noise, data, _) = random_instance(&mut rng);
        let gp = FittedGP::condition(k, noise, data.clone(), false).unwrap();
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.reverse();
        idx.rotate_left(data.len() / 2);
        let perm = MultiOutputDataset::new(
            data.dim(),
            data.objectives(),
            idx.iter().map(|&i| data.inputs()[i].clone()).collect(),
            idx.iter().map(|&i| data.outputs()[i].clone()).collect(),
        )
        .unwrap();
        let a = gp.log_marginal_likelihood();
        let b = log_marginal_likelihood(&gp, &perm).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn log_posterior_objective_examples() {
    let k = separable(vec![1.0], vec![1.0, 1.0], 0.5);
    let data = MultiOutputDataset::new(1, 2, vec![vec![0.2]], vec![vec![0.1, -0.3]]).unwrap();
    let gp = FittedGP::condition(k, NoiseModel::Global(0.1), data.clone(), false).unwrap();
    let lml = gp.log_marginal_likelihood();
    assert_eq!(log_posterior_objective(&gp, &data, &PriorSet::none()).unwrap(), lml);

    let beta = PriorSet::new(vec![HyperPriorSpec {
        kind: PriorKind::Beta { a: 2.0, b: 2.0 },
        target: ParamGroup::Correlation,
    }])
    .unwrap();
    let v = log_posterior_objective(&gp, &data, &beta).unwrap();
    assert!((v - lml - 1.5f64.ln()).abs() < 1e-12);

    let gamma = PriorSet::new(vec![HyperPriorSpec {
        kind: PriorKind::Gamma { shape: 1.5, rate: 1.0 },
        target: ParamGroup::Lengthscale,
    }])
    .unwrap();
    let v = log_posterior_objective(&gp, &data, &gamma).unwrap();
    // x^{1/2} e^{-x} / Γ(3/2) at x = 1
    let density = (-1.0f64).exp() / (std::f64::consts::PI.sqrt() / 2.0);
    assert!((v - lml - density.ln()).abs() < 1e-12);
}

#[test]
fn noise_below_floor_is_rejected() {
    let k = separable(vec![1.0], vec![1.0], 0.0);
    let data = MultiOutputDataset::new(1, 1, vec![vec![0.2]], vec![vec![0.1]]).unwrap();
    assert!(FittedGP::condition(k, NoiseModel::Global(1e-7), data, false).is_err());
}

fn draw_from_kernel(k: &MultiOutputKernel, xs: &[Vec<f64>], noise: f64, seed: u64) -> MultiOutputDataset {
    let o = k.objectives();
    let mut g = k.gram_points(xs);
    for i in 0..g.nrows() {
        g[(i, i)] += noise;
    }
    let post = PosteriorGaussian::new(DVector::zeros(g.nrows()), g, PosteriorLayout::QueryOrder);
    let s = sample_posterior(&post, 1, seed).unwrap();
    let n = xs.len();
    let ys = (0..n).map(|i| (0..o).map(|p| s[(0, p * n + i)]).collect()).collect();
    MultiOutputDataset::new(k.dim(), o, xs.to_vec(), ys).unwrap()
}

#[test]
fn fit_recovers_lengthscales_from_own_kernel() {
    let truth = [0.25, 0.6];
    let k = separable(truth.to_vec(), vec![1.0], 0.0);
    let spec = GpSpec::new(KernelSpec::Separable { dim: 2, objectives: 1 }, NoiseKind::Global, PriorSet::standard());
    let mut hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let xs: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.random(), rng.random()]).collect();
        let data = draw_from_kernel(&k, &xs, 1e-4, seed);
        let gp = fit(&spec, &data, 4, seed).unwrap();
        let MultiOutputKernel::Separable { input, .. } = gp.kernel() else { unreachable!() };
        let ok = input.lengthscales().iter().zip(truth).all(|(l, t)| (l.ln() - t.ln()).abs() < 0.5);
        hits += usize::from(ok);
    }
    assert!(hits >= 16, "recovered {hits}/20");
}

#[test]
fn more_restarts_never_hurt_and_fit_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random()]).collect();
    let data = draw_from_kernel(&separable(vec![0.2], vec![1.0, 0.8], 0.6), &xs, 1e-3, 3);
    let spec = GpSpec::new(KernelSpec::Separable { dim: 1, objectives: 2 }, NoiseKind::Global, PriorSet::standard());
    let one = fit(&spec, &data, 1, 42).unwrap();
    let five = fit(&spec, &data, 5, 42).unwrap();
    let again = fit(&spec, &data, 5, 42).unwrap();
    let f1 = fitted_objective(&spec, &one).unwrap();
    let f5 = fitted_objective(&spec, &five).unwrap();
    assert!(f5 >= f1 - 1e-12);
    assert_eq!(format!("{:?}", five.kernel()), format!("{:?}", again.kernel()));
    assert_eq!(five.noise(), again.noise());
}

#[test]
fn empty_fit_returns_prior_modes() {
    let spec = GpSpec::new(KernelSpec::Independent { dim: 2, objectives: 1 }, NoiseKind::PerObjective, PriorSet::standard());
    let gp = fit(&spec, &MultiOutputDataset::empty(2, 1), 3, 0).unwrap();
    let MultiOutputKernel::Independent { inputs } = gp.kernel() else { unreachable!() };
    assert!(inputs[0].lengthscales().iter().all(|l| (l - 0.5).abs() < 1e-8));
    assert!((inputs[0].outputscale() - (-11f64).exp()).abs() < 1e-8);
    let NoiseModel::PerObjective(n) = gp.noise() else { unreachable!() };
    assert!((n[0] - (-5f64).exp()).abs() < 1e-8);
}

#[test]
fn sampling_contract() {
    let zero = PosteriorGaussian::new(DVector::from_vec(vec![1.0, -2.0]), DMatrix::zeros(2, 2), PosteriorLayout::QueryOrder);
    let s = sample_posterior(&zero, 5, 3).unwrap();
    for r in 0..5 {
        assert_eq!(s[(r, 0)], 1.0);
        assert_eq!(s[(r, 1)], -2.0);
    }

    let id = PosteriorGaussian::new(DVector::zeros(3), DMatrix::identity(3, 3), PosteriorLayout::QueryOrder);
    let count = 100_000;
    let s = sample_posterior(&id, count, 11).unwrap();
    let mean = s.row_mean();
    for i in 0..3 {
        for j in 0..3 {
            let c: f64 = (0..count).map(|r| (s[(r, i)] - mean[i]) * (s[(r, j)] - mean[j])).sum::<f64>() / (count - 1) as f64;
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((c - e).abs() < 0.05, "cov[{i},{j}] = {c}");
        }
    }
    assert_eq!(sample_posterior(&id, 7, 5).unwrap(), sample_posterior(&id, 7, 5).unwrap());
}

#[test]
fn smogmeta_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for standardize in [false, true] {
        let (k, noise, data, q) = random_instance(&mut rng);
        let gp = FittedGP::condition(k, noise, data, standardize).unwrap();
        let text = persist::to_smogmeta(&gp);
        assert!(text.starts_with("SMOGMETA 1\n"));
        let back = persist::from_smogmeta(&text).unwrap();
        let a = gp.posterior(&q).unwrap();
        let b = back.posterior(&q).unwrap();
        assert!(relative_error_vec(&a.mean, &b.mean) < 1e-12);
        assert!(relative_error(&a.covariance, &b.covariance) < 1e-12);
    }
    let ind = FittedGP::condition(
        MultiOutputKernel::Independent {
            inputs: vec![Matern52Params::new(vec![0.3], 0.7).unwrap(), Matern52Params::new(vec![0.9], 2.0).unwrap()],
        },
        NoiseModel::PerObjective(vec![0.1, 0.2]),
        MultiOutputDataset::new(1, 2, vec![vec![0.5]], vec![vec![1.0, 2.0]]).unwrap(),
        true,
    )
    .unwrap();
    let back = persist::from_smogmeta(&persist::to_smogmeta(&ind)).unwrap();
    assert_eq!(back.kernel(), ind.kernel());
    assert!(persist::from_smogmeta("SMOGMETA 2\n").is_err());
}
