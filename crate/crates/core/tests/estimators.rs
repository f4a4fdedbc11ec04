use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfit_core::estimators::{
    e_step, fit, fixed_point_map, m_step_location_scatter, nu_step_aem, nu_step_gmmf, nu_step_mmf, AlgorithmKind,
    FitConfig, FitStatus, InnerConfig,
};
use tfit_core::linalg::{cholesky, Matrix, SpdMatrix};
use tfit_core::model::{self, neg_log_likelihood, StudentTParams, WeightedSample};

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
    let mut m = Matrix::identity(d).scaled(0.2);
    for _ in 0..d + 1 {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.add_outer(1.0, &v);
    }
    cholesky(&m).unwrap()
}

fn dataset(seed: u64, d: usize, nu: f64, n: usize) -> WeightedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let params = StudentTParams::new(nu, mu, random_spd(&mut rng, d)).unwrap();
    WeightedSample::uniform(model::sample(&params, n, seed.wrapping_add(1000))).unwrap()
}

#[test]
fn every_kind_descends_monotonically() {
    let cfg = FitConfig::default();
    let mut seed = 0;
    for d in 1..=3 {
        for &nu in &[1.0, 5.0, 100.0] {
            seed += 1;
            let data = dataset(seed, d, nu, 150);
            for kind in AlgorithmKind::ALL {
                let res = fit(kind, &data, &cfg).unwrap();
                for w in res.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-10, "{kind} d={d} nu={nu}: {} -> {}", w[0], w[1]);
                }
                assert_eq!(res.objective_trace.len(), res.iterations + 1);
            }
        }
    }
}

#[test]
fn one_step_nu_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..60 {
        let d = 1 + trial % 3;
        let data = dataset(500 + trial as u64, d, rng.random_range(0.5..20.0), 40);
        let nu_r = rng.random_range(0.2..30.0);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let start = StudentTParams::new(nu_r, mu, random_spd(&mut rng, d)).unwrap();
        let e = e_step(&start, &data).unwrap();
        let (mu1, sigma1) = m_step_location_scatter(AlgorithmKind::Mmf, &data, &e.gamma).unwrap();
        let at = |nu: f64| neg_log_likelihood(&StudentTParams::new(nu, mu1.clone(), sigma1.clone()).unwrap(), &data).unwrap();
        let probe = StudentTParams::new(nu_r, mu1.clone(), sigma1.clone()).unwrap();
        let dl = model::deltas(&probe, &data).unwrap();
        let w = data.weights();
        let aem = nu_step_aem(nu_r, &dl, w, d).unwrap();
        let mmf = nu_step_mmf(nu_r, &dl, w, d).unwrap();
        let inner = InnerConfig { nu_max: 1e12, ..Default::default() };
        let gmmf = nu_step_gmmf(nu_r, &dl, w, d, &inner).unwrap();
        let chain = [at(nu_r), at(aem), at(mmf.min(1e12)), at(gmmf.nu)];
        for k in 0..3 {
            assert!(chain[k + 1] <= chain[k] + 1e-10, "trial {trial}: {chain:?}");
        }
    }
}

#[test]
fn gmmf_inner_iterates_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let d = 1 + trial % 3;
        let n = rng.random_range(3..30);
        let deltas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0 * d as f64)).collect();
        let w = vec![1.0 / n as f64; n];
        let nu_r = rng.random_range(0.1..50.0);
        let run = nu_step_gmmf(nu_r, &deltas, &w, d, &InnerConfig::default()).unwrap();
        let it = &run.iterates;
        if it.len() > 2 {
            let up = it[1] > it[0];
            for p in it.windows(2) {
                assert!(if up { p[1] >= p[0] } else { p[1] <= p[0] }, "{it:?}");
            }
        }
    }
}

#[test]
fn converged_fits_are_critical_points() {
    let cfg = FitConfig { tol: 1e-10, ..Default::default() };
    for seed in 0..6 {
        let data = dataset(40 + seed, 2, 2.0, 300);
        let res = fit(AlgorithmKind::Gmmf, &data, &cfg).unwrap();
        assert_eq!(res.status, FitStatus::Converged);
        let g = model::grad(&res.params, &data).unwrap();
        let scale = 1e-4 * (1.0 + res.final_objective().abs());
        assert!(g.max_abs() <= scale, "{g:?}");
        let step = fixed_point_map(AlgorithmKind::Gmmf, &res.params, &data, &cfg).unwrap();
        let before = tfit_core::accel::ParamVector::encode(&res.params).theta;
        let after = tfit_core::accel::ParamVector::encode(&step.params).theta;
        let diff: f64 = before.iter().zip(&after).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = before.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff <= 1e-6 * norm, "{diff}");
    }
}

#[test]
fn all_kinds_reach_the_same_estimate() {
    let cfg = FitConfig { tol: 1e-10, ..Default::default() };
    let data = dataset(3, 2, 3.0, 400);
    let reference = fit(AlgorithmKind::Gmmf, &data, &cfg).unwrap();
    for kind in AlgorithmKind::ALL {
        let res = fit(kind, &data, &cfg).unwrap();
        assert_eq!(res.status, FitStatus::Converged, "{kind}");
        assert!((res.params.nu - reference.params.nu).abs() < 1e-4 * reference.params.nu, "{kind}");
        assert!((res.final_objective() - reference.final_objective()).abs() < 1e-6, "{kind}");
    }
}

#[test]
fn affine_equivariance() {
    let cfg = FitConfig { tol: 1e-11, ..Default::default() };
    let data = dataset(11, 2, 4.0, 300);
    let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![-0.3, 1.5]]).unwrap();
    let b = [3.0, -1.0];
    let moved: Vec<Vec<f64>> = data
        .points()
        .iter()
        .map(|x| a.mul_vec(x).iter().zip(&b).map(|(v, c)| v + c).collect())
        .collect();
    let moved = WeightedSample::uniform(moved).unwrap();
    for kind in [AlgorithmKind::Mmf, AlgorithmKind::Gmmf, AlgorithmKind::Em] {
        let r0 = fit(kind, &data, &cfg).unwrap();
        let r1 = fit(kind, &moved, &cfg).unwrap();
        assert!((r0.params.nu - r1.params.nu).abs() < 1e-6 * r0.params.nu, "{kind}");
        let mu = a.mul_vec(&r0.params.mu);
        for k in 0..2 {
            assert!((mu[k] + b[k] - r1.params.mu[k]).abs() < 1e-6 * (1.0 + r1.params.mu[k].abs()));
        }
        let s = a.matmul(r0.params.sigma.matrix()).matmul(&a.transpose());
        let rel = s.max_abs_diff(r1.params.sigma.matrix()) / s.frobenius_norm();
        assert!(rel < 1e-6, "{kind}: {rel}");
    }
}

#[test]
fn fixed_nu_satisfies_trace_identity() {
    let points = vec![vec![-1.0], vec![0.0], vec![2.0]];
    let data = WeightedSample::uniform(points).unwrap();
    for kind in [AlgorithmKind::Em, AlgorithmKind::Mmf] {
        let cfg = FitConfig { fixed_nu: Some(1.0), tol: 1e-13, ..Default::default() };
        let res = fit(kind, &data, &cfg).unwrap();
        assert_eq!(res.params.nu, 1.0);
        let dl = model::deltas(&res.params, &data).unwrap();
        let s: f64 = dl.iter().map(|&x| (1.0 + 1.0) / (1.0 + x) / 3.0).sum();
        assert!((s - 1.0).abs() <= 1e-8, "{kind}: {s}");
        // location equation Σ w γ (x − μ) = 0
        let g: f64 = dl
            .iter()
            .zip(data.points())
            .map(|(&x, p)| 2.0 / (1.0 + x) * (p[0] - res.params.mu[0]))
            .sum();
        assert!(g.abs() < 1e-8, "{g}");
    }
}

#[test]
fn symmetric_data_keeps_zero_location() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pts = Vec::new();
    for _ in 0..50 {
        let v: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        pts.push(vec![-v[0], -v[1]]);
        pts.push(v);
    }
    let data = WeightedSample::uniform(pts).unwrap();
    let start = StudentTParams::new(3.0, vec![0.0, 0.0], SpdMatrix::identity(2)).unwrap();
    for kind in AlgorithmKind::ALL {
        let step = fixed_point_map(kind, &start, &data, &FitConfig::default()).unwrap();
        assert!(step.params.mu.iter().all(|m| m.abs() < 1e-14), "{kind}");
    }
}

#[test]
fn aem_map_is_the_composition_of_its_steps() {
    let data = WeightedSample::uniform(vec![vec![-1.0], vec![0.0], vec![2.0]]).unwrap();
    let start = StudentTParams::new(3.0, vec![0.5], cholesky(&Matrix::from_diag(&[2.0])).unwrap()).unwrap();
    let step = fixed_point_map(AlgorithmKind::Aem, &start, &data, &FitConfig::default()).unwrap();
    let e = e_step(&start, &data).unwrap();
    let (mu, sigma) = m_step_location_scatter(AlgorithmKind::Aem, &data, &e.gamma).unwrap();
    let probe = StudentTParams::new(3.0, mu.clone(), sigma.clone()).unwrap();
    let nu = nu_step_aem(3.0, &model::deltas(&probe, &data).unwrap(), data.weights(), 1).unwrap();
    assert_eq!(step.params.mu, mu);
    assert_eq!(step.params.sigma, sigma);
    assert_eq!(step.params.nu, nu);
}

#[test]
fn gaussian_data_reports_gaussian_scatter() {
    let data = dataset(21, 2, 1e9, 1000);
    let res = fit(AlgorithmKind::Gmmf, &data, &FitConfig::default()).unwrap();
    if res.status == FitStatus::GaussianLimit {
        let s = res.gaussian_sigma.expect("scatter reported");
        let n = data.len() as f64;
        let mean: Vec<f64> = (0..2).map(|k| data.points().iter().map(|p| p[k]).sum::<f64>() / n).collect();
        let mut direct = Matrix::zeros(2);
        for p in data.points() {
            direct.add_outer(1.0 / n, &[p[0] - mean[0], p[1] - mean[1]]);
        }
        assert!(s.matrix().max_abs_diff(&direct) < 1e-10);
    } else {
        assert!(res.params.nu > 20.0, "{}", res.params.nu);
    }
}

#[test]
fn max_iters_is_a_status() {
    let data = dataset(2, 2, 1.0, 200);
    let cfg = FitConfig { max_outer_iters: 3, ..Default::default() };
    let res = fit(AlgorithmKind::Em, &data, &cfg).unwrap();
    assert_eq!(res.status, FitStatus::MaxIters);
    assert_eq!(res.iterations, 3);
}

#[test]
fn degenerate_inputs_are_errors() {
    assert!(WeightedSample::uniform(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
    let collinear = WeightedSample::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
    assert!(fit(AlgorithmKind::Mmf, &collinear, &FitConfig::default()).is_err());
}
