use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::rng;
use crate::smdp::EnvState;

fn z(features: Vec<f64>, w: f64, t: u32) -> AugmentedState {
    AugmentedState {
        env: EnvState { features },
        w,
        t,
    }
}

fn random_matrix(r: &mut RandomSource, rows: usize, cols: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = r.random_range(-scale..scale);
    }
    m
}

fn log_prob_inter(alpha: &Matrix, phi: &[f64], chosen: usize) -> f64 {
    log_softmax(&logits(alpha, phi).unwrap())[chosen]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn two_skill_policy() -> TwoTieredPolicy {
    let features = FeatureSpec::fourier(3, Coupling::Decoupled, vec![Input::Env(0), Input::W], vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
    let rad = RadFeatureSpec::Raw {
        inputs: vec![Input::Env(0), Input::W],
        bounds: vec![(0.0, 1.0), (0.0, 2.0)],
    };
    TwoTieredPolicy::initial(features, rad, 25.0, 75.0, (0.0, 150.0), vec!["a".into(), "b".into()], 1).unwrap()
}

#[test]
fn zero_parameters_give_uniform_skills() {
    let p = inter_skill_probs(&Matrix::zeros(3, 4), &[1.0, 0.2, -0.3, 0.5]).unwrap();
    for v in p {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn two_logit_softmax_matches_closed_form() {
    let alpha = Matrix::from_rows(vec![vec![1.0], vec![0.0]]).unwrap();
    let p = inter_skill_probs(&alpha, &[1.0]).unwrap();
    let e = 1.0_f64.exp();
    assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
    assert!((p[0] - 0.73106).abs() < 1e-5 && (p[1] - 0.26894).abs() < 1e-5);
}

#[test]
fn huge_logits_do_not_overflow() {
    let alpha = Matrix::from_rows(vec![vec![1000.0], vec![-1000.0], vec![999.0]]).unwrap();
    let p = inter_skill_probs(&alpha, &[1.0]).unwrap();
    assert!(p.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn feature_dimension_mismatch_is_rejected() {
    assert!(inter_skill_probs(&Matrix::zeros(2, 3), &[1.0, 2.0]).is_err());
    assert!(log_grad_inter(&Matrix::zeros(2, 3), &[1.0], 0).is_err());
    assert!(log_grad_inter(&Matrix::zeros(2, 1), &[1.0], 2).is_err());
}

#[test]
fn degenerate_skill_distribution_is_deterministic() {
    let mut r = rng::from_seed(1);
    assert!((0..1000).all(|_| sample_skill(&[1.0, 0.0], &mut r) == 0));
}

#[test]
fn fair_skill_frequencies_concentrate() {
    let mut r = rng::from_seed(2);
    let n = 100_000;
    let zeros = (0..n).filter(|_| sample_skill(&[0.5, 0.5], &mut r) == 0).count();
    let freq = zeros as f64 / n as f64;
    assert!((0.495..=0.505).contains(&freq), "{freq}");
}

#[test]
fn skill_frequencies_match_probabilities() {
    let probs = [0.2, 0.5, 0.3];
    let mut r = rng::from_seed(3);
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        counts[sample_skill(&probs, &mut r)] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se);
    }
}

#[test]
fn sampling_is_reproducible() {
    let draw = |seed| {
        let mut r = rng::from_seed(seed);
        (0..50).map(|_| sample_skill(&[0.3, 0.7], &mut r)).collect::<Vec<_>>()
    };
    assert_eq!(draw(8), draw(8));
}

#[test]
fn tiny_variance_draws_the_mean() {
    let mut r = rng::from_seed(4);
    let d = rad_sample(&[10.0, 2.0], &[1.0, 0.5], 1e-12, (0.0, 150.0), &mut r).unwrap();
    assert!((d.executed - 11.0).abs() < 1e-4);
}

#[test]
fn executed_rap_is_clamped_but_raw_draw_is_kept() {
    let mut r = rng::from_seed(5);
    let d = rad_sample(&[200.0], &[1.0], 25.0, (0.0, 150.0), &mut r).unwrap();
    assert_eq!(d.executed, 150.0);
    assert!(d.raw > 150.0);
    assert!(rad_sample(&[1.0], &[1.0], 0.0, (0.0, 1.0), &mut r).is_err());
}

#[test]
fn rap_sample_mean_concentrates() {
    let mut r = rng::from_seed(6);
    let n = 100_000;
    let v = 25.0;
    let mean = (0..n)
        .map(|_| rad_sample(&[60.0, 20.0], &[1.0, 0.5], v, (-1e9, 1e9), &mut r).unwrap().raw)
        .sum::<f64>()
        / n as f64;
    assert!((mean - 70.0).abs() < 3.0 * (v / n as f64).sqrt());
}

#[test]
fn uniform_gibbs_gradient_splits_evenly() {
    let phi = [1.0, 0.5, -2.0];
    let g = log_grad_inter(&Matrix::zeros(2, 3), &phi, 0).unwrap();
    for (j, f) in phi.iter().enumerate() {
        assert_eq!(g.get(0, j), 0.5 * f);
        assert_eq!(g.get(1, j), -0.5 * f);
    }
}

#[test]
fn saturated_gibbs_gradient_vanishes() {
    let alpha = Matrix::from_rows(vec![vec![60.0], vec![0.0]]).unwrap();
    let g = log_grad_inter(&alpha, &[1.0], 0).unwrap();
    assert!(g.max_abs() < 1e-20);
}

#[test]
fn gaussian_gradient_examples() {
    let g = log_grad_rad(&[3.0, 1.0], &[1.0, 2.0], 5.0, 25.0).unwrap();
    assert_eq!(g, vec![0.0, 0.0]);
    assert_eq!(log_grad_rad(&[3.0], &[1.0], 3.0 + 25.0, 25.0).unwrap(), vec![1.0]);
    assert!(log_grad_rad(&[3.0], &[1.0], 3.0, 0.0).is_err());
    assert!(log_grad_rad(&[3.0], &[1.0], 3.0, -1.0).is_err());
}

#[test]
fn gibbs_gradient_matches_finite_differences() {
    let mut r = rng::from_seed(7);
    let h = 1e-5;
    for _ in 0..200 {
        let n = r.random_range(2..5);
        let f = r.random_range(1..8);
        let alpha = random_matrix(&mut r, n, f, 3.0);
        let phi: Vec<f64> = (0..f).map(|_| r.random_range(-1.0..1.0)).collect();
        let chosen = r.random_range(0..n);
        let g = log_grad_inter(&alpha, &phi, chosen).unwrap();
        for k in 0..alpha.len() {
            let mut plus = alpha.clone();
            plus.as_mut_slice()[k] += h;
            let mut minus = alpha.clone();
            minus.as_mut_slice()[k] -= h;
            let fd = (log_prob_inter(&plus, &phi, chosen) - log_prob_inter(&minus, &phi, chosen)) / (2.0 * h);
            assert!(rel(g.as_slice()[k], fd) < 1e-5);
        }
    }
}

#[test]
fn gaussian_gradient_matches_finite_differences() {
    let mut r = rng::from_seed(8);
    let h = 1e-5;
    for _ in 0..200 {
        let m = r.random_range(1..6);
        let omega: Vec<f64> = (0..m).map(|_| r.random_range(-50.0..50.0)).collect();
        let phi: Vec<f64> = (0..m).map(|_| r.random_range(0.0..1.0)).collect();
        let v = r.random_range(1.0..50.0);
        let y = dot(&omega, &phi) + r.random_range(-15.0..15.0);
        let g = log_grad_rad(&omega, &phi, y, v).unwrap();
        for k in 0..m {
            let mut plus = omega.clone();
            plus[k] += h;
            let mut minus = omega.clone();
            minus[k] -= h;
            let fd = (gaussian_log_density(y, dot(&plus, &phi), v) - gaussian_log_density(y, dot(&minus, &phi), v)) / (2.0 * h);
            assert!(rel(g[k], fd) < 1e-5);
        }
    }
}

#[test]
fn joint_log_prob_is_the_product_of_tiers() {
    let mut p = two_skill_policy();
    let mut r = rng::from_seed(9);
    p.inter.alpha = random_matrix(&mut r, 2, p.features.len(), 1.0);
    p.rad.omega = random_matrix(&mut r, 2, 3, 40.0);
    let state = z(vec![0.3], 0.7, 4);
    for sigma in 0..2 {
        let y = 12.5;
        let inter = p.skill_probs(&state).unwrap()[sigma];
        let mean = p.rap_mean(&state, sigma).unwrap();
        let density = (-(y - mean).powi(2) / (2.0 * 25.0)).exp() / (2.0 * PI * 25.0).sqrt();
        let joint = p.log_prob(&state, sigma, y).unwrap().exp();
        assert!(((joint - inter * density) / joint).abs() < 1e-12);
    }
}

#[test]
fn joint_gradient_concatenates_tier_gradients() {
    let mut p = two_skill_policy();
    let mut r = rng::from_seed(10);
    p.inter.alpha = random_matrix(&mut r, 2, p.features.len(), 1.0);
    p.rad.omega = random_matrix(&mut r, 2, 3, 40.0);
    let state = z(vec![0.6], 1.1, 9);
    let (ga, go) = p.log_grad(&state, 1, 33.0).unwrap();
    let ga_ref = log_grad_inter(&p.inter.alpha, &p.inter_features(&state).unwrap(), 1).unwrap();
    let go_ref = log_grad_rad(p.rad.omega.row(1), &p.rad_features(&state).unwrap(), 33.0, 25.0).unwrap();
    assert_eq!(ga, ga_ref);
    assert_eq!(go.row(1), &go_ref[..]);
    assert!(go.row(0).iter().all(|&v| v == 0.0));

    let h = 1e-5;
    for k in 0..p.inter.alpha.len() {
        let mut a = p.clone();
        a.inter.alpha.as_mut_slice()[k] += h;
        let mut b = p.clone();
        b.inter.alpha.as_mut_slice()[k] -= h;
        let fd = (a.log_prob(&state, 1, 33.0).unwrap() - b.log_prob(&state, 1, 33.0).unwrap()) / (2.0 * h);
        assert!(rel(ga.as_slice()[k], fd) < 1e-5);
    }
    for k in 0..p.rad.omega.len() {
        let mut a = p.clone();
        a.rad.omega.as_mut_slice()[k] += h;
        let mut b = p.clone();
        b.rad.omega.as_mut_slice()[k] -= h;
        let fd = (a.log_prob(&state, 1, 33.0).unwrap() - b.log_prob(&state, 1, 33.0).unwrap()) / (2.0 * h);
        assert!(rel(go.as_slice()[k], fd) < 1e-5);
    }
}

#[test]
fn greedy_action_breaks_ties_toward_lowest_index() {
    let p = two_skill_policy();
    let mut r = rng::from_seed(0);
    let a = p.act(&z(vec![0.5], 0.0, 0), ActionMode::Greedy, &mut r).unwrap();
    assert_eq!(a.skill, 0);
    assert_eq!(a.rap, 75.0);
}

#[test]
fn environment_mismatch_is_reported() {
    let p = two_skill_policy();
    assert!(p.check_environment(1, 2).is_ok());
    assert!(matches!(p.check_environment(2, 2), Err(Error::Dimension { .. })));
    assert!(p.check_environment(1, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn probabilities_lie_on_the_simplex(
        logits in prop::collection::vec(-700.0..700.0f64, 1..6),
    ) {
        let alpha = Matrix::from_rows(logits.iter().map(|&l| vec![l]).collect()).unwrap();
        let p = inter_skill_probs(&alpha, &[1.0]).unwrap();
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn probabilities_are_shift_invariant(
        logits in prop::collection::vec(-50.0..50.0f64, 2..6),
        c in -100.0..100.0f64,
    ) {
        let alpha = Matrix::from_rows(logits.iter().map(|&l| vec![l]).collect()).unwrap();
        let shifted = Matrix::from_rows(logits.iter().map(|&l| vec![l + c]).collect()).unwrap();
        let p = inter_skill_probs(&alpha, &[1.0]).unwrap();
        let q = inter_skill_probs(&shifted, &[1.0]).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
