use dirms::geometry::{chord_distance, dot, geodesic_distance, tangent_project};
use dirms::meanshift::{cluster, ms_step, MsConfig};
use dirms::sampling::{sample_uniform_sphere, sample_vmf, SeededRng};
use dirms::{DirectionalKernel, KdeModel, PointSet, UnitVector};
use proptest::prelude::*;

fn model(q: usize, n: usize, h: f64, seed: u64) -> KdeModel {
    let mut rng = SeededRng::new(seed);
    let mu = sample_uniform_sphere(q, 1, &mut rng).point(0);
    let data = sample_vmf(&mu, 4.0, n, &mut rng).unwrap();
    KdeModel::new(data, h, DirectionalKernel::von_mises()).unwrap()
}

fn query(q: usize, seed: u64) -> UnitVector {
    sample_uniform_sphere(q, 1, &mut SeededRng::new(seed ^ 0x5eed)).point(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_forms_agree_on_sphere(q in prop::sample::select(vec![1usize, 2, 5]),
                                     h in 0.1f64..2.0, seed in any::<u64>()) {
        let m = model(q, 40, h, seed);
        let x = query(q, seed);
        let a = m.density(&x);
        let b = m.density_alt(x.as_slice()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn gradient_forms_differ_radially(q in prop::sample::select(vec![1usize, 2, 5]),
                                      h in 0.2f64..2.0, seed in any::<u64>()) {
        let m = model(q, 30, h, seed);
        let x = query(q, seed);
        let hat = m.total_gradient_hat(&x);
        let tilde = m.total_gradient_tilde(x.as_slice()).unwrap();
        let diff: Vec<f64> = hat.iter().zip(&tilde).map(|(a, b)| a - b).collect();
        let along = dot(&diff, x.as_slice());
        let scale = hat.iter().chain(&tilde).fold(1e-300_f64, |s, v| s.max(v.abs()));
        for (d, xi) in diff.iter().zip(x.as_slice()) {
            prop_assert!((d - along * xi).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn riemannian_gradient_is_projected_tilde_gradient(q in prop::sample::select(vec![1usize, 2, 5]),
                                                       h in 0.2f64..2.0, seed in any::<u64>()) {
        let m = model(q, 30, h, seed);
        let x = query(q, seed);
        let g = m.riemannian_gradient(&x);
        let p = tangent_project(&x, &m.total_gradient_tilde(x.as_slice()).unwrap()).unwrap();
        let scale = p.norm().max(1e-300);
        prop_assert!(chord_distance(g.as_slice(), p.as_slice()) <= 1e-10 * scale.max(g.norm()));
    }

    #[test]
    fn mean_shift_step_does_not_decrease_density(q in prop::sample::select(vec![1usize, 2, 3]),
                                                 h in 0.15f64..1.0, seed in any::<u64>()) {
        let m = model(q, 50, h, seed);
        let x = query(q, seed);
        if let Ok(y) = ms_step(&m, &x) {
            prop_assert!(m.density(&y) >= m.density(&x) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn clustering_labels_and_modes_are_consistent(seed in any::<u64>()) {
        let m = model(2, 60, 0.4, seed);
        let cfg = MsConfig::default();
        let c = cluster(&m, m.data(), &cfg).unwrap();
        prop_assert_eq!(c.labels.len(), m.n());
        prop_assert!(c.labels.iter().flatten().all(|&l| l < c.n_modes()));
        prop_assert_eq!(c.cluster_sizes().iter().sum::<usize>(), c.labels.iter().flatten().count());
        for i in 0..c.n_modes() {
            for j in i + 1..c.n_modes() {
                prop_assert!(geodesic_distance(&c.modes[i], &c.modes[j]) > cfg.merge_tol);
            }
        }
    }
}

#[test]
fn single_point_density_is_kernel_times_constant() {
    let x0 = UnitVector::basis(3, 2);
    let data = PointSet::from_unit_vectors(std::slice::from_ref(&x0)).unwrap();
    let h = 0.5;
    let m = KdeModel::new(data, h, DirectionalKernel::von_mises()).unwrap();
    let y = UnitVector::new(vec![0.3, -0.2, 0.9]).unwrap();
    let r = (1.0 - y.dot(&x0)) / (h * h);
    let want = m.normalizing_constant().value() * (-r).exp();
    assert!((m.density(&y) / want - 1.0).abs() < 1e-13);
}
