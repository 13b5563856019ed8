use std::f64::consts::PI;

use proptest::prelude::*;
use silt_core::kernel::fourier_identity_error;
use silt_core::{lattice_self_convolution, mollified_l2, sample_path, silt, Kernel2D, Mollifier, StepDistribution};

#[test]
fn sampled_kernels_are_probability_densities() {
    for r in [1.0, 2.0, 4.0, 8.0] {
        let k = Kernel2D::sample(Mollifier::band_limited(), r).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-9, "r = {r}: mass {}", k.mass());
        assert!(k.asymmetry() < 1e-15);
        assert!(k.values().iter().all(|&v| v >= -1e-15));
    }
}

#[test]
fn transform_is_band_limited() {
    let m = Mollifier::band_limited();
    assert!((m.transform([0.0, 0.0]) - 1.0).abs() < 1e-12);
    let edge = m.band_edge();
    assert!(edge < PI);
    for w in [edge * 1.0001, edge * 1.5, 3.0 * edge] {
        assert_eq!(m.transform([w, 0.0]), 0.0);
        assert_eq!(m.transform([0.3, -w]), 0.0);
    }
    assert!(m.transform([0.5 * edge, 0.0]) > 0.0);
}

#[test]
fn identity_holds_beyond_the_acceptance_scales() {
    for r in [1.5, 3.0] {
        let e = fourier_identity_error(Mollifier::band_limited(), r, 32).unwrap();
        assert!(e < 1e-8, "r = {r}: {e}");
    }
}

#[test]
fn delta_kernel_recovers_the_local_time() {
    let d = StepDistribution::lazy();
    for n in [10, 200, 3000] {
        let p = sample_path(&d, n, 3, n as u64).unwrap();
        let l2 = mollified_l2(&p, &Kernel2D::delta(), 1.0, 2.0).unwrap();
        // Σ_{j,k} δ(S_j, S_k) counts the diagonal once and each pair twice.
        assert_eq!(l2, (n as u64 + 2 * silt(&p)) as f64);
    }
}

#[test]
fn convolved_kernel_has_unit_mass() {
    let k = Kernel2D::sample(Mollifier::band_limited(), 2.0).unwrap();
    let c = lattice_self_convolution(&k, 2.0).unwrap();
    assert!((c.mass() - 1.0).abs() < 1e-9);
    assert!(c.asymmetry() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_is_even_and_bounded(a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let m = Mollifier::band_limited();
        let t = m.transform([a, b]);
        prop_assert!((t - m.transform([-a, -b])).abs() < 1e-12);
        prop_assert!((-1e-14..=1.0 + 1e-12).contains(&t));
    }
}
