mod common;

use hairdigi::bcsdf::{azimuthal_n, furnace_energy, longitudinal_m, Bcsdf, FiberMaterial, P_MAX};
use hairdigi::math::{uniform_sphere, PI};
use hairdigi::params::SpectralAbsorption;
use hairdigi::rng::rng_from_seed;
use hairdigi::HairParams;
use proptest::prelude::*;

fn lossless() -> FiberMaterial {
    FiberMaterial::new(SpectralAbsorption::ZERO, 1.55, 0.3, 0.3, 2f64.to_radians()).unwrap()
}

#[test]
fn lossless_fiber_conserves_energy_uniform_estimator() {
    for deg in [0.0, 30.0, 60.0] {
        let e = common::uniform_furnace(&lossless(), f64::to_radians(deg), 200_000, 1);
        for c in e {
            assert!((0.95..=1.01).contains(&c), "theta_o={deg}: {c}");
        }
    }
}

#[test]
fn lossless_fiber_conserves_energy_importance_estimator() {
    let mut rng = rng_from_seed(2);
    for deg in [0.0, 30.0, 60.0, 85.0] {
        let e = furnace_energy(&lossless(), f64::to_radians(deg), 100_000, &mut rng);
        assert!((e.luminance() - 1.0).abs() < 0.01, "theta_o={deg}: {e:?}");
    }
}

#[test]
fn absorbing_fiber_loses_energy_per_channel() {
    let mat = FiberMaterial::from_hair(&HairParams::natural(0.5, 0.3).unwrap());
    let e = common::uniform_furnace(&mat, 0.3, 100_000, 3);
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    assert!(e.iter().all(|&c| c > 0.0 && c < 1.0));
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn lobe_quadrature() {
    for v in [0.01, 0.1, 0.5, 1.0] {
        let (so, co) = (0.2f64.sin(), 0.2f64.cos());
        let m = simpson(|t| longitudinal_m(v, t.sin(), t.cos(), so, co) * t.cos(), -PI / 2.0, PI / 2.0, 8000);
        assert!((m - 1.0).abs() < 1e-3, "v={v}: {m}");
    }
    let s = lossless().logistic_scale();
    for p in 0..P_MAX {
        let n = simpson(|phi| azimuthal_n(phi, p, s, 0.4, 0.25), -PI, PI, 20_000);
        assert!((n - 1.0).abs() < 1e-4, "p={p}: {n}");
    }
}

#[test]
fn sampling_matches_pdf_chi_square() {
    let mats = [
        lossless(),
        FiberMaterial::new(SpectralAbsorption([0.4, 0.8, 1.6]), 1.55, 0.2, 0.5, 0.03).unwrap(),
        FiberMaterial::new(SpectralAbsorption([3.0; 3]), 1.6, 0.5, 0.2, 0.0).unwrap(),
    ];
    let wo = hairdigi::bcsdf::direction(0.4, 0.7);
    for (i, m) in mats.iter().enumerate() {
        let p = common::chi_square_sampling(m, 0.3, wo, 200_000, 64, 32, 10 + i as u64);
        assert!(p > 0.01, "material {i}: p = {p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eval_nonnegative_and_pdf_positive_where_eval_is(
        h in -1.0f64..1.0,
        u in prop::array::uniform4(0.0f64..1.0),
        sigma in prop::array::uniform3(0.0f64..5.0),
        beta_m in 0.05f64..1.0,
        beta_n in 0.05f64..1.0,
    ) {
        let mat = FiberMaterial::new(SpectralAbsorption(sigma), 1.55, beta_m, beta_n, 0.03).unwrap();
        let wo = uniform_sphere(u[0], u[1]);
        let wi = uniform_sphere(u[2], u[3]);
        let b = Bcsdf::new(h, &mat);
        let f = b.eval(wo, wi);
        prop_assert!(f.0.iter().all(|&c| c.is_finite() && c >= 0.0));
        if f.max_component() > 0.0 {
            prop_assert!(b.pdf(wo, wi) > 0.0);
        }
    }

    #[test]
    fn sample_agrees_with_pdf_and_eval(h in -1.0f64..1.0, seed in 0u64..1000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mat = FiberMaterial::from_hair(&HairParams::natural(0.4, 0.5).unwrap());
        let wo = uniform_sphere(a, b);
        let bc = Bcsdf::new(h, &mat);
        let s = bc.sample(wo, &mut rng_from_seed(seed));
        prop_assume!(s.pdf > 0.0);
        let pdf = bc.pdf(wo, s.wi);
        prop_assert!((s.pdf - pdf).abs() <= 1e-6 * pdf);
        let f = bc.eval(wo, s.wi);
        for c in 0..3 {
            prop_assert!((s.value.0[c] - f.0[c]).abs() <= 1e-9 * f.0[c].max(1e-12));
        }
    }
}
