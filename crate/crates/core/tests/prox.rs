use levelset::tv::{tv_prox_detailed, DualField};
use levelset::{tv_norm, tv_prox, Image, TvFlavor};
use proptest::prelude::*;

fn image(rows: usize, cols: usize, px: Vec<f64>) -> Image {
    Image::new(rows, cols, px).unwrap()
}

fn dist(a: &Image, b: &Image) -> f64 {
    a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn prox(b: &Image, w: f64, flavor: TvFlavor) -> Image {
    tv_prox(b, w, flavor, 2000, 1e-12).unwrap()
}

fn flavors() -> impl Strategy<Value = TvFlavor> {
    prop_oneof![Just(TvFlavor::Isotropic), Just(TvFlavor::Anisotropic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn non_expansive(
        a in prop::collection::vec(0.0..10.0f64, 30),
        b in prop::collection::vec(0.0..10.0f64, 30),
        w in 0.05..3.0f64,
        flavor in flavors(),
    ) {
        let (a, b) = (image(5, 6, a), image(5, 6, b));
        prop_assert!(dist(&prox(&a, w, flavor), &prox(&b, w, flavor)) <= dist(&a, &b) + 1e-6);
    }

    #[test]
    fn translation_equivariant(
        px in prop::collection::vec(0.0..10.0f64, 20),
        c in -50.0..50.0f64,
        w in 0.05..3.0f64,
        flavor in flavors(),
    ) {
        let b = image(4, 5, px.clone());
        let shifted = image(4, 5, px.iter().map(|v| v + c).collect());
        let (u, v) = (prox(&b, w, flavor), prox(&shifted, w, flavor));
        for (x, y) in u.pixels().iter().zip(v.pixels()) {
            prop_assert!((x + c - y).abs() < 1e-6);
        }
    }

    #[test]
    fn does_not_increase_tv(px in prop::collection::vec(0.0..10.0f64, 42), w in 0.01..5.0f64, flavor in flavors()) {
        let b = image(6, 7, px);
        prop_assert!(tv_norm(&prox(&b, w, flavor), flavor) <= tv_norm(&b, flavor) + 1e-9);
    }

    #[test]
    fn final_dual_is_feasible(px in prop::collection::vec(0.0..10.0f64, 42), w in 0.01..5.0f64, iters in 1usize..60, flavor in flavors()) {
        let out = tv_prox_detailed(&image(7, 6, px), w, flavor, iters, 0.0).unwrap();
        prop_assert!(out.dual.is_feasible(flavor, 1e-12));
    }

    #[test]
    fn iso_bounded_by_aniso(px in prop::collection::vec(-100.0..100.0f64, 16)) {
        let img = image(4, 4, px);
        let (iso, aniso) = (tv_norm(&img, TvFlavor::Isotropic), tv_norm(&img, TvFlavor::Anisotropic));
        prop_assert!(aniso >= iso - 1e-12);
        prop_assert!(iso >= aniso / 2f64.sqrt() - 1e-12);
    }
}

#[test]
fn hand_evaluated_norms() {
    let x = image(2, 2, vec![0.0, 1.0, 0.0, 1.0]);
    assert!((tv_norm(&x, TvFlavor::Isotropic) - 2.0).abs() < 1e-15);
    assert!((tv_norm(&x, TvFlavor::Anisotropic) - 2.0).abs() < 1e-15);
    assert_eq!(tv_norm(&Image::filled(3, 4, 7.5).unwrap(), TvFlavor::Isotropic), 0.0);
}

#[test]
fn constant_input_is_fixed() {
    let b = Image::filled(4, 4, 12.0).unwrap();
    for flavor in [TvFlavor::Isotropic, TvFlavor::Anisotropic] {
        assert!(dist(&prox(&b, 3.0, flavor), &b) < 1e-9);
    }
}

#[test]
fn heavy_weight_flattens_to_mean() {
    let b = image(3, 4, (0..12).map(|v| (v * v) as f64).collect());
    let u = prox(&b, 1e4, TvFlavor::Isotropic);
    assert!(u.pixels().iter().all(|v| (v - b.mean()).abs() < 1e-3));
}

#[test]
fn zero_weight_is_identity_and_negative_weight_rejected() {
    let b = image(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(tv_prox(&b, 0.0, TvFlavor::Isotropic, 50, 1e-5).unwrap(), b);
    assert!(tv_prox(&b, -1.0, TvFlavor::Isotropic, 50, 1e-5).is_err());
}

#[test]
fn mismatched_dual_shapes_rejected() {
    assert!(DualField::new(3, 3, vec![0.0; 5], vec![0.0; 6]).is_err());
}
