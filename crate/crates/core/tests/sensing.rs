use levelset::sensing::{measure, proxy_observations};
use levelset::{LinearOperator, SensingOperator};
use nalgebra::{DMatrix, DVector};

#[test]
fn matvec_is_linear() {
    let op = SensingOperator::gaussian(30, 50, 7).unwrap();
    let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
    let z: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
    let combo: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    let (ax, az, ac) = (op.matvec(&x).unwrap(), op.matvec(&z).unwrap(), op.matvec(&combo).unwrap());
    for i in 0..30 {
        assert!((ac[i] - (2.0 * ax[i] - 3.0 * az[i])).abs() < 1e-12);
    }
}

#[test]
fn proxy_matches_dense_gram_product() {
    let (k, p) = (40, 64);
    let op = SensingOperator::gaussian(k, p, 11).unwrap();
    let x: Vec<f64> = (0..p).map(|i| 40.0 + (i % 7) as f64 * 10.0).collect();
    let meas = measure(&op, &x, 0.0, 3).unwrap();
    let z = proxy_observations(&op, &meas).unwrap();

    let a = DMatrix::from_row_slice(k, p, op.entries());
    let expected = a.transpose() * &a * DVector::from_column_slice(&x);
    for (got, want) in z.iter().zip(expected.iter()) {
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}

#[test]
fn noise_is_seeded_and_scaled() {
    let op = SensingOperator::identity(4000).unwrap();
    let x = vec![0.0; 4000];
    let a = measure(&op, &x, 10.0, 99).unwrap();
    assert_eq!(a.y, measure(&op, &x, 10.0, 99).unwrap().y);
    assert_ne!(a.y, measure(&op, &x, 10.0, 100).unwrap().y);
    let sd = (a.y.iter().map(|v| v * v).sum::<f64>() / 4000.0).sqrt();
    assert!((sd - 10.0).abs() < 0.5, "sd {sd}");
}

#[test]
fn operator_dump_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.bin");
    let op = SensingOperator::gaussian(5, 9, 1234).unwrap();
    op.save(&path).unwrap();
    let back = SensingOperator::load(&path).unwrap();
    assert_eq!((back.k(), back.p(), back.seed()), (5, 9, 1234));
    assert_eq!(back.entries(), op.entries());
    assert_eq!(back.rows(), 5);
}

#[test]
fn shape_mismatch_is_an_error() {
    let op = SensingOperator::gaussian(3, 4, 0).unwrap();
    assert!(op.matvec(&[1.0; 5]).is_err());
    assert!(op.adjoint_matvec(&[1.0; 4]).is_err());
}
