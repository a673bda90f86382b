use fracmild::mittag::{ml_scalar, sq_apply, sq_integral_apply, tq_apply, MLOrder, SpectralOperator};
use nalgebra::DVector;

const REFERENCE: &str = include_str!("fixtures/mittag_reference.csv");

fn ml(q: f64, b: f64, z: f64) -> f64 {
    ml_scalar(MLOrder::new(q, b).unwrap(), z).unwrap()
}

#[test]
fn agrees_with_extended_precision_series_grid() {
    let mut rows = 0;
    let mut worst = 0.0f64;
    for line in REFERENCE.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (q, b, z, want) = (cols[0], cols[1], cols[2], cols[3]);
        let got = ml(q, b, z);
        let err = (got - want).abs();
        let allowed = (1e-9 * want.abs()).max(1e-12);
        assert!(err <= allowed, "q={q} beta={b} z={z}: {got} vs {want}");
        worst = worst.max(err / allowed);
        rows += 1;
    }
    assert_eq!(rows, 1200);
    assert!(worst <= 1.0);
}

#[test]
fn scalar_series_oracles() {
    let cases = [
        (ml(1.5, 1.0, -1.0), 0.396_629_365_318_088_08),
        (ml(1.5, 1.0, -2.0), 0.029_430_685_602_826_472),
    ];
    for (got, want) in cases {
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn operator_families_against_oracles() {
    let a = SpectralOperator::diagonal(vec![-1.0, -2.0]).unwrap();
    let v = sq_apply(&a, 1.5, 1.0, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
    assert!((v[0] - 0.396_629_365_318_088_08).abs() < 1e-14);
    assert!((v[1] - 0.029_430_685_602_826_472).abs() < 1e-14);

    let a = SpectralOperator::diagonal(vec![-4.0]).unwrap();
    let t = tq_apply(&a, 1.5, 0.5, &DVector::from_element(1, 2.0)).unwrap();
    assert!((t[0] - 0.808_434_817_355_295_89).abs() < 1e-12);

    let a = SpectralOperator::diagonal(vec![-1.0]).unwrap();
    let s = sq_integral_apply(&a, 1.5, 1.0, &DVector::from_element(1, 1.0)).unwrap();
    assert!((s[0] - 0.737_482_247_901_894_71).abs() < 1e-8 * 0.74);
}

#[test]
fn zero_operator_and_zero_time() {
    let zero = SpectralOperator::diagonal(vec![0.0, 0.0]).unwrap();
    let v = DVector::from_vec(vec![0.3, -1.2]);
    assert_eq!(sq_apply(&zero, 1.3, 2.0, &v).unwrap(), v);
    let t = tq_apply(&zero, 1.3, 2.0, &v).unwrap();
    let scale = 2f64.powf(0.3) * fracmild::mittag::rgamma(1.3);
    assert!((t - &v * scale).amax() < 1e-15);
    assert_eq!(sq_integral_apply(&zero, 1.3, 2.0, &v).unwrap(), &v * 2.0);
    let a = SpectralOperator::diagonal(vec![-3.0, -7.0]).unwrap();
    assert_eq!(sq_apply(&a, 1.5, 0.0, &v).unwrap(), v);
    assert_eq!(tq_apply(&a, 1.5, 0.0, &v).unwrap(), DVector::zeros(2));
    assert_eq!(sq_integral_apply(&a, 1.5, 0.0, &v).unwrap(), DVector::zeros(2));
}
