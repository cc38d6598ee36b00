use smog_demo::{pareto_summary_native, prior_samples_native, SinusoidalDemo, CURVE_COLUMNS};

#[test]
fn observations_shrink_the_smog_band() {
    let mut demo = SinusoidalDemo::try_new(1, 24).unwrap();
    assert_eq!(demo.meta_tasks(), 3);
    let sd_at = |d: &SinusoidalDemo, row: usize| d.try_curves(33).unwrap()[row * CURVE_COLUMNS + 4];
    let before = sd_at(&demo, 16);
    demo.try_observe(0.5).unwrap();
    let curves = demo.try_curves(33).unwrap();
    assert_eq!(curves.len(), 33 * CURVE_COLUMNS);
    assert!(sd_at(&demo, 16) < before);
    // At the observed point the SMOG mean interpolates the truth.
    let row = &curves[16 * CURVE_COLUMNS..17 * CURVE_COLUMNS];
    assert!((row[0] - 0.5).abs() < 1e-12);
    assert!((row[3] - row[1]).abs() < 0.05 && (row[5] - row[2]).abs() < 0.05, "{row:?}");
    assert_eq!(demo.observations().len(), 3);
}

#[test]
fn pareto_summary_marks_the_front() {
    let pts = [0.8, 0.2, 0.2, 0.8, 0.5, 0.5, 0.3, 0.3];
    let out = pareto_summary_native(&pts, &[0.0, 0.0]).unwrap();
    // hv = 0.8*0.2 + 0.5*0.3 + 0.2*0.3 with the staircase 0.8 -> 0.5 -> 0.2.
    assert!((out[0] - (0.16 + 0.15 + 0.06)).abs() < 1e-12);
    let flags: Vec<f64> = out[1..].chunks(2).map(|c| c[0]).collect();
    assert_eq!(flags, vec![1.0, 1.0, 1.0, 0.0]);
    // Without (0.5, 0.5) the front is 0.8*0.2 + 0.2*0.6, and the dominated
    // (0.3, 0.3) adds back 0.1*0.1.
    assert!((out[6] - (0.37 - 0.28 - 0.01)).abs() < 1e-12, "{out:?}");
    assert_eq!(out[8], 0.0);
    assert!(pareto_summary_native(&[0.1], &[0.0, 0.0]).is_err());
}

#[test]
fn prior_samples_follow_rho() {
    let grid = 5;
    let count = 4000;
    for rho in [0.0, 0.9] {
        let s = prior_samples_native(rho, 0.3, grid, count, 7).unwrap();
        assert_eq!(s.len(), count * 2 * grid);
        let (mut a2, mut b2, mut ab) = (0.0, 0.0, 0.0);
        for row in s.chunks(2 * grid) {
            let (a, b) = (row[2], row[grid + 2]);
            a2 += a * a;
            b2 += b * b;
            ab += a * b;
        }
        let corr = ab / (a2 * b2).sqrt();
        assert!((corr - rho).abs() < 0.06, "rho {rho}: empirical {corr}");
    }
    assert!(prior_samples_native(1.0, 0.3, grid, 1, 0).is_err());
}
