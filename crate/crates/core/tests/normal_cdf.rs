mod oracle;

use pdtw_core::stats::{standard_normal_cdf, NormalParams};

#[test]
fn shipped_grid_agrees_with_series_and_continued_fraction() {
    let grid = oracle::cdf_grid();
    assert_eq!(grid.len(), 100);
    for (z, p) in grid {
        let o = oracle::phi(z);
        assert!(
            (o - p).abs() <= 1e-14 + 1e-12 * p,
            "z={z}: grid {p:e}, oracle {o:e}"
        );
    }
}

#[test]
fn library_cdf_matches_grid() {
    for (z, p) in oracle::cdf_grid() {
        assert!((standard_normal_cdf(z) - p).abs() <= 1e-8, "z={z}");
        // tails keep relative accuracy well below the absolute requirement
        assert!(
            (standard_normal_cdf(z) - p).abs() <= 1e-13 * p.max(1e-300) + 1e-16,
            "z={z}"
        );
    }
}

#[test]
fn scaled_cdf_uses_standardized_argument() {
    let params = NormalParams::new(0.8, 0.05).unwrap();
    for (z, p) in oracle::cdf_grid().into_iter().step_by(7) {
        let x = 0.8 + 0.05 * z;
        assert!((params.cdf_unclamped(x) - p).abs() <= 1e-12, "z={z}");
    }
}
