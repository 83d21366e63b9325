//! Exhaustive and closed-form oracles for the numeric kernels.

mod support;

fn pass(check: support::Check) {
    if let Err(e) = check {
        panic!("{e}");
    }
}

#[test]
fn morphology_matches_per_pixel_windows() {
    pass(support::morphology(100));
}

#[test]
fn centroid_is_the_coordinate_mean() {
    pass(support::centroids(100));
}

#[test]
fn mse_matches_double_loop() {
    pass(support::mse_oracle(100));
}

#[test]
fn resampling_keeps_endpoints() {
    pass(support::resampling());
}

#[test]
fn angles_ignore_translation_scale_and_mirror() {
    pass(support::invariance(50));
}

#[test]
fn somersault_and_straight_bounce_construction() {
    pass(support::construction());
}

#[test]
fn catalog_rows_and_tariffs() {
    pass(support::catalog());
}
