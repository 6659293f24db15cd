//! Certifies the projected-gradient optimizer against analytic bounds
//! and the symmetry-reduced grid oracle.

use std::time::Instant;

use roundtable_core::environments::optimize::{u_max, OptimizerConfig};
use roundtable_core::environments::UtilitySetPreset;
use roundtable_core::testkit::econ_grid_oracle;

#[test]
fn uniform_hits_the_analytic_bound() {
    // AM-GM: the sum of per-agent geometric means is at most 100, with
    // equality at the even split.
    let result = u_max(UtilitySetPreset::Uniform, 3, &OptimizerConfig::default()).unwrap();
    assert!(
        (result.value - 100.0).abs() <= 1e-6,
        "optimizer found {}",
        result.value
    );
}

#[test]
fn symmetric_and_asymmetric_within_half_percent_of_grid_oracle() {
    for preset in [
        UtilitySetPreset::Symmetric,
        UtilitySetPreset::AsymmetricLiteral,
        UtilitySetPreset::AsymmetricNormalized,
    ] {
        let started = Instant::now();
        let oracle = econ_grid_oracle(preset, 3);
        let result = u_max(preset, 3, &OptimizerConfig::default()).unwrap();
        let relative = (result.value - oracle).abs() / oracle;
        assert!(
            relative <= 0.005,
            "{preset:?}: optimizer {} vs oracle {oracle} ({relative})",
            result.value
        );
        assert!(
            started.elapsed().as_secs() < 60,
            "{preset:?} took too long"
        );
    }
}

#[test]
fn grid_oracle_reproduces_the_analytic_asymmetric_value() {
    // d/dx [0.8 ln x + (2 * 0.2/3) ln((100 - x)/2)] = 0 at x = 600/7,
    // giving 137.2187371953638... (computed at 40 digits).
    let oracle = econ_grid_oracle(UtilitySetPreset::AsymmetricLiteral, 3);
    assert!(
        (oracle - 137.21873719536385).abs() < 1e-6,
        "oracle found {oracle}"
    );
    // The symmetric preset forces the even split: 3 * (100/3)^(14/15).
    let symmetric = econ_grid_oracle(UtilitySetPreset::Symmetric, 3);
    assert!(
        (symmetric - 79.15434333081370).abs() < 1e-6,
        "oracle found {symmetric}"
    );
}

#[test]
fn optimizer_argmax_is_feasible() {
    let result = u_max(
        UtilitySetPreset::AsymmetricLiteral,
        3,
        &OptimizerConfig::default(),
    )
    .unwrap();
    result.argmax.check_conservation().expect("feasible argmax");
}
