//! Compares the embedded reduced orbit with a direct full integration, for an
//! admissible triangle and for a bent one run with `force`.
//!
//!     cargo run --release --example cross_validate

use curvebody::diagnostics::{cross_validate, CrossValidationOptions};
use curvebody::integrator::IntegrationSettings;
use curvebody::model::{regular_polygon, synthesize_initial};
use curvebody::{CurvatureSign, PolygonConfig};

fn main() -> curvebody::Result<()> {
    for sigma in CurvatureSign::both() {
        let rho0 = if sigma == CurvatureSign::Positive { 0.8 } else { 0.6 };
        let triangle = regular_polygon(3, 0.0, vec![1.0; 3], sigma, 3)?;
        let mut beta = triangle.beta().to_vec();
        beta[2] += 0.1;
        let bent = PolygonConfig::new(vec![1.0; 3], beta, sigma, 3)?;

        for (label, config, force) in [("regular", &triangle, false), ("bent", &bent, true)] {
            let initial = synthesize_initial(config, rho0, 0.0, 1.0)?;
            for tol in [1e-8, 1e-10] {
                let options = CrossValidationOptions { force, ..Default::default() };
                let result =
                    cross_validate(config, &initial, (0.0, 5.0), &IntegrationSettings::with_tol(tol), options)?;
                println!(
                    "sigma {sigma} {label:>7} tol {tol:.0e}: deviation {:.3e}, residual {:.3e}",
                    result.max_deviation(),
                    result.residual_max
                );
            }
        }
    }
    Ok(())
}
