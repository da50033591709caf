//! Evaluates the existence criterion for a regular pentagon and for the same
//! pentagon with one vertex nudged.
//!
//!     cargo run --example check_criterion

use curvebody::diagnostics::{criterion_report, default_rho_grid, DEFAULT_TOL_B, DEFAULT_TOL_C};
use curvebody::model::regular_polygon;
use curvebody::{CurvatureSign, PolygonConfig};

fn describe(label: &str, config: &PolygonConfig) -> curvebody::Result<()> {
    let grid = default_rho_grid(config.sigma());
    let report = criterion_report(config, &grid, DEFAULT_TOL_B, DEFAULT_TOL_C)?;
    println!("{label}");
    for (k, rho) in report.rho_grid.iter().enumerate() {
        let spread = report.b_spread_rel[k].map_or("singular".into(), |s| format!("{s:.3e}"));
        let c = report.c_max[k].map_or("singular".into(), |c| format!("{c:.3e}"));
        println!("  rho {rho:.4}  b spread {spread:>10}  max |c| {c:>10}");
    }
    println!("  verdict: {:?}\n", report.verdict);
    Ok(())
}

fn main() -> curvebody::Result<()> {
    for sigma in CurvatureSign::both() {
        let pentagon = regular_polygon(5, 0.0, vec![1.0; 5], sigma, 3)?;
        describe(&format!("regular pentagon, sigma {sigma}"), &pentagon)?;

        let mut beta = pentagon.beta().to_vec();
        beta[2] += 0.05;
        let nudged = PolygonConfig::new(vec![1.0; 5], beta, sigma, 3)?;
        describe(&format!("pentagon with one vertex moved by 0.05, sigma {sigma}"), &nudged)?;
    }
    Ok(())
}
