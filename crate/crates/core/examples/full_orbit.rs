//! Embeds reduced initial data for a triangle on the hyperbolic plane's
//! ambient model and integrates the full n-body equations.
//!
//!     cargo run --release --example full_orbit

use curvebody::diagnostics::{conservation_series, simulate_full, RunKind};
use curvebody::integrator::IntegrationSettings;
use curvebody::model::{embed, regular_polygon, synthesize_initial};
use curvebody::CurvatureSign;

fn main() -> curvebody::Result<()> {
    let config = regular_polygon(3, 0.0, vec![1.0; 3], CurvatureSign::Negative, 3)?;
    let initial = embed(&synthesize_initial(&config, 0.6, 0.0, 1.0)?, &config)?;
    for (i, q) in initial.positions.iter().enumerate() {
        println!("body {}: q = {:?}", i + 1, &q[..]);
    }

    let settings = IntegrationSettings::with_tol(1e-10);
    for project in [false, true] {
        let traj = simulate_full(&config, &initial, (0.0, 5.0), &settings, project)?;
        let series = conservation_series(&traj, RunKind::Full, &config)?;
        println!("projection {project}:");
        println!("  samples {}, termination {:?}", traj.len(), traj.termination);
        println!("  C12 drift       {:.2e}", series.wedge_c12_drift().unwrap_or(f64::NAN));
        println!("  manifold drift  {:.2e}", series.max_constraint_drift());
        println!("  tangency drift  {:.2e}", series.max_tangency_drift());
    }
    Ok(())
}
