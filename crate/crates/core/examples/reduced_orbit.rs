//! Integrates the reduced equations for an equilateral triangle on the unit
//! sphere and prints the radial oscillation and the conserved quantities.
//!
//!     cargo run --release --example reduced_orbit

use curvebody::diagnostics::{conservation_series, simulate_reduced, RunKind};
use curvebody::integrator::IntegrationSettings;
use curvebody::model::{regular_polygon, synthesize_initial};
use curvebody::CurvatureSign;

fn main() -> curvebody::Result<()> {
    let config = regular_polygon(3, 0.0, vec![1.0; 3], CurvatureSign::Positive, 3)?;
    let initial = synthesize_initial(&config, 0.8, 0.0, 1.0)?;
    println!("initial Z = {:?}, Z' = {:?}", initial.z, initial.z_dot);

    let settings = IntegrationSettings { sample_interval: 0.5, ..IntegrationSettings::with_tol(1e-10) };
    let traj = simulate_reduced(&config, &initial, (0.0, 10.0), &settings, false)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "rho", "theta", "z");
    for (t, y) in traj.times.iter().zip(&traj.samples) {
        println!("{t:6.2} {:12.8} {:12.6} {:12.8}", y[0], y[2], y[4]);
    }

    let series = conservation_series(&traj, RunKind::Reduced, &config)?;
    println!("termination: {:?}", traj.termination);
    println!("rho^2 theta' drift: {:.2e}", series.angular_momentum_drift());
    println!("constraint drift:   {:.2e}", series.max_constraint_drift());
    Ok(())
}
