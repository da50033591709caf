//! Spins a square at the rate that balances attraction and shows that the
//! size factor stays put.
//!
//!     cargo run --release --example relative_equilibrium

use curvebody::diagnostics::simulate_reduced;
use curvebody::dynamics::relative_equilibrium_spin;
use curvebody::integrator::IntegrationSettings;
use curvebody::model::{regular_polygon, synthesize_initial};
use curvebody::CurvatureSign;

fn main() -> curvebody::Result<()> {
    let settings = IntegrationSettings::with_tol(1e-10);
    for sigma in CurvatureSign::both() {
        let config = regular_polygon(4, 0.0, vec![1.0; 4], sigma, 3)?;
        for rho0 in [0.3, 0.6, 0.9] {
            let spin = relative_equilibrium_spin(&config, rho0)?;
            let initial = synthesize_initial(&config, rho0, 0.0, spin)?;
            let traj = simulate_reduced(&config, &initial, (0.0, 10.0), &settings, false)?;
            let drift = traj.samples.iter().map(|y| (y[0] - rho0).abs()).fold(0.0, f64::max);
            println!("sigma {sigma} rho0 {rho0}: theta' = {spin:.6}, max |rho - rho0| = {drift:.2e}");
        }
    }
    Ok(())
}
