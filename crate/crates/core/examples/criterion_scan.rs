//! Scans body counts and vertex perturbations with random masses and prints
//! the scan table.
//!
//!     cargo run --release --example criterion_scan

use curvebody::cli::{scan_csv, scan_rows, MassMode, ScanConfig};
use curvebody::CurvatureSign;

fn main() -> curvebody::Result<()> {
    let scan = ScanConfig {
        schema_version: "1".into(),
        n_range: [2, 8],
        mass_mode: MassMode::Equal,
        perturbations: vec![0.0, 1e-3, 0.1],
        sigmas: CurvatureSign::both().to_vec(),
        dim: 3,
        phase: 0.0,
        rho_grid: None,
        tol_b: 1e-10,
        tol_c: 1e-10,
        seed: 1,
        output_dir: None,
    };
    print!("{}", scan_csv(&scan_rows(&scan)?));

    let random = ScanConfig { mass_mode: MassMode::Random, n_range: [3, 5], ..scan };
    print!("{}", scan_csv(&scan_rows(&random)?));
    Ok(())
}
