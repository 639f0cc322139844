//! Uncontrolled plant: the Robin boundary at x = 0 makes w grow.

use heatadapt::domain::{Params, SimConfig};
use heatadapt::scenarios::{affine_initial_state, run_open_loop};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::nominal();
    let config = SimConfig::default().with_horizon(2.0);
    let trace = run_open_loop(&p, &config, &affine_initial_state(&p, &config))?;
    for s in trace.samples.iter().step_by(20) {
        println!("t = {:4.2}  ||w|| = {:.4e}", s.t, s.wnorm);
    }
    Ok(())
}
