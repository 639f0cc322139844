//! w(0,t) follows a sinusoidal reference.

use heatadapt::domain::{GridFunction, Params, ReferenceSignal, SimConfig};
use heatadapt::scenarios::{affine_initial_state, run_tracking_signal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::nominal();
    let config = SimConfig::default().with_horizon(10.0);
    let reference = ReferenceSignal::sinusoid(1.0, 1.0)?;
    let w0 = affine_initial_state(&p, &config);
    let trace = run_tracking_signal(&p, &config, &w0, &GridFunction::zeros(config.grid), 0.0, reference)?;
    for s in trace.samples.iter().step_by(100) {
        let r = s.reference.unwrap_or(0.0);
        println!("t = {:5.2}  w(0) = {:+.4}  r = {:+.4}  error = {:.2e}", s.t, s.w0, r, (s.w0 - r).abs());
    }
    Ok(())
}
