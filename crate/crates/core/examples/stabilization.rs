use heatadapt::analysis::limit_diagnostics;
use heatadapt::domain::{GridFunction, Params, SimConfig};
use heatadapt::scenarios::{affine_initial_state, run_stabilization};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::nominal();
    let config = SimConfig::default().with_horizon(5.0);
    let w0 = affine_initial_state(&p, &config);
    let trace = run_stabilization(&p, &config, &w0, &GridFunction::zeros(config.grid), 0.0)?;
    for s in trace.samples.iter().step_by(50) {
        println!(
            "t = {:4.2}  ||w|| = {:.3e}  zeta = {:+.5}  F = {:.3e}",
            s.t,
            s.wnorm,
            s.zeta,
            s.energy_f.unwrap_or(f64::NAN)
        );
    }
    let limits = limit_diagnostics(&trace, 1.0, 1e-3)?;
    for q in &limits.quantities {
        println!("{:>13}: terminal {:+.3e}, gap {:.1e}", q.name, q.terminal, q.gap);
    }
    println!("1/b = {}", 1.0 / p.b());
    Ok(())
}
