//! With a persistently exciting u₀ the update law recovers 1/b; with a
//! decaying one ζ̃ freezes at a nonzero value.

use heatadapt::analysis::{pe_check, upsilon_b, DEFAULT_PE_WINDOWS};
use heatadapt::domain::{Params, SimConfig};
use heatadapt::scenarios::{affine_initial_state, run_error_system, U0Signal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::nominal();
    let config = SimConfig::default().with_horizon(10.0);
    let wtilde0 = affine_initial_state(&p, &config);
    let zetatilde0 = upsilon_b(0.0, p.b())?;

    for u0 in [U0Signal::Constant { value: 1.0 }, U0Signal::ExpDecay] {
        let trace = run_error_system(&p, &config, &wtilde0, zetatilde0, &u0)?;
        let t: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
        let v: Vec<f64> = trace.samples.iter().map(|s| s.u0).collect();
        let pe = pe_check(&t, &v, 1.0, 1e-3, DEFAULT_PE_WINDOWS)?;
        println!(
            "{u0:?}: PE = {}, zeta~(T) = {:+.3e}, zeta(T) = {:+.6} (1/b = {:+.6})",
            pe.is_pe,
            trace.final_state.zeta,
            upsilon_b(trace.final_state.zeta, p.b())?,
            1.0 / p.b()
        );
    }
    Ok(())
}
