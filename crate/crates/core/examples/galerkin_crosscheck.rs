use heatadapt::analysis::{galerkin_error_system, l2_time_gap, upsilon_b, GalerkinConfig, ModalBasis};
use heatadapt::domain::{Grid, GridFunction, Params, SimConfig};
use heatadapt::scenarios::{run_error_system, U0Signal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::nominal();
    let config = SimConfig::default().with_horizon(1.0);
    let zt0 = upsilon_b(0.0, p.b())?;
    let affine = |g: Grid| GridFunction::from_fn(g, |x| p.q() * x - 1.0);

    let fd = run_error_system(&p, &config, &affine(config.grid)?, zt0, &U0Signal::ExpDecay)?;
    let t: Vec<f64> = fd.samples.iter().map(|s| s.t).collect();
    let fd_norm: Vec<f64> = fd.samples.iter().map(|s| s.wnorm).collect();

    let fine = affine(Grid::with_spacing(0.005)?)?;
    for basis in [ModalBasis::NeumannCosine, ModalBasis::MixedSine] {
        for modes in [8, 16, 32] {
            let cfg = GalerkinConfig {
                modes,
                basis,
                ..GalerkinConfig::default()
            };
            let g = galerkin_error_system(&p, &cfg, &U0Signal::ExpDecay, &fine, zt0)?;
            let norm: Vec<f64> = g.samples.iter().map(|s| s.wnorm).collect();
            println!("{basis:?} N = {modes:2}: L2 gap {:.3e}", l2_time_gap(&t, &fd_norm, &norm)?);
        }
    }
    Ok(())
}
