use heatadapt::analysis::{pi_inverse, pi_transform, upsilon_b};
use heatadapt::domain::{Grid, GridFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = 2.0;
    for n in [21, 41, 81, 161] {
        let g = GridFunction::from_fn(Grid::new(n)?, |x| (3.0 * x).sin())?;
        let back = pi_inverse(&pi_transform(&g, q)?, q)?;
        println!("n = {n:3}: max |Pi^-1 Pi f - f| = {:.3e}", back.max_abs_diff(&g));
    }
    let b = -10.0;
    println!("upsilon(upsilon(0.3)) = {}", upsilon_b(upsilon_b(0.3, b)?, b)?);
    Ok(())
}
