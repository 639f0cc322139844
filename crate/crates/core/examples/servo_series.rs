//! Convergence of the servo field in the truncation order.

use heatadapt::control::{servo_boundary, servo_eval};
use heatadapt::domain::{Reference, ReferenceSignal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = 2.0;
    let r = ReferenceSignal::sinusoid(1.0, 2.0)?;
    let t = 1.0;
    for j in [8, 10, 12, 16, 20] {
        let terms = servo_boundary(&r, q, t, j)?;
        println!(
            "J = {j:2}: v(1) = {:+.12}  v_x(1) = {:+.12}  tail <= {:.1e}",
            terms.v1, terms.vx1, terms.tail_bound
        );
    }
    println!("v(0) = {:+.12}, r(t) = {:+.12}", servo_eval(&r, q, 0.0, t, 12)?, r.value(t));
    Ok(())
}
