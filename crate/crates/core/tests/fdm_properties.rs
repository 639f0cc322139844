use proptest::prelude::*;

use heatadapt::domain::{Grid, GridFunction};
use heatadapt::fdm::{quad, step_heat, FluxBC};

const PI: f64 = std::f64::consts::PI;

fn field(n: usize) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-5.0f64..5.0, n).prop_map(move |v| GridFunction::from_values(Grid::new(n).unwrap(), v).unwrap())
}

fn sized_field() -> impl Strategy<Value = GridFunction> {
    (5usize..80).prop_flat_map(field)
}

fn stable_dt(g: Grid, ratio: f64) -> f64 {
    ratio * 0.5 * g.dx() * g.dx()
}

proptest! {
    #[test]
    fn insulated_mass_is_conserved(u in sized_field(), ratio in 0.05f64..1.0) {
        let dt = stable_dt(u.grid(), ratio);
        let next = step_heat(&u, FluxBC::insulated(), dt, None).unwrap();
        let scale = u.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((quad(&next) - quad(&u)).abs() <= 1e-13 * scale);
    }

    #[test]
    fn boundary_fluxes_set_the_mass_rate(u in sized_field(), left in -3.0f64..3.0, right in -3.0f64..3.0) {
        let dt = stable_dt(u.grid(), 0.5);
        let next = step_heat(&u, FluxBC::new(left, right), dt, None).unwrap();
        let rate = (quad(&next) - quad(&u)) / dt;
        prop_assert!((rate - (right - left)).abs() <= 1e-8);
    }

    #[test]
    fn maximum_principle(u in sized_field(), ratio in 0.05f64..1.0) {
        let dt = stable_dt(u.grid(), ratio);
        let lo = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let next = step_heat(&u, FluxBC::insulated(), dt, None).unwrap();
        for &v in next.values() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn stepping_is_linear(
        (f, g) in (5usize..60).prop_flat_map(|n| (field(n), field(n))),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        fl in -2.0f64..2.0, fr in -2.0f64..2.0, gl in -2.0f64..2.0, gr in -2.0f64..2.0,
    ) {
        let dt = stable_dt(f.grid(), 0.8);
        let combo = f.combine(a, &g, b).unwrap();
        let lhs = step_heat(&combo, FluxBC::new(a * fl + b * gl, a * fr + b * gr), dt, None).unwrap();
        let sf = step_heat(&f, FluxBC::new(fl, fr), dt, None).unwrap();
        let sg = step_heat(&g, FluxBC::new(gl, gr), dt, None).unwrap();
        let rhs = sf.combine(a, &sg, b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }
}

fn eigenmode_error(n: usize, dt: f64, t_end: f64) -> f64 {
    let g = Grid::new(n).unwrap();
    let mut u = GridFunction::from_fn(g, |x| (PI * x).cos()).unwrap();
    for _ in 0..(t_end / dt).round() as usize {
        u = step_heat(&u, FluxBC::insulated(), dt, None).unwrap();
    }
    let decay = (-PI * PI * t_end).exp();
    g.nodes().zip(u.values()).map(|(x, v)| (v - decay * (PI * x).cos()).abs()).fold(0.0, f64::max)
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

#[test]
fn spatial_order_is_two() {
    // tiny fixed dt so the spatial error dominates
    let dt = 1e-6;
    let errors: Vec<f64> = [11, 21, 41].iter().map(|&n| eigenmode_error(n, dt, 0.05)).collect();
    for p in orders(&errors) {
        assert!(p >= 1.9, "spatial order {p} from {errors:?}");
    }
}

#[test]
fn temporal_order_is_one() {
    // on a fixed grid, measured against a much smaller step
    let n = 41;
    let dx = 1.0 / (n - 1) as f64;
    let base = 0.4 * dx * dx;
    let g = Grid::new(n).unwrap();
    let run = |dt: f64| {
        let mut u = GridFunction::from_fn(g, |x| (PI * x).cos()).unwrap();
        for _ in 0..(0.05 / dt).round() as usize {
            u = step_heat(&u, FluxBC::insulated(), dt, None).unwrap();
        }
        u
    };
    let reference = run(base / 64.0);
    let errors: Vec<f64> = [base, base / 2.0, base / 4.0].iter().map(|&dt| run(dt).max_abs_diff(&reference)).collect();
    for p in orders(&errors) {
        assert!(p >= 0.9, "temporal order {p} from {errors:?}");
    }
}

#[test]
fn manufactured_solution_with_fluxes_and_source() {
    // u = e^{-t} sin(2x) + x³ solves u_t = u_xx + s with s = 3 e^{-t} sin(2x) - 6x
    let exact = |x: f64, t: f64| (-t).exp() * (2.0 * x).sin() + x.powi(3);
    let run = |n: usize| {
        let g = Grid::new(n).unwrap();
        let dt = 0.25 * g.dx() * g.dx();
        let steps = (0.1 / dt).round() as usize;
        let mut u = GridFunction::from_fn(g, |x| exact(x, 0.0)).unwrap();
        for k in 0..steps {
            let t = k as f64 * dt;
            let s = GridFunction::from_fn(g, |x| 3.0 * (-t).exp() * (2.0 * x).sin() - 6.0 * x).unwrap();
            let bc = FluxBC::new(2.0 * (-t).exp(), 2.0 * (-t).exp() * 2.0f64.cos() + 3.0);
            u = step_heat(&u, bc, dt, Some(&s)).unwrap();
        }
        let t = steps as f64 * dt;
        g.nodes().zip(u.values()).map(|(x, v)| (v - exact(x, t)).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (run(21), run(41));
    assert!(e1 / e2 >= 3.5, "{e1:.3e} -> {e2:.3e}");
}
