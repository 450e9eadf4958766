//! Built-in scenarios.

use chemotaxis_core::{DomainSpec, InitialData, ModelParams};

use crate::scenario::{HaltPolicy, LyapunovSpec, Scenario};

pub const NAMES: [&str; 5] = ["circle2d", "sphere3d", "sweep3d", "lyapunov2d", "diffusion2d"];

/// Chemotactic sensitivity of the blow-up runs.
pub const CHI: f64 = 20.0;
/// `20 exp(-30 |x|^2)`.
pub const BELL_AMPLITUDE: f64 = 20.0;
pub const BELL_SHARPNESS: f64 = 30.0;
pub const BELL_DT: f64 = 1e-5;

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "circle2d" => "unit disk, 128^2 cells, chi = 20, Gaussian bell u0 = v0, t in [0, 5e-3]",
        "sphere3d" => "unit ball, 64^3 cells, chi = 20, Gaussian bell u0 = v0, t in [0, 2e-2]",
        "sweep3d" => "unit ball, 32^3 cells, chi = 20, u0 = v0 = w0 bell; base of the xi sweep",
        "lyapunov2d" => "unit disk, 64^2 cells, chi = xi = 1/30 with sup v0 = sup w0 = 1; records E_k",
        "diffusion2d" => "unit disk, 64^2 cells, chi = 0: heat equation for u",
        _ => return None,
    })
}

fn bell(dim: usize) -> InitialData {
    InitialData::gaussian(BELL_AMPLITUDE, BELL_SHARPNESS, &vec![0.0; dim])
}

fn base(name: &str, domain: DomainSpec, cells: usize, model: ModelParams) -> Scenario {
    let dim = domain.lower.len();
    Scenario {
        name: name.to_string(),
        domain,
        cells_per_axis: vec![cells; dim],
        model,
        u0: bell(dim),
        v0: bell(dim),
        w0: None,
        cadence: 1,
        snapshot_every: None,
        output_dir: None,
        halt: HaltPolicy::Halt,
        lyapunov: None,
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    let disk = DomainSpec::disk([0.0, 0.0], 1.0);
    let ball = DomainSpec::ball([0.0; 3], 1.0);
    Some(match name {
        "circle2d" => Scenario {
            snapshot_every: Some(500),
            ..base(name, disk, 128, ModelParams::attraction_only(CHI, BELL_DT, 5e-3))
        },
        "sphere3d" => Scenario {
            cadence: 2,
            snapshot_every: Some(2000),
            ..base(name, ball, 64, ModelParams::attraction_only(CHI, BELL_DT, 2e-2))
        },
        "sweep3d" => Scenario {
            w0: Some(bell(3)),
            ..base(name, ball, 32, ModelParams::attraction_repulsion(CHI, 0.0, 2.5e-6, 1e-2))
        },
        "lyapunov2d" => {
            // Both signal peaks sit on cell centers of the 64^2 lattice
            // (spacing 1/32), so sup v0 = sup w0 = 1 exactly.
            let sup = 1.0;
            let k = 1.5;
            let coef = 0.5 / (10.0 * k * sup);
            Scenario {
                u0: InitialData::gaussian(1.0, 10.0, &[0.3, 0.0]),
                v0: InitialData::gaussian(sup, 5.0, &[1.0 / 64.0, 1.0 / 64.0]),
                w0: Some(InitialData::gaussian(sup, 5.0, &[-19.0 / 64.0, 1.0 / 64.0])),
                cadence: 1,
                lyapunov: Some(LyapunovSpec { k: Some(k) }),
                ..base(name, disk, 64, ModelParams::attraction_repulsion(coef, coef, 1e-4, 6e-2))
            }
        }
        "diffusion2d" => base(name, disk, 64, ModelParams::attraction_only(0.0, BELL_DT, 5e-3)),
        _ => return None,
    })
}
