//! Built-in scenarios.

use crate::graphs::{BetaMap, RegularizedGraph};
use crate::solver::{
    Boundary, BoundaryKind, DtPolicy, Grid, InitialData, Scenario, Tolerances, VectorField,
};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Scenario,
}

impl Preset {
    pub fn scenario(&self) -> Scenario {
        (self.build)()
    }
}

fn graph(jump: f64, latent_heat: f64, eps: f64) -> RegularizedGraph {
    RegularizedGraph::new(jump, latent_heat, eps, BetaMap::Identity).expect("preset graph is valid")
}

fn base(grid: Grid, p: f64, graph: RegularizedGraph, initial: InitialData, t_end: f64, dt: f64) -> Scenario {
    Scenario {
        grid,
        p,
        graph,
        vector_field: VectorField::PLaplacian,
        initial,
        boundary: Boundary::uniform(BoundaryKind::ZeroFlux),
        t_end,
        dt: DtPolicy::Fixed { dt },
        tolerances: Tolerances::default(),
    }
}

/// Fine steps over the last `tail` of the run, sized so the intrinsic
/// cylinders of the default constants contain several levels.
fn graded(mut s: Scenario, tail: f64, tail_dt: f64) -> Scenario {
    if let DtPolicy::Fixed { dt } = s.dt {
        s.dt = DtPolicy::Graded { dt, tail, tail_dt };
    }
    s
}

fn line(n: usize) -> Grid {
    Grid::line(n, 1.0).expect("preset grid is valid")
}

fn square(n: usize) -> Grid {
    Grid::rect([n, n], 1.0).expect("preset grid is valid")
}

fn twophase_data() -> InitialData {
    InitialData::Cosine {
        base: 0.0,
        amplitude: 0.8,
        modes: 3,
    }
}

fn constant() -> Scenario {
    base(line(51), 2.0, graph(0.0, 0.5, 0.05), InitialData::Constant { value: 0.3 }, 0.05, 0.005)
}

fn stefan_1d_p2() -> Scenario {
    let s = base(line(201), 2.0, graph(0.0, 1.0, 0.05), twophase_data(), 0.05, 2.5e-4);
    graded(s, 0.0125, 2.5e-5)
}

fn stefan_1d_p3() -> Scenario {
    let s = base(line(201), 3.0, graph(0.0, 1.0, 0.05), twophase_data(), 0.05, 2.5e-4);
    graded(s, 4e-6, 1e-9)
}

fn stefan_2d_p2() -> Scenario {
    let data = InitialData::Cosine {
        base: 0.0,
        amplitude: 0.8,
        modes: 2,
    };
    base(square(33), 2.0, graph(0.0, 1.0, 0.08), data, 0.02, 1e-3)
}

fn stefan_2d_p3() -> Scenario {
    let data = InitialData::Cosine {
        base: 0.0,
        amplitude: 0.8,
        modes: 2,
    };
    graded(base(square(33), 3.0, graph(0.0, 1.0, 0.08), data, 0.02, 1e-3), 4e-6, 1e-8)
}

/// One-phase melting: wall held at 1, solid at the bottom of the layer.
fn neumann_melt() -> Scenario {
    let eps = 0.005;
    let mut s = base(
        line(400),
        2.0,
        graph(eps, 1.0, eps),
        InitialData::Melt {
            wall: 1.0,
            interior: 0.0,
        },
        0.1,
        2.5e-4,
    );
    s.boundary.x_lo = BoundaryKind::Dirichlet;
    s
}

fn heat_smooth() -> Scenario {
    let data = InitialData::Cosine {
        base: 0.0,
        amplitude: 1.0,
        modes: 1,
    };
    base(line(101), 2.0, graph(0.0, 0.0, 0.05), data, 0.05, 5e-4)
}

/// Positive bump under `p = 3`, jump far above the data.
fn collapsing_bump() -> Scenario {
    let data = InitialData::Bump {
        base: 0.1,
        height: 1.0,
        center: vec![0.5],
        radius: 0.3,
    };
    graded(base(line(161), 3.0, graph(3.0, 0.5, 0.05), data, 0.05, 2.5e-4), 4e-6, 1e-9)
}

/// Two-phase data whose range never reaches the jump.
fn jump_free() -> Scenario {
    base(line(201), 2.0, graph(5.0, 1.0, 0.05), twophase_data(), 0.05, 2.5e-4)
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "constant",
        summary: "1D constant state, p = 2",
        build: constant,
    },
    Preset {
        name: "stefan-1d-p2-twophase",
        summary: "1D, p = 2, cosine data crossing the jump three times",
        build: stefan_1d_p2,
    },
    Preset {
        name: "stefan-1d-p3-twophase",
        summary: "1D, p = 3, cosine data crossing the jump three times",
        build: stefan_1d_p3,
    },
    Preset {
        name: "stefan-2d-p2-twophase",
        summary: "2D 33x33, p = 2, product cosine through the jump",
        build: stefan_2d_p2,
    },
    Preset {
        name: "stefan-2d-p3-twophase",
        summary: "2D 33x33, p = 3, product cosine through the jump",
        build: stefan_2d_p3,
    },
    Preset {
        name: "neumann-melt-1d",
        summary: "1D one-phase melting from a hot wall, 400 nodes",
        build: neumann_melt,
    },
    Preset {
        name: "heat-smooth-1d",
        summary: "1D heat equation, no latent heat",
        build: heat_smooth,
    },
    Preset {
        name: "collapsing-bump-p3",
        summary: "1D, p = 3, positive bump spreading below the jump",
        build: collapsing_bump,
    },
    Preset {
        name: "jump-free-1d",
        summary: "1D, p = 2, jump level outside the data range",
        build: jump_free,
    },
];

pub fn preset(name: &str) -> Option<Scenario> {
    PRESETS.iter().find(|p| p.name == name).map(Preset::scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            p.scenario().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn jump_free_data_stays_below_layer() {
        let s = preset("jump-free-1d").unwrap();
        let u = s.initial.sample(&s.grid);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi < s.graph.jump - s.graph.eps);
    }
}
