//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use dgheat::{build_unit_square_mesh, FeFunction, FeSpace};

pub fn space(level: usize) -> FeSpace {
    FeSpace::new(build_unit_square_mesh(level))
}

pub fn sine(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

pub fn sine_field(space: &FeSpace) -> FeFunction {
    space.interpolate(sine)
}
