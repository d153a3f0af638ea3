//! Shared fixtures for the pipeline benchmarks.

use neckfield::geometry::{GapGeometry, Mode, Order, Profile};

/// Planar m = 2 pair at separation `eps`.
pub fn m2(eps: f64) -> GapGeometry {
    GapGeometry::symmetric(Profile::power(Order::integer(2), 1.0, 0.5), eps, 1.0, 4.0, Mode::Planar)
}

/// Planar Hölder pair with α = 1/2.
pub fn holder(eps: f64) -> GapGeometry {
    GapGeometry::symmetric(Profile::holder(0.5, 1.0, 0.5), eps, 1.0, 4.0, Mode::Planar)
}
