//! Benchmark instances: a turbo-charged car with hysteresis and a
//! Lotka-Volterra fishing problem with five fishing modes.

mod fishing;
mod turbo_car;

pub use fishing::{build_fishing, fishing_spec, FishingConfig, FishingModel};
pub use turbo_car::{build_turbo_car, hysteresis_rows, turbo_car_spec, TurboCarConfig, TurboCarModel};
