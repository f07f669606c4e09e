//! Models shipped with the library.

/// The water-tank case study: a tank with an on/off inflow valve and a
/// sampling controller.
pub const WATERTANK: &str = include_str!("../models/watertank.hcsp");
