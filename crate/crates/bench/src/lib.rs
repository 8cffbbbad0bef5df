//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use seriesfed::io::{load_geometry, Geometry};

/// The bundled six-patch fixture.
pub fn fixture() -> Geometry {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/ka_band_1x6.geom");
    load_geometry(&path).expect("bundled fixture must load")
}
