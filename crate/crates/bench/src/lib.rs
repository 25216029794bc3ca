//! Fixtures shared by the criterion benchmarks in `benches/`.

use plm_core::{Plm, RngStream, ScheduleConfig};

pub const PIXELS: usize = 784;

/// A freshly initialised full-size storage/recall pair.
pub fn full_size_machine(seed: u64) -> (Plm, ScheduleConfig) {
    let config = ScheduleConfig::default();
    let plm = Plm::build(PIXELS, &config, 0.13, &RngStream::new(seed)).expect("default config is valid");
    (plm, config)
}

/// A deterministic zero-mean stand-in for a digit: a bright square on a dark field.
pub fn square_image(mean: f64) -> Vec<f64> {
    (0..PIXELS)
        .map(|i| {
            let (r, c) = (i / 28, i % 28);
            let on = (8..20).contains(&r) && (8..20).contains(&c);
            f64::from(u8::from(on)) - mean
        })
        .collect()
}
