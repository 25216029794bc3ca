use plm_core::mnist::SIDE;

/// Binary 8-bit graymap of one image in the zero-mean convention: intensity is
/// `round(255 * (value + mean))`, clamped to `0..=255`.
pub fn encode(image: &[f64], mean: f64) -> Vec<u8> {
    assert_eq!(image.len(), SIDE * SIDE, "image must be {SIDE}x{SIDE}");
    let mut out = format!("P5\n{SIDE} {SIDE}\n255\n").into_bytes();
    out.extend(image.iter().map(|v| (255.0 * (v + mean)).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn file_name(class: usize) -> String {
    format!("class_{class:03}.pgm")
}

/// Pixel bytes of a graymap written by [`encode`].
pub fn decode(bytes: &[u8]) -> Option<&[u8]> {
    let header = format!("P5\n{SIDE} {SIDE}\n255\n");
    let body = bytes.strip_prefix(header.as_bytes())?;
    (body.len() == SIDE * SIDE).then_some(body)
}
