//! Shared fixtures for the criterion benchmarks.

use ewlkit::EwlParams;

/// A spread of parameter points covering light and heavy mixing.
pub fn reference_points() -> Vec<EwlParams> {
    [
        [1.0, 1.0, 1.0, 0.5],
        [2.0, 0.5, 1.5, 0.3],
        [0.5, 1.0, 0.7, 0.1],
        [5.0, 2.0, 2.0, 0.8],
    ]
    .into_iter()
    .map(|v| EwlParams::from_array(v).expect("valid reference point"))
    .collect()
}
