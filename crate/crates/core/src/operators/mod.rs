//! Analysis operators `Ω` and measurement systems `M`.

mod analysis;
mod descriptor;
mod graph;
mod measurement;

pub use analysis::{
    finite_difference_2d, random_tight_frame, random_tight_frame_operator, AnalysisOperator,
    MAX_DENSE_DIF_SIDE, TIGHT_FRAME_MAX_ITER,
};
pub use descriptor::{MeasurementDescriptor, OperatorDescriptor};
pub use graph::PixelGraph;
pub use measurement::{
    gaussian_matrix, gaussian_measurement, partial_fourier_system, radial_fourier_system,
    radial_line_frequencies, MeasurementKind, MeasurementSystem, RadialFourier,
    MAX_DENSE_FOURIER_SIDE,
};
