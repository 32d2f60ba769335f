//! Synthetic weather/load series, oracle labelling, normalisation, splitting
//! and dataset persistence.

mod dataset;
mod io;
mod normalize;
mod weather;

pub use dataset::{
    build_dataset, generate, renewable_availability, split, Dataset, DatasetMeta, Sample, Split, SplitOptions, DEFAULT_TRAIN_FRACTION,
    FEATURE_NAMES, N_FEATURES, N_TARGETS, TARGET_KINDS, TARGET_NAMES,
};
pub use io::{csv_header, load_dataset, save_dataset, sidecar_path};
pub use normalize::Normalizer;
pub use weather::{
    steps_for, synthesize_load, synthesize_weather, WeatherProfile, DEFAULT_RESOLUTION_MIN,
};
