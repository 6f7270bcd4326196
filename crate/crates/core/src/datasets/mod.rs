//! Data sources: the eight-Gaussian mixture and MNIST-style IDX files.

pub mod idx;
pub mod toy;

pub use idx::{load_idx_images, IdxError, IdxImages, IdxLabels};
pub use toy::{sample_toy, ToySpec};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "AEOT_DATA_DIR";

/// File name of the MNIST training images inside a data directory.
pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
