//! Paired image/mask augmentation for retinal vessel segmentation, plus the
//! metrics used to score segmentations.
//!
//! Every geometric transform is a backward coordinate map that is applied to
//! the image with bilinear interpolation and to the masks with nearest
//! neighbour, so image and masks always move together. Randomness comes from
//! per-output streams keyed by `(seed, sample, entry, replicate)`.

pub mod affine;
pub mod dataset;
pub mod elastic;
pub mod error;
pub mod eval;
pub mod filter;
pub mod metrics;
pub mod pipeline;
pub mod pixel;
pub mod plan;
pub mod png_io;
pub mod raster;
pub mod rng;
pub mod synthetic;
pub mod transform;
pub mod warp;

pub use error::{Error, Result};
pub use plan::{default_plan, AugmentationPlan, ChannelPolicy, Composition, PlanEntry};
pub use raster::{BinaryMask, ImagePlane, ProbabilityMap, Sample};
pub use transform::{ResolvedTransform, TransformSpec};
