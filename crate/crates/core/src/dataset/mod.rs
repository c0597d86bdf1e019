//! Paired coarse/fine training samples.
//!
//! Simulation frames are rendered onto a common pixel lattice as 3-channel
//! images in `(U, V, ξ)` order, normalized to `[0, 1]` with ranges frozen
//! from the training split, and grouped as two coarse frames
//! `(t_n, t_{n+1})` against three fine frames `(t_{2n}, t_{2n+1}, t_{2n+2})`.

mod augment;
mod manifest;
mod pairs;
mod render;

pub use augment::{augment, crop_patch, Augmentation, AugmentFlags};
pub use manifest::{
    decode_sample, encode_sample, make_dataset, split_ids, Dataset, DatasetOptions, Manifest,
    SampleInfo, Split,
};
pub use pairs::{align, build_pairs, build_pairs_with, pairs_from_states, sample_id, PairIndex, SamplePair};
pub use render::{render, FrameImage, NormRanges, CHANNELS};
