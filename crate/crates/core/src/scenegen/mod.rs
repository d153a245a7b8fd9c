//! Procedural training scenes: primitive meshes, random layouts and
//! on-disk datasets of geometry/ground-truth grid pairs.

mod dataset;
mod generate;
mod primitives;

pub use dataset::{
    frame_file_names, frame_seed, generate_dataset, generate_frame, load_pairs, DatasetConfig, DatasetStats,
    Manifest, ManifestEntry, DEFAULT_FRAMES, MANIFEST_NAME,
};
pub use generate::{generate_scene, SceneGenConfig};
pub use primitives::{make_primitive, PrimitiveKind};

#[cfg(test)]
mod tests;
