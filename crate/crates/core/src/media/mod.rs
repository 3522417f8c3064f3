//! Media ingest: dataset manifests, raw video/audio codecs, and the
//! synthetic dataset generator.

pub mod manifest;
pub mod raw;
pub mod synth;

pub use manifest::{
    load_manifest, write_manifest, AudioDistortion, SequenceRecord, VideoDistortion,
};
pub use raw::{load_media, read_wav, read_y4m, write_wav, write_y4m, RawMedia};
pub use synth::{load_synth_spec, synth_dataset, SynthSpec};
