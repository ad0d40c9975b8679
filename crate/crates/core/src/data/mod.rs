//! Text formats: ranking and rating corpora, synthetic data, model files.

mod model_file;
mod rankings;
mod synth;

pub use model_file::{read_model, write_model, FORMAT_TAG, FORMAT_VERSION};
pub use rankings::{parse_rankings, parse_ratings, ratings_to_rankings, write_rankings, IdMap, Rating};
pub use synth::{generate_synthetic, sample_pl_permutation, SynthSpec};
