//! Trainable encoders and the scaled-cosine symbol similarity.
//!
//! Entities and rule/goal predicates are looked up in randomly initialised
//! tables; fact predicates (textual patterns) are looked up in a frozen
//! pretrained table. Each lookup feeds its own one-hidden-layer MLP.

mod mlp;
mod params;
mod similarity;
mod vectors;

pub use mlp::MlpParams;
pub(crate) use mlp::mlp_forward;
pub use params::{
    encode_symbol, init_parameters, EncodeError, InitConfig, InitError, MlpKind, MlpPart, ParamSlot,
    ParameterSet,
};
pub(crate) use params::stream_rng;
pub use similarity::{cosine, scaled_cosine, similarity, EncodedSymbols, ExactMatch, LazyEncoded, Similarity};
pub use vectors::{
    encode_key, load_pretrained, write_vectors, KeyedVectors, VectorFileError, VectorTable, ZERO_ROW_EPSILON,
};
