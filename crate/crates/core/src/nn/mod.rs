//! Dense networks, low-rank adapters and hypernetworks.

mod embedding;
mod hyper;
mod lora;
mod mlp;

pub use embedding::{EmbeddingCodec, TaskEmbedding};
pub use hyper::{
    apply_predicted, assemble_on_tape, predicted_layout, AssemblyMode, HyperConfig, HyperNetwork,
};
pub use lora::{
    adapter_layout, adapter_param_count, check_rank, lora_wrap, Adapter, LoraNetwork,
    LORA_INIT_STD,
};
pub use mlp::{
    forward_with, zeroed, Dense, Mlp, MlpConfig, TapedMlp, BASE_DEPTH, BASE_WIDTH, HYPER_HIDDEN,
};
