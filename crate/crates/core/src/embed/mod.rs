//! Segment embeddings: external tables and a built-in log-mel extractor.

mod mel;
mod table;

pub use mel::{compute_builtin_embedding, MelExtractor, BUILTIN_DIM, LOG_FLOOR};
pub use table::{load_embedding_table, parse_embedding_csv, EmbeddingTable};
