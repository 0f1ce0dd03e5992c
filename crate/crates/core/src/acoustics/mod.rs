//! Acoustic drift analysis: pitch contours, formant tracks, paired set
//! summaries and 2-D embedding projections.

mod formant;
mod pitch;
mod projection;
mod summary;

pub use formant::{extract_formants, FormantConfig, FormantFrame, FormantTrack};
pub use pitch::{extract_pitch, PitchConfig, PitchContour};
pub use projection::{mean_pairwise_distance, pca, project_embeddings, silhouette, tsne, Pca, ProjectionMethod, Projection2D, TsneConfig, TSNE_MAX_POINTS};
pub use summary::{analyze_file, summarize_pairs, AnalysisSummary, FileAnalysis, SetStats};
