//! Feature encoders: the CNN's fixed-size sentence matrix, mean word
//! embeddings under two out-of-vocabulary policies, and soft-assignment
//! bag-of-words histograms over a k-means codebook.

mod bow;
mod kmeans;
mod matrix;
mod mean;

pub use bow::{bow_histogram, BowConfig, Histogram};
pub use kmeans::{fit_codebook, fit_codebook_traced, load_codebook, read_codebook, save_codebook, write_codebook, Codebook, KMeansTrace};
pub use matrix::{encode_sentence_matrix, EncoderConfig, SentenceMatrix};
pub use mean::{mean_embedding, MeanMode};
