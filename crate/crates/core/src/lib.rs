//! Diachronic lexical semantic change indices for year-tagged corpora.
//!
//! The crate turns three views of a corpus (cleaned raw text, lemma
//! sentences, dependency parses) into annual index series for target
//! concepts and tests those series for historical trends:
//!
//! * sentiment: norm-weighted mean valence of collocates ([`indices`])
//! * intensity: mean arousal of collocates and the intensifier index
//! * breadth: mean pairwise cosine distance of sentence embeddings ([`breadth`])
//! * theme and salience as auxiliary indices
//!
//! [`stats`] fits linear and quadratic year trends with OLS, a permutation
//! Durbin–Watson test, Prais–Winsten GLS for autocorrelated residuals, and
//! HC3-robust standardized coefficients. [`report`] wires everything into a
//! configured, deterministic pipeline.

pub mod breadth;
pub mod collocates;
pub mod corpus;
pub mod indices;
pub mod lexicon;
pub mod report;
pub mod stats;
pub mod synth;
