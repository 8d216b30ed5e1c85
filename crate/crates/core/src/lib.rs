//! Entity extraction, storage, querying and corpus analytics for collections
//! of medical paper abstracts.
//!
//! The flow is: [`corpus`] parses metadata, [`pipeline`] runs each shard of
//! papers through a [`ner`] backend into a [`store`], and [`query`] and
//! [`analytics`] read the store.

pub mod analytics;
pub mod corpus;
pub mod ner;
pub mod pipeline;
pub mod query;
pub mod store;

pub use corpus::{PaperRecord, PublishDate};
pub use ner::{AnalyzedPaper, EntityCategory, HealthEntity, HealthRelation};
