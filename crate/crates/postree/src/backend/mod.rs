//! Text-generation backends.

pub mod http;
pub mod mock;

pub use http::{HttpBackend, HttpOptions};
pub use mock::MockBackend;

use postree_core::generation::{Backend, BackendError, CompletionRequest};

/// Either backend behind one type, chosen at run time.
pub enum AnyBackend {
    Mock(MockBackend),
    Http(HttpBackend),
}

impl Backend for AnyBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        match self {
            AnyBackend::Mock(b) => b.complete(request),
            AnyBackend::Http(b) => b.complete(request),
        }
    }
}
