//! Rank-addressed, non-blocking message passing.
//!
//! The contract follows the isend/irecv/waitall pattern: posting returns
//! immediately, completion happens only in [`Transport::wait_all`]. Messages
//! between one `(src, dest, tag)` triple are delivered in posting order.
//! Payloads are typed vectors and are moved, never shared.

mod inproc;

use std::marker::PhantomData;

use thiserror::Error;

pub use inproc::{world, InProcessTransport, TransportOptions};

pub type Tag = u32;

/// Tags at or above this value are reserved for collectives.
pub const COLLECTIVE_TAG_BASE: Tag = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("rank {rank} timed out waiting on (src, tag) {pending:?}")]
    Timeout { rank: usize, pending: Vec<(usize, Tag)> },
    #[error("rank {rank}: run aborted by another rank")]
    Aborted { rank: usize },
    #[error("rank {rank} out of range for {size} ranks")]
    BadRank { rank: usize, size: usize },
    #[error("message from {src} with tag {tag} has an unexpected payload type")]
    PayloadType { src: usize, tag: Tag },
    #[error("message from {src} with tag {tag} holds {len} items, receive capacity is {capacity}")]
    Truncated { src: usize, tag: Tag, len: usize, capacity: usize },
    #[error("tag {0} lies in the reserved collective range")]
    ReservedTag(Tag),
}

/// Handle of a posted send. In-process sends complete at posting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendRequest {
    pub dest: usize,
    pub tag: Tag,
}

/// Handle of a posted receive of `Vec<P>`.
#[derive(Debug, PartialEq, Eq)]
pub struct RecvRequest<P> {
    pub src: usize,
    pub tag: Tag,
    pub capacity: usize,
    _payload: PhantomData<fn() -> P>,
}

impl<P> RecvRequest<P> {
    pub fn new(src: usize, tag: Tag, capacity: usize) -> Self {
        RecvRequest { src, tag, capacity, _payload: PhantomData }
    }
}

/// A completed receive, returned in completion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion<P> {
    /// Position of the request in the list handed to `wait_all`.
    pub index: usize,
    pub src: usize,
    pub tag: Tag,
    pub payload: Vec<P>,
}

/// Message counters of one endpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

pub trait Transport {
    fn rank(&self) -> usize;

    fn size(&self) -> usize;

    fn post_send<P: Send + 'static>(
        &mut self,
        dest: usize,
        tag: Tag,
        payload: Vec<P>,
    ) -> Result<SendRequest, TransportError>;

    fn post_recv<P: Send + 'static>(
        &mut self,
        src: usize,
        tag: Tag,
        capacity: usize,
    ) -> Result<RecvRequest<P>, TransportError>;

    /// Blocks until every request has completed.
    fn wait_all<P: Send + 'static>(
        &mut self,
        sends: Vec<SendRequest>,
        recvs: Vec<RecvRequest<P>>,
    ) -> Result<Vec<Completion<P>>, TransportError>;

    fn barrier(&mut self) -> Result<(), TransportError>;

    /// Every rank returns the root's payload; non-root inputs are ignored.
    fn broadcast<P: Clone + Send + 'static>(
        &mut self,
        root: usize,
        payload: Vec<P>,
    ) -> Result<Vec<P>, TransportError>;

    /// Folds one value per rank on `root` in ascending rank order.
    /// Returns `Some` on the root only.
    fn reduce_fixed_order<P, F>(
        &mut self,
        root: usize,
        value: P,
        op: F,
    ) -> Result<Option<P>, TransportError>
    where
        P: Send + 'static,
        F: FnMut(P, P) -> P;

    /// [`Transport::reduce_fixed_order`] on rank 0 followed by a broadcast.
    fn allreduce_fixed_order<P, F>(&mut self, value: P, op: F) -> Result<P, TransportError>
    where
        P: Clone + Send + 'static,
        F: FnMut(P, P) -> P,
    {
        let reduced = self.reduce_fixed_order(0, value, op)?;
        let out = self.broadcast(0, reduced.into_iter().collect())?;
        Ok(out.into_iter().next().expect("root broadcasts one value"))
    }

    fn stats(&self) -> TransportStats;
}
