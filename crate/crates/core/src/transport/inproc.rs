//! Channel-backed transport: one endpoint per rank, each driven from its own
//! thread.
//!
//! Every endpoint owns an inbox fed by all ranks. Arrived messages that no
//! receive has claimed yet wait in a per-`(src, tag)` FIFO mailbox.
//!
//! With [`TransportOptions::randomize`] set, posted sends are held back and
//! released in a seeded random order (still FIFO per `(dest, tag)`) the next
//! time the endpoint blocks, and `wait_all` reports completions in a shuffled
//! order. Nothing progresses before a blocking call, which is also how the
//! MPI stacks of the original study behaved.

use std::any::Any;
use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Completion, RecvRequest, SendRequest, Tag, Transport, TransportError, TransportStats,
    COLLECTIVE_TAG_BASE,
};

const BARRIER_TAG: Tag = COLLECTIVE_TAG_BASE;
const BROADCAST_TAG: Tag = COLLECTIVE_TAG_BASE + 1;
const REDUCE_TAG: Tag = COLLECTIVE_TAG_BASE + 2;

/// How long a blocked endpoint sleeps between abort checks.
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportOptions {
    /// A blocking call that makes no progress for this long fails with
    /// [`TransportError::Timeout`].
    pub timeout: Duration,
    /// Seed of the randomized delivery and completion schedule.
    pub randomize: Option<u64>,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { timeout: Duration::from_secs(60), randomize: None }
    }
}

struct Envelope {
    src: usize,
    tag: Tag,
    payload: Box<dyn Any + Send>,
}

pub struct InProcessTransport {
    rank: usize,
    size: usize,
    peers: Vec<Sender<Envelope>>,
    inbox: Receiver<Envelope>,
    mailbox: HashMap<(usize, Tag), VecDeque<Envelope>>,
    held: Vec<(usize, Envelope)>,
    rng: Option<ChaCha8Rng>,
    timeout: Duration,
    abort: Arc<AtomicBool>,
    stats: TransportStats,
}

/// Connected endpoints for ranks `0..size`.
pub fn world(size: usize, options: TransportOptions) -> Vec<InProcessTransport> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..size).map(|_| mpsc::channel()).unzip();
    let abort = Arc::new(AtomicBool::new(false));
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| InProcessTransport {
            rank,
            size,
            peers: senders.clone(),
            inbox,
            mailbox: HashMap::new(),
            held: Vec::new(),
            rng: options
                .randomize
                .map(|seed| ChaCha8Rng::seed_from_u64(seed ^ (rank as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))),
            timeout: options.timeout,
            abort: Arc::clone(&abort),
            stats: TransportStats::default(),
        })
        .collect()
}

impl InProcessTransport {
    /// Makes every blocked or future blocking call on any rank fail fast.
    pub fn abort_all(&self) {
        self.abort.store(true, Ordering::SeqCst);
    }

    fn check_rank(&self, rank: usize) -> Result<(), TransportError> {
        if rank < self.size {
            Ok(())
        } else {
            Err(TransportError::BadRank { rank, size: self.size })
        }
    }

    fn deliver(&self, dest: usize, env: Envelope) {
        // A closed inbox means that rank has already finished or failed; the
        // waiting side reports that through its own timeout or abort.
        let _ = self.peers[dest].send(env);
    }

    fn send_envelope<P: Send + 'static>(&mut self, dest: usize, tag: Tag, payload: Vec<P>) {
        self.stats.messages_sent += 1;
        self.stats.bytes_sent += (payload.len() * std::mem::size_of::<P>()) as u64;
        let env = Envelope { src: self.rank, tag, payload: Box::new(payload) };
        if self.rng.is_some() {
            self.held.push((dest, env));
        } else {
            self.deliver(dest, env);
        }
    }

    /// Releases held sends in random order, FIFO within each `(dest, tag)`.
    fn flush(&mut self) {
        let Some(rng) = self.rng.as_mut() else { return };
        let mut queues: Vec<((usize, Tag), VecDeque<Envelope>)> = Vec::new();
        for (dest, env) in self.held.drain(..) {
            let key = (dest, env.tag);
            match queues.iter_mut().find(|(k, _)| *k == key) {
                Some((_, q)) => q.push_back(env),
                None => queues.push((key, VecDeque::from([env]))),
            }
        }
        let mut order = Vec::new();
        while !queues.is_empty() {
            let pick = rng.gen_range(0..queues.len());
            let (key, q) = &mut queues[pick];
            order.push((key.0, q.pop_front().expect("non-empty queue")));
            if q.is_empty() {
                queues.swap_remove(pick);
            }
        }
        for (dest, env) in order {
            self.deliver(dest, env);
        }
    }

    fn stash(&mut self, env: Envelope) {
        self.mailbox.entry((env.src, env.tag)).or_default().push_back(env);
    }

    fn take(&mut self, src: usize, tag: Tag) -> Option<Envelope> {
        let q = self.mailbox.get_mut(&(src, tag))?;
        let env = q.pop_front();
        if q.is_empty() {
            self.mailbox.remove(&(src, tag));
        }
        env
    }

    /// Receives `(src, tag)` pairs in the given order.
    fn collect<P: Send + 'static>(
        &mut self,
        wanted: &[(usize, Tag, usize)],
    ) -> Result<Vec<Vec<P>>, TransportError> {
        self.flush();
        let mut out: Vec<Option<Vec<P>>> = (0..wanted.len()).map(|_| None).collect();
        let mut deadline = Instant::now() + self.timeout;
        loop {
            for (slot, &(src, tag, capacity)) in out.iter_mut().zip(wanted) {
                if slot.is_some() {
                    continue;
                }
                let Some(env) = self.take(src, tag) else { continue };
                let payload = env
                    .payload
                    .downcast::<Vec<P>>()
                    .map_err(|_| TransportError::PayloadType { src, tag })?;
                if payload.len() > capacity {
                    return Err(TransportError::Truncated { src, tag, len: payload.len(), capacity });
                }
                *slot = Some(*payload);
            }
            if out.iter().all(Option::is_some) {
                return Ok(out.into_iter().map(|x| x.expect("checked")).collect());
            }
            if self.abort.load(Ordering::SeqCst) {
                return Err(TransportError::Aborted { rank: self.rank });
            }
            let now = Instant::now();
            if now >= deadline {
                let pending = wanted
                    .iter()
                    .zip(&out)
                    .filter(|(_, got)| got.is_none())
                    .map(|(&(src, tag, _), _)| (src, tag))
                    .collect();
                return Err(TransportError::Timeout { rank: self.rank, pending });
            }
            match self.inbox.recv_timeout(POLL.min(deadline - now)) {
                Ok(env) => {
                    self.stash(env);
                    deadline = Instant::now() + self.timeout;
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(TransportError::Aborted { rank: self.rank })
                }
            }
        }
    }
}

impl Transport for InProcessTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn post_send<P: Send + 'static>(
        &mut self,
        dest: usize,
        tag: Tag,
        payload: Vec<P>,
    ) -> Result<SendRequest, TransportError> {
        self.check_rank(dest)?;
        if tag >= COLLECTIVE_TAG_BASE {
            return Err(TransportError::ReservedTag(tag));
        }
        self.send_envelope(dest, tag, payload);
        Ok(SendRequest { dest, tag })
    }

    fn post_recv<P: Send + 'static>(
        &mut self,
        src: usize,
        tag: Tag,
        capacity: usize,
    ) -> Result<RecvRequest<P>, TransportError> {
        self.check_rank(src)?;
        if tag >= COLLECTIVE_TAG_BASE {
            return Err(TransportError::ReservedTag(tag));
        }
        Ok(RecvRequest::new(src, tag, capacity))
    }

    fn wait_all<P: Send + 'static>(
        &mut self,
        _sends: Vec<SendRequest>,
        recvs: Vec<RecvRequest<P>>,
    ) -> Result<Vec<Completion<P>>, TransportError> {
        let wanted: Vec<_> = recvs.iter().map(|r| (r.src, r.tag, r.capacity)).collect();
        let payloads = self.collect::<P>(&wanted)?;
        let mut done: Vec<Completion<P>> = payloads
            .into_iter()
            .enumerate()
            .map(|(index, payload)| Completion { index, src: wanted[index].0, tag: wanted[index].1, payload })
            .collect();
        if let Some(rng) = self.rng.as_mut() {
            done.shuffle(rng);
        }
        Ok(done)
    }

    fn barrier(&mut self) -> Result<(), TransportError> {
        if self.size == 1 {
            return Ok(());
        }
        if self.rank == 0 {
            let wanted: Vec<_> = (1..self.size).map(|r| (r, BARRIER_TAG, 0)).collect();
            self.collect::<()>(&wanted)?;
            for r in 1..self.size {
                self.send_envelope::<()>(r, BARRIER_TAG, Vec::new());
            }
            self.flush();
        } else {
            self.send_envelope::<()>(0, BARRIER_TAG, Vec::new());
            self.collect::<()>(&[(0, BARRIER_TAG, 0)])?;
        }
        Ok(())
    }

    fn broadcast<P: Clone + Send + 'static>(
        &mut self,
        root: usize,
        payload: Vec<P>,
    ) -> Result<Vec<P>, TransportError> {
        self.check_rank(root)?;
        if self.rank == root {
            for r in (0..self.size).filter(|&r| r != root) {
                self.send_envelope(r, BROADCAST_TAG, payload.clone());
            }
            self.flush();
            Ok(payload)
        } else {
            let mut got = self.collect::<P>(&[(root, BROADCAST_TAG, usize::MAX)])?;
            Ok(got.pop().expect("one payload"))
        }
    }

    fn reduce_fixed_order<P, F>(
        &mut self,
        root: usize,
        value: P,
        mut op: F,
    ) -> Result<Option<P>, TransportError>
    where
        P: Send + 'static,
        F: FnMut(P, P) -> P,
    {
        self.check_rank(root)?;
        if self.rank != root {
            self.send_envelope(root, REDUCE_TAG, vec![value]);
            self.flush();
            return Ok(None);
        }
        let wanted: Vec<_> = (0..self.size).filter(|&r| r != root).map(|r| (r, REDUCE_TAG, 1)).collect();
        let mut others = self.collect::<P>(&wanted)?.into_iter();
        let mut own = Some(value);
        let mut acc: Option<P> = None;
        for r in 0..self.size {
            let v = if r == root {
                own.take().expect("root value used once")
            } else {
                others.next().and_then(|mut v| v.pop()).expect("one value per rank")
            };
            acc = Some(match acc {
                None => v,
                Some(a) => op(a, v),
            });
        }
        Ok(acc)
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}
