use crate::mesh::{Face, FieldSet};
use crate::scalar::Real;
use crate::transport::{RecvRequest, SendRequest, Transport, TransportError};

use super::plan::{decode_tag, ExchangePlan, MessageSpec};
use super::{ByteLedger, ExchangeError};

/// Deliberate corruption of received ghosts, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExchangeFault {
    /// Adds `amount` to every value unpacked from the first received message.
    PerturbFirstMessage { amount: f64 },
}

struct InFlight<T> {
    sends: Vec<SendRequest>,
    recvs: Vec<RecvRequest<T>>,
    /// `(face index in plan, message index)` per receive, in posting order.
    targets: Vec<(usize, usize)>,
}

/// Runs the exchange described by one plan, either in one call or split
/// around overlapped computation.
pub struct Exchanger<T> {
    plan: ExchangePlan,
    ledger: ByteLedger,
    in_flight: Option<InFlight<T>>,
    fault: Option<ExchangeFault>,
}

impl<T: Real> Exchanger<T> {
    pub fn new(plan: ExchangePlan) -> Self {
        Exchanger { plan, ledger: ByteLedger::default(), in_flight: None, fault: None }
    }

    pub fn plan(&self) -> &ExchangePlan {
        &self.plan
    }

    pub fn ledger(&self) -> &ByteLedger {
        &self.ledger
    }

    pub fn set_fault(&mut self, fault: Option<ExchangeFault>) {
        self.fault = fault;
    }

    pub fn is_in_flight(&self) -> bool {
        self.in_flight.is_some()
    }

    /// Packs and posts every send and receive; returns without waiting.
    pub fn begin<C: Transport>(&mut self, fields: &FieldSet<T>, transport: &mut C) -> Result<(), ExchangeError> {
        if self.in_flight.is_some() {
            return Err(ExchangeError::AlreadyInFlight);
        }
        let rank = self.plan.rank;
        let mut flight = InFlight { sends: Vec::new(), recvs: Vec::new(), targets: Vec::new() };
        for (fi, fp) in self.plan.faces.iter().enumerate() {
            for (mi, msg) in fp.messages.iter().enumerate() {
                let req = transport
                    .post_recv::<T>(fp.neighbor, msg.recv_tag(fp.face), msg.len)
                    .map_err(|e| label(rank, e))?;
                flight.recvs.push(req);
                flight.targets.push((fi, mi));
            }
        }
        for fp in &self.plan.faces {
            for msg in &fp.messages {
                let buf = pack(&self.plan, fields, fp.face, msg);
                debug_assert_eq!(buf.len(), msg.len);
                let bytes = (buf.len() * std::mem::size_of::<T>()) as u64;
                let req = transport
                    .post_send(fp.neighbor, msg.send_tag(fp.face), buf)
                    .map_err(|e| label(rank, e))?;
                self.ledger.record(fp.face, bytes);
                flight.sends.push(req);
            }
        }
        self.ledger.exchanges += 1;
        self.in_flight = Some(flight);
        Ok(())
    }

    /// Waits for the posted receives and unpacks them into the ghost layers,
    /// in whatever order they complete.
    pub fn finish<C: Transport>(&mut self, fields: &mut FieldSet<T>, transport: &mut C) -> Result<(), ExchangeError> {
        let flight = self.in_flight.take().ok_or(ExchangeError::NotStarted)?;
        let rank = self.plan.rank;
        let done = transport.wait_all(flight.sends, flight.recvs).map_err(|e| label(rank, e))?;
        for (nth, c) in done.into_iter().enumerate() {
            let (fi, mi) = flight.targets[c.index];
            let fp = &self.plan.faces[fi];
            let msg = &fp.messages[mi];
            if c.payload.len() != msg.len {
                return Err(ExchangeError::Mesh(crate::mesh::MeshError::SlabMismatch {
                    expected: msg.len,
                    found: c.payload.len(),
                }));
            }
            let mut payload = c.payload;
            if let (Some(ExchangeFault::PerturbFirstMessage { amount }), 0) = (self.fault, nth) {
                let delta = T::lit(amount);
                payload.iter_mut().for_each(|x| *x = *x + delta);
            }
            unpack(&self.plan, fields, fp.face, msg, &payload)?;
        }
        Ok(())
    }

    /// `begin` immediately followed by `finish`.
    pub fn exchange<C: Transport>(&mut self, fields: &mut FieldSet<T>, transport: &mut C) -> Result<(), ExchangeError> {
        self.begin(fields, transport)?;
        self.finish(fields, transport)
    }
}

fn pack<T: Real>(plan: &ExchangePlan, fields: &FieldSet<T>, face: Face, msg: &MessageSpec) -> Vec<T> {
    let mut buf = Vec::with_capacity(msg.len);
    for part in &msg.parts {
        let region = plan.send_region(face, *part);
        if msg.packed {
            fields[part.var].pack_rows(&region, &mut buf);
        } else {
            fields[part.var].gather_strided(&region, &mut buf);
        }
    }
    buf
}

fn unpack<T: Real>(
    plan: &ExchangePlan,
    fields: &mut FieldSet<T>,
    face: Face,
    msg: &MessageSpec,
    payload: &[T],
) -> Result<(), ExchangeError> {
    let mut offset = 0;
    for part in &msg.parts {
        let region = plan.recv_region(face, *part);
        let src = &payload[offset..];
        offset += if msg.packed {
            fields[part.var].unpack_rows(&region, src)?
        } else {
            fields[part.var].scatter_strided(&region, src)?
        };
    }
    Ok(())
}

/// Rewrites transport failures in terms of faces and variable groups.
fn label(rank: usize, e: TransportError) -> ExchangeError {
    match e {
        TransportError::Timeout { pending, .. } => ExchangeError::Stalled {
            rank,
            waiting: pending
                .into_iter()
                .map(|(src, tag)| match decode_tag(tag) {
                    // the tag names the sender's face; ours is the opposite one
                    Some((face, group)) => format!("face {} from rank {src} (group {group})", face.opposite()),
                    None => format!("rank {src} tag {tag}"),
                })
                .collect(),
        },
        other => ExchangeError::Transport(other),
    }
}
