//! Checkpoints of sketch-backed estimator state.
//!
//! ```text
//! [u8; 4] magic "EMDC"
//! u8      version (= 1)
//! u8      kind (1 = multi-grid, 2 = baseline, 3 = combined)
//! kind 1: u64 config hash, u64 seed, i64 n_S, i64 n_T, u32 Δ, u32 g,
//!         f64 ε, f64 δ, u8 l0 mode, u8 has rows override, u32 rows,
//!         u32 blob count, blobs (ℓ1 sketches by level then grid, ℓ0 of S, ℓ0 of T)
//! kind 2: u64 seed, i64 n_S, i64 n_T, u32 Δ, one ℓ1 sketch blob
//! kind 3: a kind-1 checkpoint and a kind-2 checkpoint, each length-prefixed
//! ```
//!
//! Grids are not stored; they are redrawn from the seed on restore and the
//! config hash guards against a mismatched reconstruction.

use super::baseline::{BaselineConfig, BaselineNorm, BaselineState};
use super::multigrid::{config_hash, CellNorm, MultigridConfig, MultigridState};
use super::{CombinedState, EstimatorError, NormBackend};
use crate::geometry::Domain;
use crate::sketch::codec::{Reader, Writer};
use crate::sketch::{DistinctCounter, L0Mode, L1Sketch, SketchError};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EMDC";
pub const CHECKPOINT_VERSION: u8 = 1;
const KIND_MULTIGRID: u8 = 1;
const KIND_BASELINE: u8 = 2;
const KIND_COMBINED: u8 = 3;

fn bad(msg: impl Into<String>) -> EstimatorError {
    EstimatorError::Checkpoint(msg.into())
}

impl From<SketchError> for CheckpointDecode {
    fn from(e: SketchError) -> Self {
        CheckpointDecode(e.to_string())
    }
}

struct CheckpointDecode(String);

impl From<CheckpointDecode> for EstimatorError {
    fn from(e: CheckpointDecode) -> Self {
        EstimatorError::Checkpoint(e.0)
    }
}

fn header(kind: u8) -> Writer {
    let mut w = Writer::new();
    w.bytes(&CHECKPOINT_MAGIC).u8(CHECKPOINT_VERSION).u8(kind);
    w
}

fn open(bytes: &[u8], kind: u8) -> Result<Reader<'_>, CheckpointDecode> {
    let mut r = Reader::new(bytes);
    if r.bytes(4)? != CHECKPOINT_MAGIC {
        return Err(CheckpointDecode("missing EMDC magic".into()));
    }
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointDecode(format!("unsupported version {version}")));
    }
    let found = r.u8()?;
    if found != kind {
        return Err(CheckpointDecode(format!("expected kind {kind}, found {found}")));
    }
    Ok(r)
}

fn domain(delta: u32) -> Result<Domain, EstimatorError> {
    Domain::new(delta).map_err(|e| bad(e.to_string()))
}

impl MultigridState {
    pub fn checkpoint(&self) -> Result<Vec<u8>, EstimatorError> {
        let config = self.config();
        if config.backend != NormBackend::Sketch {
            return Err(bad("only sketch-backed state can be checkpointed"));
        }
        let mut w = header(KIND_MULTIGRID);
        w.u64(self.config_hash)
            .u64(config.seed)
            .i64(self.n_s)
            .i64(self.n_t)
            .u32(config.domain.delta())
            .u32(config.grids_per_level as u32)
            .f64(config.epsilon)
            .f64(config.delta)
            .u8(config.l0_mode as u8)
            .u8(config.rows_override.is_some() as u8)
            .u32(config.rows() as u32)
            .u32((self.sketch_count() + 2) as u32);
        for norm in self.norms.iter().flatten() {
            match norm {
                CellNorm::Sketch(s) => w.blob(&s.encode_payload()),
                CellNorm::Exact(_) => unreachable!("backend checked above"),
            };
        }
        w.blob(&self.distinct_s.encode_payload());
        w.blob(&self.distinct_t.encode_payload());
        Ok(w.finish())
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, EstimatorError> {
        let (state, rest) = Self::restore_prefix(bytes)?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(state)
    }

    fn restore_prefix(bytes: &[u8]) -> Result<(Self, Reader<'_>), EstimatorError> {
        let mut r = open(bytes, KIND_MULTIGRID)?;
        let read = |r: &mut Reader<'_>| -> Result<_, SketchError> {
            Ok((
                r.u64()?,
                r.u64()?,
                r.i64()?,
                r.i64()?,
                r.u32()?,
                r.u32()?,
                r.f64()?,
                r.f64()?,
                r.u8()?,
                r.u8()?,
                r.u32()?,
                r.u32()?,
            ))
        };
        let (hash, seed, n_s, n_t, delta_side, g, epsilon, delta, l0, has_rows, rows, blobs) =
            read(&mut r).map_err(CheckpointDecode::from)?;
        let l0_mode = match l0 {
            0 => L0Mode::Sketch,
            1 => L0Mode::Exact,
            other => return Err(bad(format!("unknown l0 mode {other}"))),
        };
        let config = MultigridConfig {
            domain: domain(delta_side)?,
            grids_per_level: g as usize,
            epsilon,
            delta,
            seed,
            backend: NormBackend::Sketch,
            l0_mode,
            rows_override: (has_rows != 0).then_some(rows as usize),
        };
        if config_hash(&config) != hash {
            return Err(bad("config hash mismatch"));
        }
        let mut state = MultigridState::new(&config)?;
        if blobs as usize != state.sketch_count() + 2 {
            return Err(bad(format!("expected {} blobs, found {blobs}", state.sketch_count() + 2)));
        }
        for norm in state.norms.iter_mut().flatten() {
            let sketch = L1Sketch::decode_payload(r.blob().map_err(CheckpointDecode::from)?)
                .map_err(CheckpointDecode::from)?;
            match norm {
                CellNorm::Sketch(s) if s.key() == sketch.key() && s.rows() == sketch.rows() => {
                    *s = sketch
                }
                _ => return Err(bad("sketch key or shape does not match the config")),
            }
        }
        for slot in [&mut state.distinct_s, &mut state.distinct_t] {
            let counter = DistinctCounter::decode_payload(r.blob().map_err(CheckpointDecode::from)?)
                .map_err(CheckpointDecode::from)?;
            if std::mem::discriminant(slot) != std::mem::discriminant(&counter) {
                return Err(bad("distinct counter mode does not match the config"));
            }
            *slot = counter;
        }
        state.n_s = n_s;
        state.n_t = n_t;
        Ok((state, r))
    }
}

impl BaselineState {
    pub fn checkpoint(&self) -> Result<Vec<u8>, EstimatorError> {
        let BaselineNorm::Sketch(sketch) = &self.norm else {
            return Err(bad("only sketch-backed state can be checkpointed"));
        };
        let mut w = header(KIND_BASELINE);
        w.u64(self.seed)
            .i64(self.n_s)
            .i64(self.n_t)
            .u32(self.domain.delta())
            .blob(&sketch.encode_payload());
        Ok(w.finish())
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, EstimatorError> {
        let mut r = open(bytes, KIND_BASELINE)?;
        let read = |r: &mut Reader<'_>| -> Result<_, SketchError> {
            let head = (r.u64()?, r.i64()?, r.i64()?, r.u32()?);
            let sketch = L1Sketch::decode_payload(r.blob()?)?;
            Ok((head, sketch))
        };
        let ((seed, n_s, n_t, delta_side), sketch) = read(&mut r).map_err(CheckpointDecode::from)?;
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        let config = BaselineConfig {
            domain: domain(delta_side)?,
            epsilon: sketch.epsilon(),
            delta: sketch.delta(),
            seed,
            backend: NormBackend::Sketch,
            rows_override: Some(sketch.rows()),
        };
        let mut state = BaselineState::new(&config)?;
        match &state.norm {
            BaselineNorm::Sketch(s) if s.key() == sketch.key() => {}
            _ => return Err(bad("sketch key does not match the seed")),
        }
        state.norm = BaselineNorm::Sketch(sketch);
        state.n_s = n_s;
        state.n_t = n_t;
        Ok(state)
    }
}

impl CombinedState {
    pub fn checkpoint(&self) -> Result<Vec<u8>, EstimatorError> {
        let mut w = header(KIND_COMBINED);
        w.blob(&self.multigrid.checkpoint()?)
            .blob(&self.baseline.checkpoint()?);
        Ok(w.finish())
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, EstimatorError> {
        let mut r = open(bytes, KIND_COMBINED)?;
        let mg = r.blob().map_err(CheckpointDecode::from)?;
        let bl = r.blob().map_err(CheckpointDecode::from)?;
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            multigrid: MultigridState::restore(mg)?,
            baseline: BaselineState::restore(bl)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, SetId, StreamUpdate};

    fn fed_state() -> CombinedState {
        let cfg = MultigridConfig {
            rows_override: Some(15),
            ..MultigridConfig::new(Domain::new(16).unwrap(), 21)
        };
        let mut st = CombinedState::new(&cfg).unwrap();
        st.update(&StreamUpdate::insert(SetId::S, Point::new(2, 9), 2));
        st.update(&StreamUpdate::insert(SetId::T, Point::new(12, 1), 2));
        st
    }

    #[test]
    fn round_trip_is_exact() {
        let st = fed_state();
        let bytes = st.checkpoint().unwrap();
        assert_eq!(&bytes[..4], b"EMDC");
        let back = CombinedState::restore(&bytes).unwrap();
        assert_eq!(back, st);
        assert_eq!(back.estimate().unwrap(), st.estimate().unwrap());
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let bytes = fed_state().multigrid.checkpoint().unwrap();
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(MultigridState::restore(&wrong_magic).is_err());
        // Flip a byte of the seed: the config hash no longer matches.
        let mut wrong_seed = bytes.clone();
        wrong_seed[14] ^= 1;
        assert!(matches!(MultigridState::restore(&wrong_seed), Err(EstimatorError::Checkpoint(_))));
        assert!(MultigridState::restore(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn exact_backend_refuses() {
        let st = MultigridState::new(&MultigridConfig::exact(Domain::new(8).unwrap(), 1)).unwrap();
        assert!(st.checkpoint().is_err());
    }
}
