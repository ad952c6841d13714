//! Checkpoint a combined estimator mid-stream, restore it, finish the
//! stream on the copy, and compare with an uninterrupted run.

use emd_stream::estimators::{CombinedState, MultigridConfig};
use emd_stream::geometry::Domain;
use emd_stream::harness::{generate, Generator, InstanceSpec};

fn main() {
    let domain = Domain::new(32).unwrap();
    let inst = generate(&InstanceSpec {
        n: 80,
        k: 2,
        domain,
        generator: Generator::Uniform,
        seed: 4,
    })
    .unwrap();
    let updates = inst.updates();
    let (head, tail) = updates.split_at(updates.len() / 2);

    let config = MultigridConfig::new(domain, 77);
    let mut live = CombinedState::new(&config).unwrap();
    live.update_batch(head);
    let bytes = live.checkpoint().unwrap();
    println!("checkpoint: {} bytes", bytes.len());

    let mut resumed = CombinedState::restore(&bytes).unwrap();
    live.update_batch(tail);
    resumed.update_batch(tail);
    let (a, b) = (live.estimate().unwrap(), resumed.estimate().unwrap());
    println!("uninterrupted {:.3}, resumed {:.3}, identical: {}", a.combined, b.combined, a == b);

    let mut corrupt = bytes.clone();
    corrupt[20] ^= 0xff;
    println!("corrupted restore: {:?}", CombinedState::restore(&corrupt).err().map(|e| e.to_string()));
}
