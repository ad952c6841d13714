use emd_stream::estimators::{CombinedState, MultigridConfig};
use emd_stream::harness::{generate, Generator, InstanceSpec};
use emd_stream::geometry::Domain;
use emd_stream::oracle::exact_emd;

fn main() {
    let domain = Domain::new(64).unwrap();
    println!("{:<10} {:>4} {:>9} {:>9} {:>9} {:>9}", "generator", "k", "EMD", "Z", "baseline", "combined");
    for (i, generator) in [Generator::Uniform, Generator::Clustered, Generator::AdversarialMinGrid]
        .into_iter()
        .cycle()
        .take(6)
        .enumerate()
    {
        let inst = generate(&InstanceSpec {
            n: 120,
            k: 1 + i % 4,
            domain,
            generator,
            seed: i as u64,
        })
        .unwrap();
        let mut st = CombinedState::new(&MultigridConfig::new(domain, 100 + i as u64)).unwrap();
        st.update_batch(&inst.updates());
        let r = st.estimate().unwrap();
        let emd = exact_emd(&inst.s, &inst.t).unwrap().cost;
        println!(
            "{:<10} {:>4} {:>9.0} {:>9.0} {:>9.0} {:>9.0}",
            format!("{generator:?}").chars().take(10).collect::<String>(),
            inst.t.len(),
            emd,
            r.z,
            r.baseline,
            r.combined
        );
    }
}
