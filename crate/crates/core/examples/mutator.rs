//! Infers input types and lists the tampered values derived from them.
//!
//! cargo run -p flowtamper --example mutator -- 1,234.50 Y 2013-09-28

use flowtamper::mutate::{infer_type, mutate, next_differing, MutateOptions};

fn main() {
    let mut values: Vec<String> = std::env::args().skip(1).collect();
    if values.is_empty() {
        values = ["500", "1,234.50", "Y", "2013-09-28", "23:15", "15%", "ACME Corp"].map(String::from).to_vec();
    }
    for v in &values {
        let hint = infer_type(None, v);
        let candidates = mutate(v, hint.input_type, &MutateOptions::default());
        println!("{v:?}: {:?} via {:?}", hint.input_type, hint.provenance);
        for c in &candidates {
            println!("    {:<22} {:?}", format!("{:?}", c.rule), c.value);
        }
        if let Ok(probe) = next_differing(&candidates, v) {
            println!("    dependency probe: {:?}", probe.value);
        }
    }
}
