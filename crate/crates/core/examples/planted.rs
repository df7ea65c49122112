//! Writes a synthetic 50-image stream with three planted activities, plus
//! its predictor, word vectors and references, into the given directory.
//!
//! cargo run -p lifecap-core --example planted -- DIR [SEED]

#[path = "../tests/common/planted.rs"]
#[allow(dead_code)]
mod planted;

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next() else {
        eprintln!("usage: planted DIR [SEED]");
        std::process::exit(64);
    };
    let seed = match args.next().map(|s| s.parse::<u64>()) {
        None => 7,
        Some(Ok(s)) => s,
        Some(Err(e)) => {
            eprintln!("bad seed: {e}");
            std::process::exit(64);
        }
    };
    planted::planted_stream(seed).write_files(std::path::Path::new(&dir));
    println!("wrote manifest.jsonl, predictor.json, vectors.txt and references.jsonl to {dir}");
}
