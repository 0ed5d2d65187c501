//! Generates a synthetic corpus pair, writes it to disk, reloads it and
//! checks that the content hash survives the round trip.

use affect_eval::corpus::{corpus_hash, corpus_stats, load_corpus, write_corpus};
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let cfg: SynthConfig = toml::from_str("seed = 11\nn_subjects = 6\nlabel_map_shift = 0.8\n")?;
    let (young, older) = generate_pair(&cfg)?;
    let dir = std::env::temp_dir().join("affect_eval_synth");
    for c in [&young, &older] {
        let manifest = write_corpus(c, dir.join(&c.corpus_id))?;
        let back = load_corpus(&manifest)?;
        let s = corpus_stats(&back);
        println!(
            "{}: {} sequences, mean {:.2} s, hash {} (round trip {})",
            back.corpus_id,
            s.n_sequences,
            s.mean_duration_s,
            &corpus_hash(&back)?[..12],
            if corpus_hash(&back)? == corpus_hash(c)? { "ok" } else { "changed" }
        );
    }
    Ok(())
}
