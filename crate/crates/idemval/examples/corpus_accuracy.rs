//! Generate the default corpus, validate every instance, certify every
//! verdict against concrete execution, and print the accuracy tables.

use idemval::harness::{accuracy_csv, evaluate_corpus, generate_corpus, taxonomy_csv};
use idemval::harness::DEFAULT_CORPUS_SEED;
use idemval::oracle::OracleLimits;
use idemval::AnalysisConfig;

fn main() {
    let corpus = generate_corpus(DEFAULT_CORPUS_SEED);
    println!(
        "corpus: {} kernels, {} instances (seed 0x{:x})\n",
        corpus.kernels.len(),
        corpus.total_instances(),
        DEFAULT_CORPUS_SEED
    );
    let report = match evaluate_corpus(&corpus, &AnalysisConfig::default(), &OracleLimits::default())
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("evaluation aborted: {e}");
            std::process::exit(2);
        }
    };
    println!("{}", accuracy_csv(&report));
    println!("{}", taxonomy_csv(&report));
    let t = report.totals();
    println!(
        "false positives = {} over {} instances; {} validated idempotent, {} conservative misses",
        t.false_pos, t.instances, t.true_pos, t.false_neg
    );
}
