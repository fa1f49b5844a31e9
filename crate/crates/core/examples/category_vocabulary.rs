//! Pretrains the tiny masked LM on an unlabeled corpus and mines a category
//! vocabulary from its replacements of the label names.
//!
//! cargo run --example category_vocabulary

use lotpipe::category_vocab::{collect_replacements, rank_category_vocabulary, vocab_overlap};
use lotpipe::corpus::{make_synthetic, Split, SyntheticSpec, TokenizedCorpus, WordPiece};
use lotpipe::lm::{Hyperparameters, MlmPretraining, TransformerLm};

fn main() -> lotpipe::Result<()> {
    let seed = 7;
    let spec = SyntheticSpec::topics(4, 150, seed);
    let corpus = make_synthetic(&spec, Split::Train)?.corpus;
    let names = spec.label_names();
    let hp = Hyperparameters::tiny_profile();

    let tokenizer = WordPiece::build(corpus.unlabeled().texts(), 1, 1000);
    let tokenized = TokenizedCorpus::new(corpus.unlabeled(), &tokenizer, hp.max_seq_len);
    let mut lm = TransformerLm::tiny(tokenizer, names.num_classes(), hp.max_seq_len, seed);
    let losses = lm.pretrain_mlm(&tokenized, &MlmPretraining::default(), seed)?;
    println!("MLM loss {:.3} -> {:.3}", losses[0], losses[losses.len() - 1]);

    let replacements = collect_replacements(&tokenized, &names, &lm, &hp)?;
    println!("{} label-name occurrences", replacements.len());
    let vocab = rank_category_vocabulary(&replacements, &names, &hp, corpus.name())?;
    print!("{}", vocab.to_table(12));

    // How much of each mined list is the class's true generator keywords.
    for c in 0..names.num_classes() {
        let precision = vocab_overlap(&vocab.words(c), &spec.class_keywords[c])?;
        println!("{:<11} {} words, {:.0}% true keywords", names.class_names()[c], vocab.words(c).len(), 100.0 * precision);
    }

    let alt = Hyperparameters {
        filter_before_cut: true,
        ..hp.clone()
    };
    let filtered_first = rank_category_vocabulary(&replacements, &names, &alt, corpus.name())?;
    println!(
        "filtering before the cut keeps {} words instead of {}",
        filtered_first.classes.iter().map(|c| c.entries.len()).sum::<usize>(),
        vocab.classes.iter().map(|c| c.entries.len()).sum::<usize>()
    );
    Ok(())
}
