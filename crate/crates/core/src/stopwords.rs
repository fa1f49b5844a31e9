//! Bundled English stopword list (the 179-word list shipped with NLTK).

use std::collections::HashSet;
use std::sync::OnceLock;

pub const STOPWORDS_VERSION: &str = "en-v1";

const RAW: &str = include_str!("../data/stopwords_en_v1.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| RAW.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_is_pinned() {
        assert_eq!(stopwords().len(), 179);
        assert!(is_stopword("the") && is_stopword("won't") && is_stopword("ourselves"));
        assert!(!is_stopword("sports"));
    }
}
