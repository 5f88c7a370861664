//! Language-neutral text helpers shared by corpus statistics and the
//! synthetic-candidate filter.

use alloc::string::String;

use crate::graph::Language;

/// Number of non-empty tokens after splitting on Unicode whitespace.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Case-folded text with whitespace runs collapsed to one space and trimmed.
pub fn normalize_for_dedup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Arabic-script blocks used for Persian, including presentation forms.
fn is_arabic_script(c: char) -> bool {
    matches!(c as u32,
        0x0600..=0x06FF | 0x0750..=0x077F | 0x08A0..=0x08FF | 0xFB50..=0xFDFF | 0xFE70..=0xFEFF)
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c as u32, 0x00C0..=0x024F)
}

/// Share of alphabetic characters written in the script expected for
/// `language`. Returns `None` when the text has no alphabetic characters.
pub fn script_share(text: &str, language: Language) -> Option<f64> {
    let mut letters = 0usize;
    let mut matching = 0usize;
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        let hit = match language {
            Language::En => is_latin(c),
            Language::Fa => is_arabic_script(c),
        };
        if hit {
            matching += 1;
        }
    }
    (letters > 0).then(|| matching as f64 / letters as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_split_on_unicode_whitespace() {
        assert_eq!(word_count("  a\tb\u{00A0}c\n\n d "), 4);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("BER باید دوباره"), 3);
    }

    #[test]
    fn dedup_normalization() {
        assert_eq!(normalize_for_dedup("  Hello   WORLD\t!"), "hello world !");
    }

    #[test]
    fn script_share_by_language() {
        assert_eq!(script_share("plain english", Language::En), Some(1.0));
        assert_eq!(script_share("plain english", Language::Fa), Some(0.0));
        assert_eq!(script_share("باید دوباره", Language::Fa), Some(1.0));
        assert_eq!(script_share("123 !!", Language::En), None);
    }
}
