//! Message length and Flesch-Kincaid grade level.

/// Whitespace-delimited token count after trimming.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, thiserror::Error)]
#[error("text must contain at least one word")]
pub struct EmptyText;

/// Flesch-Kincaid grade level:
/// `0.39 * (words/sentences) + 11.8 * (syllables/words) - 15.59`.
///
/// Sentences are maximal runs of `.`, `!`, `?` (minimum one); syllables
/// come from the vowel-group heuristic below, frozen by golden tests.
pub fn fk_grade(text: &str) -> Result<f64, EmptyText> {
    let words = word_count(text);
    if words == 0 {
        return Err(EmptyText);
    }
    let sentences = sentence_count(text).max(1);
    let syllables: usize = text.split_whitespace().map(syllable_count).sum();
    Ok(0.39 * (words as f64 / sentences as f64) + 11.8 * (syllables as f64 / words as f64)
        - 15.59)
}

/// Counts maximal runs of sentence terminators, so "?!" ends one sentence.
fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_run = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if !in_run {
                count += 1;
                in_run = true;
            }
        } else {
            in_run = false;
        }
    }
    count
}

/// Vowel-group heuristic with silent-e subtraction and a minimum of one
/// syllable per word with any letters.
pub fn syllable_count(word: &str) -> usize {
    let letters: String = word
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase();
    if letters.is_empty() {
        return 0;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut in_group = false;
    for c in letters.chars() {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
                in_group = true;
            }
        } else {
            in_group = false;
        }
    }
    // Silent e: drop a trailing 'e' that forms its own vowel group.
    let chars: Vec<char> = letters.chars().collect();
    let silent_e = chars.last() == Some(&'e')
        && chars.len() >= 2
        && !is_vowel(chars[chars.len() - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_examples() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("I propose 50/50."), 3);
        assert_eq!(word_count("  spaced   out  words "), 3);
    }

    #[test]
    fn fk_grade_the_cat_sat() {
        // 3 words, 1 sentence, 3 syllables: 0.39*3 + 11.8*1 - 15.59 = -2.62
        let grade = fk_grade("The cat sat.").unwrap();
        assert!((grade - (-2.62)).abs() < 1e-9, "got {grade}");
    }

    #[test]
    fn fk_grade_single_word_propose() {
        // "propose": vowel groups o/o/e, silent e drops one -> 2 syllables.
        assert_eq!(syllable_count("propose"), 2);
        let grade = fk_grade("propose").unwrap();
        let expected = 0.39 * 1.0 + 11.8 * 2.0 - 15.59;
        assert!((grade - expected).abs() < 1e-9);
    }

    #[test]
    fn fk_grade_empty_text_errors() {
        assert!(fk_grade("   ").is_err());
    }

    #[test]
    fn syllable_heuristic_golden_values() {
        for (word, expected) in [
            ("the", 1),
            ("cat", 1),
            ("propose", 2),
            ("allocation", 4),
            ("utility", 4),
            ("agree", 2),
            ("strength", 1),
            ("idea", 2),
            ("evaluate", 3),
        ] {
            assert_eq!(syllable_count(word), expected, "word {word}");
        }
    }

    #[test]
    fn terminator_runs_count_once() {
        assert_eq!(sentence_count("Really?! Yes. Sure..."), 3);
        assert_eq!(sentence_count("no terminators"), 0);
    }

    #[test]
    fn fk_grade_is_pure() {
        let text = "Agents exchange goods. Utility rises over rounds.";
        assert_eq!(fk_grade(text).unwrap(), fk_grade(text).unwrap());
    }
}
