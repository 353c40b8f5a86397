fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Syllable estimate for one hyphen-free chunk of letters.
fn chunk_syllables(chunk: &[char]) -> u32 {
    let mut groups = 0u32;
    let mut prev_vowel = false;
    for &c in chunk {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chunk.len();
    // Silent final e: a lone trailing "e" after a consonant, except consonant + "le".
    if n >= 2 && chunk[n - 1] == 'e' && !is_vowel(chunk[n - 2]) {
        let consonant_le = n >= 3 && chunk[n - 2] == 'l' && !is_vowel(chunk[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// Vowel-group syllable count with the silent-e adjustment, floored at 1.
///
/// Hyphenated compounds are counted part by part. Apostrophes and other
/// non-letters are ignored.
pub fn count_syllables(word: &str) -> u32 {
    let lower: String = word.to_lowercase();
    let total: u32 = lower
        .split('-')
        .map(|part| part.chars().filter(|c| c.is_alphabetic()).collect::<Vec<_>>())
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| chunk_syllables(&chunk))
        .sum();
    total.max(1)
}
