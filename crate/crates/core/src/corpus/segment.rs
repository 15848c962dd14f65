use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Words ending in `.` that never end a sentence. Compared ASCII
/// case-insensitively against the whitespace-delimited word.
pub const ABBREVIATIONS: [&str; 26] = [
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "gen.", "gov.", "sen.",
    "rep.", "lt.", "col.", "capt.", "sgt.", "vs.", "e.g.", "i.e.", "u.s.", "u.k.", "inc.",
    "corp.", "ltd.", "no.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_abbreviation(word: &str) -> bool {
    ABBREVIATIONS.iter().any(|a| a.eq_ignore_ascii_case(word))
}

/// Splits `text` after `.`, `!` or `?` when followed by whitespace or the end
/// of input, unless the word carrying the `.` is a guarded abbreviation.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut word_start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            word_start = i + c.len_utf8();
            continue;
        }
        if !is_terminal(c) {
            continue;
        }
        let end = i + c.len_utf8();
        let boundary = match chars.peek() {
            None => true,
            Some(&(_, next)) => next.is_whitespace(),
        };
        if !boundary {
            continue;
        }
        if c == '.' && is_abbreviation(&text[word_start..end]) {
            continue;
        }
        push_trimmed(&mut out, &text[start..end]);
        start = end;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
