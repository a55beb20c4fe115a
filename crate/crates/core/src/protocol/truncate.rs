use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

pub const ELLIPSIS: char = '\u{2026}';

/// Fits `text` into `limit` NFC code points. Text that already fits is
/// returned unchanged; otherwise whole grapheme clusters are kept up to
/// `limit - 1` code points and an ellipsis is appended.
pub fn truncate_to_limit(text: &str, limit: usize) -> String {
    if limit == 0 {
        return String::new();
    }
    let nfc: String = text.nfc().collect();
    if nfc.chars().count() <= limit {
        return text.to_string();
    }
    let budget = limit - 1;
    let mut used = 0;
    let mut out = String::new();
    for cluster in nfc.graphemes(true) {
        let n = cluster.chars().count();
        if used + n > budget {
            break;
        }
        used += n;
        out.push_str(cluster);
    }
    out.push(ELLIPSIS);
    out
}
