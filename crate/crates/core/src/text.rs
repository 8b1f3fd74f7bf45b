//! Tokenization and stable hashing shared by the lexical index and the
//! deterministic embedding provider.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Lowercases `text` and splits it on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// 64-bit FNV-1a over the raw bytes. Stable across platforms and releases,
/// unlike `std::hash`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_case() {
        assert_eq!(
            tokenize("What is ACME's revenue_2024?"),
            vec!["what", "is", "acme", "s", "revenue", "2024"]
        );
        assert!(tokenize("  !!  ").is_empty());
    }

    #[test]
    fn fnv_matches_reference_values() {
        // reference values from an independent implementation
        assert_eq!(fnv1a64(b"revenue"), 8547722277222435195);
        assert_eq!(fnv1a64(b"acme"), 514768821131075087);
        assert_eq!(fnv1a64(b""), FNV_OFFSET);
    }
}
