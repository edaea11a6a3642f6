use csse_core::SearchQuery;

use crate::error::{CliError, CliResult};

/// Parses `w1 AND w2 AND ...`. Only the uppercase connective is recognized;
/// keywords themselves may be any other whitespace-free token.
pub fn parse_query(s: &str) -> CliResult<SearchQuery> {
    let mut words = Vec::new();
    let mut expect_word = true;
    for tok in s.split_whitespace() {
        match (tok == "AND", expect_word) {
            (false, true) => {
                words.push(tok.to_string());
                expect_word = false;
            }
            (true, false) => expect_word = true,
            (true, true) => return Err(CliError::user(format!("misplaced AND in query {s:?}"))),
            (false, false) => {
                return Err(CliError::user(format!(
                    "expected AND between {:?} and {tok:?}",
                    words.last().unwrap()
                )))
            }
        }
    }
    if expect_word {
        return Err(CliError::user(format!("incomplete query {s:?}")));
    }
    SearchQuery::new(words).map_err(|e| CliError::user(e.to_string()))
}
