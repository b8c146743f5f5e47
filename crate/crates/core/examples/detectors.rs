//! The acceptance detectors on their own: keywords, numeric reflection,
//! and value normalization.
//!
//! cargo run -p flowtamper --example detectors

use flowtamper::detect::{find_reflection, is_accept_keyword, normalized_eq, MatchMode};
use flowtamper::html::{Leaf, Locator};

fn main() {
    for text in ["Updated successfully", "Update did not complete", "successfully", "Payment done", "Sorry, failed"] {
        println!("{text:<26} accept={}", is_accept_keyword(text));
    }

    let page = [Leaf {
        locator: Locator::Body,
        text: "You sent $12,345.00 to account 7".into(),
    }];
    for v in ["12345", "12345.00", "7", "54321"] {
        let mode = MatchMode::for_value(v);
        match find_reflection(v, mode, &page) {
            Some(h) => println!("{v:<9} {mode:?}: {} occurrence(s)", h.occurrences),
            None => println!("{v:<9} {mode:?}: too short to count"),
        }
    }

    for (a, b) in [("1,234.50", "1234.5"), ("007", "7"), ("abc ", "abc"), ("1.5", "1.51")] {
        println!("{a:?} ~ {b:?}: {}", normalized_eq(a, b));
    }
}
