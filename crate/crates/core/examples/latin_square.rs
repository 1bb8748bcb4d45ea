//! Balanced Latin squares for counterbalancing condition order.

use jointaction::experiment::balanced_latin_square;
use jointaction::Condition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for row in balanced_latin_square(4)? {
        let names: Vec<&str> = row.iter().map(|&c| Condition::ALL[c].name()).collect();
        println!("{}", names.join(" -> "));
    }
    println!();
    // odd sizes need the mirrored rows as well
    for row in balanced_latin_square(5)? {
        println!("{row:?}");
    }
    Ok(())
}
