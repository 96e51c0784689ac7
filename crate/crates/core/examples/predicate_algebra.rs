//! Parse, print, combine and evaluate predicates.
//!
//! ```text
//! cargo run --example predicate_algebra
//! ```

use predex::{complement, disjoin, intersect, merge, read_csv, Clause, Interval, Predicate};

const CSV: &str = "\
region,units,shipped
west,12,2024-03-01
west,40,2024-03-02
east,7,2024-03-02
north,55,2024-03-05
east,31,2024-03-09
";

fn main() -> predex::Result<()> {
    let ds = read_csv(CSV.as_bytes(), None)?;

    let p = Predicate::parse("region in ['west', 'east'] & 10 <= units < 50")?;
    println!("{p}  selects {:?}", p.evaluate(&ds)?.to_vec());
    assert_eq!(Predicate::parse(&p.to_string())?, p);

    let not_p = complement(&p);
    println!("{not_p}  selects {:?}", not_p.evaluate(&ds)?.to_vec());

    let a = Clause::range("units", Interval::half_open(10.0, 20.0));
    let b = Clause::range("units", Interval::half_open(30.0, 45.0));
    println!("merge: {}", Predicate::clause(merge(&a, &b)?));

    let late = Predicate::parse("shipped >= '2024-03-02'")?;
    let west = Predicate::parse("region = 'west'")?;
    let both = intersect(&late.terms()[0], &west.terms()[0])?;
    println!("intersect: {}", Predicate::conjunction(both)?);
    println!("disjoin: {}", disjoin(&late, &west)?);

    match Predicate::parse("units >=") {
        Err(e) => println!("error: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
