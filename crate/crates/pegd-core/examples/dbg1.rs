use pegd_core::*;
fn main() {
    let mut s = Session::new(parse_grammar("S <- '' / 'a' 'b'").unwrap());
    let start = s.grammar().start();
    let input: Vec<char> = "ab".chars().collect();
    let oracle = reference_accepts_exact(&mut s, start, &input, DEFAULT_FUEL).unwrap();
    let exact = recognize(&mut s, start, &input, RecognizeMode::Exact).unwrap();
    println!("'' / 'a' 'b' on \"ab\": oracle={oracle} derivative={exact}");
}
