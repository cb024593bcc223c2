use std::io::Read;

fn main() {
    let scores = [90, 85, 70, 60, 75];
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let i: usize = input.trim().parse().unwrap();
    println!("{}", scores[i]);
}
