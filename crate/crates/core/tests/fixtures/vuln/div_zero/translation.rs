use std::io::Read;

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let nums: Vec<u32> = input.split_whitespace().map(|t| t.parse().unwrap()).collect();
    println!("{}", nums[0] / nums[1]);
}
