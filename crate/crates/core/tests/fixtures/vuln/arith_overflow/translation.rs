use std::io::Read;
use std::process;

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let nums: Vec<i32> = input.split_whitespace().map(|t| t.parse().unwrap()).collect();
    match nums[0].checked_mul(nums[1]) {
        Some(area) => println!("{}", area),
        None => {
            eprintln!("error: area does not fit in 32 bits");
            process::exit(1);
        }
    }
}
