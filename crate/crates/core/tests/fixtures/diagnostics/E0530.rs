static LIMIT: i32 = 10;

fn main() {
    let n = 3;
    match n {
        LIMIT => println!("limit"),
        _ => println!("other"),
    }
}
