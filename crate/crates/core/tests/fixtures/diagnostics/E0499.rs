fn main() {
    let mut data = vec![1, 2, 3];
    let first = &mut data;
    let second = &mut data;
    first.push(4);
    second.push(5);
}
