fn main() {
    println!("dpm3d: command-line interface under construction");
}
