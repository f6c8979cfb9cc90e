use loo_gp::alloc_audit::CountingAllocator;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

fn main() {
    std::process::exit(loo_gp::cli::cli_main(std::env::args()));
}
