// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(ro_ising_cli::run_cli(std::env::args_os()));
}
