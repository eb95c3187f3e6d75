#include <csignal>
#include <cstdlib>
#include <iostream>

#include "cli.hpp"

namespace {

// Cache records are flushed as they are written, so nothing is pending here.
extern "C" void on_interrupt(int) {
    std::_Exit(130);
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    std::vector<std::string> args(argv + 1, argv + argc);
    return pmcts::cli::run(args, std::cout, std::cerr);
}
