#include <vector>

#include "eegkd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return eegkd::cli::dispatch(args);
}
