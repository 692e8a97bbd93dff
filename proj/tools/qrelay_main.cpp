#include "qrelay/cli.hpp"

int main(int argc, char** argv) {
    return qrelay::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
