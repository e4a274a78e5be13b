#include "casa/cli.hpp"

int main(int argc, char** argv) {
    return casa::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
