#include <string>
#include <vector>

#include "mraglab/cli.hpp"

int main(int argc, char** argv) {
    return mraglab::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
