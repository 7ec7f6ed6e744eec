#include <string>
#include <vector>

#include "stm/cli.hpp"

int main(int argc, char** argv) {
    return stm::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
