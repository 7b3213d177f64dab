#include "ecinn/cli.hpp"

int main(int argc, char** argv) {
    return ecinn::run_cli(argc, argv);
}
