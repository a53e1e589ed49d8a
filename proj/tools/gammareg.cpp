#include "gammareg/cli.hpp"

int main(int argc, char** argv) { return gammareg::cli::run(argc, argv); }
