#include "tmcount/cli.hpp"

int main(int argc, char** argv) { return tmcount::cli::run(argc, argv); }
