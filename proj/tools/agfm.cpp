#include "agfm/cli.hpp"

int main(int argc, char** argv) { return agfm::cli::run(argc, argv); }
